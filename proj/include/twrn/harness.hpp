#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "twrn/estimators.hpp"
#include "twrn/relay_power.hpp"
#include "twrn/signal_model.hpp"

namespace twrn {

enum class Scenario { mse_vs_snr, mse_vs_tau, mse_vs_n, ber_vs_snr, ptheta_vs_tau, ber_vs_ptheta };
enum class SaoMode { genie, glrt_relay, glrt_source, forced_error };
enum class LmepInit { lmmse, random };
enum class BerMetric { bep, symbol };

const char* to_string(Scenario s);
const char* to_string(SaoMode s);

struct ExperimentSpec {
  Scenario scenario = Scenario::mse_vs_snr;
  SystemParams params;           // Ps follows snr_db unless the sweep is over SNR
  double snr_db = 10.0;
  std::optional<double> Er;      // default N*Ps*Ts at each point
  std::optional<double> Pr;      // default Ps
  std::optional<int> L;          // default N
  std::vector<double> sweep;
  int trials = 0;
  std::uint64_t seed = 0;
  Method estimator = Method::lmmse;
  LmepInit lmep_init = LmepInit::lmmse;
  PowerScheme power = PowerScheme::ea;
  std::string training = "optimal";
  SaoMode sao_mode = SaoMode::genie;
  double forced_p_theta = 0.0;
  std::optional<double> tau;     // fixed offset in seconds; empty means uniform on [0, N*Ts]
  BerMetric ber_metric = BerMetric::bep;
  std::string tag;               // appended to the output file name

  // Parameters for one sweep point.
  SystemParams point_params(double x) const;
};

ExperimentSpec parse_config(const std::string& text);
ExperimentSpec load_config(const std::string& path);
// Normalized key=value text; parse_config(to_text(s)) reproduces s.
std::string to_text(const ExperimentSpec& s);
std::string output_name(const ExperimentSpec& s);

struct MetricRow {
  double x = 0.0;
  double metric = 0.0;
  double ci_halfwidth = 0.0;
  long n_trials = 0;
  std::optional<double> analytic;
  long degenerate = 0;  // trials dropped after a DegenerateError
  long fallbacks = 0;   // trials whose estimator fell back
  double max_residual = 0.0;  // SLMEP constraint residual over feasible trials
};

struct RunOptions {
  int threads = 1;
};

// Thread count from TWRN_THREADS when set, otherwise the given value.
int resolve_threads(int requested);

std::vector<MetricRow> run_experiment(const ExperimentSpec& spec, const RunOptions& opt = {});

void emit_csv(const std::vector<MetricRow>& rows, const std::string& path);
std::string format_csv(const std::vector<MetricRow>& rows);

// Mean of the analytic MSE over tau uniform on [0, N*Ts].
double analytic_mse_tau_avg(const SystemParams& p, PowerScheme scheme, const TrainingPair& pair, int points = 2000);

struct FigurePreset {
  std::string name;
  std::vector<ExperimentSpec> curves;
  std::string gnuplot;  // script text, refers to the CSV names
};

FigurePreset figure_preset(const std::string& name);
// Runs a preset and writes CSVs plus a gnuplot script into dir; returns
// the written paths.
std::vector<std::string> write_figure(const FigurePreset& f, const std::string& dir, const RunOptions& opt);

struct SelftestCase {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<SelftestCase> selftest(const RunOptions& opt);

}  // namespace twrn
