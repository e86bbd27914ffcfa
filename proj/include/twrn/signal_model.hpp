#pragma once

#include <utility>
#include <vector>

#include "twrn/numerics.hpp"

namespace twrn {

struct SystemParams {
  int N = 8;             // pilot length
  double Ts = 1.0;       // symbol period
  double Ps = 1.0;       // source power, both sources
  double upsilon = 1.0;  // channel variance, both links
  double NR0 = 1.0;      // relay noise density
  double NS0 = 1.0;      // source noise density
  double Er = 8.0;       // relay pilot energy per block
  double Pr = 1.0;       // relay data power
  int L = 8;             // guard length in symbols
  int M = 100;           // data symbols per block

  void validate() const;
  // Average SNR in linear units, Ps*Ts/N0 with N0 = NR0.
  double snr() const { return Ps * Ts / NR0; }
};

// Sets Ps from an SNR in dB and rescales the quantities tied to it by the
// default convention (Er = N*Ps*Ts, Pr = Ps).
SystemParams with_snr_db(SystemParams p, double snr_db);

struct TimingOffset {
  double tau = 0.0;
  int n = 0;            // whole symbols
  double lambda = 0.0;  // fractional remainder, seconds

  double tau_sym(double Ts) const { return tau / Ts; }
  double lambda_sym(double Ts) const { return lambda / Ts; }
};

TimingOffset decompose_offset(double tau, const SystemParams& p);

// Arrival order: 0 when source 1 leads, 1 when source 2 leads.
enum class Sao { first = 0, second = 1 };
inline Sao flip(Sao s) { return s == Sao::first ? Sao::second : Sao::first; }

struct ChannelRealization {
  cplx h1, h2;
  cplx ha() const { return h1 * h1; }
  cplx hb() const { return h1 * h2; }
};

ChannelRealization draw_channel(RngStream& rng, const SystemParams& p);

// Stretched sequences, each of length 2N+1. The first column always carries
// t1 and the second t2; the order only changes where each one sits.
std::pair<CVec, CVec> build_equivalent_sequences(const CVec& t1, const CVec& t2, const TimingOffset& off,
                                                  Sao order);

struct Diagonals {
  std::vector<double> lambda;  // sqrt of the per-sample overlap fraction
  std::vector<double> gamma;   // relay gain per sample
};

Diagonals build_lambda_gamma(const TimingOffset& off, double gamma_I, double gamma_S, const SystemParams& p);

struct ReceivedPilot {
  CVec samples;
  Diagonals diag;
  Sao order = Sao::first;
};

// Per-column signal vectors Gamma*Lambda*r_a and Gamma*Lambda*r_b.
std::pair<CVec, CVec> pilot_columns(const std::pair<CVec, CVec>& r, const Diagonals& d);

struct NoiseSwitch {
  bool relay = true;
  bool source = true;
};

ReceivedPilot rx_pilot_at_source(const ChannelRealization& ch, const CVec& t1, const CVec& t2,
                                 const TimingOffset& off, Sao order, double gamma_I, double gamma_S,
                                 RngStream& rng, const SystemParams& p, NoiseSwitch noise = {});

ReceivedPilot rx_pilot_at_relay(const ChannelRealization& ch, const CVec& t1, const CVec& t2,
                                const TimingOffset& off, Sao order, RngStream& rng, const SystemParams& p,
                                bool noisy = true);

double data_alpha(const SystemParams& p);

CVec rx_data_symbols(const ChannelRealization& ch, const std::vector<double>& s1, const std::vector<double>& s2,
                     double alpha, RngStream& rng, const SystemParams& p, bool noisy = true);

}  // namespace twrn
