#pragma once

#include <string>

#include "twrn/relay_power.hpp"
#include "twrn/signal_model.hpp"
#include "twrn/training.hpp"

namespace twrn {

struct Moments {
  double va = 0, vb = 0, vs = 0, vp = 0;
};

// Second moments of h_a = h1^2 and h_b = h1*h2 for CN(0, v) links.
Moments composite_moments(double upsilon);

enum class Method { lmmse, lmep, slmep };
const char* to_string(Method m);
Method parse_method(const std::string& s);

// Everything the source needs to process one pilot block under one
// hypothesis: the two signal columns Gamma*Lambda*r and the relay gains.
struct PilotModel {
  CVec sa, sb;
  std::vector<double> gamma;
  Sao order = Sao::first;

  std::size_t dim() const { return sa.size(); }
};

PilotModel make_pilot_model(const TrainingPair& pair, const TimingOffset& off, const RelayScaling& s,
                            const SystemParams& p, Sao order);

struct CombinerPair {
  CVec ua, ub;
};

struct ChannelEstimate {
  cplx ha = 0.0, hb = 0.0;
  Method method = Method::lmmse;
  Sao hypothesis = Sao::first;
  double effective_snr = 0.0;  // design-time value from the estimates
  bool fallback = false;       // degenerate LMEP or infeasible SLMEP
  CombinerPair u;
};

ChannelEstimate lmmse_estimate(const CVec& x, const PilotModel& m, const SystemParams& p);

// LMEP combiners built from initial estimates (ha0, hb0); |ha0| stands in
// for |h1|^2. Throws DegenerateError when the matched vector vanishes.
CombinerPair lmep_combiners(cplx ha0, cplx hb0, const PilotModel& m, const SystemParams& p);

ChannelEstimate lmep_estimate(const CVec& x, const PilotModel& m, const SystemParams& p);
// LMEP refinement from an arbitrary starting point.
ChannelEstimate lmep_from(const CVec& x, cplx ha0, cplx hb0, const PilotModel& m, const SystemParams& p);

// Second-order description of the pilot block used to score combiners:
// R = v v^H + diag(noise), v = sa*ha + sb*hb.
struct SnrContext {
  CVec v;
  std::vector<double> noise;
  cplx ha = 0.0, hb = 0.0;
  double h1sq = 0.0;
  double tail = 0.0;  // h1sq*NR0/(Ps Ts) + NS0/(alpha^2 Ps Ts)
};

SnrContext truth_context(const PilotModel& m, const ChannelRealization& ch, const SystemParams& p);
// Same, with estimates in place of the channels and |ha| for |h1|^2.
SnrContext estimate_context(const PilotModel& m, cplx ha, cplx hb, const SystemParams& p);

enum class SnrMode { correct, erroneous };

struct SnrParts {
  double num = 0.0, den = 0.0;
  double value() const { return num / den; }
};

SnrParts effective_snr_parts(const CombinerPair& u, const SnrContext& c, SnrMode mode);
double effective_snr(const CombinerPair& u, const SnrContext& c, SnrMode mode = SnrMode::correct);

// Trace form of the LMMSE error for a given model, averaged over channels.
double lmmse_mse_exact(const PilotModel& m, const SystemParams& p);

double mse_from_b(double B1, double B2, const Moments& mo);
double analytic_mse(const SystemParams& p, const TimingOffset& off, const RelayScaling& s, const TrainingPair& pair);

// MSE of the LMMSE estimator built for the wrong arrival order.
double analytic_mse_err(const SystemParams& p, const TimingOffset& off, const RelayScaling& s,
                        const TrainingPair& pair);
// Exact second-order evaluation of the same quantity.
double lmmse_mse_mismatch(const PilotModel& assumed, const PilotModel& actual, const SystemParams& p);

// High-SNR floor for fully correlated pilots at zero offset: 2 vp / vs.
double correlated_floor(const Moments& mo);

struct SlmepOptions {
  double tol = 1e-6;
  int max_iter = 200;
};

struct SlmepResult {
  ChannelEstimate est;
  bool feasible = false;
  double residual = 0.0;  // |Y - Yerr - target| at the returned combiners
  double snr = 0.0, snr_err = 0.0;
  int iterations = 0;
};

double slmep_target_gap(double p_theta);

// Builds LMMSE estimates under both orders, then trades the design SNR of
// the detected order against that of the other one.
SlmepResult slmep_estimate(const CVec& x, const PilotModel& detected, const PilotModel& other,
                           const SystemParams& p, double p_theta, const SlmepOptions& opt = {});

}  // namespace twrn
