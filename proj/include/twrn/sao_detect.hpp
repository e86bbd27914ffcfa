#pragma once

#include <array>

#include "twrn/estimators.hpp"
#include "twrn/signal_model.hpp"
#include "twrn/training.hpp"

namespace twrn {

// Two-column regression model for one arrival order, with the Gram matrix
// and its (pseudo-)inverse cached.
struct Hypothesis {
  CVec c0, c1;
  std::array<std::array<cplx, 2>, 2> gram{};
  std::array<std::array<cplx, 2>, 2> gram_pinv{};
  bool rank_deficient = false;

  // ||Z x||^2 for the orthogonal projector Z onto span{c0, c1}.
  double projected_energy(const CVec& x) const;
  // Least-squares coefficients (T^H T)^+ T^H x.
  std::array<cplx, 2> least_squares(const CVec& x) const;
  CVec apply(cplx a, cplx b) const;
  CMat projector() const;
  CMat matrix() const;
};

Hypothesis make_hypothesis(CVec c0, CVec c1, double N);

struct HypothesisModel {
  Hypothesis h[2];
  bool identical = false;  // zero offset

  const Hypothesis& operator[](Sao s) const { return h[static_cast<int>(s)]; }
};

// Relay-side model: columns Lambda*r for each order.
HypothesisModel build_hypotheses(const TrainingPair& pair, const TimingOffset& off, const SystemParams& p);

// Source-side model: columns Gamma*Lambda*r, whitened by the average pilot
// noise, so the test can run on x_S1 after the same whitening.
struct SourceDetector {
  HypothesisModel model;
  std::vector<double> inv_sd;
};
SourceDetector build_source_detector(const PilotModel& m0, const PilotModel& m1, const SystemParams& p);

struct SaoDecision {
  Sao theta_hat = Sao::first;
  double delta = 0.0;  // ||Z0 x||^2 - ||Z1 x||^2
  std::array<cplx, 2> ls[2]{};
  bool undetermined = false;
};

SaoDecision glrt_detect(const CVec& x, const HypothesisModel& m);
SaoDecision glrt_detect_source(const CVec& x, const SourceDetector& d);

// Equivalent Euclidean distance between the true-order signal and its
// projection onto the other order's span.
double eed(const HypothesisModel& m, const ChannelRealization& ch, Sao truth);

double eed_lower_bound(const SystemParams& p, const TimingOffset& off, double h_norm_sq);
double chi(const SystemParams& p, const TimingOffset& off);
double p_theta_bound(const SystemParams& p, const TimingOffset& off, double h_norm_sq);
// Bound averaged over Rayleigh links, E[Q(sqrt(a ||h||^2))] in closed form.
double p_theta_bound_avg(const SystemParams& p, const TimingOffset& off);
double eed_noise_variance_bound(const SystemParams& p, const TimingOffset& off, double h_norm_sq);

}  // namespace twrn
