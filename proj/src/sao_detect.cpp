#include "twrn/sao_detect.hpp"

#include <cmath>

namespace twrn {

Hypothesis make_hypothesis(CVec c0, CVec c1, double N) {
  Hypothesis h;
  h.c0 = std::move(c0);
  h.c1 = std::move(c1);
  const double a = norm2(h.c0), d = norm2(h.c1);
  const cplx b = dotc(h.c0, h.c1);
  h.gram = {{{a, b}, {std::conj(b), d}}};
  const double mid = 0.5 * (a + d), rad = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(b));
  const double lmax = mid + rad, lmin = mid - rad;
  if (lmin >= 1e-10 * N) {
    const double det = a * d - std::norm(b);
    h.gram_pinv = {{{d / det, -b / det}, {-std::conj(b) / det, a / det}}};
    return h;
  }
  h.rank_deficient = true;
  if (!(lmax > 0.0)) return h;  // both columns vanish
  // Unit eigenvector of the dominant eigenvalue.
  cplx v0, v1;
  if (a >= d) {
    v0 = lmax - d;
    v1 = std::conj(b);
  } else {
    v0 = b;
    v1 = lmax - a;
  }
  const double nv = std::sqrt(std::norm(v0) + std::norm(v1));
  v0 /= nv;
  v1 /= nv;
  h.gram_pinv = {{{std::norm(v0) / lmax, v0 * std::conj(v1) / lmax}, {v1 * std::conj(v0) / lmax, std::norm(v1) / lmax}}};
  return h;
}

std::array<cplx, 2> Hypothesis::least_squares(const CVec& x) const {
  const cplx y0 = dotc(c0, x), y1 = dotc(c1, x);
  return {gram_pinv[0][0] * y0 + gram_pinv[0][1] * y1, gram_pinv[1][0] * y0 + gram_pinv[1][1] * y1};
}

double Hypothesis::projected_energy(const CVec& x) const {
  // x^H T G^+ T^H x
  const cplx y0 = dotc(c0, x), y1 = dotc(c1, x);
  const auto b = least_squares(x);
  return (std::conj(y0) * b[0] + std::conj(y1) * b[1]).real();
}

CVec Hypothesis::apply(cplx a, cplx b) const { return axpy(b, c1, scaled(c0, a)); }

CMat Hypothesis::matrix() const { return CMat::from_columns({c0, c1}); }

CMat Hypothesis::projector() const {
  const CMat T = matrix();
  CMat G(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) G(i, j) = gram_pinv[i][j];
  return matmul(matmul(T, G), adjoint(T));
}

HypothesisModel build_hypotheses(const TrainingPair& pair, const TimingOffset& off, const SystemParams& p) {
  const auto d = build_lambda_gamma(off, 1.0, 1.0, p);
  HypothesisModel m;
  for (Sao s : {Sao::first, Sao::second}) {
    const auto cols = pilot_columns(build_equivalent_sequences(pair.t1, pair.t2, off, s), d);
    m.h[static_cast<int>(s)] = make_hypothesis(cols.first, cols.second, p.N);
  }
  m.identical = !(off.tau > 0.0);
  return m;
}

SourceDetector build_source_detector(const PilotModel& m0, const PilotModel& m1, const SystemParams& p) {
  const double vr = p.NR0 / (p.Ps * p.Ts), vs = p.NS0 / (p.Ps * p.Ts);
  SourceDetector d;
  d.inv_sd.resize(m0.dim());
  for (std::size_t k = 0; k < d.inv_sd.size(); ++k)
    d.inv_sd[k] = 1.0 / std::sqrt(p.upsilon * m0.gamma[k] * m0.gamma[k] * vr + vs);
  auto white = [&](const CVec& v) {
    CVec w(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) w[k] = v[k] * d.inv_sd[k];
    return w;
  };
  d.model.h[0] = make_hypothesis(white(m0.sa), white(m0.sb), p.N);
  d.model.h[1] = make_hypothesis(white(m1.sa), white(m1.sb), p.N);
  d.model.identical = norm2(axpy(-1.0, m0.sa, m1.sa)) + norm2(axpy(-1.0, m0.sb, m1.sb)) == 0.0;
  return d;
}

SaoDecision glrt_detect(const CVec& x, const HypothesisModel& m) {
  SaoDecision d;
  const double e0 = m.h[0].projected_energy(x);
  const double e1 = m.h[1].projected_energy(x);
  d.delta = e0 - e1;
  d.ls[0] = m.h[0].least_squares(x);
  d.ls[1] = m.h[1].least_squares(x);
  d.undetermined = m.identical;
  d.theta_hat = (d.undetermined || d.delta >= 0.0) ? Sao::first : Sao::second;
  return d;
}

SaoDecision glrt_detect_source(const CVec& x, const SourceDetector& d) {
  CVec w(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) w[k] = x[k] * d.inv_sd[k];
  return glrt_detect(w, d.model);
}

double eed(const HypothesisModel& m, const ChannelRealization& ch, Sao truth) {
  if (std::norm(ch.h1) + std::norm(ch.h2) == 0.0) throw DomainError("eed: zero channel");
  const Hypothesis& own = m[truth];
  const Hypothesis& other = m[flip(truth)];
  const CVec s = own.apply(ch.h1, ch.h2);
  return own.projected_energy(s) - other.projected_energy(s);
}

double eed_lower_bound(const SystemParams& p, const TimingOffset& off, double h_norm_sq) {
  const double N = p.N, tp = off.tau_sym(p.Ts), lp = off.lambda_sym(p.Ts);
  return h_norm_sq * N * (1.0 - (N - tp) * (N - tp) / (N * N - lp * lp));
}

double chi(const SystemParams& p, const TimingOffset& off) {
  const double N = p.N, tp = off.tau_sym(p.Ts), lp = off.lambda_sym(p.Ts);
  const double den = N * N - lp * lp;
  return N * N * N * tp * (2.0 * N - tp) / (den * den);
}

double p_theta_bound(const SystemParams& p, const TimingOffset& off, double h_norm_sq) {
  if (p.N < 8) throw DomainError("p_theta_bound needs N >= 8");
  if (!(off.tau > 0.0)) return 0.5;
  return qfunc(std::sqrt(h_norm_sq * chi(p, off) * p.Ps * p.Ts / p.NR0));
}

double p_theta_bound_avg(const SystemParams& p, const TimingOffset& off) {
  if (p.N < 8) throw DomainError("p_theta_bound needs N >= 8");
  if (!(off.tau > 0.0)) return 0.5;
  // ||h||^2 is a sum of two exponentials with mean v; Q(sqrt(a X)) averages
  // to the two-branch diversity form with per-branch SNR a v / 2.
  const double g = 0.5 * chi(p, off) * p.Ps * p.Ts / p.NR0 * p.upsilon;
  const double mu = std::sqrt(g / (1.0 + g));
  const double q = 0.5 * (1.0 - mu);
  return q * q * (2.0 + mu);
}

double eed_noise_variance_bound(const SystemParams& p, const TimingOffset& off, double h_norm_sq) {
  const double tp = off.tau_sym(p.Ts);
  return 2.0 * (2.0 - off.tau / (p.N * p.Ts)) * tp * h_norm_sq * p.NR0 / (p.Ps * p.Ts);
}

}  // namespace twrn
