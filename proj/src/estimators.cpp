#include "twrn/estimators.hpp"

#include <array>
#include <cmath>

namespace twrn {

Moments composite_moments(double upsilon) {
  Moments m;
  m.va = 2.0 * upsilon * upsilon;
  m.vb = upsilon * upsilon;
  m.vs = m.va + m.vb;
  m.vp = m.va * m.vb;
  return m;
}

const char* to_string(Method m) {
  switch (m) {
    case Method::lmmse: return "lmmse";
    case Method::lmep: return "lmep";
    case Method::slmep: return "slmep";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "lmmse") return Method::lmmse;
  if (s == "lmep") return Method::lmep;
  if (s == "slmep") return Method::slmep;
  throw DomainError("unknown estimator: " + s);
}

PilotModel make_pilot_model(const TrainingPair& pair, const TimingOffset& off, const RelayScaling& s,
                            const SystemParams& p, Sao order) {
  const auto d = build_lambda_gamma(off, s.gamma_I(), s.gamma_S(), p);
  auto cols = pilot_columns(build_equivalent_sequences(pair.t1, pair.t2, off, order), d);
  PilotModel m;
  m.sa = std::move(cols.first);
  m.sb = std::move(cols.second);
  m.gamma = d.gamma;
  m.order = order;
  return m;
}

namespace {

// Diagonal pilot noise seen at the source when |h1|^2 is replaced by g.
std::vector<double> pilot_noise(const PilotModel& m, const SystemParams& p, double g) {
  const double vr = p.NR0 / (p.Ps * p.Ts), vs = p.NS0 / (p.Ps * p.Ts);
  std::vector<double> c(m.dim());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = g * m.gamma[k] * m.gamma[k] * vr + vs;
  return c;
}

// diag(c) + sum_i w_i s_i s_i^H
CMat rank_update(const std::vector<double>& c, const std::vector<std::pair<double, const CVec*>>& terms) {
  const std::size_t n = c.size();
  CMat r(n, n);
  for (std::size_t i = 0; i < n; ++i) r(i, i) = c[i];
  for (const auto& [w, s] : terms)
    for (std::size_t i = 0; i < n; ++i) {
      const cplx si = w * (*s)[i];
      for (std::size_t j = 0; j < n; ++j) r(i, j) += si * std::conj((*s)[j]);
    }
  return r;
}

double tail_noise(double h1sq, const SystemParams& p) {
  const double a = data_alpha(p);
  return h1sq * p.NR0 / (p.Ps * p.Ts) + p.NS0 / (a * a * p.Ps * p.Ts);
}

// Quadratic form u^H (v v^H + diag(c)) u.
double quad(const CVec& u, const CVec& v, const std::vector<double>& c) {
  double q = std::norm(dotc(u, v));
  for (std::size_t k = 0; k < u.size(); ++k) q += std::norm(u[k]) * c[k];
  return q;
}

}  // namespace

ChannelEstimate lmmse_estimate(const CVec& x, const PilotModel& m, const SystemParams& p) {
  if (x.size() != m.dim()) throw ShapeError("lmmse: sample count differs from model");
  const Moments mo = composite_moments(p.upsilon);
  const CMat R = rank_update(pilot_noise(m, p, p.upsilon), {{mo.va, &m.sa}, {mo.vb, &m.sb}});
  const Cholesky ch(R);
  ChannelEstimate e;
  e.u.ua = scaled(ch.solve(m.sa), mo.va);
  e.u.ub = scaled(ch.solve(m.sb), mo.vb);
  e.ha = dotc(e.u.ua, x);
  e.hb = dotc(e.u.ub, x);
  e.method = Method::lmmse;
  e.hypothesis = m.order;
  return e;
}

CombinerPair lmep_combiners(cplx ha0, cplx hb0, const PilotModel& m, const SystemParams& p) {
  CVec v = axpy(hb0, m.sb, scaled(m.sa, ha0));
  const CVec rE = scaled(v, std::conj(hb0));
  if (norm2(rE) <= 0.0) throw DegenerateError("lmep: matched vector is zero");
  const double g = std::abs(ha0);
  const CMat R = rank_update(pilot_noise(m, p, g), {{1.0, &v}});
  const Cholesky ch(R);
  CombinerPair u;
  const CVec pa = scaled(v, std::conj(ha0));
  u.ua = ch.solve(pa);
  const double eps_a = std::norm(ha0) - dotc(pa, u.ua).real();
  const double A = eps_a + std::norm(hb0) + tail_noise(g, p);
  const CVec w = ch.solve(rE);
  const double q = dotc(rE, w).real();
  if (!(q > 0.0)) throw DegenerateError("lmep: degenerate weighting");
  u.ub = scaled(w, A / q);
  return u;
}

ChannelEstimate lmep_from(const CVec& x, cplx ha0, cplx hb0, const PilotModel& m, const SystemParams& p) {
  ChannelEstimate e;
  e.u = lmep_combiners(ha0, hb0, m, p);
  e.ha = dotc(e.u.ua, x);
  e.hb = dotc(e.u.ub, x);
  e.method = Method::lmep;
  e.hypothesis = m.order;
  e.effective_snr = effective_snr(e.u, estimate_context(m, ha0, hb0, p));
  return e;
}

ChannelEstimate lmep_estimate(const CVec& x, const PilotModel& m, const SystemParams& p) {
  const ChannelEstimate init = lmmse_estimate(x, m, p);
  try {
    return lmep_from(x, init.ha, init.hb, m, p);
  } catch (const DegenerateError&) {
    ChannelEstimate e = init;
    e.fallback = true;
    return e;
  }
}

SnrContext truth_context(const PilotModel& m, const ChannelRealization& ch, const SystemParams& p) {
  SnrContext c;
  c.ha = ch.ha();
  c.hb = ch.hb();
  c.h1sq = std::norm(ch.h1);
  c.v = axpy(c.hb, m.sb, scaled(m.sa, c.ha));
  c.noise = pilot_noise(m, p, c.h1sq);
  c.tail = tail_noise(c.h1sq, p);
  return c;
}

SnrContext estimate_context(const PilotModel& m, cplx ha, cplx hb, const SystemParams& p) {
  SnrContext c;
  c.ha = ha;
  c.hb = hb;
  c.h1sq = std::abs(ha);
  c.v = axpy(hb, m.sb, scaled(m.sa, ha));
  c.noise = pilot_noise(m, p, c.h1sq);
  c.tail = tail_noise(c.h1sq, p);
  return c;
}

SnrParts effective_snr_parts(const CombinerPair& u, const SnrContext& c, SnrMode mode) {
  if (u.ua.size() != c.v.size() || u.ub.size() != c.v.size()) throw ShapeError("effective_snr: length mismatch");
  const cplx va = dotc(u.ua, c.v), vb = dotc(u.ub, c.v);
  const double qa = quad(u.ua, c.v, c.noise);
  const double qb = quad(u.ub, c.v, c.noise);
  // u^H p with p = v conj(h)
  const double cross_a = (va * std::conj(c.ha)).real();
  const double cross_b = (vb * std::conj(c.hb)).real();
  SnrParts s;
  s.num = qb;
  const double ea = (mode == SnrMode::correct) ? qa - 2.0 * cross_a + std::norm(c.ha) : qa + std::norm(c.ha);
  const double eb = qb - 2.0 * cross_b + std::norm(c.hb);
  s.den = ea + eb + c.tail;
  return s;
}

double effective_snr(const CombinerPair& u, const SnrContext& c, SnrMode mode) {
  const SnrParts s = effective_snr_parts(u, c, mode);
  if (!(s.den > 0.0) || !std::isfinite(s.den)) throw DomainError("effective_snr: nonpositive denominator");
  return s.num / s.den;
}

double lmmse_mse_exact(const PilotModel& m, const SystemParams& p) {
  const Moments mo = composite_moments(p.upsilon);
  const CMat R = rank_update(pilot_noise(m, p, p.upsilon), {{mo.va, &m.sa}, {mo.vb, &m.sb}});
  const Cholesky ch(R);
  const double qa = dotc(m.sa, ch.solve(m.sa)).real();
  const double qb = dotc(m.sb, ch.solve(m.sb)).real();
  return mo.va + mo.vb - mo.va * mo.va * qa - mo.vb * mo.vb * qb;
}

double mse_from_b(double B1, double B2, const Moments& mo) {
  return (mo.vs + 2.0 * mo.vp * B1) / (1.0 + mo.vs * B1 + mo.vp * B1 * B1 - mo.vp * B2 * B2);
}

double analytic_mse(const SystemParams& p, const TimingOffset& off, const RelayScaling& s, const TrainingPair& pair) {
  const B12 b = b1_b2(p, off, s, pair);
  return mse_from_b(b.B1, b.B2, composite_moments(p.upsilon));
}

namespace {

using M2 = std::array<std::array<cplx, 2>, 2>;

M2 mul(const M2& a, const M2& b) {
  M2 c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return c;
}

M2 inv(const M2& a) {
  const cplx det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
  return {{{a[1][1] / det, -a[0][1] / det}, {-a[1][0] / det, a[0][0] / det}}};
}

// <x, y> in the metric diag(1/c)
cplx wdot(const CVec& x, const CVec& y, const std::vector<double>& c) {
  cplx s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) s += std::conj(x[k]) * y[k] / c[k];
  return s;
}

}  // namespace

double lmmse_mse_mismatch(const PilotModel& assumed, const PilotModel& actual, const SystemParams& p) {
  // With K = (P^-1 + A^H C^-1 A)^-1 the estimator is K A^H C^-1, so the
  // error is (K L - I) theta + noise with L = A^H C^-1 T.
  const Moments mo = composite_moments(p.upsilon);
  const auto c = pilot_noise(assumed, p, p.upsilon);
  const CVec* A[2] = {&assumed.sa, &assumed.sb};
  const CVec* T[2] = {&actual.sa, &actual.sb};
  M2 B{}, L{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      B[i][j] = wdot(*A[i], *A[j], c);
      L[i][j] = wdot(*A[i], *T[j], c);
    }
  M2 Kinv = B;
  Kinv[0][0] += 1.0 / mo.va;
  Kinv[1][1] += 1.0 / mo.vb;
  const M2 K = inv(Kinv);
  M2 E = mul(K, L);
  E[0][0] -= 1.0;
  E[1][1] -= 1.0;
  const double pv[2] = {mo.va, mo.vb};
  double mse = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) mse += std::norm(E[i][j]) * pv[j];
  const M2 KB = mul(K, B);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) mse += (KB[i][j] * std::conj(K[i][j])).real();
  return mse;
}

double analytic_mse_err(const SystemParams& p, const TimingOffset& off, const RelayScaling& s,
                        const TrainingPair& pair) {
  const PilotModel truth = make_pilot_model(pair, off, s, p, Sao::first);
  const PilotModel wrong = make_pilot_model(pair, off, s, p, Sao::second);
  return lmmse_mse_mismatch(wrong, truth, p);
}

double correlated_floor(const Moments& mo) { return 2.0 * mo.vp / mo.vs; }

double slmep_target_gap(double p_theta) {
  if (!(p_theta > 0.0) || p_theta > 0.5) throw DomainError("p_theta must lie in (0, 1/2]");
  return 2.0 * std::log((1.0 - p_theta) / p_theta);
}

}  // namespace twrn
