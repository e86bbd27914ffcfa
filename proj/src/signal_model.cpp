#include "twrn/signal_model.hpp"

#include <cmath>

namespace twrn {

void SystemParams::validate() const {
  if (N < 2) throw DomainError("N must be at least 2");
  if (!(Ts > 0 && Ps > 0 && upsilon > 0 && NR0 > 0 && NS0 > 0 && Er > 0 && Pr > 0))
    throw DomainError("powers, variances, energies and Ts must be positive");
  if (L < 0 || L > N) throw DomainError("guard length must lie in [0, N]");
  if (M < 1) throw DomainError("M must be positive");
}

SystemParams with_snr_db(SystemParams p, double snr_db) {
  p.Ps = std::pow(10.0, snr_db / 10.0) * p.NR0 / p.Ts;
  p.Er = p.N * p.Ps * p.Ts;
  p.Pr = p.Ps;
  return p;
}

TimingOffset decompose_offset(double tau, const SystemParams& p) {
  if (!(tau >= 0.0) || tau > p.L * p.Ts) throw DomainError("offset outside [0, L*Ts]");
  TimingOffset off;
  off.tau = tau;
  off.n = static_cast<int>(std::floor(tau / p.Ts));
  off.lambda = tau - off.n * p.Ts;
  // Guard against rounding pushing lambda to Ts or below zero.
  if (off.lambda >= p.Ts) {
    off.n += 1;
    off.lambda = tau - off.n * p.Ts;
  }
  if (off.lambda < 0.0) off.lambda = 0.0;
  return off;
}

ChannelRealization draw_channel(RngStream& rng, const SystemParams& p) {
  ChannelRealization ch;
  ch.h1 = rng.cgauss(p.upsilon);
  ch.h2 = rng.cgauss(p.upsilon);
  return ch;
}

namespace {

// Layout of the sequence that arrives first: n clean samples, N-n
// duplicated symbols, then n+1 trailing zeros.
CVec leading_layout(const CVec& t, int n) {
  const int N = static_cast<int>(t.size());
  CVec r(2 * N + 1);
  for (int i = 0; i < n; ++i) r[i] = t[i];
  for (int i = 0; i < N - n; ++i) r[n + 2 * i] = r[n + 2 * i + 1] = t[n + i];
  return r;
}

// Layout of the late sequence: n+1 leading zeros, N-n duplicated symbols,
// then its last n symbols clean.
CVec trailing_layout(const CVec& t, int n) {
  const int N = static_cast<int>(t.size());
  CVec r(2 * N + 1);
  for (int i = 0; i < N - n; ++i) r[n + 1 + 2 * i] = r[n + 2 + 2 * i] = t[i];
  for (int i = 0; i < n; ++i) r[2 * N - n + 1 + i] = t[N - n + i];
  return r;
}

}  // namespace

std::pair<CVec, CVec> build_equivalent_sequences(const CVec& t1, const CVec& t2, const TimingOffset& off,
                                                  Sao order) {
  if (t1.size() != t2.size() || t1.empty()) throw ShapeError("training sequences must share a nonzero length");
  if (off.n < 0 || off.n > static_cast<int>(t1.size())) throw DomainError("offset exceeds sequence length");
  if (order == Sao::first) return {leading_layout(t1, off.n), trailing_layout(t2, off.n)};
  return {trailing_layout(t1, off.n), leading_layout(t2, off.n)};
}

Diagonals build_lambda_gamma(const TimingOffset& off, double gamma_I, double gamma_S, const SystemParams& p) {
  const int N = p.N, n = off.n;
  if (n > N) throw DomainError("offset exceeds sequence length");
  const double lp = off.lambda_sym(p.Ts);
  const double a = std::sqrt(lp), b = std::sqrt(1.0 - lp);
  Diagonals d;
  d.lambda.assign(2 * N + 1, 1.0);
  d.gamma.assign(2 * N + 1, gamma_S);
  for (int m = 0; m <= 2 * (N - n); ++m) d.lambda[n + m] = (m % 2 == 0) ? a : b;
  for (int i = 0; i < n; ++i) {
    d.gamma[i] = gamma_I;
    d.gamma[2 * N - i] = gamma_I;
  }
  // The two partial samples at the overlap edges fall inside the tail
  // intervals, so they carry the tail gain whenever they carry signal.
  if (lp > 0.0) {
    d.gamma[n] = gamma_I;
    d.gamma[2 * N - n] = gamma_I;
  }
  return d;
}

std::pair<CVec, CVec> pilot_columns(const std::pair<CVec, CVec>& r, const Diagonals& d) {
  const std::size_t L = d.lambda.size();
  if (r.first.size() != L || r.second.size() != L) throw ShapeError("pilot_columns: length mismatch");
  CVec a(L), b(L);
  for (std::size_t k = 0; k < L; ++k) {
    const double g = d.gamma[k] * d.lambda[k];
    a[k] = g * r.first[k];
    b[k] = g * r.second[k];
  }
  return {a, b};
}

ReceivedPilot rx_pilot_at_source(const ChannelRealization& ch, const CVec& t1, const CVec& t2,
                                 const TimingOffset& off, Sao order, double gamma_I, double gamma_S,
                                 RngStream& rng, const SystemParams& p, NoiseSwitch noise) {
  ReceivedPilot rx;
  rx.order = order;
  rx.diag = build_lambda_gamma(off, gamma_I, gamma_S, p);
  const auto cols = pilot_columns(build_equivalent_sequences(t1, t2, off, order), rx.diag);
  const std::size_t L = cols.first.size();
  const double vr = p.NR0 / (p.Ps * p.Ts), vs = p.NS0 / (p.Ps * p.Ts);
  const cplx ha = ch.ha(), hb = ch.hb();
  rx.samples.resize(L);
  for (std::size_t k = 0; k < L; ++k) {
    cplx x = cols.first[k] * ha + cols.second[k] * hb;
    if (noise.relay) x += ch.h1 * rx.diag.gamma[k] * rng.cgauss(vr);
    if (noise.source) x += rng.cgauss(vs);
    rx.samples[k] = x;
  }
  return rx;
}

ReceivedPilot rx_pilot_at_relay(const ChannelRealization& ch, const CVec& t1, const CVec& t2,
                                const TimingOffset& off, Sao order, RngStream& rng, const SystemParams& p,
                                bool noisy) {
  ReceivedPilot rx;
  rx.order = order;
  rx.diag = build_lambda_gamma(off, 1.0, 1.0, p);
  const auto r = build_equivalent_sequences(t1, t2, off, order);
  const std::size_t L = r.first.size();
  const double vr = p.NR0 / (p.Ps * p.Ts);
  rx.samples.resize(L);
  for (std::size_t k = 0; k < L; ++k) {
    cplx x = rx.diag.lambda[k] * (r.first[k] * ch.h1 + r.second[k] * ch.h2);
    if (noisy) x += rng.cgauss(vr);
    rx.samples[k] = x;
  }
  return rx;
}

double data_alpha(const SystemParams& p) {
  return std::sqrt(p.Pr / (2.0 * p.upsilon * p.Ps + p.NR0));
}

CVec rx_data_symbols(const ChannelRealization& ch, const std::vector<double>& s1, const std::vector<double>& s2,
                     double alpha, RngStream& rng, const SystemParams& p, bool noisy) {
  if (s1.size() != s2.size()) throw ShapeError("symbol streams differ in length");
  const double amp = alpha * std::sqrt(p.Ps);
  const cplx ha = ch.ha(), hb = ch.hb();
  CVec y(s1.size());
  for (std::size_t m = 0; m < s1.size(); ++m) {
    cplx v = amp * (ha * s1[m] + hb * s2[m]);
    if (noisy) {
      v += alpha * ch.h1 * rng.cgauss(p.NR0 / p.Ts);
      v += rng.cgauss(p.NS0 / p.Ts);
    }
    y[m] = v;
  }
  return y;
}

}  // namespace twrn
