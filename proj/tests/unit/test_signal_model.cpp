#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "twrn/signal_model.hpp"
#include "twrn/training.hpp"

using namespace twrn;

namespace {

SystemParams params(int N) {
  SystemParams p;
  p.N = N;
  p.L = N;
  p.Er = N;
  return p;
}

// Interval-by-interval construction from the two transmit timelines. Each
// boundary of either source starts a new sample; the sample value of a
// source is the symbol it is sending in that interval, and the squared
// Lambda entry is the interval length. Valid for a nonzero fractional part.
struct Expanded {
  CVec ra, rb;
  std::vector<double> len;
  std::vector<int> active;  // number of sources on air
};

Expanded brute_force(const CVec& t1, const CVec& t2, double tau, Sao order) {
  const int N = static_cast<int>(t1.size());
  const double start1 = (order == Sao::first) ? 0.0 : tau;
  const double start2 = (order == Sao::first) ? tau : 0.0;
  std::vector<double> b;
  for (int k = 0; k <= N; ++k) {
    b.push_back(start1 + k);
    b.push_back(start2 + k);
  }
  std::sort(b.begin(), b.end());
  Expanded e;
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    const double lo = b[i], hi = b[i + 1], mid = 0.5 * (lo + hi);
    auto symbol = [&](const CVec& t, double s) -> cplx {
      const double u = mid - s;
      if (u < 0.0 || u >= N) return 0.0;
      return t[static_cast<int>(std::floor(u))];
    };
    const cplx a = symbol(t1, start1), c = symbol(t2, start2);
    e.ra.push_back(a);
    e.rb.push_back(c);
    e.len.push_back(hi - lo);
    e.active.push_back((a != 0.0) + (c != 0.0));
  }
  return e;
}

}  // namespace

TEST_CASE("offset decomposition") {
  const auto p = params(8);
  auto o = decompose_offset(2.5, p);
  CHECK(o.n == 2);
  CHECK(o.lambda == doctest::Approx(0.5));
  o = decompose_offset(0.0, p);
  CHECK(o.n == 0);
  CHECK(o.lambda == 0.0);
  const double eps = 1e-9;
  o = decompose_offset(3.0 - eps, p);
  CHECK(o.n == 2);
  CHECK(o.lambda == doctest::Approx(1.0 - eps).epsilon(1e-12));
  CHECK(o.n * p.Ts + o.lambda == 3.0 - eps);
  CHECK_THROWS_AS(decompose_offset(-0.1, p), DomainError);
  CHECK_THROWS_AS(decompose_offset(8.5, p), DomainError);
}

TEST_CASE("equivalent sequences for a four-symbol example") {
  const cplx a = 1.0, b = cplx(0, 1), c = -1.0, d = cplx(0, -1);
  const CVec t1{a, b, c, d};
  const cplx pp = 2.0, q = 3.0, r = 4.0, s = 5.0;
  const CVec t2{pp, q, r, s};
  const auto p = params(4);
  const auto off = decompose_offset(1.25, p);
  const auto seq = build_equivalent_sequences(t1, t2, off, Sao::first);
  const CVec e1{a, b, b, c, c, d, d, 0.0, 0.0};
  const CVec e2{0.0, 0.0, pp, pp, q, q, r, r, s};
  REQUIRE(seq.first.size() == 9);
  for (int i = 0; i < 9; ++i) {
    CHECK(seq.first[i] == e1[i]);
    CHECK(seq.second[i] == e2[i]);
  }
  const auto z = build_equivalent_sequences(t1, t2, decompose_offset(0.0, p), Sao::first);
  const CVec z1{a, a, b, b, c, c, d, d, 0.0};
  for (int i = 0; i < 9; ++i) CHECK(z.first[i] == z1[i]);
}

TEST_CASE("sequences, lambda and gamma agree with the interval construction") {
  RngStream rng(31, 0);
  for (int N : {4, 8, 9, 16}) {
    const auto p = params(N);
    const auto pair = qpsk_random_pair(N, rng);
    for (int rep = 0; rep < 20; ++rep) {
      double tau = rng.uniform() * N;
      if (tau - std::floor(tau) < 1e-6) tau += 0.01;
      if (tau >= N) continue;
      const auto off = decompose_offset(tau, p);
      for (Sao order : {Sao::first, Sao::second}) {
        const auto seq = build_equivalent_sequences(pair.t1, pair.t2, off, order);
        const auto d = build_lambda_gamma(off, 0.7, 1.3, p);
        const auto bf = brute_force(pair.t1, pair.t2, tau, order);
        REQUIRE(bf.ra.size() == static_cast<std::size_t>(2 * N + 1));
        for (int k = 0; k <= 2 * N; ++k) {
          CHECK(std::abs(seq.first[k] - bf.ra[k]) < 1e-15);
          CHECK(std::abs(seq.second[k] - bf.rb[k]) < 1e-15);
          CHECK(d.lambda[k] * d.lambda[k] == doctest::Approx(bf.len[k]).epsilon(1e-9));
          CHECK(d.gamma[k] == (bf.active[k] == 2 ? 1.3 : 0.7));
        }
      }
    }
  }
}

TEST_CASE("lambda and gamma special cases") {
  const auto p = params(4);
  auto d = build_lambda_gamma(decompose_offset(0.0, p), 0.5, 2.0, p);
  for (int k = 0; k < 9; ++k) {
    CHECK(d.lambda[k] == (k % 2 == 0 ? 0.0 : 1.0));
    CHECK(d.gamma[k] == 2.0);
  }
  d = build_lambda_gamma(decompose_offset(1.5, p), 0.5, 2.0, p);
  for (int k = 1; k < 8; ++k) CHECK(d.lambda[k] == doctest::Approx(std::sqrt(0.5)));
  d = build_lambda_gamma(decompose_offset(2.3, p), 1.1, 1.1, p);
  for (int k = 0; k < 9; ++k) CHECK(d.gamma[k] == 1.1);
  // Entries come from {1, sqrt(lambda), sqrt(1 - lambda)} and the overlap
  // energy of each stretched sequence is N.
  const auto pair = optimal_pair(4);
  for (double tau : {0.0, 0.4, 1.0, 2.7, 3.99}) {
    const auto off = decompose_offset(tau, p);
    const auto dd = build_lambda_gamma(off, 1.0, 1.0, p);
    const double lp = off.lambda_sym(p.Ts);
    for (double v : dd.lambda) {
      const bool ok = v == 1.0 || std::abs(v - std::sqrt(lp)) < 1e-15 || std::abs(v - std::sqrt(1 - lp)) < 1e-15;
      CHECK(ok);
    }
    const auto seq = build_equivalent_sequences(pair.t1, pair.t2, off, Sao::first);
    double e1 = 0, e2 = 0;
    for (int k = 0; k < 9; ++k) {
      e1 += std::norm(dd.lambda[k] * seq.first[k]);
      e2 += std::norm(dd.lambda[k] * seq.second[k]);
    }
    CHECK(e1 == doctest::Approx(4.0));
    CHECK(e2 == doctest::Approx(4.0));
  }
}

TEST_CASE("noiseless pilot reception at the source") {
  const auto p = params(8);
  const auto pair = optimal_pair(8);
  const auto off = decompose_offset(2.25, p);
  RngStream rng(1, 1);
  const NoiseSwitch quiet{false, false};
  ChannelRealization ch{1.0, 1.0};
  auto rx = rx_pilot_at_source(ch, pair.t1, pair.t2, off, Sao::first, 0.8, 0.6, rng, p, quiet);
  const auto cols = pilot_columns(build_equivalent_sequences(pair.t1, pair.t2, off, Sao::first), rx.diag);
  for (int k = 0; k < 17; ++k) CHECK(std::abs(rx.samples[k] - (cols.first[k] + cols.second[k])) < 1e-15);

  ch = {0.0, cplx(0.3, 0.2)};
  rx = rx_pilot_at_source(ch, pair.t1, pair.t2, off, Sao::first, 0.8, 0.6, rng, p, quiet);
  for (const auto& v : rx.samples) CHECK(v == cplx(0.0));

  // Scaling both composite gains by c scales every sample by c.
  ch = {cplx(0.4, -0.3), cplx(1.1, 0.2)};
  const auto base = rx_pilot_at_source(ch, pair.t1, pair.t2, off, Sao::first, 0.8, 0.6, rng, p, quiet);
  const ChannelRealization ch2{ch.h1 * std::sqrt(cplx(2.0, 1.0)), ch.h2 * std::sqrt(cplx(2.0, 1.0))};
  const auto sc = rx_pilot_at_source(ch2, pair.t1, pair.t2, off, Sao::first, 0.8, 0.6, rng, p, quiet);
  for (int k = 0; k < 17; ++k) CHECK(std::abs(sc.samples[k] - cplx(2.0, 1.0) * base.samples[k]) < 1e-12);
}

TEST_CASE("pilot noise variance at the source") {
  auto p = params(4);
  p.Ps = 2.0;
  p.NR0 = 0.5;
  p.NS0 = 0.25;
  const auto pair = optimal_pair(4);
  const auto off = decompose_offset(1.5, p);
  const ChannelRealization ch{cplx(0.6, 0.8), 0.5};
  const double gI = 1.4, gS = 0.9;
  RngStream rng(41, 0);
  const int trials = 100000;
  const NoiseSwitch quiet{false, false};
  const auto mean = rx_pilot_at_source(ch, pair.t1, pair.t2, off, Sao::first, gI, gS, rng, p, quiet).samples;
  std::vector<double> acc(9, 0.0);
  ReceivedPilot rx;
  for (int t = 0; t < trials; ++t) {
    rx = rx_pilot_at_source(ch, pair.t1, pair.t2, off, Sao::first, gI, gS, rng, p);
    for (int k = 0; k < 9; ++k) acc[k] += std::norm(rx.samples[k] - mean[k]);
  }
  for (int k = 0; k < 9; ++k) {
    const double g = rx.diag.gamma[k];
    const double want = g * g * std::norm(ch.h1) * p.NR0 / (p.Ps * p.Ts) + p.NS0 / (p.Ps * p.Ts);
    CHECK(acc[k] / trials == doctest::Approx(want).epsilon(0.02));
  }
}

TEST_CASE("pilot reception at the relay") {
  const auto p = params(8);
  const auto pair = optimal_pair(8);
  RngStream rng(2, 2);
  const ChannelRealization ch{cplx(0.3, 1.0), cplx(-0.7, 0.2)};
  auto off = decompose_offset(2.5, p);
  const auto x0 = rx_pilot_at_relay(ch, pair.t1, pair.t2, off, Sao::first, rng, p, false);
  const auto x1 = rx_pilot_at_relay(ch, pair.t1, pair.t2, off, Sao::second, rng, p, false);
  const auto seq = build_equivalent_sequences(pair.t1, pair.t2, off, Sao::first);
  double diff = 0.0;
  for (int k = 0; k < 17; ++k) {
    CHECK(std::abs(x0.samples[k] - x0.diag.lambda[k] * (seq.first[k] * ch.h1 + seq.second[k] * ch.h2)) < 1e-15);
    diff += std::norm(x0.samples[k] - x1.samples[k]);
  }
  CHECK(diff > 1e-3);
  off = decompose_offset(0.0, p);
  const auto z0 = build_equivalent_sequences(pair.t1, pair.t2, off, Sao::first);
  const auto z1 = build_equivalent_sequences(pair.t1, pair.t2, off, Sao::second);
  const auto d = build_lambda_gamma(off, 1.0, 1.0, p);
  for (int k = 0; k < 17; ++k) {
    CHECK(d.lambda[k] * z0.first[k] == d.lambda[k] * z1.first[k]);
    CHECK(d.lambda[k] * z0.second[k] == d.lambda[k] * z1.second[k]);
  }
}

TEST_CASE("data phase reception") {
  auto p = params(8);
  p.Ps = 10.0;
  p.Pr = 10.0;
  const double alpha = data_alpha(p);
  CHECK(alpha == doctest::Approx(std::sqrt(10.0 / 21.0)));
  const ChannelRealization ch{cplx(0.9, -0.4), cplx(0.2, 0.6)};
  RngStream rng(3, 3);
  const std::vector<double> s1{1, -1, 1, 1}, s2{-1, -1, 1, -1}, zero(4, 0.0);
  const CVec y = rx_data_symbols(ch, s1, s2, alpha, rng, p, false);
  const double amp = alpha * std::sqrt(p.Ps);
  for (int m = 0; m < 4; ++m) CHECK(std::abs(y[m] - amp * ch.ha() * s1[m] - amp * ch.hb() * s2[m]) < 1e-14);
  const CVec y0 = rx_data_symbols(ch, s1, zero, alpha, rng, p, false);
  for (int m = 0; m < 4; ++m) CHECK(std::abs(y0[m] - amp * ch.ha() * s1[m]) < 1e-14);
}

TEST_CASE("coherent BPSK after perfect cancellation matches the matched-filter oracle") {
  for (double snr_db : {30.0, 0.0}) {
    auto p = with_snr_db(params(8), snr_db);
    const double alpha = data_alpha(p);
    const ChannelRealization ch{cplx(0.5, 0.3), cplx(0.4, -0.2)};
    RngStream rng(4, static_cast<std::uint64_t>(snr_db));
    const int M = 100000;
    std::vector<double> s1(M), s2(M);
    for (int m = 0; m < M; ++m) {
      s1[m] = (rng.next_u32() & 1u) ? 1.0 : -1.0;
      s2[m] = (rng.next_u32() & 1u) ? 1.0 : -1.0;
    }
    const CVec y = rx_data_symbols(ch, s1, s2, alpha, rng, p);
    const double amp = alpha * std::sqrt(p.Ps);
    int err = 0;
    for (int m = 0; m < M; ++m) {
      const cplx r = y[m] - amp * ch.ha() * s1[m];
      const double dec = (std::conj(ch.hb()) * r).real() >= 0 ? 1.0 : -1.0;
      err += dec != s2[m];
    }
    const double snr = amp * amp * std::norm(ch.hb()) /
                       (alpha * alpha * std::norm(ch.h1) * p.NR0 / p.Ts + p.NS0 / p.Ts);
    const double pe = qfunc(std::sqrt(2.0 * snr));
    const double sd = std::sqrt(pe * (1 - pe) / M);
    CHECK(std::abs(static_cast<double>(err) / M - pe) <= 3.0 * sd + 1e-12);
  }
}
