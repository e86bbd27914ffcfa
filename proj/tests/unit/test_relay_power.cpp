#include <cmath>

#include "doctest.h"
#include "twrn/estimators.hpp"
#include "twrn/relay_power.hpp"

using namespace twrn;

namespace {

SystemParams params(int N, double snr_db) {
  SystemParams p;
  p.N = N;
  p.L = N;
  return with_snr_db(p, snr_db);
}

// Maximizes B1 along the energy constraint by golden-section search over
// the tail share; independent of the closed form.
double best_b1(const SystemParams& p, const TimingOffset& off, const TrainingPair& pair) {
  const double tp = off.tau_sym(p.Ts);
  const double Ea = p.upsilon * p.Ps * p.Ts + p.NR0;
  const double xmax = p.Er / (2.0 * tp * Ea);
  auto b1 = [&](double x) {
    const double y = (p.Er - 2.0 * x * tp * Ea) / ((p.N - tp) * (2.0 * p.upsilon * p.Ps * p.Ts + p.NR0));
    return b1_b2(p, off, RelayScaling{x, y, PowerScheme::ra, false}, pair).B1;
  };
  double lo = 0.0, hi = xmax;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 200; ++i) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    if (b1(a) < b1(b)) lo = a;
    else hi = b;
  }
  return b1(0.5 * (lo + hi));
}

}  // namespace

TEST_CASE("equal allocation arithmetic") {
  SystemParams p;
  p.N = 16;
  p.L = 16;
  p.Er = 16;
  const auto off = decompose_offset(1.0, p);
  const auto s = ea_scaling(p, off);
  CHECK(s.gS2 == doctest::Approx(16.0 / 49.0).epsilon(1e-15));
  CHECK(s.gI2 == s.gS2);
  CHECK(std::abs(relay_energy(p, off, s.gI2, s.gS2) - p.Er) <= 1e-12 * p.Er);
}

TEST_CASE("allocations satisfy the energy constraint") {
  RngStream rng(61, 0);
  for (double snr : {-5.0, 0.0, 10.0, 30.0}) {
    for (double Ts : {1.0, 0.25, 3.0}) {
      auto p = params(16, snr);
      p.Ts = Ts;
      p.Er = p.N * p.Ps * p.Ts;
      for (double tau_sym : {0.0, 0.3, 1.0, 4.5, 15.2}) {
        const auto off = decompose_offset(tau_sym * Ts, p);
        const auto soa = soa_scaling(p, off);
        const auto ea = ea_scaling(p, off);
        CHECK(std::abs(relay_energy(p, off, soa.gI2, soa.gS2) - p.Er) <= 1e-9 * p.Er);
        CHECK(std::abs(relay_energy(p, off, ea.gI2, ea.gS2) - p.Er) <= 1e-12 * p.Er);
        if (tau_sym > 0.0) {
          const auto ra = ra_scaling(p, off, rng);
          CHECK(ra.gI2 >= 0.0);
          CHECK(ra.gS2 >= 0.0);
          CHECK(std::abs(relay_energy(p, off, ra.gI2, ra.gS2) - p.Er) <= 1e-9 * p.Er);
        }
      }
    }
  }
}

TEST_CASE("zero offset collapses to the single-regime value") {
  const auto p = params(8, 10.0);
  const auto off = decompose_offset(0.0, p);
  const double want = p.Er / (p.N * (2.0 * p.upsilon * p.Ps * p.Ts + p.NR0));
  CHECK(soa_scaling(p, off).gS2 == doctest::Approx(want).epsilon(1e-12));
  CHECK(ea_scaling(p, off).gS2 == doctest::Approx(want).epsilon(1e-12));
  RngStream rng(1, 1);
  CHECK_THROWS_AS(ra_scaling(p, off, rng), DomainError);
}

TEST_CASE("closed-form allocation maximizes B1") {
  RngStream rng(62, 0);
  for (int rep = 0; rep < 40; ++rep) {
    auto p = params(8 + static_cast<int>(rng.uniform() * 24), -5.0 + 35.0 * rng.uniform());
    p.upsilon = 0.5 + rng.uniform();
    p.Er = p.N * p.Ps * p.Ts;
    const auto off = decompose_offset(0.05 + rng.uniform() * (p.N - 0.1), p);
    const auto pair = optimal_pair(p.N);
    const auto soa = soa_scaling(p, off);
    if (soa.clamped) continue;
    const double b_soa = b1_b2(p, off, soa, pair).B1;
    CHECK(b_soa >= b1_b2(p, off, ea_scaling(p, off), pair).B1 * (1 - 1e-12));
    for (int k = 0; k < 25; ++k) CHECK(b_soa >= b1_b2(p, off, ra_scaling(p, off, rng), pair).B1 * (1 - 1e-12));
    CHECK(b_soa == doctest::Approx(best_b1(p, off, pair)).epsilon(1e-9));
  }
}

TEST_CASE("closed-form and equal allocation converge at high SNR") {
  const auto p = params(16, 40.0);
  const auto pair = optimal_pair(16);
  for (double tau : {0.5, 3.0, 9.7}) {
    const auto off = decompose_offset(tau, p);
    const double a = b1_b2(p, off, soa_scaling(p, off), pair).B1;
    const double e = b1_b2(p, off, ea_scaling(p, off), pair).B1;
    CHECK((a - e) / a < 1e-3);
  }
}

TEST_CASE("random allocation is reproducible") {
  const auto p = params(16, 10.0);
  const auto off = decompose_offset(2.2, p);
  RngStream a(9, 9), b(9, 9);
  const auto x = ra_scaling(p, off, a), y = ra_scaling(p, off, b);
  CHECK(x.gI2 == y.gI2);
  CHECK(x.gS2 == y.gS2);
}

TEST_CASE("B1 and B2") {
  const auto p = params(8, 10.0);
  const auto pair = optimal_pair(8);
  const auto off0 = decompose_offset(0.0, p);
  const RelayScaling s{0.3, 0.3, PowerScheme::ea, false};
  const auto b = b1_b2(p, off0, s, pair);
  CHECK(b.B1 == doctest::Approx(p.N * p.Ts * p.Ps * 0.3 / (p.NR0 * (1 + p.upsilon * 0.3))));
  for (double tau : {0.5, 2.0, 6.5}) {
    const auto off = decompose_offset(tau, p);
    const auto bb = b1_b2(p, off, soa_scaling(p, off), pair);
    CHECK(bb.B2 <= bb.B1 / (p.N * (1.0 - tau / p.N)) + 1e-12);
  }
  // Strictly increasing in the overlap gain.
  double prev = 0.0;
  for (double g = 0.05; g < 5.0; g *= 1.3) {
    const double v = b1_b2(p, decompose_offset(1.5, p), RelayScaling{0.4, g, PowerScheme::ra, false}, pair).B1;
    CHECK(v > prev);
    prev = v;
  }
  auto q = p;
  q.NS0 = 2.0 * q.NR0;
  CHECK_THROWS_AS(b1_b2(q, off0, s, pair), DomainError);
}

TEST_CASE("closed-form MSE decreases in B1") {
  const Moments mo = composite_moments(1.0);
  double prev = mse_from_b(1e-3, 0.0, mo);
  for (double b = 1e-3 * 1.1; b <= 1e6; b *= 1.1) {
    const double v = mse_from_b(b, 0.0, mo);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(mse_from_b(0.0, 0.0, mo) == doctest::Approx(3.0));
}

TEST_CASE("scheme names") {
  CHECK(parse_power_scheme("soa") == PowerScheme::soa);
  CHECK(std::string(to_string(PowerScheme::ra)) == "ra");
  CHECK_THROWS_AS(parse_power_scheme("max"), DomainError);
}
