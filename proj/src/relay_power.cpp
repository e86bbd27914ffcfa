#include "twrn/relay_power.hpp"

#include <cmath>

namespace twrn {

PowerScheme parse_power_scheme(const std::string& s) {
  if (s == "soa") return PowerScheme::soa;
  if (s == "ea") return PowerScheme::ea;
  if (s == "ra") return PowerScheme::ra;
  throw DomainError("unknown power scheme: " + s);
}

const char* to_string(PowerScheme s) {
  switch (s) {
    case PowerScheme::soa: return "soa";
    case PowerScheme::ea: return "ea";
    case PowerScheme::ra: return "ra";
  }
  return "?";
}

double RelayScaling::gamma_I() const { return std::sqrt(gI2); }
double RelayScaling::gamma_S() const { return std::sqrt(gS2); }

namespace {

// Per-symbol relay input energy in the tail (one source) and overlap (both).
struct Loads {
  double Ea, Eb;
};

Loads loads(const SystemParams& p) {
  const double s = p.upsilon * p.Ps * p.Ts;
  return {s + p.NR0, 2.0 * s + p.NR0};
}

}  // namespace

double relay_energy(const SystemParams& p, const TimingOffset& off, double gI2, double gS2) {
  const auto [Ea, Eb] = loads(p);
  const double tp = off.tau_sym(p.Ts);
  return 2.0 * gI2 * tp * Ea + gS2 * (p.N - tp) * Eb;
}

RelayScaling ea_scaling(const SystemParams& p, const TimingOffset& off) {
  const auto [Ea, Eb] = loads(p);
  const double tp = off.tau_sym(p.Ts);
  const double g2 = p.Er / (2.0 * tp * Ea + (p.N - tp) * Eb);
  return {g2, g2, PowerScheme::ea, false};
}

RelayScaling soa_scaling(const SystemParams& p, const TimingOffset& off) {
  const double NT = p.N * p.Ts;
  if (!(off.tau < NT)) throw DomainError("soa_scaling: offset must be below N*Ts");
  const auto [Ea, Eb] = loads(p);
  const double v = p.upsilon, T = p.Ts, tau = off.tau, Er = p.Er;
  const double s = std::sqrt(2.0 * Ea * Eb);
  const double gI2 = ((NT - tau) * Eb + v * T * Er - s * (NT - tau)) / (s * (NT - tau) * v + 2.0 * tau * Ea * v);
  const double gS2 = (2.0 * tau * Ea + v * Er * T - s * tau) / (s * tau * v + (NT - tau) * Eb * v);
  if (!(gI2 >= 0.0) || !(gS2 >= 0.0)) {
    RelayScaling e = ea_scaling(p, off);
    e.scheme = PowerScheme::soa;
    e.clamped = true;
    return e;
  }
  return {gI2, gS2, PowerScheme::soa, false};
}

RelayScaling ra_scaling(const SystemParams& p, const TimingOffset& off, RngStream& rng) {
  if (!(off.tau > 0.0)) throw DomainError("ra_scaling: needs a positive offset");
  const auto [Ea, Eb] = loads(p);
  const double tp = off.tau_sym(p.Ts);
  if (!(tp < p.N)) throw DomainError("ra_scaling: offset must be below N*Ts");
  // The drawn gain is the overlap one: the interval is exactly its
  // feasible range, so the remainder funds the two tails.
  const double upper = p.Er / ((p.N - tp) * Eb);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double gS2 = upper * rng.uniform_pos();
    const double rest = p.Er - gS2 * (p.N - tp) * Eb;
    if (rest < 0.0) continue;
    return {rest / (2.0 * tp * Ea), gS2, PowerScheme::ra, false};
  }
  throw AllocationError("ra_scaling: no feasible draw in 100 attempts");
}

RelayScaling make_scaling(PowerScheme s, const SystemParams& p, const TimingOffset& off, RngStream& rng) {
  switch (s) {
    case PowerScheme::soa: return soa_scaling(p, off);
    case PowerScheme::ea: return ea_scaling(p, off);
    case PowerScheme::ra: return ra_scaling(p, off, rng);
  }
  throw DomainError("make_scaling: bad scheme");
}

B12 b1_b2(const SystemParams& p, const TimingOffset& off, const RelayScaling& s, const TrainingPair& pair) {
  if (std::abs(p.NR0 - p.NS0) > 1e-12 * p.NR0) throw DomainError("b1_b2 assumes equal noise levels");
  const double N0 = p.NR0, v = p.upsilon;
  const double cS = s.gS2 / (1.0 + v * s.gS2), cI = s.gI2 / (1.0 + v * s.gI2);
  B12 b;
  b.B1 = ((p.N * p.Ts - off.tau) * p.Ps * cS + off.tau * p.Ps * cI) / N0;
  b.B2 = std::abs(rho(pair, off, p)) * p.N * p.Ts * p.Ps * cS / N0;
  return b;
}

}  // namespace twrn
