#pragma once

#include <string>

#include "twrn/signal_model.hpp"
#include "twrn/training.hpp"

namespace twrn {

enum class PowerScheme { soa, ea, ra };

PowerScheme parse_power_scheme(const std::string& s);
const char* to_string(PowerScheme s);

struct RelayScaling {
  double gI2 = 0.0;  // tail gain squared
  double gS2 = 0.0;  // overlap gain squared
  PowerScheme scheme = PowerScheme::ea;
  bool clamped = false;  // SOA fell back to EA

  double gamma_I() const;
  double gamma_S() const;
};

// Relay pilot energy spent by a given pair of gains.
double relay_energy(const SystemParams& p, const TimingOffset& off, double gI2, double gS2);

RelayScaling soa_scaling(const SystemParams& p, const TimingOffset& off);
RelayScaling ea_scaling(const SystemParams& p, const TimingOffset& off);
RelayScaling ra_scaling(const SystemParams& p, const TimingOffset& off, RngStream& rng);
RelayScaling make_scaling(PowerScheme s, const SystemParams& p, const TimingOffset& off, RngStream& rng);

struct B12 {
  double B1 = 0.0;
  double B2 = 0.0;  // magnitude
};

// Requires NR0 == NS0.
B12 b1_b2(const SystemParams& p, const TimingOffset& off, const RelayScaling& s, const TrainingPair& pair);

}  // namespace twrn
