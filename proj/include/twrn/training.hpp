#pragma once

#include <optional>
#include <string>

#include "twrn/numerics.hpp"
#include "twrn/signal_model.hpp"

namespace twrn {

struct TrainingPair {
  CVec t1, t2;
  std::optional<int> k1, k2;  // DFT columns, 1-based
  std::string label;

  int N() const { return static_cast<int>(t1.size()); }
};

CVec dft_column(int N, int k);

TrainingPair dft_pair(int N, int k1, int k2, std::string label = {});
// Columns 1 and 1 + ceil(N/2), which keeps |rho| at or below 1/N.
TrainingPair optimal_pair(int N);
// All-ones against a half-negated sequence.
TrainingPair type1_pair(int N);
// DFT columns 3 and 4.
TrainingPair type2_pair(int N);
// Identical all-ones sequences.
TrainingPair correlated_pair(int N);
TrainingPair qpsk_random_pair(int N, RngStream& rng);

// Accepts "optimal", "type1", "type2", "correlated", "qpsk-random", or "k1,k2".
TrainingPair pair_by_label(const std::string& label, int N, RngStream* rng = nullptr);

// Normalized overlap correlation of the two stretched sequences under the
// first arrival order.
cplx rho(const TrainingPair& pair, const TimingOffset& off, const SystemParams& p);

double rho_worstcase_bound(const TimingOffset& off, const SystemParams& p);

// Maximum of |rho| over a grid of `per_symbol` points per symbol period on
// [0, N*Ts).
double max_abs_rho(const TrainingPair& pair, const SystemParams& p, int per_symbol = 16);

}  // namespace twrn
