#include "twrn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace twrn {

CVec dft_column(int N, int k) {
  if (N < 1 || k < 1 || k > N) throw DomainError("dft_column: index out of range");
  CVec t(N);
  // Reduce the phase index modulo N first so large N keeps full precision.
  for (int n = 0; n < N; ++n) {
    const long long m = (static_cast<long long>(n) * (k - 1)) % N;
    const double ph = -2.0 * std::numbers::pi * static_cast<double>(m) / N;
    t[n] = {std::cos(ph), std::sin(ph)};
  }
  return t;
}

TrainingPair dft_pair(int N, int k1, int k2, std::string label) {
  TrainingPair p;
  p.t1 = dft_column(N, k1);
  p.t2 = dft_column(N, k2);
  p.k1 = k1;
  p.k2 = k2;
  p.label = label.empty() ? std::to_string(k1) + "," + std::to_string(k2) : std::move(label);
  return p;
}

TrainingPair optimal_pair(int N) {
  if (N < 2) throw DomainError("optimal_pair: N must be at least 2");
  const int k2 = (N % 2 == 0) ? 1 + N / 2 : 1 + (N + 1) / 2;
  return dft_pair(N, 1, k2, "optimal");
}

TrainingPair type1_pair(int N) {
  TrainingPair p;
  p.t1.assign(N, 1.0);
  p.t2.assign(N, 1.0);
  for (int n = N / 2; n < N; ++n) p.t2[n] = -1.0;
  p.label = "type1";
  return p;
}

TrainingPair type2_pair(int N) {
  if (N < 4) throw DomainError("type2 pair needs N >= 4");
  return dft_pair(N, 3, 4, "type2");
}

TrainingPair correlated_pair(int N) {
  TrainingPair p;
  p.t1.assign(N, 1.0);
  p.t2.assign(N, 1.0);
  p.label = "correlated";
  return p;
}

TrainingPair qpsk_random_pair(int N, RngStream& rng) {
  TrainingPair p;
  auto draw = [&] {
    CVec t(N);
    for (auto& z : t) {
      const int q = static_cast<int>(rng.next_u32() & 3u);
      const double ph = std::numbers::pi / 4.0 * (2 * q + 1);
      z = {std::cos(ph), std::sin(ph)};
    }
    return t;
  };
  p.t1 = draw();
  p.t2 = draw();
  p.label = "qpsk-random";
  return p;
}

TrainingPair pair_by_label(const std::string& label, int N, RngStream* rng) {
  if (label == "optimal") return optimal_pair(N);
  if (label == "type1") return type1_pair(N);
  if (label == "type2") return type2_pair(N);
  if (label == "correlated") return correlated_pair(N);
  if (label == "qpsk-random") {
    if (!rng) throw DomainError("qpsk-random pair needs a random stream");
    return qpsk_random_pair(N, *rng);
  }
  const auto comma = label.find(',');
  if (comma != std::string::npos) {
    try {
      std::size_t e1 = 0, e2 = 0;
      const int k1 = std::stoi(label.substr(0, comma), &e1);
      const std::string rest = label.substr(comma + 1);
      const int k2 = std::stoi(rest, &e2);
      if (e1 == comma && e2 == rest.size()) return dft_pair(N, k1, k2);
    } catch (const std::invalid_argument&) {
    } catch (const std::out_of_range&) {
    }
  }
  throw DomainError("unknown training label: " + label);
}

cplx rho(const TrainingPair& pair, const TimingOffset& off, const SystemParams& p) {
  const auto r = build_equivalent_sequences(pair.t1, pair.t2, off, Sao::first);
  const auto d = build_lambda_gamma(off, 1.0, 1.0, p);
  cplx num = 0.0;
  double n1 = 0.0, n2 = 0.0;
  for (std::size_t k = 0; k < d.lambda.size(); ++k) {
    const double l2 = d.lambda[k] * d.lambda[k];
    num += std::conj(r.first[k]) * r.second[k] * l2;
    n1 += std::norm(r.first[k]) * l2;
    n2 += std::norm(r.second[k]) * l2;
  }
  if (n1 <= 0.0 || n2 <= 0.0) throw DegenerateError("rho: zero-energy sequence");
  return num / std::sqrt(n1 * n2);
}

double rho_worstcase_bound(const TimingOffset& off, const SystemParams& p) {
  const double f = (p.N * p.Ts - off.tau) / (p.N * p.Ts);
  return f * f;
}

double max_abs_rho(const TrainingPair& pair, const SystemParams& p, int per_symbol) {
  SystemParams q = p;
  q.L = q.N;
  double best = 0.0;
  for (int i = 0; i < q.N * per_symbol; ++i) {
    const auto off = decompose_offset(i * q.Ts / per_symbol, q);
    best = std::max(best, std::abs(rho(pair, off, q)));
  }
  return best;
}

}  // namespace twrn
