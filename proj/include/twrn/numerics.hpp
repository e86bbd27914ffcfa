#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "twrn/errors.hpp"

namespace twrn {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

class CMat {
 public:
  CMat() = default;
  CMat(std::size_t rows, std::size_t cols) : r_(rows), c_(cols), a_(rows * cols) {}

  static CMat identity(std::size_t n);
  static CMat diag(const std::vector<double>& d);
  static CMat diag(const CVec& d);
  // Columns stacked side by side; all must share a length.
  static CMat from_columns(const std::vector<CVec>& cols);

  std::size_t rows() const { return r_; }
  std::size_t cols() const { return c_; }
  cplx& operator()(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }
  cplx* row(std::size_t i) { return a_.data() + i * c_; }
  const cplx* row(std::size_t i) const { return a_.data() + i * c_; }
  const std::vector<cplx>& data() const { return a_; }

  CVec column(std::size_t j) const;

 private:
  std::size_t r_ = 0, c_ = 0;
  std::vector<cplx> a_;
};

CMat adjoint(const CMat& a);
CMat matmul(const CMat& a, const CMat& b);
CVec matvec(const CMat& a, const CVec& x);
// a^H x without forming the adjoint.
CVec matvec_adj(const CMat& a, const CVec& x);
bool is_hermitian(const CMat& a, double tol = 1e-12);
bool all_finite(const CVec& v);
bool all_finite(const CMat& m);

cplx dotc(const CVec& a, const CVec& b);  // a^H b
double norm2(const CVec& a);              // ||a||^2
CVec axpy(cplx alpha, const CVec& x, CVec y);
CVec scaled(const CVec& x, cplx s);

// Lower Cholesky factor of a Hermitian positive-definite matrix.
class Cholesky {
 public:
  explicit Cholesky(const CMat& a);
  CVec solve(const CVec& b) const;
  std::size_t dim() const { return l_.rows(); }
  bool jittered() const { return jittered_; }
  const CMat& factor() const { return l_; }

 private:
  bool factorize(const CMat& a, double shift);
  CMat l_;
  bool jittered_ = false;
};

CVec hermitian_solve(const CMat& a, const CVec& b);

double qfunc(double x);

// Philox4x32-10 counter-based generator. A (seed, stream) pair fixes the
// whole draw sequence, so trials can take streams out of order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }
  double normal();
  cplx cgauss(double variance);

  std::uint64_t seed() const { return key_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();
  std::uint64_t key_, stream_;
  std::uint64_t ctr_ = 0;
  std::uint32_t buf_[4] = {0, 0, 0, 0};
  int pos_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

void philox4x32_10(const std::uint32_t ctr_in[4], const std::uint32_t key_in[2], std::uint32_t out[4]);

CVec sample_cgauss(RngStream& rng, double variance, std::size_t count);

}  // namespace twrn
