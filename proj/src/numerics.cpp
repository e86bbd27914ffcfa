#include "twrn/numerics.hpp"

#include <cmath>
#include <numbers>

#include "twrn/kernels.hpp"

namespace twrn {

CMat CMat::identity(std::size_t n) {
  CMat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMat CMat::diag(const std::vector<double>& d) {
  CMat m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

CMat CMat::diag(const CVec& d) {
  CMat m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

CMat CMat::from_columns(const std::vector<CVec>& cols) {
  if (cols.empty()) throw ShapeError("from_columns: no columns");
  const std::size_t n = cols[0].size();
  CMat m(n, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j].size() != n) throw ShapeError("from_columns: ragged columns");
    for (std::size_t i = 0; i < n; ++i) m(i, j) = cols[j][i];
  }
  return m;
}

CVec CMat::column(std::size_t j) const {
  CVec v(r_);
  for (std::size_t i = 0; i < r_; ++i) v[i] = (*this)(i, j);
  return v;
}

CMat adjoint(const CMat& a) {
  CMat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = std::conj(a(i, j));
  return t;
}

CMat matmul(const CMat& a, const CMat& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  CMat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx s = a(i, k);
      if (s != 0.0) kernels::caxpy(s, b.row(k), c.row(i), b.cols());
    }
  return c;
}

CVec matvec(const CMat& a, const CVec& x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
  CVec y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = kernels::cdotu(a.row(i), x.data(), x.size());
  return y;
}

CVec matvec_adj(const CMat& a, const CVec& x) {
  if (a.rows() != x.size()) throw ShapeError("matvec_adj: dimension mismatch");
  // conj(a^H x) = a^T conj(x), built row by row with axpy.
  CVec acc(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) kernels::caxpy(std::conj(x[i]), a.row(i), acc.data(), a.cols());
  for (auto& v : acc) v = std::conj(v);
  return acc;
}

bool is_hermitian(const CMat& a, double tol) {
  if (a.rows() != a.cols()) return false;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i; j < a.cols(); ++j)
      if (std::abs(a(i, j) - std::conj(a(j, i))) > tol) return false;
  return true;
}

bool all_finite(const CVec& v) {
  for (const auto& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

bool all_finite(const CMat& m) { return all_finite(m.data()); }

cplx dotc(const CVec& a, const CVec& b) {
  if (a.size() != b.size()) throw ShapeError("dotc: length mismatch");
  return kernels::cdotc(a.data(), b.data(), a.size());
}

double norm2(const CVec& a) { return kernels::cnorm2(a.data(), a.size()); }

CVec axpy(cplx alpha, const CVec& x, CVec y) {
  if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
  kernels::caxpy(alpha, x.data(), y.data(), x.size());
  return y;
}

CVec scaled(const CVec& x, cplx s) {
  CVec y(x.size());
  kernels::caxpy(s, x.data(), y.data(), x.size());
  return y;
}

Cholesky::Cholesky(const CMat& a) {
  if (a.rows() != a.cols()) throw ShapeError("cholesky: matrix not square");
  if (a.rows() == 0) throw ShapeError("cholesky: empty matrix");
  if (factorize(a, 0.0)) return;
  double tr = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) tr += a(i, i).real();
  const double shift = 1e-12 * tr / static_cast<double>(a.rows());
  if (shift > 0.0 && factorize(a, shift)) {
    jittered_ = true;
    return;
  }
  throw DecompositionError("cholesky: matrix is not positive definite");
}

bool Cholesky::factorize(const CMat& a, double shift) {
  const std::size_t n = a.rows();
  l_ = CMat(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const cplx* lj = l_.row(j);
    const double d = a(j, j).real() + shift - kernels::cnorm2(lj, j);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    l_(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      // sum_k L[i][k] conj(L[j][k]) over k < j
      const cplx s = kernels::cdotc(lj, l_.row(i), j);
      l_(i, j) = (a(i, j) - s) / ljj;
    }
  }
  return true;
}

CVec Cholesky::solve(const CVec& b) const {
  const std::size_t n = dim();
  if (b.size() != n) throw ShapeError("cholesky solve: dimension mismatch");
  CVec y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = (b[i] - kernels::cdotu(l_.row(i), y.data(), i)) / l_(i, i).real();
  // Back substitution with L^H, run on conj(y) so the row-contiguous axpy applies.
  CVec z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = std::conj(y[i]);
  CVec x(n);
  for (std::size_t i = n; i-- > 0;) {
    x[i] = std::conj(z[i]) / l_(i, i).real();
    kernels::caxpy(-std::conj(x[i]), l_.row(i), z.data(), i);
  }
  return x;
}

CVec hermitian_solve(const CMat& a, const CVec& b) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw ShapeError("hermitian_solve: dimension mismatch");
  return Cholesky(a).solve(b);
}

double qfunc(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

void philox4x32_10(const std::uint32_t ctr_in[4], const std::uint32_t key_in[2], std::uint32_t out[4]) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  std::uint32_t c0 = ctr_in[0], c1 = ctr_in[1], c2 = ctr_in[2], c3 = ctr_in[3];
  std::uint32_t k0 = key_in[0], k1 = key_in[1];
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c0;
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c2;
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c0 = hi1 ^ c1 ^ k0;
    c1 = lo1;
    c2 = hi0 ^ c3 ^ k1;
    c3 = lo0;
    k0 += W0;
    k1 += W1;
  }
  out[0] = c0;
  out[1] = c1;
  out[2] = c2;
  out[3] = c3;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) : key_(seed), stream_(stream) {}

void RngStream::refill() {
  const std::uint32_t ctr[4] = {static_cast<std::uint32_t>(ctr_), static_cast<std::uint32_t>(ctr_ >> 32),
                                static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::uint32_t key[2] = {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)};
  philox4x32_10(ctr, key, buf_);
  ++ctr_;
  pos_ = 0;
}

std::uint32_t RngStream::next_u32() {
  if (pos_ == 4) refill();
  return buf_[pos_++];
}

double RngStream::uniform() {
  const std::uint64_t hi = next_u32() >> 5;  // 27 bits
  const std::uint64_t lo = next_u32() >> 6;  // 26 bits
  return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
}

double RngStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_pos();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(th);
  have_spare_ = true;
  return r * std::cos(th);
}

cplx RngStream::cgauss(double variance) {
  const double s = std::sqrt(0.5 * variance);
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

CVec sample_cgauss(RngStream& rng, double variance, std::size_t count) {
  if (!(variance >= 0.0)) throw DomainError("sample_cgauss: negative variance");
  CVec v(count);
  for (auto& z : v) z = rng.cgauss(variance);
  return v;
}

}  // namespace twrn
