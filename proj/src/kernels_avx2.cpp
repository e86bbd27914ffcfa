// Built with -mavx2 -mfma; only reached after the cpuid check in dispatch.

#include "twrn/kernels.hpp"

#include <immintrin.h>

namespace twrn::kernels {
namespace {

// Lanes hold [re0, im0, re1, im1]. p accumulates a*b lane-wise and q
// accumulates a*swap(b), so the four real partial sums needed for either
// product form fall out of an even/odd lane reduction at the end.
struct Acc {
  __m256d p = _mm256_setzero_pd();
  __m256d q = _mm256_setzero_pd();
};

inline void lanes(const __m256d v, double& even, double& odd) {
  alignas(32) double t[4];
  _mm256_store_pd(t, v);
  even = t[0] + t[2];
  odd = t[1] + t[3];
}

inline Acc accumulate(const cplx* a, const cplx* b, std::size_t n2) {
  Acc acc;
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  for (std::size_t i = 0; i < n2; i += 2) {
    const __m256d va = _mm256_loadu_pd(pa + 2 * i);
    const __m256d vb = _mm256_loadu_pd(pb + 2 * i);
    acc.p = _mm256_fmadd_pd(va, vb, acc.p);
    acc.q = _mm256_fmadd_pd(va, _mm256_permute_pd(vb, 0b0101), acc.q);
  }
  return acc;
}

cplx cdotc_avx2(const cplx* a, const cplx* b, std::size_t n) {
  const std::size_t n2 = n & ~std::size_t{1};
  const Acc acc = accumulate(a, b, n2);
  double pe, po, qe, qo;
  lanes(acc.p, pe, po);
  lanes(acc.q, qe, qo);
  double re = pe + po, im = qe - qo;
  if (n2 != n) {
    re += a[n2].real() * b[n2].real() + a[n2].imag() * b[n2].imag();
    im += a[n2].real() * b[n2].imag() - a[n2].imag() * b[n2].real();
  }
  return {re, im};
}

cplx cdotu_avx2(const cplx* a, const cplx* b, std::size_t n) {
  const std::size_t n2 = n & ~std::size_t{1};
  const Acc acc = accumulate(a, b, n2);
  double pe, po, qe, qo;
  lanes(acc.p, pe, po);
  lanes(acc.q, qe, qo);
  double re = pe - po, im = qe + qo;
  if (n2 != n) {
    re += a[n2].real() * b[n2].real() - a[n2].imag() * b[n2].imag();
    im += a[n2].real() * b[n2].imag() + a[n2].imag() * b[n2].real();
  }
  return {re, im};
}

double cnorm2_avx2(const cplx* a, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  const std::size_t m = 2 * n;
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const __m256d v = _mm256_loadu_pd(pa + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double e, o;
  lanes(acc, e, o);
  double s = e + o;
  for (; i < m; ++i) s += pa[i] * pa[i];
  return s;
}

void caxpy_avx2(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
  const std::size_t n2 = n & ~std::size_t{1};
  const double* px = reinterpret_cast<const double*>(x);
  double* py = reinterpret_cast<double*>(y);
  const __m256d ar = _mm256_set1_pd(alpha.real());
  const __m256d ai = _mm256_set1_pd(alpha.imag());
  for (std::size_t i = 0; i < n2; i += 2) {
    const __m256d vx = _mm256_loadu_pd(px + 2 * i);
    const __m256d vy = _mm256_loadu_pd(py + 2 * i);
    // alpha*x = ar*[xr, xi] + ai*[-xi, xr]
    const __m256d sw = _mm256_permute_pd(vx, 0b0101);
    const __m256d t = _mm256_mul_pd(ai, sw);
    const __m256d r = _mm256_fmadd_pd(ar, vx, _mm256_addsub_pd(vy, t));
    _mm256_storeu_pd(py + 2 * i, r);
  }
  if (n2 != n) {
    const double xr = x[n2].real(), xi = x[n2].imag();
    y[n2] = {y[n2].real() + alpha.real() * xr - alpha.imag() * xi,
             y[n2].imag() + alpha.real() * xi + alpha.imag() * xr};
  }
}

}  // namespace

const Table* avx2_table() {
  static const Table t{cdotc_avx2, cdotu_avx2, cnorm2_avx2, caxpy_avx2, "avx2"};
  return &t;
}

}  // namespace twrn::kernels
