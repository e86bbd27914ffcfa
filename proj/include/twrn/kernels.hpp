#pragma once

// Complex inner-loop kernels. Every routine has a scalar reference and an
// AVX2+FMA variant; the active table is picked once at startup from cpuid.
// TWRN_SIMD=scalar in the environment pins the scalar table.

#include <complex>
#include <cstddef>

namespace twrn::kernels {

using cplx = std::complex<double>;

struct Table {
  // sum conj(a[i]) * b[i]
  cplx (*cdotc)(const cplx* a, const cplx* b, std::size_t n);
  // sum a[i] * b[i]
  cplx (*cdotu)(const cplx* a, const cplx* b, std::size_t n);
  // sum |a[i]|^2
  double (*cnorm2)(const cplx* a, std::size_t n);
  // y[i] += alpha * x[i]
  void (*caxpy)(cplx alpha, const cplx* x, cplx* y, std::size_t n);
  const char* name;
};

const Table& scalar_table();
// nullptr when the binary was built without AVX2 support.
const Table* avx2_table();

bool cpu_has_avx2();
const Table& active();

inline cplx cdotc(const cplx* a, const cplx* b, std::size_t n) { return active().cdotc(a, b, n); }
inline cplx cdotu(const cplx* a, const cplx* b, std::size_t n) { return active().cdotu(a, b, n); }
inline double cnorm2(const cplx* a, std::size_t n) { return active().cnorm2(a, n); }
inline void caxpy(cplx alpha, const cplx* x, cplx* y, std::size_t n) { active().caxpy(alpha, x, y, n); }

}  // namespace twrn::kernels
