#include <cstdlib>
#include <cstring>

#include "twrn/kernels.hpp"

namespace twrn::kernels {

#ifndef TWRN_HAVE_AVX2
const Table* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(TWRN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const Table& pick() {
  const char* env = std::getenv("TWRN_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return scalar_table();
  if (cpu_has_avx2() && avx2_table()) return *avx2_table();
  return scalar_table();
}

}  // namespace

const Table& active() {
  static const Table& t = pick();
  return t;
}

}  // namespace twrn::kernels
