#include <cstdlib>
#include <string>

#include "ptrner/kernels.hpp"

namespace ptrner::kernels {

#ifdef PTRNER_HAVE_AVX2
const KernelTable& avx2_kernels();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(PTRNER_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("PTRNER_ISA"); env != nullptr && std::string(env) == "scalar") {
    return &scalar_table();
  }
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

const KernelTable*& current() {
  static const KernelTable* table = initial_table();
  return table;
}

}  // namespace

const KernelTable* avx2_table() {
#ifdef PTRNER_HAVE_AVX2
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_kernels() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current(); }

bool select(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      current() = &scalar_table();
      return true;
    case Isa::Avx2:
      if (const KernelTable* t = avx2_table()) {
        current() = t;
        return true;
      }
      return false;
  }
  return false;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

}  // namespace ptrner::kernels
