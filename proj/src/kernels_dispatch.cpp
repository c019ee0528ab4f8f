#include "meshpose/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace meshpose::kernels {
namespace {

Backend g_backend = Backend::Auto;
const Ops* g_active = nullptr;

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

const Ops* resolve(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &scalar_ops;
    case Backend::Avx2: {
      const Ops* v = avx2_ops();
      if (!v || !cpu_has_avx2()) throw std::runtime_error("avx2 kernel backend not available on this machine");
      return v;
    }
    case Backend::Auto:
    default: {
      const Ops* v = avx2_ops();
      return (v && cpu_has_avx2()) ? v : &scalar_ops;
    }
  }
}

Backend backend_from_env() {
  const char* e = std::getenv("MESHPOSE_KERNELS");
  if (!e) return Backend::Auto;
  if (std::strcmp(e, "scalar") == 0) return Backend::Scalar;
  if (std::strcmp(e, "avx2") == 0) return Backend::Avx2;
  return Backend::Auto;
}

}  // namespace

bool avx2_supported() { return avx2_ops() != nullptr && cpu_has_avx2(); }

void set_backend(Backend b) {
  g_active = resolve(b);
  g_backend = b;
}

Backend active_backend() { return g_backend; }

const Ops& active() {
  if (!g_active) {
    g_backend = backend_from_env();
    g_active = resolve(g_backend);
  }
  return *g_active;
}

}  // namespace meshpose::kernels
