#include "fbsdekit/kernels.hpp"

namespace fbsdekit::kernels {
namespace {

const Backend& pick_backend() {
#if defined(FBSDEKIT_HAVE_AVX2)
#if defined(__GNUC__) || defined(__clang__)
    if (__builtin_cpu_supports("avx2")) return avx2_backend();
#endif
#endif
    return scalar_backend();
}

}  // namespace

const Backend& active_backend() {
    static const Backend& b = pick_backend();
    return b;
}

}  // namespace fbsdekit::kernels
