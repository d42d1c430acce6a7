#include "pkt/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace pkt::kernels {
namespace {

const Ops& pick() {
    if (const char* env = std::getenv("PKT_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return scalar_ops();
        if (std::strcmp(env, "avx2") == 0 && avx2_available())
            return avx2_ops();
        if (std::strcmp(env, "neon") == 0 && neon_available())
            return neon_ops();
    }
    if (avx2_available()) return avx2_ops();
    if (neon_available()) return neon_ops();
    return scalar_ops();
}

}  // namespace

const Ops& active() {
    static const Ops& ops = pick();
    return ops;
}

}  // namespace pkt::kernels
