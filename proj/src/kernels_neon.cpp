// NEON variants (aarch64). Mirrors the scalar reference exactly in
// semantics; covered by the same equivalence tests when built on ARM.
#include "pkt/kernels.hpp"

#if defined(__aarch64__) || defined(_M_ARM64)

#include <arm_neon.h>

namespace pkt::kernels {
namespace {

void matmul_acc_neon(const double* a, const double* b, double* c,
                     std::size_t m, std::size_t k, std::size_t n) {
    const std::size_t n2 = n & ~std::size_t(1);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const float64x2_t va = vdupq_n_f64(arow[p]);
            const double* brow = b + p * n;
            std::size_t j = 0;
            for (; j < n2; j += 2) {
                float64x2_t cj = vld1q_f64(crow + j);
                cj = vfmaq_f64(cj, va, vld1q_f64(brow + j));
                vst1q_f64(crow + j, cj);
            }
            for (; j < n; ++j) crow[j] += arow[p] * brow[j];
        }
    }
}

void cdot_neon(const double* a, const double* b, std::size_t n,
               double* re_out, double* im_out) {
    float64x2_t re_acc = vdupq_n_f64(0.0);
    float64x2_t im_acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    const std::size_t n2 = n & ~std::size_t(1);
    for (; i < n2; i += 2) {
        // de-interleave 2 complex values: v.val[0]=re, v.val[1]=im
        const float64x2x2_t va = vld2q_f64(a + 2 * i);
        const float64x2x2_t vb = vld2q_f64(b + 2 * i);
        re_acc = vfmaq_f64(re_acc, va.val[0], vb.val[0]);
        re_acc = vfmsq_f64(re_acc, va.val[1], vb.val[1]);
        im_acc = vfmaq_f64(im_acc, va.val[0], vb.val[1]);
        im_acc = vfmaq_f64(im_acc, va.val[1], vb.val[0]);
    }
    double re = vaddvq_f64(re_acc), im = vaddvq_f64(im_acc);
    for (; i < n; ++i) {
        const double ar = a[2 * i], ai = a[2 * i + 1];
        const double br = b[2 * i], bi = b[2 * i + 1];
        re += ar * br - ai * bi;
        im += ar * bi + ai * br;
    }
    *re_out = re;
    *im_out = im;
}

void caxpy_neon(double ar, double ai, const double* x, double* y,
                std::size_t n) {
    const float64x2_t var = vdupq_n_f64(ar);
    const float64x2_t vai = vdupq_n_f64(ai);
    std::size_t i = 0;
    const std::size_t n2 = n & ~std::size_t(1);
    for (; i < n2; i += 2) {
        const float64x2x2_t vx = vld2q_f64(x + 2 * i);
        float64x2x2_t vy = vld2q_f64(y + 2 * i);
        vy.val[0] = vfmaq_f64(vy.val[0], var, vx.val[0]);
        vy.val[0] = vfmsq_f64(vy.val[0], vai, vx.val[1]);
        vy.val[1] = vfmaq_f64(vy.val[1], var, vx.val[1]);
        vy.val[1] = vfmaq_f64(vy.val[1], vai, vx.val[0]);
        vst2q_f64(y + 2 * i, vy);
    }
    for (; i < n; ++i) {
        const double xr = x[2 * i], xi = x[2 * i + 1];
        y[2 * i] += ar * xr - ai * xi;
        y[2 * i + 1] += ar * xi + ai * xr;
    }
}

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    const std::size_t n2 = n & ~std::size_t(1);
    for (; i < n2; i += 2)
        acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    const std::size_t n2 = n & ~std::size_t(1);
    for (; i < n2; i += 2) {
        float64x2_t vy = vld1q_f64(y + i);
        vy = vfmaq_f64(vy, va, vld1q_f64(x + i));
        vst1q_f64(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

bool neon_available() { return true; }

const Ops& neon_ops() {
    static const Ops ops{"neon", matmul_acc_neon, cdot_neon, caxpy_neon,
                         dot_neon, axpy_neon};
    return ops;
}

}  // namespace pkt::kernels

#else

namespace pkt::kernels {
bool neon_available() { return false; }
const Ops& neon_ops() { return scalar_ops(); }
}  // namespace pkt::kernels

#endif
