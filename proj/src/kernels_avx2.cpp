// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma;
// callers must check avx2_available() before dispatching here.
#include "pkt/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace pkt::kernels {
namespace {

void matmul_acc_avx2(const double* a, const double* b, double* c,
                     std::size_t m, std::size_t k, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        std::size_t p = 0;
        // two k-steps per pass keeps both FMA ports busy
        for (; p + 1 < k; p += 2) {
            const __m256d a0 = _mm256_set1_pd(arow[p]);
            const __m256d a1 = _mm256_set1_pd(arow[p + 1]);
            const double* b0 = b + p * n;
            const double* b1 = b0 + n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d cj = _mm256_loadu_pd(crow + j);
                cj = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), cj);
                cj = _mm256_fmadd_pd(a1, _mm256_loadu_pd(b1 + j), cj);
                _mm256_storeu_pd(crow + j, cj);
            }
            for (; j < n; ++j) crow[j] += arow[p] * b0[j] + arow[p + 1] * b1[j];
        }
        for (; p < k; ++p) {
            const __m256d a0 = _mm256_set1_pd(arow[p]);
            const double* b0 = b + p * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d cj = _mm256_loadu_pd(crow + j);
                cj = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), cj);
                _mm256_storeu_pd(crow + j, cj);
            }
            for (; j < n; ++j) crow[j] += arow[p] * b0[j];
        }
    }
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void cdot_avx2(const double* a, const double* b, std::size_t n,
               double* re_out, double* im_out) {
    const __m256d sign = _mm256_set_pd(-1.0, 1.0, -1.0, 1.0);
    __m256d re_acc = _mm256_setzero_pd();
    __m256d im_acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n2 = n & ~std::size_t(1);  // 2 complex per vector
    for (; i < n2; i += 2) {
        const __m256d va = _mm256_loadu_pd(a + 2 * i);
        const __m256d vb = _mm256_loadu_pd(b + 2 * i);
        const __m256d vb_swap = _mm256_permute_pd(vb, 0b0101);
        re_acc = _mm256_fmadd_pd(va, _mm256_mul_pd(vb, sign), re_acc);
        im_acc = _mm256_fmadd_pd(va, vb_swap, im_acc);
    }
    double re = hsum(re_acc), im = hsum(im_acc);
    for (; i < n; ++i) {
        const double ar = a[2 * i], ai = a[2 * i + 1];
        const double br = b[2 * i], bi = b[2 * i + 1];
        re += ar * br - ai * bi;
        im += ar * bi + ai * br;
    }
    *re_out = re;
    *im_out = im;
}

void caxpy_avx2(double ar, double ai, const double* x, double* y,
                std::size_t n) {
    const __m256d var = _mm256_set1_pd(ar);
    const __m256d vai = _mm256_set_pd(ai, -ai, ai, -ai);
    std::size_t i = 0;
    const std::size_t n2 = n & ~std::size_t(1);
    for (; i < n2; i += 2) {
        const __m256d vx = _mm256_loadu_pd(x + 2 * i);
        __m256d vy = _mm256_loadu_pd(y + 2 * i);
        vy = _mm256_fmadd_pd(var, vx, vy);
        vy = _mm256_fmadd_pd(vai, _mm256_permute_pd(vx, 0b0101), vy);
        _mm256_storeu_pd(y + 2 * i, vy);
    }
    for (; i < n; ++i) {
        const double xr = x[2 * i], xi = x[2 * i + 1];
        y[2 * i] += ar * xr - ai * xi;
        y[2 * i + 1] += ar * xi + ai * xr;
    }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n8 = n & ~std::size_t(7);
    for (; i < n8; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                               acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                               _mm256_loadu_pd(b + i + 4), acc1);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    const std::size_t n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

bool avx2_available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const Ops& avx2_ops() {
    static const Ops ops{"avx2", matmul_acc_avx2, cdot_avx2, caxpy_avx2,
                         dot_avx2, axpy_avx2};
    return ops;
}

}  // namespace pkt::kernels

#else

namespace pkt::kernels {
bool avx2_available() { return false; }
const Ops& avx2_ops() { return scalar_ops(); }
}  // namespace pkt::kernels

#endif
