#pragma once

#include <cstddef>
#include <string>

namespace pkt::kernels {

// Hot inner loops, provided as a scalar reference implementation and
// SIMD variants selected at runtime. All arrays are dense, row-major,
// double precision; complex arrays are interleaved (re, im) pairs.
struct Ops {
    const char* name;

    // C (m x n) += A (m x k) * B (k x n)
    void (*matmul_acc)(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n);

    // sum_i a[i] * b[i] over n complex elements (no conjugation)
    void (*cdot)(const double* a, const double* b, std::size_t n,
                 double* re_out, double* im_out);

    // y[i] += (ar + i*ai) * x[i] over n complex elements
    void (*caxpy)(double ar, double ai, const double* x, double* y,
                  std::size_t n);

    double (*dot)(const double* a, const double* b, std::size_t n);

    void (*axpy)(double a, const double* x, double* y, std::size_t n);
};

const Ops& scalar_ops();
bool avx2_available();
const Ops& avx2_ops();  // valid only if avx2_available()
bool neon_available();
const Ops& neon_ops();  // valid only if neon_available()

// Variant picked at first use: PKT_KERNELS env var (scalar/avx2/neon)
// overrides auto-detection.
const Ops& active();

}  // namespace pkt::kernels
