#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace pkt {

using cplx = std::complex<double>;

// Square 2D complex image, row-major.
struct ComplexImage {
    std::size_t size = 0;  // width == height
    std::vector<cplx> data;

    ComplexImage() = default;
    explicit ComplexImage(std::size_t n) : size(n), data(n * n) {}

    cplx& at(std::size_t x, std::size_t y) { return data[y * size + x]; }
    const cplx& at(std::size_t x, std::size_t y) const {
        return data[y * size + x];
    }
};

}  // namespace pkt
