#pragma once

#include <cstdint>
#include <vector>

#include "pkt/image.hpp"

namespace pkt::phantom {

enum class PhaseMode { uniform_random, smooth_polynomial };

struct PhantomSpec {
    std::size_t size = 64;          // pixels, width == height
    std::size_t n_ellipses = 5;     // 1..20
    double intensity_lo = 0.3;
    double intensity_hi = 1.0;
    PhaseMode phase_mode = PhaseMode::smooth_polynomial;
    std::uint64_t rng_seed = 0;
};

struct CoilMaps {
    std::size_t n_coils = 0;
    std::vector<ComplexImage> maps;
};

// Fraction of the half-width inside which the phantom may be nonzero.
constexpr double support_radius_fraction = 0.95;

// Superposition of randomized rotated ellipses inside the support disc,
// with complex phase per phase_mode. Deterministic in the seed.
ComplexImage make_phantom(const PhantomSpec& spec);

// Smooth complex Gaussian-bump coil profiles at equispaced angular
// positions, pointwise normalized so the root-sum-of-squares is 1.
CoilMaps make_coil_maps(std::size_t n_coils, std::size_t size,
                        std::uint64_t rng_seed);

// Per-coil elementwise product.
std::vector<ComplexImage> apply_coils(const ComplexImage& img,
                                      const CoilMaps& coils);

}  // namespace pkt::phantom
