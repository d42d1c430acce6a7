#pragma once

#include <cstddef>
#include <vector>

#include "pkt/image.hpp"
#include "pkt/trajectory.hpp"

namespace pkt::fourier {

// One radial k-space readout. `index` is the chronological spoke index
// (re-based inside sliding windows); `angle_deg` always keeps the
// original acquisition angle. DC sits at sample n_readout/2.
struct Spoke {
    std::size_t index = 0;
    double angle_deg = 0.0;
    std::vector<cplx> samples;
};

// Image-domain counterpart of a Spoke: its centered unitary inverse DFT.
struct Projection {
    std::size_t index = 0;
    double angle_deg = 0.0;
    std::vector<cplx> samples;
};

struct SpokeSet {
    traj::TrajectoryConfig cfg;
    std::vector<Spoke> spokes;  // sorted by index
};

// Exact direct NDFT of a square image onto the given golden-angle
// spokes: sample = sum_{x,y} img(x,y) exp(-2*pi*i*(kx*x + ky*y)/N)
// with centered integer pixel coordinates in [-N/2, N/2).
SpokeSet ndft_forward(const ComplexImage& img,
                      const std::vector<std::size_t>& indices,
                      const traj::TrajectoryConfig& cfg);

// Conjugate transpose of ndft_forward. With compensate=true the samples
// are ramp-weighted, w = |k|*delta_k (DC: delta_k^2/8), normalized so
// the weights sum to 1.
ComplexImage adjoint_recon(const SpokeSet& spokes, std::size_t size,
                           bool compensate);

// Centered unitary inverse/forward 1D DFT pair (DC at n/2, 1/sqrt(n)).
Projection spoke_to_projection(const Spoke& s);
Spoke projection_to_spoke(const Projection& p);

}  // namespace pkt::fourier
