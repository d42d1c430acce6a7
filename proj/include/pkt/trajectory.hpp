#pragma once

#include <cstddef>
#include <vector>

namespace pkt::traj {

// Exact golden angle in degrees, 180/phi with phi the golden ratio.
double golden_angle_deg();

struct TrajectoryConfig {
    // samples per spoke, includes the 2x readout oversampling
    std::size_t n_readout = 128;
    double golden_angle = golden_angle_deg();  // degrees
    // cycles/FOV; n_readout/4 keeps the image-space Nyquist on the
    // n_readout/2 image grid
    double k_max = 32.0;

    static TrajectoryConfig for_readout(std::size_t n_readout);
    double delta_k() const { return 2.0 * k_max / double(n_readout); }
    void validate() const;  // throws ShapeError on bad geometry
};

struct SpokeCoords {
    std::size_t index = 0;
    double angle_deg = 0.0;
    std::vector<double> kx, ky;  // cycles/FOV, length n_readout
};

// angle of the index-th golden-angle spoke, in [0, 360)
double spoke_angle(std::size_t index, const TrajectoryConfig& cfg);

// k-space sample positions of one spoke; signed radius grid
// k_j = (j - n/2) * delta_k, rotated by spoke_angle(index)
SpokeCoords spoke_coords(std::size_t index, const TrajectoryConfig& cfg);

// ceil(n_readout_nominal * pi / 2); nominal = without oversampling
std::size_t nyquist_spoke_count(std::size_t n_readout_nominal);

// largest gap (degrees) between adjacent spoke directions, angles
// folded mod 180; n_spokes = 1 gives 180
double max_angular_gap(std::size_t n_spokes, const TrajectoryConfig& cfg);

}  // namespace pkt::traj
