#include "pkt/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "pkt/errors.hpp"

namespace pkt::traj {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double golden_angle_deg() {
    static const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    return 180.0 / phi;
}

TrajectoryConfig TrajectoryConfig::for_readout(std::size_t n_readout) {
    TrajectoryConfig cfg;
    cfg.n_readout = n_readout;
    cfg.k_max = double(n_readout) / 4.0;
    cfg.validate();
    return cfg;
}

void TrajectoryConfig::validate() const {
    if (n_readout < 4 || n_readout % 2 != 0)
        throw ShapeError("n_readout must be even and >= 4");
    if (!(golden_angle > 0.0 && golden_angle < 360.0))
        throw ShapeError("golden_angle must be in (0, 360)");
    if (!(k_max > 0.0)) throw ShapeError("k_max must be positive");
}

double spoke_angle(std::size_t index, const TrajectoryConfig& cfg) {
    double a = std::fmod(double(index) * cfg.golden_angle, 360.0);
    if (a < 0.0) a += 360.0;
    return a;
}

SpokeCoords spoke_coords(std::size_t index, const TrajectoryConfig& cfg) {
    cfg.validate();
    SpokeCoords out;
    out.index = index;
    out.angle_deg = spoke_angle(index, cfg);
    const double theta = out.angle_deg * kPi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double dk = cfg.delta_k();
    const std::size_t n = cfg.n_readout;
    out.kx.resize(n);
    out.ky.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double k = (double(j) - double(n) / 2.0) * dk;
        out.kx[j] = k * c;
        out.ky[j] = k * s;
    }
    return out;
}

std::size_t nyquist_spoke_count(std::size_t n_readout_nominal) {
    if (n_readout_nominal < 2)
        throw ShapeError("nominal readout must be >= 2");
    return std::size_t(std::ceil(double(n_readout_nominal) * kPi / 2.0));
}

double max_angular_gap(std::size_t n_spokes, const TrajectoryConfig& cfg) {
    if (n_spokes == 0) throw ShapeError("need at least one spoke");
    if (n_spokes == 1) return 180.0;
    std::vector<double> dirs(n_spokes);
    for (std::size_t i = 0; i < n_spokes; ++i)
        dirs[i] = std::fmod(spoke_angle(i, cfg), 180.0);
    std::sort(dirs.begin(), dirs.end());
    double max_gap = dirs.front() + 180.0 - dirs.back();  // wraparound
    for (std::size_t i = 1; i < n_spokes; ++i)
        max_gap = std::max(max_gap, dirs[i] - dirs[i - 1]);
    return max_gap;
}

}  // namespace pkt::traj
