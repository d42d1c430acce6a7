#include "pkt/phantom.hpp"

#include <cmath>
#include <random>

#include "pkt/errors.hpp"

namespace pkt::phantom {

namespace {
constexpr double kPi = 3.14159265358979323846;

struct Ellipse {
    double cx, cy;      // center, normalized [-1, 1] coords
    double ax, ay;      // semi-axes
    double rot;         // radians
    double intensity;
};

// normalized coordinates in [-1, 1), pixel centers
inline double norm_coord(std::size_t p, std::size_t n) {
    return (double(p) - double(n) / 2.0 + 0.5) / (double(n) / 2.0);
}
}  // namespace

ComplexImage make_phantom(const PhantomSpec& spec) {
    if (spec.n_ellipses < 1 || spec.n_ellipses > 20)
        throw ShapeError("n_ellipses must be in [1, 20]");
    if (!(spec.intensity_lo < spec.intensity_hi))
        throw ShapeError("intensity range must have lo < hi");

    std::mt19937_64 rng(spec.rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Ellipse> ellipses(spec.n_ellipses);
    for (auto& e : ellipses) {
        const double r = 0.55 * std::sqrt(unit(rng));
        const double phi = 2.0 * kPi * unit(rng);
        e.cx = r * std::cos(phi);
        e.cy = r * std::sin(phi);
        e.ax = 0.12 + 0.33 * unit(rng);
        e.ay = 0.12 + 0.33 * unit(rng);
        e.rot = kPi * unit(rng);
        e.intensity =
            spec.intensity_lo +
            (spec.intensity_hi - spec.intensity_lo) * unit(rng);
    }

    // phase field coefficients (shared across the image)
    double phase0 = 0.0;
    double pc[6] = {0, 0, 0, 0, 0, 0};
    if (spec.phase_mode == PhaseMode::uniform_random) {
        phase0 = 2.0 * kPi * unit(rng) - kPi;
    } else {
        for (double& c : pc) c = 2.0 * (unit(rng) - 0.5);
    }

    const std::size_t n = spec.size;
    ComplexImage img(n);
    for (std::size_t y = 0; y < n; ++y) {
        const double v = norm_coord(y, n);
        for (std::size_t x = 0; x < n; ++x) {
            const double u = norm_coord(x, n);
            if (u * u + v * v >
                support_radius_fraction * support_radius_fraction)
                continue;
            double mag = 0.0;
            for (const auto& e : ellipses) {
                const double du = u - e.cx, dv = v - e.cy;
                const double cr = std::cos(e.rot), sr = std::sin(e.rot);
                const double p = (cr * du + sr * dv) / e.ax;
                const double q = (-sr * du + cr * dv) / e.ay;
                if (p * p + q * q <= 1.0) mag += e.intensity;
            }
            if (mag == 0.0) continue;
            double ph = phase0;
            if (spec.phase_mode == PhaseMode::smooth_polynomial)
                ph = pc[0] + pc[1] * u + pc[2] * v + pc[3] * u * u +
                     pc[4] * u * v + pc[5] * v * v;
            img.at(x, y) = std::polar(mag, ph);
        }
    }
    return img;
}

CoilMaps make_coil_maps(std::size_t n_coils, std::size_t size,
                        std::uint64_t rng_seed) {
    if (n_coils < 1) throw ShapeError("need at least one coil");

    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // a single coil degenerates to the identity map
    if (n_coils == 1) {
        CoilMaps out;
        out.n_coils = 1;
        ComplexImage one(size);
        for (auto& v : one.data) v = cplx(1.0, 0.0);
        out.maps.push_back(std::move(one));
        return out;
    }

    // bump centers on a ring around the FOV, plus a smooth linear phase
    // per coil so the maps are genuinely complex
    struct Profile {
        double cx, cy, sigma, ph0, phx, phy;
    };
    std::vector<Profile> profiles(n_coils);
    for (std::size_t c = 0; c < n_coils; ++c) {
        const double ang = 2.0 * kPi * (double(c) + 0.5) / double(n_coils);
        profiles[c] = {0.75 * std::cos(ang),
                       0.75 * std::sin(ang),
                       0.8 + 0.2 * unit(rng),
                       2.0 * kPi * unit(rng),
                       0.6 * (unit(rng) - 0.5),
                       0.6 * (unit(rng) - 0.5)};
    }

    CoilMaps out;
    out.n_coils = n_coils;
    out.maps.assign(n_coils, ComplexImage(size));
    for (std::size_t y = 0; y < size; ++y) {
        const double v = norm_coord(y, size);
        for (std::size_t x = 0; x < size; ++x) {
            const double u = norm_coord(x, size);
            double rss = 0.0;
            for (std::size_t c = 0; c < n_coils; ++c) {
                const auto& p = profiles[c];
                const double du = u - p.cx, dv = v - p.cy;
                const double g =
                    std::exp(-(du * du + dv * dv) / (2.0 * p.sigma * p.sigma));
                rss += g * g;
            }
            rss = std::sqrt(rss);
            for (std::size_t c = 0; c < n_coils; ++c) {
                const auto& p = profiles[c];
                const double du = u - p.cx, dv = v - p.cy;
                const double g =
                    std::exp(-(du * du + dv * dv) / (2.0 * p.sigma * p.sigma));
                out.maps[c].at(x, y) =
                    std::polar(g / rss, p.ph0 + p.phx * u + p.phy * v);
            }
        }
    }
    return out;
}

std::vector<ComplexImage> apply_coils(const ComplexImage& img,
                                      const CoilMaps& coils) {
    std::vector<ComplexImage> out;
    out.reserve(coils.n_coils);
    for (const auto& map : coils.maps) {
        if (map.size != img.size)
            throw ShapeError("coil map size does not match image");
        ComplexImage c(img.size);
        for (std::size_t i = 0; i < img.data.size(); ++i)
            c.data[i] = img.data[i] * map.data[i];
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace pkt::phantom
