#include "pkt/fourier.hpp"

#include <cmath>

#include "pkt/errors.hpp"
#include "pkt/kernels.hpp"

namespace pkt::fourier {

namespace {
constexpr double kPi = 3.14159265358979323846;

// phasor[p] = exp(sign * 2*pi*i * k * (p - N/2) / N)
void fill_phasors(double k, std::size_t n, double sign, cplx* out) {
    for (std::size_t p = 0; p < n; ++p) {
        const double arg =
            sign * 2.0 * kPi * k * (double(p) - double(n) / 2.0) / double(n);
        out[p] = cplx(std::cos(arg), std::sin(arg));
    }
}

const double* raw(const std::vector<cplx>& v) {
    return reinterpret_cast<const double*>(v.data());
}
double* raw(std::vector<cplx>& v) { return reinterpret_cast<double*>(v.data()); }

// Density weights per sample of each spoke: ramp |k|*dk with the DC
// sample at dk^2/8, normalized over the whole set to sum to pi/4.
// The spokes sample the disc inscribed in the Cartesian k-square, so
// the disc's area fraction is the correct total quadrature weight; a
// unit sum would inflate the image amplitude by 4/pi.
std::vector<double> ramp_weights(const SpokeSet& set) {
    const std::size_t n = set.cfg.n_readout;
    const double dk = set.cfg.delta_k();
    std::vector<double> w(n);
    double per_spoke_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double k = (double(j) - double(n) / 2.0) * dk;
        w[j] = (j == n / 2) ? dk * dk / 8.0 : std::abs(k) * dk;
        per_spoke_sum += w[j];
    }
    const double total =
        per_spoke_sum * double(set.spokes.size()) * (4.0 / kPi);
    for (auto& x : w) x /= total;
    return w;
}
}  // namespace

SpokeSet ndft_forward(const ComplexImage& img,
                      const std::vector<std::size_t>& indices,
                      const traj::TrajectoryConfig& cfg) {
    cfg.validate();
    if (indices.empty()) throw ShapeError("need at least one spoke index");
    const std::size_t N = img.size;
    if (N == 0) throw ShapeError("empty image");

    const auto& k = kernels::active();
    SpokeSet out;
    out.cfg = cfg;
    out.spokes.reserve(indices.size());

    std::vector<cplx> px(N), py(N), rowsums(N);
    for (std::size_t idx : indices) {
        const auto coords = traj::spoke_coords(idx, cfg);
        Spoke s;
        s.index = idx;
        s.angle_deg = coords.angle_deg;
        s.samples.resize(cfg.n_readout);
        for (std::size_t j = 0; j < cfg.n_readout; ++j) {
            fill_phasors(coords.kx[j], N, -1.0, px.data());
            fill_phasors(coords.ky[j], N, -1.0, py.data());
            for (std::size_t y = 0; y < N; ++y) {
                double re, im;
                k.cdot(reinterpret_cast<const double*>(&img.data[y * N]),
                       raw(px), N, &re, &im);
                rowsums[y] = cplx(re, im);
            }
            double re, im;
            k.cdot(raw(py), raw(rowsums), N, &re, &im);
            s.samples[j] = cplx(re, im);
        }
        out.spokes.push_back(std::move(s));
    }
    return out;
}

ComplexImage adjoint_recon(const SpokeSet& set, std::size_t size,
                           bool compensate) {
    if (set.spokes.empty()) throw ShapeError("need at least one spoke");
    const std::size_t n = set.cfg.n_readout;
    const double dk = set.cfg.delta_k();
    const auto& k = kernels::active();

    std::vector<double> w;
    if (compensate) w = ramp_weights(set);

    ComplexImage img(size);
    std::vector<cplx> px(size), py(size);
    for (const auto& s : set.spokes) {
        if (s.samples.size() != n)
            throw ShapeError("spoke length does not match config");
        const double theta = s.angle_deg * kPi / 180.0;
        const double c = std::cos(theta), si = std::sin(theta);
        for (std::size_t j = 0; j < n; ++j) {
            const double kr = (double(j) - double(n) / 2.0) * dk;
            cplx a = s.samples[j];
            if (compensate) a *= w[j];
            if (a == cplx(0.0, 0.0)) continue;
            fill_phasors(kr * c, size, +1.0, px.data());
            fill_phasors(kr * si, size, +1.0, py.data());
            for (std::size_t y = 0; y < size; ++y) {
                const cplx ay = a * py[y];
                k.caxpy(ay.real(), ay.imag(), raw(px),
                        reinterpret_cast<double*>(&img.data[y * size]), size);
            }
        }
    }
    return img;
}

Projection spoke_to_projection(const Spoke& s) {
    const std::size_t n = s.samples.size();
    Projection p;
    p.index = s.index;
    p.angle_deg = s.angle_deg;
    p.samples.assign(n, cplx(0.0, 0.0));
    const double scale = 1.0 / std::sqrt(double(n));
    // twiddle[m] = exp(2*pi*i*m/n)
    std::vector<cplx> tw(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double arg = 2.0 * kPi * double(m) / double(n);
        tw[m] = cplx(std::cos(arg), std::sin(arg));
    }
    const std::ptrdiff_t half = std::ptrdiff_t(n / 2);
    for (std::size_t t = 0; t < n; ++t) {
        cplx acc(0.0, 0.0);
        const std::ptrdiff_t tc = std::ptrdiff_t(t) - half;
        for (std::size_t f = 0; f < n; ++f) {
            const std::ptrdiff_t fc = std::ptrdiff_t(f) - half;
            std::ptrdiff_t m = (tc * fc) % std::ptrdiff_t(n);
            if (m < 0) m += std::ptrdiff_t(n);
            acc += s.samples[f] * tw[std::size_t(m)];
        }
        p.samples[t] = acc * scale;
    }
    return p;
}

Spoke projection_to_spoke(const Projection& p) {
    const std::size_t n = p.samples.size();
    Spoke s;
    s.index = p.index;
    s.angle_deg = p.angle_deg;
    s.samples.assign(n, cplx(0.0, 0.0));
    const double scale = 1.0 / std::sqrt(double(n));
    std::vector<cplx> tw(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double arg = -2.0 * kPi * double(m) / double(n);
        tw[m] = cplx(std::cos(arg), std::sin(arg));
    }
    const std::ptrdiff_t half = std::ptrdiff_t(n / 2);
    for (std::size_t f = 0; f < n; ++f) {
        cplx acc(0.0, 0.0);
        const std::ptrdiff_t fc = std::ptrdiff_t(f) - half;
        for (std::size_t t = 0; t < n; ++t) {
            const std::ptrdiff_t tc = std::ptrdiff_t(t) - half;
            std::ptrdiff_t m = (tc * fc) % std::ptrdiff_t(n);
            if (m < 0) m += std::ptrdiff_t(n);
            acc += p.samples[t] * tw[std::size_t(m)];
        }
        s.samples[f] = acc * scale;
    }
    return s;
}

}  // namespace pkt::fourier
