#include "pkt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "pkt/errors.hpp"

namespace pkt::metrics {

void normalize_pair(std::vector<double>& x, std::vector<double>& ref) {
    if (x.size() != ref.size()) throw ShapeError("normalize_pair size mismatch");
    const double px = dataset::percentile(x, 90.0);
    const double pr = dataset::percentile(ref, 90.0);
    if (!(px > 0.0) || !(pr > 0.0))
        throw NumericError("90th percentile is zero");
    for (double& v : x) v /= px;
    for (double& v : ref) v /= pr;
}

double nmse(const std::vector<double>& x, const std::vector<double>& ref) {
    if (x.size() != ref.size()) throw ShapeError("nmse size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - ref[i];
        num += d * d;
        den += ref[i] * ref[i];
    }
    if (!(den > 0.0)) throw NumericError("nmse reference is zero");
    return num / den;
}

double psnr(const std::vector<double>& x, const std::vector<double>& ref) {
    if (x.size() != ref.size()) throw ShapeError("psnr size mismatch");
    double mse = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - ref[i];
        mse += d * d;
        peak = std::max(peak, ref[i]);
    }
    mse /= double(x.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

std::vector<double> gaussian_window_11(double sigma) {
    std::vector<double> w(11 * 11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            const double di = i - 5, dj = j - 5;
            w[std::size_t(i * 11 + j)] =
                std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            sum += w[std::size_t(i * 11 + j)];
        }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

double ssim(const std::vector<double>& x, const std::vector<double>& ref,
            std::size_t width, std::size_t height) {
    if (x.size() != width * height || ref.size() != x.size())
        throw ShapeError("ssim size mismatch");
    if (width < 11 || height < 11)
        throw ShapeError("image smaller than the 11x11 ssim window");

    static const std::vector<double> w = gaussian_window_11(1.5);
    double lo = ref[0], hi = ref[0];
    for (double v : ref) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double L = hi - lo;
    const double c1 = (0.01 * L) * (0.01 * L);
    const double c2 = (0.03 * L) * (0.03 * L);

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t cy = 5; cy + 5 < height; ++cy) {
        for (std::size_t cx = 5; cx + 5 < width; ++cx) {
            double mx = 0, mr = 0;
            for (int i = -5; i <= 5; ++i)
                for (int j = -5; j <= 5; ++j) {
                    const double wij = w[std::size_t((i + 5) * 11 + (j + 5))];
                    const std::size_t idx =
                        (cy + std::size_t(std::ptrdiff_t(i))) * width +
                        (cx + std::size_t(std::ptrdiff_t(j)));
                    mx += wij * x[idx];
                    mr += wij * ref[idx];
                }
            double vx = 0, vr = 0, cov = 0;
            for (int i = -5; i <= 5; ++i)
                for (int j = -5; j <= 5; ++j) {
                    const double wij = w[std::size_t((i + 5) * 11 + (j + 5))];
                    const std::size_t idx =
                        (cy + std::size_t(std::ptrdiff_t(i))) * width +
                        (cx + std::size_t(std::ptrdiff_t(j)));
                    const double dx = x[idx] - mx, dr = ref[idx] - mr;
                    vx += wij * dx * dx;
                    vr += wij * dr * dr;
                    cov += wij * dx * dr;
                }
            const double s =
                ((2.0 * mx * mr + c1) * (2.0 * cov + c2)) /
                ((mx * mx + mr * mr + c1) * (vx + vr + c2));
            total += s;
            ++count;
        }
    }
    return total / double(count);
}

double proj_nmse(const dataset::ProjectionSequence& pred,
                 const dataset::ProjectionSequence& truth) {
    if (pred.n_tokens != truth.n_tokens || pred.d_model != truth.d_model)
        throw ShapeError("proj_nmse shape mismatch");
    return nmse(pred.tokens, truth.tokens);
}

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}

}  // namespace

std::string format_report(const std::vector<MetricsRecord>& records) {
    std::ostringstream os;
    os << "method,subject,slice,nmse,psnr_db,ssim,proj_nmse\n";
    for (const auto& r : records) {
        os << r.method << "," << r.subject << "," << r.slice << ","
           << fmt(r.nmse) << "," << fmt(r.psnr_db) << "," << fmt(r.ssim)
           << ",";
        if (r.proj_nmse) os << fmt(*r.proj_nmse);
        os << "\n";
    }
    // per-method mean +/- std summaries, in first-seen order
    std::vector<std::string> order;
    std::map<std::string, std::vector<const MetricsRecord*>> by_method;
    for (const auto& r : records) {
        if (by_method.find(r.method) == by_method.end())
            order.push_back(r.method);
        by_method[r.method].push_back(&r);
    }
    auto mean_std = [](const std::vector<double>& v) {
        double m = 0;
        for (double x : v) m += x;
        m /= double(v.size());
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        s = v.size() > 1 ? std::sqrt(s / double(v.size() - 1)) : 0.0;
        return std::pair<double, double>(m, s);
    };
    for (const auto& method : order) {
        const auto& rs = by_method[method];
        std::vector<double> nm, ps, ss, pn;
        for (const auto* r : rs) {
            nm.push_back(r->nmse);
            ps.push_back(r->psnr_db);
            ss.push_back(r->ssim);
            if (r->proj_nmse) pn.push_back(*r->proj_nmse);
        }
        const auto [nm_m, nm_s] = mean_std(nm);
        const auto [ps_m, ps_s] = mean_std(ps);
        const auto [ss_m, ss_s] = mean_std(ss);
        os << method << ",summary,mean±std," << fmt(nm_m) << "±" << fmt(nm_s)
           << "," << fmt(ps_m) << "±" << fmt(ps_s) << "," << fmt(ss_m) << "±"
           << fmt(ss_s) << ",";
        if (!pn.empty()) {
            const auto [pn_m, pn_s] = mean_std(pn);
            os << fmt(pn_m) << "±" << fmt(pn_s);
        }
        os << "\n";
    }
    return os.str();
}

void emit_report(const std::string& path,
                 const std::vector<MetricsRecord>& records) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open report for writing: " + path);
    f << format_report(records);
    if (!f) throw FormatError("report write failed: " + path);
}

}  // namespace pkt::metrics
