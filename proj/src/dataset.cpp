#include "pkt/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "pkt/errors.hpp"

namespace pkt::dataset {

std::size_t window_count(std::size_t total_spokes, std::size_t window,
                         std::size_t step) {
    if (window > total_spokes)
        throw ShapeError("window larger than spoke count");
    if (step == 0) throw ShapeError("step must be >= 1");
    return (total_spokes - window) / step + 1;
}

std::size_t effective_dataset_size(const AugmentationPlan& plan) {
    return plan.n_sub * plan.n_reg * plan.n_slc * plan.n_coil *
           (plan.total_spokes / 400);
}

std::vector<fourier::SpokeSet> make_windows(const fourier::SpokeSet& spokes,
                                            std::size_t window,
                                            std::size_t step) {
    const std::size_t n_win =
        window_count(spokes.spokes.size(), window, step);
    std::vector<fourier::SpokeSet> out;
    out.reserve(n_win);
    for (std::size_t w = 0; w < n_win; ++w) {
        fourier::SpokeSet set;
        set.cfg = spokes.cfg;
        set.spokes.reserve(window);
        for (std::size_t t = 0; t < window; ++t) {
            fourier::Spoke s = spokes.spokes[w * step + t];
            s.index = t;  // re-based for positional encoding
            set.spokes.push_back(std::move(s));
        }
        out.push_back(std::move(set));
    }
    return out;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ShapeError("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * double(values.size() - 1);
    const std::size_t lo = std::size_t(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - double(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

ProjectionSequence tokenize(const fourier::SpokeSet& spokes,
                            std::size_t orig_start) {
    if (spokes.spokes.empty()) throw ShapeError("empty spoke set");
    const std::size_t n = spokes.cfg.n_readout;

    std::vector<fourier::Projection> projs;
    projs.reserve(spokes.spokes.size());
    std::vector<double> mags;
    mags.reserve(spokes.spokes.size() * n);
    for (const auto& s : spokes.spokes) {
        projs.push_back(fourier::spoke_to_projection(s));
        for (const auto& v : projs.back().samples)
            mags.push_back(std::abs(v));
    }

    const double scale = percentile(std::move(mags), 90.0);
    if (!(scale > 0.0))
        throw NumericError("zero-signal slice: normalization scale is 0");

    ProjectionSequence seq;
    seq.n_tokens = projs.size();
    seq.d_model = 2 * n;
    seq.start_index = spokes.spokes.front().index;
    seq.orig_start_index = orig_start == std::size_t(-1)
                               ? spokes.spokes.front().index
                               : orig_start;
    seq.scale = scale;
    seq.tokens.resize(seq.n_tokens * seq.d_model);
    for (std::size_t t = 0; t < projs.size(); ++t) {
        double* row = seq.row(t);
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = projs[t].samples[j].real() / scale;
            row[n + j] = projs[t].samples[j].imag() / scale;
        }
    }
    return seq;
}

fourier::SpokeSet detokenize(const ProjectionSequence& seq,
                             const traj::TrajectoryConfig& cfg) {
    const std::size_t n = cfg.n_readout;
    if (seq.d_model != 2 * n)
        throw ShapeError("token width does not match trajectory config");
    fourier::SpokeSet out;
    out.cfg = cfg;
    out.spokes.reserve(seq.n_tokens);
    for (std::size_t t = 0; t < seq.n_tokens; ++t) {
        fourier::Projection p;
        p.index = seq.start_index + t;
        p.angle_deg = traj::spoke_angle(seq.orig_start_index + t, cfg);
        p.samples.resize(n);
        const double* row = seq.row(t);
        for (std::size_t j = 0; j < n; ++j)
            p.samples[j] = cplx(row[j] * seq.scale, row[n + j] * seq.scale);
        out.spokes.push_back(fourier::projection_to_spoke(p));
    }
    return out;
}

ProjectionSequence slice_sequence(const ProjectionSequence& seq,
                                  std::size_t offset, std::size_t len) {
    if (offset + len > seq.n_tokens) throw ShapeError("slice out of range");
    ProjectionSequence out;
    out.n_tokens = len;
    out.d_model = seq.d_model;
    out.start_index = seq.start_index + offset;
    out.orig_start_index = seq.orig_start_index + offset;
    out.scale = seq.scale;
    out.tokens.assign(seq.row(offset), seq.row(offset) + len * seq.d_model);
    return out;
}

std::array<TrainSample, 3> make_train_samples(const ProjectionSequence& seq,
                                              std::size_t l_in) {
    if (seq.n_tokens != 4 * l_in)
        throw ShapeError("window length must equal 4 * L_in");
    std::array<TrainSample, 3> out;
    for (int b = 1; b <= 3; ++b) {
        auto& s = out[std::size_t(b - 1)];
        s.block = b;
        s.src = slice_sequence(seq, 0, l_in);
        s.tgt = slice_sequence(seq, std::size_t(b) * l_in, l_in);
    }
    return out;
}

}  // namespace pkt::dataset
