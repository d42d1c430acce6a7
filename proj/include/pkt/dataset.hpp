#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "pkt/fourier.hpp"

namespace pkt::dataset {

// Real-valued token matrix: row t = concat(Re, Im) of projection t,
// divided by `scale`. start_index is the re-based position used for
// positional encoding; orig_start_index keeps the chronological index
// of the first spoke in the acquisition.
struct ProjectionSequence {
    std::size_t n_tokens = 0;
    std::size_t d_model = 0;  // 2 * n_readout
    std::size_t start_index = 0;
    std::size_t orig_start_index = 0;
    double scale = 1.0;
    std::vector<double> tokens;  // row-major, n_tokens x d_model

    double* row(std::size_t t) { return tokens.data() + t * d_model; }
    const double* row(std::size_t t) const {
        return tokens.data() + t * d_model;
    }
};

struct TrainSample {
    ProjectionSequence src;
    ProjectionSequence tgt;
    int block = 1;  // 1, 2 or 3
};

struct AugmentationPlan {
    std::size_t window = 400;
    std::size_t step = 200;
    std::size_t n_sub = 1, n_reg = 1, n_slc = 1, n_coil = 1;
    std::size_t total_spokes = 400;  // M, spokes per slice
};

std::size_t window_count(std::size_t total_spokes, std::size_t window,
                         std::size_t step);

// n_sub * n_reg * n_slc * n_coil * floor(M/400). Kept as the nominal
// bookkeeping formula; actual window generation follows window_count,
// which counts overlapping windows and differs in general.
std::size_t effective_dataset_size(const AugmentationPlan& plan);

// Sliding windows over a chronological SpokeSet. Window w covers
// spokes [w*step, w*step + window); indices are re-based to
// 0..window-1, original angles are kept.
std::vector<fourier::SpokeSet> make_windows(const fourier::SpokeSet& spokes,
                                            std::size_t window,
                                            std::size_t step);

// percentile by linear interpolation between closest ranks, p in [0,100]
double percentile(std::vector<double> values, double p);

// Spokes -> projections -> normalized real token matrix. scale is the
// 90th percentile of projection sample magnitudes over the input.
// orig_start overrides the chronological index of the first spoke
// (needed for re-based windows); by default the first spoke's own
// index is taken.
ProjectionSequence tokenize(const fourier::SpokeSet& spokes,
                            std::size_t orig_start = std::size_t(-1));

// Inverse of tokenize (angles recovered from orig_start_index).
fourier::SpokeSet detokenize(const ProjectionSequence& seq,
                             const traj::TrajectoryConfig& cfg);

// contiguous sub-sequence [offset, offset+len)
ProjectionSequence slice_sequence(const ProjectionSequence& seq,
                                  std::size_t offset, std::size_t len);

// Split a length-4*L_in window sequence into the three block samples:
// shared src = tokens [0, L_in), tgt(b) = tokens [b*L_in, (b+1)*L_in).
std::array<TrainSample, 3> make_train_samples(const ProjectionSequence& seq,
                                              std::size_t l_in);

}  // namespace pkt::dataset
