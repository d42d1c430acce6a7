#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pkt/adam.hpp"
#include "pkt/config.hpp"
#include "pkt/dataset.hpp"
#include "pkt/metrics.hpp"
#include "pkt/model.hpp"
#include "pkt/phantom.hpp"

namespace pkt::pipeline {

// mean of squared elementwise differences
double mse_loss(const num::Tensor& pred, const num::Tensor& target);

num::Tensor seq_tensor(const dataset::ProjectionSequence& seq);

struct TrainOptions {
    model::ModelConfig model;
    num::AdamConfig adam;
    std::size_t epochs = 60;
    std::size_t batch = 32;
    std::uint64_t seed = 7;
    std::size_t lr_patience = 5;
    double lr_factor = 0.5;
    std::size_t stop_patience = 15;
    // when > 0, stop once initial/current train loss reaches this ratio
    double overfit_stop_ratio = 0.0;
    // stddev of Gaussian noise added to teacher-forced decoder inputs;
    // trains the decoder to tolerate its own prediction error at
    // generation time instead of relying on perfect previous tokens
    double tf_noise = 0.0;
    std::string checkpoint_path;  // best weights written here if set
    std::ostream* log = nullptr;
};

struct TrainResult {
    model::Transformer model;  // best-validation weights
    std::vector<double> train_loss;
    std::vector<double> val_loss;
};

// Teacher-forced Adam training of one block. Throws NumericError on a
// non-finite loss (after writing the last good checkpoint, if any).
TrainResult train_block(const std::vector<dataset::TrainSample>& train,
                        const std::vector<dataset::TrainSample>& val,
                        const TrainOptions& opt);

// Eval-mode (dropout off) mean loss over samples.
double eval_loss(const model::Transformer& net,
                 const std::vector<dataset::TrainSample>& samples);

// Autoregressive prediction of the three missing blocks; acquired
// spokes pass through bit-identically. blocks must be models 1..3.
fourier::SpokeSet infer_and_combine(
    const fourier::SpokeSet& src,
    const std::vector<model::Transformer>& blocks);

struct ReconResult {
    std::string method;  // zero-filled | pkt | reference
    std::size_t size = 0;
    std::vector<double> magnitude;
    std::vector<double> phase;  // radians in (-pi, pi]
};

// Density-compensated adjoint per coil; root-sum-of-squares magnitude
// and known-map phase combination (coils may be null for single coil).
ReconResult reconstruct(const std::vector<fourier::SpokeSet>& coil_spokes,
                        const phantom::CoilMaps* coils, std::size_t size,
                        const std::string& method);

ReconResult zero_filled_baseline(
    const std::vector<fourier::SpokeSet>& coil_src,
    const phantom::CoilMaps* coils, std::size_t size);

struct ExperimentResult {
    std::vector<metrics::MetricsRecord> records;
    std::string report_csv;
};

// The full desk-scale experiment: phantoms -> simulate -> augment ->
// train 3 blocks -> predict -> reconstruct -> evaluate. All artifacts
// plus report.csv and the resolved config land in out_dir.
ExperimentResult run_experiment(const cfg::Config& config,
                                const std::string& out_dir,
                                std::ostream& log);

}  // namespace pkt::pipeline
