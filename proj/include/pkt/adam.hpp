#pragma once

#include <cstdint>
#include <vector>

#include "pkt/tensor.hpp"

namespace pkt::num {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-9;
};

struct AdamState {
    std::uint64_t step = 0;
    std::vector<Tensor> m, v;

    static AdamState for_params(const std::vector<Tensor>& params);
};

// Standard bias-corrected Adam update, in place.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
               AdamState& state, const AdamConfig& cfg);

}  // namespace pkt::num
