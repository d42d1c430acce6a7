#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pkt/autograd.hpp"
#include "pkt/io.hpp"
#include "pkt/tensor.hpp"

namespace pkt::model {

struct ModelConfig {
    std::size_t d_model = 256;
    std::size_t n_stacks = 2;
    std::size_t n_heads = 4;
    std::size_t d_k = 64;
    std::size_t d_v = 64;
    std::size_t d_ff = 1024;  // 4 * d_model
    double dropout = 0.1;
    std::size_t l_in = 25;
    int block = 1;  // which of the three predictors this model is
    double index_base = 10000.0;

    void validate() const;
    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);
};

// PE[2j] = sin(i_s / base^(2j/d)), PE[2j+1] = cos(i_s / base^(2j/d))
num::Tensor positional_encoding(std::size_t i_s, std::size_t d_model,
                                double base = 10000.0);

// Encoder-decoder transformer over projection tokens. Parameters live
// in a flat ordered list; per-pass autograd leaves are bound against
// caller-provided gradient accumulators.
class Transformer {
  public:
    static Transformer init(const ModelConfig& cfg, std::uint64_t seed);
    static Transformer from_checkpoint(const io::Checkpoint& ckpt);
    io::Checkpoint to_checkpoint() const;

    const ModelConfig& config() const { return cfg_; }
    std::vector<num::Tensor>& params() { return params_; }
    const std::vector<num::Tensor>& params() const { return params_; }
    const std::vector<std::string>& param_names() const { return names_; }
    std::size_t param_count() const;  // total scalar count

    std::vector<num::Tensor> make_grads() const;
    std::vector<num::Var> bind(num::Tape& tape,
                               std::vector<num::Tensor>& grads) const;

    // Teacher-forced pass. src/tgt_in are raw token matrices (L x d);
    // positional encodings are added internally (encoder 0..L-1,
    // decoder block*L..block*L+L-1). Row 0 of the decoder input is the
    // learned start token; tgt_in rows shift in at positions 1..L-1.
    num::Var forward_teacher(num::Tape& tape,
                             const std::vector<num::Var>& leaves,
                             const num::Tensor& src,
                             const num::Tensor& tgt_shifted, bool train,
                             std::mt19937_64& rng) const;

    // Free-running generation of l_in tokens from src (no gradients).
    num::Tensor predict(const num::Tensor& src) const;

  private:
    Transformer() = default;
    std::size_t index_of(const std::string& name) const;
    num::Var encode_graph(num::Tape& tape, const std::vector<num::Var>& p,
                          const num::Tensor& src, bool train,
                          std::mt19937_64& rng) const;
    num::Var decode_graph(num::Tape& tape, const std::vector<num::Var>& p,
                          num::Var memory, const num::Tensor& tgt_shifted,
                          std::size_t n_rows, bool train,
                          std::mt19937_64& rng) const;

    ModelConfig cfg_;
    std::vector<std::string> names_;
    std::vector<num::Tensor> params_;
};

}  // namespace pkt::model
