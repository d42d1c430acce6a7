#pragma once

#include <deque>
#include <functional>
#include <random>
#include <vector>

#include "pkt/tensor.hpp"

namespace pkt::num {

struct Var {
    std::size_t idx = std::size_t(-1);
    bool valid() const { return idx != std::size_t(-1); }
};

// Reverse-mode tape over Tensors. One tape per forward pass; leaves
// reference external value/gradient storage so parameter gradients
// accumulate across samples without copies.
class Tape {
  public:
    // external storage, which must outlive the tape; the gradient is
    // accumulated in place by backward()
    Var leaf(const Tensor& value, Tensor& grad);
    // tape-owned constant (no gradient propagated out)
    Var constant(Tensor value);

    const Tensor& val(Var v) const { return *nodes_[v.idx].val; }
    const Tensor& grad(Var v) const { return *nodes_[v.idx].grad; }

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var add_rowvec(Var a, Var bias);  // bias shape (1, n) or (n)
    Var scale(Var a, double s);
    Var relu(Var a);
    Var softmax_rows(Var a);
    // softmax over (L, L) score rows with entries j > i excluded
    Var softmax_rows_causal(Var a);
    Var layer_norm_rows(Var a, Var gain, Var bias, double eps = 1e-5);
    Var dropout(Var a, double rate, std::mt19937_64& rng);
    Var transpose(Var a);
    Var slice_cols(Var a, std::size_t offset, std::size_t len);
    Var slice_rows(Var a, std::size_t offset, std::size_t len);
    Var concat_cols(const std::vector<Var>& parts);
    Var concat_rows(const std::vector<Var>& parts);
    // scalar: mean of squared entries of (a - target)
    Var mse(Var a, const Tensor& target);

    // seed d(loss)/d(loss) = 1 and sweep the tape in reverse
    void backward(Var loss);

  private:
    struct Node {
        const Tensor* val;
        Tensor* grad;
        std::function<void()> back;
    };

    Tensor& store(Tensor t);
    Var push(Tensor value, std::function<void()> back = {});

    std::deque<Tensor> storage_;  // stable addresses
    std::vector<Node> nodes_;
};

// Max relative error of reverse-mode gradients against central finite
// differences over the given parameters. `build` constructs the scalar
// loss from leaf Vars and must be deterministic (no dropout).
double grad_check(std::vector<Tensor>& params,
                  const std::function<Var(Tape&, std::vector<Var>&)>& build,
                  double h = 1e-5);

}  // namespace pkt::num
