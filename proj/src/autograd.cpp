#include "pkt/autograd.hpp"

#include <cmath>

#include "pkt/errors.hpp"
#include "pkt/kernels.hpp"

namespace pkt::num {

namespace {

Tensor transposed(const Tensor& t) {
    const std::size_t m = t.rows(), n = t.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.data[j * m + i] = t.data[i * n + j];
    return out;
}

void require_2d(const Tensor& t, const char* what) {
    if (t.shape.size() != 2) throw ShapeError(std::string(what) + ": expected rank 2, got " + shape_str(t));
}

}  // namespace

Tensor& Tape::store(Tensor t) {
    storage_.push_back(std::move(t));
    return storage_.back();
}

Var Tape::push(Tensor value, std::function<void()> back) {
    Tensor& v = store(std::move(value));
    Tensor& g = store(Tensor(v.shape));
    nodes_.push_back(Node{&v, &g, std::move(back)});
    return Var{nodes_.size() - 1};
}

Var Tape::leaf(const Tensor& value, Tensor& grad) {
    if (!value.same_shape(grad))
        throw ShapeError("leaf gradient shape mismatch");
    nodes_.push_back(Node{&value, &grad, {}});
    return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value)); }

Var Tape::matmul(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require_2d(av, "matmul lhs");
    require_2d(bv, "matmul rhs");
    if (av.cols() != bv.rows())
        throw ShapeError("matmul: " + shape_str(av) + " x " + shape_str(bv));
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor c({m, n});
    const auto& ops = kernels::active();
    ops.matmul_acc(av.data.data(), bv.data.data(), c.data.data(), m, k, n);

    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, b, out, m, k, n]() {
        const auto& ops2 = kernels::active();
        const Tensor& gc = *self->nodes_[out.idx].grad;
        // dA += dC * B^T
        const Tensor bt = transposed(self->val(b));
        ops2.matmul_acc(gc.data.data(), bt.data.data(),
                        self->nodes_[a.idx].grad->data.data(), m, n, k);
        // dB += A^T * dC
        const Tensor at = transposed(self->val(a));
        ops2.matmul_acc(at.data.data(), gc.data.data(),
                        self->nodes_[b.idx].grad->data.data(), k, m, n);
    };
    return out;
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv))
        throw ShapeError("add: " + shape_str(av) + " vs " + shape_str(bv));
    Tensor c = av;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += bv.data[i];
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, b, out]() {
        const Tensor& gc = *self->nodes_[out.idx].grad;
        Tensor& ga = *self->nodes_[a.idx].grad;
        Tensor& gb = *self->nodes_[b.idx].grad;
        for (std::size_t i = 0; i < gc.data.size(); ++i) {
            ga.data[i] += gc.data[i];
            gb.data[i] += gc.data[i];
        }
    };
    return out;
}

Var Tape::add_rowvec(Var a, Var bias) {
    const Tensor& av = val(a);
    const Tensor& bv = val(bias);
    if (bv.numel() != av.cols())
        throw ShapeError("add_rowvec: bias width " + shape_str(bv) +
                         " vs " + shape_str(av));
    Tensor c = av;
    const std::size_t m = av.rows(), n = av.cols();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) c.data[i * n + j] += bv.data[j];
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, bias, out, m, n]() {
        const Tensor& gc = *self->nodes_[out.idx].grad;
        Tensor& ga = *self->nodes_[a.idx].grad;
        Tensor& gb = *self->nodes_[bias.idx].grad;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                ga.data[i * n + j] += gc.data[i * n + j];
                gb.data[j] += gc.data[i * n + j];
            }
    };
    return out;
}

Var Tape::scale(Var a, double s) {
    Tensor c = val(a);
    for (double& v : c.data) v *= s;
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, out, s]() {
        const Tensor& gc = *self->nodes_[out.idx].grad;
        Tensor& ga = *self->nodes_[a.idx].grad;
        for (std::size_t i = 0; i < gc.data.size(); ++i)
            ga.data[i] += s * gc.data[i];
    };
    return out;
}

Var Tape::relu(Var a) {
    Tensor c = val(a);
    for (double& v : c.data) v = v > 0.0 ? v : 0.0;
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, out]() {
        const Tensor& gc = *self->nodes_[out.idx].grad;
        const Tensor& av = self->val(a);
        Tensor& ga = *self->nodes_[a.idx].grad;
        for (std::size_t i = 0; i < gc.data.size(); ++i)
            if (av.data[i] > 0.0) ga.data[i] += gc.data[i];
    };
    return out;
}

namespace {

// softmax of one row over columns [0, limit)
void softmax_row(const double* x, double* y, std::size_t n,
                 std::size_t limit) {
    double mx = x[0];
    for (std::size_t j = 1; j < limit; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < limit; ++j) {
        y[j] = std::exp(x[j] - mx);
        sum += y[j];
    }
    for (std::size_t j = 0; j < limit; ++j) y[j] /= sum;
    for (std::size_t j = limit; j < n; ++j) y[j] = 0.0;
}

}  // namespace

Var Tape::softmax_rows(Var a) {
    const Tensor& av = val(a);
    require_2d(av, "softmax");
    const std::size_t m = av.rows(), n = av.cols();
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i)
        softmax_row(&av.data[i * n], &c.data[i * n], n, n);
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, out, m, n]() {
        const Tensor& y = self->val(out);
        const Tensor& gy = *self->nodes_[out.idx].grad;
        Tensor& ga = *self->nodes_[a.idx].grad;
        for (std::size_t i = 0; i < m; ++i) {
            double dotp = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                dotp += gy.data[i * n + j] * y.data[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                ga.data[i * n + j] +=
                    y.data[i * n + j] * (gy.data[i * n + j] - dotp);
        }
    };
    return out;
}

Var Tape::softmax_rows_causal(Var a) {
    const Tensor& av = val(a);
    require_2d(av, "causal softmax");
    if (av.rows() != av.cols())
        throw ShapeError("causal softmax expects square scores, got " +
                         shape_str(av));
    const std::size_t n = av.rows();
    Tensor c({n, n});
    for (std::size_t i = 0; i < n; ++i)
        softmax_row(&av.data[i * n], &c.data[i * n], n, i + 1);
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, out, n]() {
        const Tensor& y = self->val(out);
        const Tensor& gy = *self->nodes_[out.idx].grad;
        Tensor& ga = *self->nodes_[a.idx].grad;
        for (std::size_t i = 0; i < n; ++i) {
            double dotp = 0.0;
            for (std::size_t j = 0; j <= i; ++j)
                dotp += gy.data[i * n + j] * y.data[i * n + j];
            for (std::size_t j = 0; j <= i; ++j)
                ga.data[i * n + j] +=
                    y.data[i * n + j] * (gy.data[i * n + j] - dotp);
        }
    };
    return out;
}

Var Tape::layer_norm_rows(Var a, Var gain, Var bias, double eps) {
    const Tensor& av = val(a);
    require_2d(av, "layer_norm");
    const std::size_t m = av.rows(), n = av.cols();
    if (val(gain).numel() != n || val(bias).numel() != n)
        throw ShapeError("layer_norm gain/bias width mismatch");

    Tensor xhat({m, n});
    Tensor inv_std({m});
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += av.data[i * n + j];
        mean /= double(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = av.data[i * n + j] - mean;
            var += d * d;
        }
        var /= double(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std.data[i] = is;
        for (std::size_t j = 0; j < n; ++j)
            xhat.data[i * n + j] = (av.data[i * n + j] - mean) * is;
    }
    Tensor c({m, n});
    const Tensor& gv = val(gain);
    const Tensor& bv = val(bias);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            c.data[i * n + j] =
                xhat.data[i * n + j] * gv.data[j] + bv.data[j];

    Tensor& xhat_s = store(std::move(xhat));
    Tensor& inv_std_s = store(std::move(inv_std));
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, gain, bias, out, m, n, &xhat_s,
                            &inv_std_s]() {
        const Tensor& gy = *self->nodes_[out.idx].grad;
        const Tensor& gv = self->val(gain);
        Tensor& ga = *self->nodes_[a.idx].grad;
        Tensor& gg = *self->nodes_[gain.idx].grad;
        Tensor& gb = *self->nodes_[bias.idx].grad;
        for (std::size_t i = 0; i < m; ++i) {
            double mean_dz = 0.0, mean_dzx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double dz = gy.data[i * n + j] * gv.data[j];
                mean_dz += dz;
                mean_dzx += dz * xhat_s.data[i * n + j];
                gg.data[j] += gy.data[i * n + j] * xhat_s.data[i * n + j];
                gb.data[j] += gy.data[i * n + j];
            }
            mean_dz /= double(n);
            mean_dzx /= double(n);
            for (std::size_t j = 0; j < n; ++j) {
                const double dz = gy.data[i * n + j] * gv.data[j];
                ga.data[i * n + j] +=
                    inv_std_s.data[i] *
                    (dz - mean_dz - xhat_s.data[i * n + j] * mean_dzx);
            }
        }
    };
    return out;
}

Var Tape::dropout(Var a, double rate, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ShapeError("dropout rate in [0,1)");
    if (rate == 0.0) return a;
    const Tensor& av = val(a);
    Tensor mask(av.shape);
    std::bernoulli_distribution keep(1.0 - rate);
    const double s = 1.0 / (1.0 - rate);
    Tensor c = av;
    for (std::size_t i = 0; i < c.data.size(); ++i) {
        mask.data[i] = keep(rng) ? s : 0.0;
        c.data[i] *= mask.data[i];
    }
    Tensor& mask_s = store(std::move(mask));
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, out, &mask_s]() {
        const Tensor& gc = *self->nodes_[out.idx].grad;
        Tensor& ga = *self->nodes_[a.idx].grad;
        for (std::size_t i = 0; i < gc.data.size(); ++i)
            ga.data[i] += gc.data[i] * mask_s.data[i];
    };
    return out;
}

Var Tape::transpose(Var a) {
    const Tensor& av = val(a);
    require_2d(av, "transpose");
    Tape* self = this;
    Var out = push(transposed(av));
    nodes_[out.idx].back = [self, a, out]() {
        const Tensor gt = transposed(*self->nodes_[out.idx].grad);
        Tensor& ga = *self->nodes_[a.idx].grad;
        for (std::size_t i = 0; i < gt.data.size(); ++i)
            ga.data[i] += gt.data[i];
    };
    return out;
}

Var Tape::slice_cols(Var a, std::size_t offset, std::size_t len) {
    const Tensor& av = val(a);
    require_2d(av, "slice_cols");
    const std::size_t m = av.rows(), n = av.cols();
    if (offset + len > n) throw ShapeError("slice_cols out of range");
    Tensor c({m, len});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < len; ++j)
            c.data[i * len + j] = av.data[i * n + offset + j];
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, out, offset, len, m, n]() {
        const Tensor& gc = *self->nodes_[out.idx].grad;
        Tensor& ga = *self->nodes_[a.idx].grad;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < len; ++j)
                ga.data[i * n + offset + j] += gc.data[i * len + j];
    };
    return out;
}

Var Tape::slice_rows(Var a, std::size_t offset, std::size_t len) {
    const Tensor& av = val(a);
    require_2d(av, "slice_rows");
    const std::size_t n = av.cols();
    if (offset + len > av.rows()) throw ShapeError("slice_rows out of range");
    Tensor c({len, n});
    for (std::size_t i = 0; i < len * n; ++i)
        c.data[i] = av.data[offset * n + i];
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, out, offset, len, n]() {
        const Tensor& gc = *self->nodes_[out.idx].grad;
        Tensor& ga = *self->nodes_[a.idx].grad;
        for (std::size_t i = 0; i < len * n; ++i)
            ga.data[offset * n + i] += gc.data[i];
    };
    return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols of nothing");
    const std::size_t m = val(parts[0]).rows();
    std::size_t n = 0;
    for (Var p : parts) {
        require_2d(val(p), "concat_cols");
        if (val(p).rows() != m) throw ShapeError("concat_cols row mismatch");
        n += val(p).cols();
    }
    Tensor c({m, n});
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& pv = val(p);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pv.cols(); ++j)
                c.data[i * n + off + j] = pv.data[i * pv.cols() + j];
        off += pv.cols();
    }
    Tape* self = this;
    std::vector<Var> ps = parts;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, ps, out, m, n]() {
        const Tensor& gc = *self->nodes_[out.idx].grad;
        std::size_t off = 0;
        for (Var p : ps) {
            Tensor& gp = *self->nodes_[p.idx].grad;
            const std::size_t w = gp.cols();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    gp.data[i * w + j] += gc.data[i * n + off + j];
            off += w;
        }
    };
    return out;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows of nothing");
    const std::size_t n = val(parts[0]).cols();
    std::size_t m = 0;
    for (Var p : parts) {
        require_2d(val(p), "concat_rows");
        if (val(p).cols() != n) throw ShapeError("concat_rows col mismatch");
        m += val(p).rows();
    }
    Tensor c({m, n});
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& pv = val(p);
        for (std::size_t i = 0; i < pv.data.size(); ++i)
            c.data[off * n + i] = pv.data[i];
        off += pv.rows();
    }
    Tape* self = this;
    std::vector<Var> ps = parts;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, ps, out, n]() {
        const Tensor& gc = *self->nodes_[out.idx].grad;
        std::size_t off = 0;
        for (Var p : ps) {
            Tensor& gp = *self->nodes_[p.idx].grad;
            for (std::size_t i = 0; i < gp.data.size(); ++i)
                gp.data[i] += gc.data[off * n + i];
            off += gp.rows();
        }
    };
    return out;
}

Var Tape::mse(Var a, const Tensor& target) {
    const Tensor& av = val(a);
    if (!av.same_shape(target))
        throw ShapeError("mse: " + shape_str(av) + " vs target " +
                         shape_str(target));
    const double inv_n = 1.0 / double(av.numel());
    double loss = 0.0;
    for (std::size_t i = 0; i < av.data.size(); ++i) {
        const double d = av.data[i] - target.data[i];
        loss += d * d;
    }
    loss *= inv_n;
    if (!std::isfinite(loss)) throw NumericError("mse produced a non-finite value");

    Tensor& tgt_s = store(target);
    Tensor c({1});
    c.data[0] = loss;
    Tape* self = this;
    Var out = push(std::move(c));
    nodes_[out.idx].back = [self, a, out, &tgt_s, inv_n]() {
        const double gl = self->nodes_[out.idx].grad->data[0];
        const Tensor& av2 = self->val(a);
        Tensor& ga = *self->nodes_[a.idx].grad;
        for (std::size_t i = 0; i < av2.data.size(); ++i)
            ga.data[i] += gl * 2.0 * inv_n * (av2.data[i] - tgt_s.data[i]);
    };
    return out;
}

void Tape::backward(Var loss) {
    if (val(loss).numel() != 1)
        throw ShapeError("backward expects a scalar loss");
    nodes_[loss.idx].grad->data[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;)
        if (nodes_[i].back) nodes_[i].back();
}

double grad_check(std::vector<Tensor>& params,
                  const std::function<Var(Tape&, std::vector<Var>&)>& build,
                  double h) {
    // reverse-mode gradients
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (const auto& p : params) grads.emplace_back(p.shape);
    {
        Tape tape;
        std::vector<Var> vars;
        vars.reserve(params.size());
        for (std::size_t i = 0; i < params.size(); ++i)
            vars.push_back(tape.leaf(params[i], grads[i]));
        Var loss = build(tape, vars);
        tape.backward(loss);
    }

    auto eval = [&]() {
        Tape tape;
        std::vector<Tensor> dummy;
        dummy.reserve(params.size());
        for (const auto& p : params) dummy.emplace_back(p.shape);
        std::vector<Var> vars;
        for (std::size_t i = 0; i < params.size(); ++i)
            vars.push_back(tape.leaf(params[i], dummy[i]));
        return tape.val(build(tape, vars)).data[0];
    };

    double max_rel = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].data.size(); ++i) {
            const double orig = params[p].data[i];
            params[p].data[i] = orig + h;
            const double fp = eval();
            params[p].data[i] = orig - h;
            const double fm = eval();
            params[p].data[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double ad = grads[p].data[i];
            // the floor keeps central-difference roundoff on true-zero
            // gradients (for instance key-projection biases, which
            // cancel inside softmax) from registering as error
            const double denom = std::max({std::abs(fd), std::abs(ad), 1e-6});
            max_rel = std::max(max_rel, std::abs(fd - ad) / denom);
        }
    }
    return max_rel;
}

}  // namespace pkt::num
