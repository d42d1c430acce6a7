#include "pkt/model.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "pkt/errors.hpp"

namespace pkt::model {

using num::Tape;
using num::Tensor;
using num::Var;

void ModelConfig::validate() const {
    if (n_heads * d_k != d_model)
        throw ShapeError("n_heads * d_k must equal d_model");
    if (d_v != d_k) throw ShapeError("d_v must equal d_k");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ShapeError("dropout must be in [0, 1)");
    if (block < 1 || block > 3) throw ShapeError("block must be 1, 2 or 3");
    if (l_in == 0 || n_stacks == 0 || d_ff == 0)
        throw ShapeError("l_in, n_stacks and d_ff must be positive");
}

std::string ModelConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "d_model = " << d_model << "\n"
       << "n_stacks = " << n_stacks << "\n"
       << "n_heads = " << n_heads << "\n"
       << "d_k = " << d_k << "\n"
       << "d_v = " << d_v << "\n"
       << "d_ff = " << d_ff << "\n"
       << "dropout = " << dropout << "\n"
       << "l_in = " << l_in << "\n"
       << "block = " << block << "\n"
       << "index_base = " << index_base << "\n";
    return os.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string()
                                          : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    ModelConfig cfg;
    auto want = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw FormatError(std::string("model config missing key: ") + key);
        return it->second;
    };
    cfg.d_model = std::stoul(want("d_model"));
    cfg.n_stacks = std::stoul(want("n_stacks"));
    cfg.n_heads = std::stoul(want("n_heads"));
    cfg.d_k = std::stoul(want("d_k"));
    cfg.d_v = std::stoul(want("d_v"));
    cfg.d_ff = std::stoul(want("d_ff"));
    cfg.dropout = std::stod(want("dropout"));
    cfg.l_in = std::stoul(want("l_in"));
    cfg.block = std::stoi(want("block"));
    cfg.index_base = std::stod(want("index_base"));
    cfg.validate();
    return cfg;
}

Tensor positional_encoding(std::size_t i_s, std::size_t d_model,
                           double base) {
    Tensor pe({d_model});
    for (std::size_t j = 0; 2 * j < d_model; ++j) {
        const double denom =
            std::pow(base, 2.0 * double(j) / double(d_model));
        pe.data[2 * j] = std::sin(double(i_s) / denom);
        if (2 * j + 1 < d_model)
            pe.data[2 * j + 1] = std::cos(double(i_s) / denom);
    }
    return pe;
}

namespace {

// token matrix plus per-row positional encodings starting at pe_start
Tensor with_pe(const Tensor& tokens, std::size_t pe_start, double base) {
    Tensor out = tokens;
    const std::size_t d = out.cols();
    for (std::size_t t = 0; t < out.rows(); ++t) {
        const Tensor pe = positional_encoding(pe_start + t, d, base);
        for (std::size_t j = 0; j < d; ++j) out.data[t * d + j] += pe.data[j];
    }
    return out;
}

struct Builder {
    std::vector<std::string>& names;
    std::vector<Tensor>& params;
    std::mt19937_64 rng;

    void matrix(const std::string& name, std::size_t r, std::size_t c) {
        const double lim = std::sqrt(6.0 / double(r + c));
        std::uniform_real_distribution<double> u(-lim, lim);
        Tensor t({r, c});
        for (double& v : t.data) v = u(rng);
        names.push_back(name);
        params.push_back(std::move(t));
    }
    void vec(const std::string& name, std::size_t n, double value) {
        names.push_back(name);
        params.push_back(Tensor::full({n}, value));
    }
    void attn(const std::string& prefix, std::size_t d) {
        for (const char* w : {"wq", "wk", "wv", "wo"})
            matrix(prefix + "." + w, d, d);
        for (const char* b : {"bq", "bk", "bv", "bo"})
            vec(prefix + "." + b, d, 0.0);
    }
    void ln(const std::string& prefix, std::size_t d) {
        vec(prefix + ".g", d, 1.0);
        vec(prefix + ".b", d, 0.0);
    }
    void ff(const std::string& prefix, std::size_t d, std::size_t dff) {
        matrix(prefix + ".w1", d, dff);
        vec(prefix + ".b1", dff, 0.0);
        matrix(prefix + ".w2", dff, d);
        vec(prefix + ".b2", d, 0.0);
    }
};

}  // namespace

Transformer Transformer::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Transformer m;
    m.cfg_ = cfg;
    Builder b{m.names_, m.params_, std::mt19937_64(seed)};
    const std::size_t d = cfg.d_model;

    b.matrix("in.w", d, d);
    b.vec("in.b", d, 0.0);
    {
        std::uniform_real_distribution<double> u(-0.02, 0.02);
        Tensor start({1, d});
        for (double& v : start.data) v = u(b.rng);
        m.names_.push_back("start");
        m.params_.push_back(std::move(start));
    }
    for (std::size_t s = 0; s < cfg.n_stacks; ++s) {
        const std::string p = "enc." + std::to_string(s);
        b.attn(p + ".attn", d);
        b.ln(p + ".ln1", d);
        b.ff(p + ".ff", d, cfg.d_ff);
        b.ln(p + ".ln2", d);
    }
    for (std::size_t s = 0; s < cfg.n_stacks; ++s) {
        const std::string p = "dec." + std::to_string(s);
        b.attn(p + ".self", d);
        b.ln(p + ".ln1", d);
        b.attn(p + ".cross", d);
        b.ln(p + ".ln2", d);
        b.ff(p + ".ff", d, cfg.d_ff);
        b.ln(p + ".ln3", d);
    }
    b.matrix("out.w", d, d);
    b.vec("out.b", d, 0.0);
    return m;
}

std::size_t Transformer::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    throw ShapeError("unknown parameter: " + name);
}

std::size_t Transformer::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
}

std::vector<Tensor> Transformer::make_grads() const {
    std::vector<Tensor> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(p.shape);
    return g;
}

std::vector<Var> Transformer::bind(Tape& tape,
                                   std::vector<Tensor>& grads) const {
    if (grads.size() != params_.size())
        throw ShapeError("gradient accumulator count mismatch");
    std::vector<Var> vars;
    vars.reserve(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
        vars.push_back(tape.leaf(params_[i], grads[i]));
    return vars;
}

namespace {

struct AttnVars {
    Var wq, wk, wv, wo, bq, bk, bv, bo;
};

Var multi_head_attention(Tape& tape, Var q_in, Var kv_in, const AttnVars& a,
                         const ModelConfig& cfg, bool causal) {
    const Var q = tape.add_rowvec(tape.matmul(q_in, a.wq), a.bq);
    const Var k = tape.add_rowvec(tape.matmul(kv_in, a.wk), a.bk);
    const Var v = tape.add_rowvec(tape.matmul(kv_in, a.wv), a.bv);
    const double inv_sqrt_dk = 1.0 / std::sqrt(double(cfg.d_k));
    std::vector<Var> heads;
    heads.reserve(cfg.n_heads);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const Var qh = tape.slice_cols(q, h * cfg.d_k, cfg.d_k);
        const Var kh = tape.slice_cols(k, h * cfg.d_k, cfg.d_k);
        const Var vh = tape.slice_cols(v, h * cfg.d_v, cfg.d_v);
        Var scores =
            tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dk);
        Var attn = causal ? tape.softmax_rows_causal(scores)
                          : tape.softmax_rows(scores);
        heads.push_back(tape.matmul(attn, vh));
    }
    const Var concat = tape.concat_cols(heads);
    return tape.add_rowvec(tape.matmul(concat, a.wo), a.bo);
}

}  // namespace

Var Transformer::encode_graph(Tape& tape, const std::vector<Var>& p,
                              const Tensor& src, bool train,
                              std::mt19937_64& rng) const {
    if (src.rows() != cfg_.l_in || src.cols() != cfg_.d_model)
        throw ShapeError("encoder input must be (l_in, d_model), got " +
                         shape_str(src));
    auto P = [&](const std::string& n) { return p[index_of(n)]; };
    auto drop = [&](Var x) {
        return train && cfg_.dropout > 0.0 ? tape.dropout(x, cfg_.dropout, rng)
                                           : x;
    };

    Var x = tape.constant(with_pe(src, 0, cfg_.index_base));
    x = drop(x);
    x = tape.add_rowvec(tape.matmul(x, P("in.w")), P("in.b"));
    for (std::size_t s = 0; s < cfg_.n_stacks; ++s) {
        const std::string pre = "enc." + std::to_string(s);
        AttnVars a{P(pre + ".attn.wq"), P(pre + ".attn.wk"),
                   P(pre + ".attn.wv"), P(pre + ".attn.wo"),
                   P(pre + ".attn.bq"), P(pre + ".attn.bk"),
                   P(pre + ".attn.bv"), P(pre + ".attn.bo")};
        Var attn = multi_head_attention(tape, x, x, a, cfg_, false);
        x = tape.layer_norm_rows(tape.add(x, drop(attn)), P(pre + ".ln1.g"),
                                 P(pre + ".ln1.b"));
        Var ff = tape.add_rowvec(
            tape.matmul(tape.relu(tape.add_rowvec(
                            tape.matmul(x, P(pre + ".ff.w1")),
                            P(pre + ".ff.b1"))),
                        P(pre + ".ff.w2")),
            P(pre + ".ff.b2"));
        x = tape.layer_norm_rows(tape.add(x, drop(ff)), P(pre + ".ln2.g"),
                                 P(pre + ".ln2.b"));
    }
    return x;
}

Var Transformer::decode_graph(Tape& tape, const std::vector<Var>& p,
                              Var memory, const Tensor& tgt_shifted,
                              std::size_t n_rows, bool train,
                              std::mt19937_64& rng) const {
    if (n_rows != tgt_shifted.rows() + 1)
        throw ShapeError("decoder row count mismatch");
    auto P = [&](const std::string& n) { return p[index_of(n)]; };
    auto drop = [&](Var x) {
        return train && cfg_.dropout > 0.0 ? tape.dropout(x, cfg_.dropout, rng)
                                           : x;
    };

    // decoder input: learned start token, then the shifted targets;
    // PE indices start at block * l_in
    Var tokens = P("start");
    if (tgt_shifted.rows() > 0)
        tokens = tape.concat_rows({tokens, tape.constant(tgt_shifted)});
    const std::size_t pe_start = std::size_t(cfg_.block) * cfg_.l_in;
    Tensor pe({n_rows, cfg_.d_model});
    for (std::size_t t = 0; t < n_rows; ++t) {
        const Tensor row =
            positional_encoding(pe_start + t, cfg_.d_model, cfg_.index_base);
        for (std::size_t j = 0; j < cfg_.d_model; ++j)
            pe.data[t * cfg_.d_model + j] = row.data[j];
    }
    Var x = tape.add(tokens, tape.constant(std::move(pe)));
    x = drop(x);
    x = tape.add_rowvec(tape.matmul(x, P("in.w")), P("in.b"));

    for (std::size_t s = 0; s < cfg_.n_stacks; ++s) {
        const std::string pre = "dec." + std::to_string(s);
        AttnVars sa{P(pre + ".self.wq"), P(pre + ".self.wk"),
                    P(pre + ".self.wv"), P(pre + ".self.wo"),
                    P(pre + ".self.bq"), P(pre + ".self.bk"),
                    P(pre + ".self.bv"), P(pre + ".self.bo")};
        Var self_attn = multi_head_attention(tape, x, x, sa, cfg_, true);
        x = tape.layer_norm_rows(tape.add(x, drop(self_attn)),
                                 P(pre + ".ln1.g"), P(pre + ".ln1.b"));
        AttnVars ca{P(pre + ".cross.wq"), P(pre + ".cross.wk"),
                    P(pre + ".cross.wv"), P(pre + ".cross.wo"),
                    P(pre + ".cross.bq"), P(pre + ".cross.bk"),
                    P(pre + ".cross.bv"), P(pre + ".cross.bo")};
        Var cross = multi_head_attention(tape, x, memory, ca, cfg_, false);
        x = tape.layer_norm_rows(tape.add(x, drop(cross)),
                                 P(pre + ".ln2.g"), P(pre + ".ln2.b"));
        Var ff = tape.add_rowvec(
            tape.matmul(tape.relu(tape.add_rowvec(
                            tape.matmul(x, P(pre + ".ff.w1")),
                            P(pre + ".ff.b1"))),
                        P(pre + ".ff.w2")),
            P(pre + ".ff.b2"));
        x = tape.layer_norm_rows(tape.add(x, drop(ff)), P(pre + ".ln3.g"),
                                 P(pre + ".ln3.b"));
    }
    return tape.add_rowvec(tape.matmul(x, P("out.w")), P("out.b"));
}

Var Transformer::forward_teacher(Tape& tape, const std::vector<Var>& leaves,
                                 const Tensor& src, const Tensor& tgt_shifted,
                                 bool train, std::mt19937_64& rng) const {
    if (tgt_shifted.rows() != cfg_.l_in - 1)
        throw ShapeError("teacher forcing expects l_in - 1 shifted rows");
    Var memory = encode_graph(tape, leaves, src, train, rng);
    return decode_graph(tape, leaves, memory, tgt_shifted, cfg_.l_in, train,
                        rng);
}

Tensor Transformer::predict(const Tensor& src) const {
    std::mt19937_64 rng(0);  // unused, eval mode
    std::vector<Tensor> scratch = make_grads();

    Tensor memory_val;
    {
        Tape tape;
        auto leaves = bind(tape, scratch);
        Var memory = encode_graph(tape, leaves, src, false, rng);
        memory_val = tape.val(memory);
    }

    const std::size_t d = cfg_.d_model;
    Tensor out({cfg_.l_in, d});
    Tensor generated({0, d});
    for (std::size_t t = 0; t < cfg_.l_in; ++t) {
        Tape tape;
        auto leaves = bind(tape, scratch);
        Var memory = tape.constant(memory_val);
        Var dec = decode_graph(tape, leaves, memory, generated, t + 1, false,
                               rng);
        const Tensor& y = tape.val(dec);
        for (std::size_t j = 0; j < d; ++j) out.data[t * d + j] = y.at(t, j);
        if (!out.all_finite())
            throw NumericError("non-finite value during generation");
        // feed the prediction back as the next decoder input row
        Tensor next({t + 1, d});
        for (std::size_t i = 0; i < t * d; ++i)
            next.data[i] = generated.data[i];
        for (std::size_t j = 0; j < d; ++j)
            next.data[t * d + j] = out.data[t * d + j];
        generated = std::move(next);
    }
    return out;
}

io::Checkpoint Transformer::to_checkpoint() const {
    io::Checkpoint ckpt;
    ckpt.config_text = cfg_.to_text();
    for (std::size_t i = 0; i < params_.size(); ++i) {
        io::NamedTensor t;
        t.name = names_[i];
        t.dims = params_[i].shape;
        t.data = params_[i].data;
        ckpt.params.push_back(std::move(t));
    }
    return ckpt;
}

Transformer Transformer::from_checkpoint(const io::Checkpoint& ckpt) {
    const ModelConfig cfg = ModelConfig::from_text(ckpt.config_text);
    Transformer m = Transformer::init(cfg, 0);
    if (ckpt.params.size() != m.params_.size())
        throw FormatError("checkpoint parameter count mismatch");
    for (std::size_t i = 0; i < m.params_.size(); ++i) {
        const auto& rec = ckpt.params[i];
        if (rec.name != m.names_[i] || rec.dims != m.params_[i].shape)
            throw FormatError("checkpoint parameter layout mismatch at " +
                              rec.name);
        m.params_[i].data = rec.data;
    }
    return m;
}

}  // namespace pkt::model
