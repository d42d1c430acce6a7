// End-to-end acceptance gate. Each criterion prints a single
// "<name>: pass" or "<name>: fail (...)" line; the exit code is the
// number of failed criteria.
//
//   acceptance A1|A2|A5|A7 [workdir]
//   acceptance A346 [workdir]     (desk-scale run shared by A3, A4, A6)

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pkt/autograd.hpp"
#include "pkt/config.hpp"
#include "pkt/dataset.hpp"
#include "pkt/fourier.hpp"
#include "pkt/io.hpp"
#include "pkt/metrics.hpp"
#include "pkt/model.hpp"
#include "pkt/phantom.hpp"
#include "pkt/pipeline.hpp"
#include "pkt/trajectory.hpp"

namespace fs = std::filesystem;
using namespace pkt;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    if (ok) {
        std::cout << name << ": pass\n";
    } else {
        std::cout << name << ": fail (" << detail << ")\n";
        ++failures;
    }
}

struct Check {
    bool ok = true;
    std::ostringstream why;
    void require(bool cond, const std::string& what) {
        if (!cond) {
            if (!ok) why << "; ";
            why << what;
            ok = false;
        }
    }
};

Tensor rand_t(std::vector<std::size_t> shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Tensor t(std::move(shape));
    for (auto& x : t.data) x = d(rng);
    return t;
}

// ---------------------------------------------------------------- A1

void run_a1() {
    Check c;

    // forward/adjoint pairing
    {
        const std::size_t N = 12;
        const auto cfg = traj::TrajectoryConfig::for_readout(2 * N);
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        ComplexImage img(N);
        for (auto& v : img.data) v = cplx(d(rng), d(rng));
        std::vector<std::size_t> idx(5);
        std::iota(idx.begin(), idx.end(), 0);
        const auto fx = fourier::ndft_forward(img, idx, cfg);
        auto s = fx;
        for (auto& sp : s.spokes)
            for (auto& v : sp.samples) v = cplx(d(rng), d(rng));
        const auto fhs = fourier::adjoint_recon(s, N, false);
        cplx lhs(0, 0), rhs(0, 0);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < 2 * N; ++j)
                lhs += fx.spokes[i].samples[j] *
                       std::conj(s.spokes[i].samples[j]);
        for (std::size_t i = 0; i < N * N; ++i)
            rhs += img.data[i] * std::conj(fhs.data[i]);
        c.require(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs),
                  "fourier adjointness above 1e-10");
    }

    // unitary roundtrip
    {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        fourier::Spoke sp;
        sp.samples.resize(48);
        for (auto& v : sp.samples) v = cplx(d(rng), d(rng));
        const auto back =
            fourier::projection_to_spoke(fourier::spoke_to_projection(sp));
        double worst = 0.0;
        for (std::size_t i = 0; i < 48; ++i)
            worst = std::max(worst, std::abs(back.samples[i] - sp.samples[i]));
        c.require(worst <= 1e-12, "unitary roundtrip above 1e-12");
    }

    // projection-slice identity at angle 0
    {
        phantom::PhantomSpec spec;
        spec.size = 16;
        spec.rng_seed = 3;
        const auto img = phantom::make_phantom(spec);
        const auto cfg = traj::TrajectoryConfig::for_readout(32);
        const auto set = fourier::ndft_forward(img, {0}, cfg);
        const auto p = fourier::spoke_to_projection(set.spokes[0]);
        std::vector<cplx> colsum(16, cplx(0, 0));
        for (std::size_t y = 0; y < 16; ++y)
            for (std::size_t x = 0; x < 16; ++x) colsum[x] += img.at(x, y);
        double norm2 = 0.0;
        for (const auto& v : colsum) norm2 += std::norm(v);
        const double tol = 1e-10 * std::sqrt(32.0) * std::sqrt(norm2);
        double worst = 0.0;
        for (std::size_t t = 0; t < 32; ++t) {
            const cplx expect = (t >= 8 && t < 24)
                                    ? std::sqrt(32.0) * colsum[t - 8]
                                    : cplx(0, 0);
            worst = std::max(worst, std::abs(p.samples[t] - expect));
        }
        c.require(worst <= tol, "projection-slice identity above 1e-10");
    }

    // positional-encoding closed form
    {
        const auto pe = model::positional_encoding(1, 2);
        c.require(std::abs(pe.data[0] - std::sin(1.0)) <= 1e-12 &&
                      std::abs(pe.data[1] - std::cos(1.0)) <= 1e-12,
                  "PE closed form off at index 1");
        c.require(std::abs(pe.data[0] - 0.841471) <= 1e-6,
                  "PE sin(1) value off");
    }

    // golden-angle recurrence
    {
        traj::TrajectoryConfig cfg;
        bool ok = true;
        for (std::size_t i = 0; i < 1000 && ok; ++i) {
            const double next = traj::spoke_angle(i + 1, cfg);
            const double expect =
                std::fmod(traj::spoke_angle(i, cfg) + cfg.golden_angle, 360.0);
            ok = std::abs(next - expect) <= 1e-9;
        }
        c.require(ok, "golden-angle recurrence broken");
    }

    // hand-computed dataset counts
    {
        c.require(dataset::window_count(3500, 400, 200) == 16,
                  "window_count(3500,400,200) != 16");
        dataset::AugmentationPlan plan;
        plan.n_sub = 8;
        plan.n_reg = 3;
        plan.n_slc = 32;
        plan.n_coil = 30;
        plan.total_spokes = 3500;
        c.require(dataset::effective_dataset_size(plan) == 184320,
                  "effective_dataset_size != 184320");
    }

    // softmax and layer-norm contracts
    {
        Tape tape;
        Tensor g = Tensor::zeros({4, 4});
        const Tensor xv = rand_t({4, 4}, 4);
        const Var x = tape.leaf(xv, g);
        const auto& sm = tape.val(tape.softmax_rows(x));
        bool ok = true;
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < 4; ++j) {
                ok = ok && sm.at(r, j) > 0.0;
                s += sm.at(r, j);
            }
            ok = ok && std::abs(s - 1.0) <= 1e-14;
        }
        c.require(ok, "softmax rows not a positive distribution");

        Tensor gg = Tensor::zeros({1, 8}), gb = Tensor::zeros({1, 8});
        Tensor gx = Tensor::zeros({3, 8});
        const Tensor lx = rand_t({3, 8}, 5);
        const Tensor lg = Tensor::full({1, 8}, 1.0);
        const Tensor lb = Tensor::zeros({1, 8});
        Tape t2;
        const auto& ln = t2.val(t2.layer_norm_rows(
            t2.leaf(lx, gx), t2.leaf(lg, gg), t2.leaf(lb, gb)));
        ok = true;
        for (std::size_t r = 0; r < 3; ++r) {
            double mean = 0.0, var = 0.0;
            for (std::size_t j = 0; j < 8; ++j) mean += ln.at(r, j);
            mean /= 8.0;
            for (std::size_t j = 0; j < 8; ++j)
                var += (ln.at(r, j) - mean) * (ln.at(r, j) - mean);
            var /= 8.0;
            ok = ok && std::abs(mean) <= 1e-12 && std::abs(var - 1.0) <= 1e-4;
        }
        c.require(ok, "layer norm rows not standardized");
    }

    // causal-mask perturbation invariance, exact
    {
        model::ModelConfig mc;
        mc.d_model = 8;
        mc.n_stacks = 1;
        mc.n_heads = 2;
        mc.d_k = 4;
        mc.d_v = 4;
        mc.d_ff = 16;
        mc.dropout = 0.0;
        mc.l_in = 4;
        const auto net = model::Transformer::init(mc, 6);
        const auto src = rand_t({4, 8}, 7);
        const auto tgt = rand_t({3, 8}, 8);
        auto bumped = tgt;
        for (std::size_t j = 0; j < 8; ++j) bumped.at(1, j) += 5.0;

        auto run = [&](const Tensor& tg) {
            Tape tape;
            auto grads = net.make_grads();
            auto leaves = net.bind(tape, grads);
            std::mt19937_64 rng(0);
            return tape.val(
                net.forward_teacher(tape, leaves, src, tg, false, rng));
        };
        const auto a = run(tgt);
        const auto b = run(bumped);
        bool exact = true;
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t j = 0; j < 8; ++j)
                exact = exact && a.at(r, j) == b.at(r, j);
        c.require(exact, "causal mask leaks future positions");
    }

    report("A1", c.ok, c.why.str());
}

// ---------------------------------------------------------------- A2

void run_a2() {
    Check c;
    const double tol = 1e-4;

    // multi-head-style attention block built from primitive ops
    {
        std::vector<Tensor> params = {rand_t({6, 4}, 10), rand_t({4, 4}, 11),
                                      rand_t({4, 4}, 12), rand_t({4, 4}, 13),
                                      rand_t({4, 4}, 14)};
        const Tensor target = rand_t({6, 4}, 15);
        const double err = num::grad_check(
            params, [&](Tape& t, std::vector<Var>& p) {
                const Var q = t.matmul(p[0], p[1]);
                const Var k = t.matmul(p[0], p[2]);
                const Var v = t.matmul(p[0], p[3]);
                const Var scores =
                    t.scale(t.matmul(q, t.transpose(k)), 1.0 / 2.0);
                const Var attn = t.matmul(t.softmax_rows(scores), v);
                return t.mse(t.matmul(attn, p[4]), target);
            });
        c.require(err <= tol, "attention block gradients off");
    }

    // feed-forward block
    {
        std::vector<Tensor> params = {rand_t({3, 4}, 20), rand_t({4, 8}, 21),
                                      rand_t({1, 8}, 22), rand_t({8, 4}, 23),
                                      rand_t({1, 4}, 24)};
        const Tensor target = rand_t({3, 4}, 25);
        const double err = num::grad_check(
            params, [&](Tape& t, std::vector<Var>& p) {
                const Var h = t.relu(t.add_rowvec(t.matmul(p[0], p[1]), p[2]));
                return t.mse(t.add_rowvec(t.matmul(h, p[3]), p[4]), target);
            });
        c.require(err <= tol, "feed-forward block gradients off");
    }

    // layer norm
    {
        std::vector<Tensor> params = {rand_t({3, 6}, 30), rand_t({1, 6}, 31),
                                      rand_t({1, 6}, 32)};
        const Tensor target = rand_t({3, 6}, 33);
        const double err = num::grad_check(
            params, [&](Tape& t, std::vector<Var>& p) {
                return t.mse(t.layer_norm_rows(p[0], p[1], p[2]), target);
            });
        c.require(err <= tol, "layer norm gradients off");
    }

    // full 1-stack encoder-decoder, 3 tokens
    {
        model::ModelConfig mc;
        mc.d_model = 8;
        mc.n_stacks = 1;
        mc.n_heads = 2;
        mc.d_k = 4;
        mc.d_v = 4;
        mc.d_ff = 16;
        mc.dropout = 0.0;
        mc.l_in = 3;
        const auto net = model::Transformer::init(mc, 40);
        const auto src = rand_t({3, 8}, 41);
        const auto tgt_shifted = rand_t({2, 8}, 42);
        const Tensor target = rand_t({3, 8}, 43);

        std::vector<Tensor> params = net.params();
        const double err = num::grad_check(
            params, [&](Tape& t, std::vector<Var>& p) {
                std::mt19937_64 rng(0);
                return t.mse(net.forward_teacher(t, p, src, tgt_shifted,
                                                 false, rng),
                             target);
            });
        std::ostringstream what;
        what << "encoder-decoder gradients off, max rel err " << err;
        c.require(err <= tol, what.str());
    }

    report("A2", c.ok, c.why.str());
}

// ---------------------------------------------------------------- A5

void run_a5() {
    Check c;
    const std::size_t l_in = 6;
    const auto cfg = traj::TrajectoryConfig::for_readout(64);
    phantom::PhantomSpec spec;
    spec.size = 32;
    spec.rng_seed = 50;
    const auto img = phantom::make_phantom(spec);
    std::vector<std::size_t> idx(4 * l_in);
    std::iota(idx.begin(), idx.end(), 0);
    const auto spokes = fourier::ndft_forward(img, idx, cfg);
    const auto samples =
        dataset::make_train_samples(dataset::tokenize(spokes), l_in);

    for (int block = 1; block <= 3; ++block) {
        pipeline::TrainOptions opt;
        opt.model.d_model = 128;
        opt.model.n_stacks = 1;
        opt.model.n_heads = 2;
        opt.model.d_k = 64;
        opt.model.d_v = 64;
        opt.model.d_ff = 256;
        opt.model.dropout = 0.0;
        opt.model.l_in = l_in;
        opt.model.block = block;
        opt.adam.lr = 1e-3;
        opt.epochs = 2000;
        opt.batch = 1;
        opt.seed = 60 + std::uint64_t(block);
        opt.stop_patience = 2000;
        opt.overfit_stop_ratio = 100.0;
        std::vector<dataset::TrainSample> one = {
            samples[std::size_t(block - 1)]};
        const auto res = pipeline::train_block(one, {}, opt);
        const double ratio = res.train_loss.front() / res.train_loss.back();
        std::ostringstream what;
        what << "block " << block << " loss ratio " << ratio << " after "
             << res.train_loss.size() << " steps";
        c.require(ratio >= 100.0 && res.train_loss.size() <= 2000,
                  what.str());
    }
    report("A5", c.ok, c.why.str());
}

// --------------------------------------------------------- A3/A4/A6

void run_a346(const fs::path& workdir) {
    cfg::Config config;  // desk-scale defaults
    config.set("run.jobs", "1");
    const auto out = (workdir / "desk").string();

    const auto result = pipeline::run_experiment(config, out, std::cout);

    std::vector<const metrics::MetricsRecord*> zf, pk;
    for (const auto& r : result.records) {
        if (r.method == "zero-filled") zf.push_back(&r);
        if (r.method == "pkt") pk.push_back(&r);
    }
    auto mean = [](const std::vector<const metrics::MetricsRecord*>& v,
                   auto f) {
        double s = 0.0;
        for (const auto* r : v) s += f(*r);
        return s / double(v.size());
    };

    // A3: margins over the zero-filled baseline on held-out subjects
    {
        Check c;
        c.require(config.get_int("data.n_subjects") >= 64 &&
                      config.get_int("optim.epochs") >= 30,
                  "desk config below required scale");
        c.require(pk.size() >= 8 && zf.size() == pk.size(),
                  "fewer than 8 held-out subjects");
        if (!pk.empty()) {
            const double zf_nmse =
                mean(zf, [](const auto& r) { return r.nmse; });
            const double pk_nmse =
                mean(pk, [](const auto& r) { return r.nmse; });
            const double zf_ssim =
                mean(zf, [](const auto& r) { return r.ssim; });
            const double pk_ssim =
                mean(pk, [](const auto& r) { return r.ssim; });
            std::ostringstream what;
            what << "nmse pkt " << pk_nmse << " vs zf " << zf_nmse
                 << ", ssim pkt " << pk_ssim << " vs zf " << zf_ssim;
            c.require(pk_nmse <= 0.7 * zf_nmse, "nmse margin: " + what.str());
            c.require(pk_ssim >= zf_ssim + 0.05,
                      "ssim margin: " + what.str());
        }
        report("A3", c.ok, c.why.str());
    }

    // A4: projection-domain error on the same held-out subjects
    {
        Check c;
        double s = 0.0;
        std::size_t n = 0;
        for (const auto* r : pk)
            if (r->proj_nmse) {
                s += *r->proj_nmse;
                ++n;
            }
        std::ostringstream what;
        what << "proj_nmse mean " << (n ? s / double(n) : -1.0);
        c.require(n == pk.size() && n > 0 && s / double(n) <= 0.15,
                  what.str());
        report("A4", c.ok, c.why.str());
    }

    // A6: re-run inference from the stored artifacts and verify the
    // acquired spokes byte-for-byte
    {
        Check c;
        std::vector<model::Transformer> blocks;
        for (int b = 1; b <= 3; ++b)
            blocks.push_back(model::Transformer::from_checkpoint(
                io::read_checkpoint((fs::path(out) / "ckpt" /
                                     ("block" + std::to_string(b) + ".ckp"))
                                        .string())));
        const std::size_t l_in = std::size_t(config.get_int("data.l_in"));
        const std::size_t n_coils =
            std::size_t(config.get_int("data.n_coils"));
        for (const auto* r : pk) {
            for (std::size_t coil = 0; coil < n_coils; ++coil) {
                const auto set = io::read_spokes(
                    (fs::path(out) / "spokes" /
                     (r->subject + "_c" + std::to_string(coil) + ".rks"))
                        .string());
                fourier::SpokeSet src;
                src.cfg = set.cfg;
                src.spokes.assign(set.spokes.begin(),
                                  set.spokes.begin() + std::ptrdiff_t(l_in));
                const auto full = pipeline::infer_and_combine(src, blocks);
                for (std::size_t i = 0; i < l_in; ++i)
                    c.require(
                        std::memcmp(full.spokes[i].samples.data(),
                                    src.spokes[i].samples.data(),
                                    sizeof(cplx) *
                                        src.spokes[i].samples.size()) == 0,
                        r->subject + " coil " + std::to_string(coil) +
                            " spoke " + std::to_string(i) + " altered");
            }
        }
        report("A6", c.ok, c.why.str());
    }
}

// ---------------------------------------------------------------- A7

void run_a7(const fs::path& workdir) {
    cfg::Config config;
    config.set("run.seed", "11");
    config.set("run.jobs", "1");
    config.set("data.size", "32");
    config.set("data.n_subjects", "6");
    config.set("data.n_coils", "2");
    config.set("data.n_readout", "64");
    config.set("data.n_spokes", "60");
    config.set("data.window", "40");
    config.set("data.step", "20");
    config.set("data.l_in", "10");
    config.set("data.split", "4:1:1");
    config.set("model.d_model", "128");
    config.set("model.d_ff", "256");
    config.set("model.n_stacks", "1");
    config.set("model.n_heads", "2");
    config.set("optim.epochs", "3");
    config.set("optim.batch", "4");

    std::ostringstream devnull;
    pipeline::run_experiment(config, (workdir / "det1").string(), devnull);
    pipeline::run_experiment(config, (workdir / "det2").string(), devnull);

    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f),
                           std::istreambuf_iterator<char>());
    };
    const auto a = slurp(workdir / "det1" / "report.csv");
    const auto b = slurp(workdir / "det2" / "report.csv");
    Check c;
    c.require(!a.empty() && a == b, "report.csv differs between runs");
    report("A7", c.ok, c.why.str());
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance A1|A2|A5|A7|A346 [workdir]\n";
        return 2;
    }
    const std::string which = argv[1];
    const fs::path workdir = argc > 2 ? argv[2] : "acceptance_out";
    fs::create_directories(workdir);

    try {
        if (which == "A1")
            run_a1();
        else if (which == "A2")
            run_a2();
        else if (which == "A5")
            run_a5();
        else if (which == "A7")
            run_a7(workdir);
        else if (which == "A346")
            run_a346(workdir);
        else {
            std::cerr << "unknown criterion " << which << "\n";
            return 2;
        }
    } catch (const std::exception& e) {
        std::cout << which << ": fail (exception: " << e.what() << ")\n";
        return 1;
    }
    return failures;
}
