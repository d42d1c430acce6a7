#include "pkt/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <thread>

#include "pkt/errors.hpp"
#include "pkt/io.hpp"
#include "pkt/trajectory.hpp"

namespace pkt::pipeline {

namespace fs = std::filesystem;
using dataset::ProjectionSequence;
using dataset::TrainSample;
using fourier::SpokeSet;
using model::Transformer;
using num::Tensor;

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t x = a * 0x9e3779b97f4a7c15ULL + b;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x += c;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Tensor shifted_target(const Tensor& tgt) {
    // ground-truth rows 0..L-2, fed after the start token
    Tensor out({tgt.rows() - 1, tgt.cols()});
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = tgt.data[i];
    return out;
}

}  // namespace

double mse_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw ShapeError("mse_loss shape mismatch: " + shape_str(pred) +
                         " vs " + shape_str(target));
    double s = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        s += d * d;
    }
    return s / double(pred.numel());
}

Tensor seq_tensor(const ProjectionSequence& seq) {
    Tensor t({seq.n_tokens, seq.d_model});
    t.data = seq.tokens;
    return t;
}

// Free-running evaluation: generation quality is what the pipeline
// needs at inference time, and it diverges from teacher-forced loss as
// the decoder starts relying on exact previous tokens.
double eval_loss(const Transformer& net,
                 const std::vector<TrainSample>& samples) {
    if (samples.empty()) throw ShapeError("eval_loss on empty set");
    double total = 0.0;
    for (const auto& s : samples) {
        const Tensor pred = net.predict(seq_tensor(s.src));
        total += mse_loss(pred, seq_tensor(s.tgt));
    }
    return total / double(samples.size());
}

TrainResult train_block(const std::vector<TrainSample>& train,
                        const std::vector<TrainSample>& val,
                        const TrainOptions& opt) {
    if (train.empty()) throw ShapeError("empty training set");
    opt.model.validate();
    for (const auto& s : train)
        if (s.block != opt.model.block)
            throw ShapeError("sample block does not match model block");

    // free-running eval is ~10x a teacher-forced pass; a fixed subset
    // is enough signal for checkpoint selection and plateau detection
    const std::size_t val_cap = 32;
    const std::vector<TrainSample> val_eval(
        val.begin(),
        val.begin() + std::ptrdiff_t(std::min(val.size(), val_cap)));

    Transformer net = Transformer::init(opt.model, opt.seed);
    std::vector<Tensor> grads = net.make_grads();
    num::AdamState adam = num::AdamState::for_params(net.params());
    num::AdamConfig adam_cfg = opt.adam;

    TrainResult result{net, {}, {}};
    std::vector<Tensor> best_params = net.params();
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t stagnant = 0;

    auto save_best = [&]() {
        if (!opt.checkpoint_path.empty()) {
            Transformer snap = net;
            snap.params() = best_params;
            io::write_checkpoint(opt.checkpoint_path, snap.to_checkpoint());
        }
    };

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix(opt.seed, 0xe90c4, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += opt.batch) {
            const std::size_t end = std::min(order.size(), start + opt.batch);
            for (auto& g : grads) g.fill(0.0);
            for (std::size_t i = start; i < end; ++i) {
                const TrainSample& s = train[order[i]];
                num::Tape tape;
                auto leaves = net.bind(tape, grads);
                const Tensor src = seq_tensor(s.src);
                const Tensor tgt = seq_tensor(s.tgt);
                std::mt19937_64 rng(mix(opt.seed, epoch, order[i]));
                Tensor tgt_shift = shifted_target(tgt);
                if (opt.tf_noise > 0.0) {
                    std::normal_distribution<double> noise(0.0, opt.tf_noise);
                    for (double& v : tgt_shift.data) v += noise(rng);
                }
                num::Var out = net.forward_teacher(tape, leaves, src,
                                                   tgt_shift, true, rng);
                num::Var loss = tape.mse(out, tgt);
                const double l = tape.val(loss).data[0];
                if (!std::isfinite(l)) {
                    save_best();
                    throw NumericError("training loss became non-finite");
                }
                epoch_loss += l;
                tape.backward(loss);
            }
            const double inv = 1.0 / double(end - start);
            for (auto& g : grads)
                for (double& v : g.data) v *= inv;
            adam_step(net.params(), grads, adam, adam_cfg);
        }
        result.train_loss.push_back(epoch_loss / double(train.size()));

        const double v =
            val_eval.empty() ? result.train_loss.back()
                             : eval_loss(net, val_eval);
        result.val_loss.push_back(v);
        if (opt.log)
            *opt.log << "block " << opt.model.block << " epoch " << epoch
                     << " train " << result.train_loss.back() << " val " << v
                     << "\n";

        if (v < best_val * (1.0 - 1e-6)) {
            best_val = v;
            best_params = net.params();
            stagnant = 0;
            save_best();
        } else {
            ++stagnant;
            if (opt.lr_patience > 0 && stagnant % opt.lr_patience == 0)
                adam_cfg.lr *= opt.lr_factor;
            if (stagnant >= opt.stop_patience) break;
        }
        if (opt.overfit_stop_ratio > 0.0 &&
            result.train_loss.front() >=
                opt.overfit_stop_ratio * result.train_loss.back())
            break;
    }

    result.model.params() = best_params;
    save_best();
    return result;
}

fourier::SpokeSet infer_and_combine(const SpokeSet& src,
                                    const std::vector<Transformer>& blocks) {
    if (blocks.size() != 3) throw ShapeError("need exactly 3 block models");
    const std::size_t l_in = src.spokes.size();
    const ProjectionSequence seq = dataset::tokenize(src);
    for (std::size_t b = 0; b < 3; ++b) {
        const auto& cfg = blocks[b].config();
        if (cfg.block != int(b + 1))
            throw FormatError("block models must be ordered 1, 2, 3");
        if (cfg.d_model != seq.d_model)
            throw FormatError("checkpoint token width does not match input");
        if (cfg.l_in != l_in)
            throw FormatError("checkpoint l_in does not match input length");
    }

    SpokeSet out;
    out.cfg = src.cfg;
    out.spokes = src.spokes;  // acquired spokes pass through untouched
    const Tensor src_t = seq_tensor(seq);
    for (std::size_t b = 1; b <= 3; ++b) {
        const Tensor pred = blocks[b - 1].predict(src_t);
        ProjectionSequence pseq;
        pseq.n_tokens = l_in;
        pseq.d_model = seq.d_model;
        pseq.start_index = seq.start_index + b * l_in;
        pseq.orig_start_index = seq.orig_start_index + b * l_in;
        pseq.scale = seq.scale;
        pseq.tokens = pred.data;
        SpokeSet block_spokes = dataset::detokenize(pseq, src.cfg);
        for (auto& s : block_spokes.spokes) out.spokes.push_back(std::move(s));
    }
    return out;
}

ReconResult reconstruct(const std::vector<SpokeSet>& coil_spokes,
                        const phantom::CoilMaps* coils, std::size_t size,
                        const std::string& method) {
    if (coil_spokes.empty()) throw ShapeError("no coil data");
    if (coils && coils->n_coils != coil_spokes.size())
        throw ShapeError("coil map count does not match k-space data");

    std::vector<ComplexImage> imgs;
    imgs.reserve(coil_spokes.size());
    for (const auto& set : coil_spokes)
        imgs.push_back(fourier::adjoint_recon(set, size, true));

    ReconResult r;
    r.method = method;
    r.size = size;
    r.magnitude.assign(size * size, 0.0);
    r.phase.assign(size * size, 0.0);
    for (std::size_t i = 0; i < size * size; ++i) {
        double ss = 0.0;
        cplx weighted(0.0, 0.0);
        for (std::size_t c = 0; c < imgs.size(); ++c) {
            ss += std::norm(imgs[c].data[i]);
            weighted += coils ? std::conj(coils->maps[c].data[i]) *
                                    imgs[c].data[i]
                              : imgs[c].data[i];
        }
        r.magnitude[i] = std::sqrt(ss);
        double ph = std::arg(weighted);
        if (ph <= -3.14159265358979323846) ph = 3.14159265358979323846;
        r.phase[i] = ph;
    }
    return r;
}

ReconResult zero_filled_baseline(const std::vector<SpokeSet>& coil_src,
                                 const phantom::CoilMaps* coils,
                                 std::size_t size) {
    return reconstruct(coil_src, coils, size, "zero-filled");
}

namespace {

struct Split {
    std::vector<std::size_t> train, val, test;
};

Split split_subjects(std::size_t n, const std::string& spec,
                     std::uint64_t seed) {
    std::size_t n_train = 0, n_val = 0, n_test = 0;
    if (std::sscanf(spec.c_str(), "%zu:%zu:%zu", &n_train, &n_val, &n_test) !=
        3)
        throw ConfigError("data.split must be train:val:test counts");
    if (n_train + n_val + n_test > n)
        throw ConfigError("split counts exceed subject count");
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::mt19937_64 rng(mix(seed, 0x5b711, 0));
    std::shuffle(ids.begin(), ids.end(), rng);
    Split s;
    s.train.assign(ids.begin(), ids.begin() + std::ptrdiff_t(n_train));
    s.val.assign(ids.begin() + std::ptrdiff_t(n_train),
                 ids.begin() + std::ptrdiff_t(n_train + n_val));
    s.test.assign(ids.begin() + std::ptrdiff_t(n_train + n_val),
                  ids.begin() + std::ptrdiff_t(n_train + n_val + n_test));
    return s;
}

std::string subj_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "subj%03zu", i);
    return buf;
}

// run fn(i) for i in [0, n) on up to `jobs` threads; work items are
// independent and write to disjoint slots, so order does not matter
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::exception_ptr err;
    std::mutex err_mu;
    const std::size_t n_workers = std::min(jobs, n);
    for (std::size_t w = 0; w < n_workers; ++w)
        workers.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : workers) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace

ExperimentResult run_experiment(const cfg::Config& config,
                                const std::string& out_dir,
                                std::ostream& log) {
    const std::uint64_t seed = std::uint64_t(config.get_int("run.seed"));
    const std::size_t jobs = std::size_t(config.get_int("run.jobs"));
    const std::size_t size = std::size_t(config.get_int("data.size"));
    const std::size_t n_subjects =
        std::size_t(config.get_int("data.n_subjects"));
    const std::size_t n_coils = std::size_t(config.get_int("data.n_coils"));
    const std::size_t n_readout =
        std::size_t(config.get_int("data.n_readout"));
    const std::size_t n_spokes = std::size_t(config.get_int("data.n_spokes"));
    const std::size_t window = std::size_t(config.get_int("data.window"));
    const std::size_t step = std::size_t(config.get_int("data.step"));
    const std::size_t l_in = std::size_t(config.get_int("data.l_in"));

    if (window != 4 * l_in)
        throw ConfigError("data.window must equal 4 * data.l_in");
    if (std::size_t(config.get_int("model.d_model")) != 2 * n_readout)
        throw ConfigError("model.d_model must equal 2 * data.n_readout");

    fs::create_directories(out_dir);
    for (const char* d : {"phantoms", "spokes", "ckpt", "recon"})
        fs::create_directories(fs::path(out_dir) / d);
    config.write_resolved((fs::path(out_dir) / "config.resolved").string());

    const auto traj_cfg = traj::TrajectoryConfig::for_readout(n_readout);

    // ---- phantoms and coil maps
    log << "generating " << n_subjects << " phantoms\n";
    const phantom::CoilMaps coils =
        phantom::make_coil_maps(n_coils, size, mix(seed, 0xc0115, 0));
    io::write_coil_maps((fs::path(out_dir) / "phantoms/coils.rcm").string(),
                        coils);
    std::vector<ComplexImage> phantoms(n_subjects);
    for (std::size_t i = 0; i < n_subjects; ++i) {
        phantom::PhantomSpec spec;
        spec.size = size;
        spec.rng_seed = mix(seed, 0x9a117, i);
        spec.n_ellipses = 2 + spec.rng_seed % 9;
        phantoms[i] = phantom::make_phantom(spec);
        io::write_image((fs::path(out_dir) / "phantoms" /
                         (subj_name(i) + ".rci"))
                            .string(),
                        phantoms[i]);
    }

    // ---- simulate the radial acquisition per subject and coil
    log << "simulating " << n_spokes << " spokes per coil slice\n";
    std::vector<std::size_t> indices(n_spokes);
    std::iota(indices.begin(), indices.end(), 0);
    std::vector<std::vector<SpokeSet>> acquired(n_subjects);
    parallel_for(n_subjects, jobs, [&](std::size_t i) {
        const auto coil_imgs = phantom::apply_coils(phantoms[i], coils);
        acquired[i].reserve(n_coils);
        for (std::size_t c = 0; c < n_coils; ++c) {
            acquired[i].push_back(
                fourier::ndft_forward(coil_imgs[c], indices, traj_cfg));
            io::write_spokes(
                (fs::path(out_dir) / "spokes" /
                 (subj_name(i) + "_c" + std::to_string(c) + ".rks"))
                    .string(),
                acquired[i].back());
        }
    });

    // ---- split and window/tokenize
    const Split split =
        split_subjects(n_subjects, config.get_str("data.split"), seed);
    auto make_samples = [&](const std::vector<std::size_t>& subjects,
                            int block) {
        std::vector<TrainSample> out;
        for (std::size_t i : subjects)
            for (std::size_t c = 0; c < n_coils; ++c) {
                const auto windows =
                    dataset::make_windows(acquired[i][c], window, step);
                for (std::size_t w = 0; w < windows.size(); ++w) {
                    auto samples = dataset::make_train_samples(
                        dataset::tokenize(windows[w], w * step), l_in);
                    out.push_back(std::move(samples[std::size_t(block - 1)]));
                }
            }
        return out;
    };

    // ---- train the three block models
    model::ModelConfig mc;
    mc.d_model = std::size_t(config.get_int("model.d_model"));
    mc.n_stacks = std::size_t(config.get_int("model.n_stacks"));
    mc.n_heads = std::size_t(config.get_int("model.n_heads"));
    mc.d_k = std::size_t(config.get_int("model.d_k"));
    mc.d_v = std::size_t(config.get_int("model.d_v"));
    mc.d_ff = std::size_t(config.get_int("model.d_ff"));
    mc.dropout = config.get_real("model.dropout");
    mc.index_base = config.get_real("model.index_base");
    mc.l_in = l_in;

    std::vector<Transformer> blocks;
    blocks.reserve(3);
    {
        std::vector<std::optional<Transformer>> trained(3);
        parallel_for(3, std::min<std::size_t>(jobs, 3), [&](std::size_t bi) {
            const int block = int(bi) + 1;
            TrainOptions opt;
            opt.model = mc;
            opt.model.block = block;
            opt.adam.lr = config.get_real("optim.lr");
            opt.adam.beta1 = config.get_real("optim.beta1");
            opt.adam.beta2 = config.get_real("optim.beta2");
            opt.adam.eps = config.get_real("optim.eps");
            opt.epochs = std::size_t(config.get_int("optim.epochs"));
            opt.batch = std::size_t(config.get_int("optim.batch"));
            opt.lr_patience = std::size_t(config.get_int("optim.lr_patience"));
            opt.lr_factor = config.get_real("optim.lr_factor");
            opt.stop_patience =
                std::size_t(config.get_int("optim.stop_patience"));
            opt.tf_noise = config.get_real("optim.tf_noise");
            opt.seed = mix(seed, 0x7ab1e, std::uint64_t(block));
            opt.checkpoint_path = (fs::path(out_dir) / "ckpt" /
                                   ("block" + std::to_string(block) + ".ckp"))
                                      .string();
            const auto train = make_samples(split.train, block);
            const auto val = make_samples(split.val, block);
            log << "training block " << block << " on " << train.size()
                << " samples\n";
            if (jobs <= 1) opt.log = &log;
            trained[bi] = train_block(train, val, opt).model;
        });
        for (auto& t : trained) blocks.push_back(std::move(*t));
    }

    // ---- held-out evaluation
    ExperimentResult result;
    for (std::size_t i : split.test) {
        const std::string name = subj_name(i);
        std::vector<SpokeSet> full, src, pkt;
        ProjectionSequence pred_tokens_all, true_tokens_all;
        double pnmse_sum = 0.0;
        for (std::size_t c = 0; c < n_coils; ++c) {
            SpokeSet window0;
            window0.cfg = traj_cfg;
            window0.spokes.assign(acquired[i][c].spokes.begin(),
                                  acquired[i][c].spokes.begin() +
                                      std::ptrdiff_t(window));
            SpokeSet src_set;
            src_set.cfg = traj_cfg;
            src_set.spokes.assign(window0.spokes.begin(),
                                  window0.spokes.begin() +
                                      std::ptrdiff_t(l_in));
            SpokeSet combined = infer_and_combine(src_set, blocks);

            // projection-domain error on the predicted blocks, in
            // physical (de-normalized) units
            auto denorm = [](ProjectionSequence s) {
                for (double& v : s.tokens) v *= s.scale;
                s.scale = 1.0;
                return s;
            };
            const auto truth = denorm(dataset::slice_sequence(
                dataset::tokenize(window0), l_in, 3 * l_in));
            SpokeSet pred_set;
            pred_set.cfg = traj_cfg;
            pred_set.spokes.assign(combined.spokes.begin() +
                                       std::ptrdiff_t(l_in),
                                   combined.spokes.end());
            const auto pred = denorm(dataset::tokenize(pred_set));
            pnmse_sum += metrics::proj_nmse(pred, truth);

            full.push_back(std::move(window0));
            src.push_back(std::move(src_set));
            pkt.push_back(std::move(combined));
        }

        ReconResult ref = reconstruct(full, &coils, size, "reference");
        ReconResult zf = zero_filled_baseline(src, &coils, size);
        ReconResult pk = reconstruct(pkt, &coils, size, "pkt");

        for (const auto* r : {&ref, &zf, &pk}) {
            const std::string prefix =
                (fs::path(out_dir) / "recon" / (r->method + "_" + name))
                    .string();
            io::write_raw_plane(prefix + "_mag.f32", r->magnitude);
            io::write_raw_plane(prefix + "_phase.f32", r->phase);
            io::write_pgm16(prefix + "_mag.pgm", r->magnitude, size, size);
            io::write_pgm16(prefix + "_phase.pgm", r->phase, size, size);
        }

        for (const auto* r : {&zf, &pk}) {
            std::vector<double> x = r->magnitude, refm = ref.magnitude;
            metrics::normalize_pair(x, refm);
            metrics::MetricsRecord rec;
            rec.method = r->method;
            rec.subject = name;
            rec.slice = "0";
            rec.nmse = metrics::nmse(x, refm);
            rec.psnr_db = metrics::psnr(x, refm);
            rec.ssim = metrics::ssim(x, refm, size, size);
            if (r->method == "pkt")
                rec.proj_nmse = pnmse_sum / double(n_coils);
            result.records.push_back(std::move(rec));
        }
        log << "evaluated " << name << "\n";
    }

    result.report_csv = metrics::format_report(result.records);
    {
        std::ofstream f(fs::path(out_dir) / "report.csv",
                        std::ios::binary | std::ios::trunc);
        f << result.report_csv;
    }
    return result;
}

}  // namespace pkt::pipeline
