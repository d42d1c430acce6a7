#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <random>

#include "pkt/config.hpp"
#include "pkt/errors.hpp"
#include "pkt/io.hpp"
#include "pkt/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pkt;

namespace {

std::string subj_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "subj%03zu", i);
    return buf;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a * 0x9e3779b97f4a7c15ULL + b;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    return x;
}

std::string config_help() {
    std::string s = "\nConfig keys (key = default):\n";
    for (const auto& k : cfg::Config::registry())
        s += "  " + k.key + " = " + k.default_value + "  (" + k.description +
             ")\n";
    return s;
}

model::ModelConfig model_from_config(const cfg::Config& c) {
    model::ModelConfig mc;
    mc.d_model = std::size_t(c.get_int("model.d_model"));
    mc.n_stacks = std::size_t(c.get_int("model.n_stacks"));
    mc.n_heads = std::size_t(c.get_int("model.n_heads"));
    mc.d_k = std::size_t(c.get_int("model.d_k"));
    mc.d_v = std::size_t(c.get_int("model.d_v"));
    mc.d_ff = std::size_t(c.get_int("model.d_ff"));
    mc.dropout = c.get_real("model.dropout");
    mc.index_base = c.get_real("model.index_base");
    mc.l_in = std::size_t(c.get_int("data.l_in"));
    return mc;
}

std::vector<dataset::TrainSample> load_samples(const std::string& dir,
                                               int block, std::size_t l_in) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir))
        throw MissingArtifact("no such sequence directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".psq") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<dataset::TrainSample> out;
    for (const auto& f : files) {
        auto seq = io::read_sequence(f.string());
        auto samples = dataset::make_train_samples(seq, l_in);
        out.push_back(std::move(samples[std::size_t(block - 1)]));
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Projection-based k-space transformer for undersampled "
                 "golden-angle radial MRI" +
                 config_help()};
    app.require_subcommand(1);

    // ---- phantom-gen
    auto* gen = app.add_subcommand("phantom-gen",
                                   "generate synthetic phantoms + coil maps");
    std::size_t g_count = 64, g_size = 64, g_coils = 4;
    std::uint64_t g_seed = 7;
    std::string g_out;
    gen->add_option("--count", g_count, "number of subjects");
    gen->add_option("--size", g_size, "image size in pixels");
    gen->add_option("--coils", g_coils, "number of coils");
    gen->add_option("--seed", g_seed, "RNG seed");
    gen->add_option("--out", g_out, "output directory")->required();

    // ---- simulate
    auto* sim = app.add_subcommand(
        "simulate", "radial NDFT acquisition of phantom directory");
    std::string s_phantoms, s_out;
    std::size_t s_spokes = 200, s_readout = 128;
    sim->add_option("--phantom-dir", s_phantoms, "phantom directory")
        ->required();
    sim->add_option("--n-spokes", s_spokes, "spokes per coil slice");
    sim->add_option("--n-readout", s_readout, "samples per spoke");
    sim->add_option("--out", s_out, "output directory")->required();

    // ---- augment
    auto* aug = app.add_subcommand(
        "augment", "sliding-window tokenization into train/val/test");
    std::string a_in, a_out, a_split = "48:8:8";
    std::size_t a_window = 100, a_step = 50, a_lin = 25;
    std::uint64_t a_seed = 7;
    aug->add_option("--in", a_in, "spoke directory")->required();
    aug->add_option("--out", a_out, "output directory")->required();
    aug->add_option("--window", a_window, "window width in spokes");
    aug->add_option("--step", a_step, "window step in spokes");
    aug->add_option("--l-in", a_lin, "input tokens per sequence");
    aug->add_option("--split", a_split, "train:val:test subject counts");
    aug->add_option("--seed", a_seed, "split shuffle seed");

    // ---- train
    auto* tr = app.add_subcommand("train", "train block transformer(s)");
    std::string t_block = "all", t_config, t_data, t_out;
    tr->add_option("--block", t_block, "1, 2, 3 or all");
    tr->add_option("--config", t_config, "config file");
    tr->add_option("--data", t_data, "augmented data directory")->required();
    tr->add_option("--out", t_out, "checkpoint output directory")->required();

    // ---- predict
    auto* pr = app.add_subcommand("predict",
                                  "predict unacquired spokes and combine");
    std::string p_ckpt, p_in, p_out;
    pr->add_option("--checkpoints", p_ckpt, "checkpoint directory")
        ->required();
    pr->add_option("--in", p_in, "input spokes (.rks)")->required();
    pr->add_option("--out", p_out, "combined output (.rks)")->required();

    // ---- reconstruct
    auto* rc = app.add_subcommand("reconstruct",
                                  "density-compensated adjoint recon");
    std::vector<std::string> r_in;
    std::string r_coils, r_prefix, r_method = "pkt";
    rc->add_option("--in", r_in, "per-coil spoke files (.rks)")->required();
    rc->add_option("--coils", r_coils, "coil maps (.rcm)");
    rc->add_option("--out-prefix", r_prefix, "output path prefix")
        ->required();
    rc->add_option("--method", r_method, "method tag for outputs");

    // ---- evaluate
    auto* ev = app.add_subcommand("evaluate", "image metrics vs reference");
    std::string e_pred, e_ref, e_out;
    ev->add_option("--pred", e_pred, "directory of {method}_{subject}_mag.f32")
        ->required();
    ev->add_option("--ref", e_ref,
                   "directory of reference_{subject}_mag.f32")
        ->required();
    ev->add_option("--out", e_out, "report csv path")->required();

    // ---- pipeline
    auto* pl = app.add_subcommand("pipeline",
                                  "full experiment, end to end");
    std::string pl_config, pl_out = "out";
    std::int64_t pl_seed = -1, pl_jobs = -1;
    pl->add_option("--config", pl_config, "config file");
    pl->add_option("--out", pl_out, "output directory");
    pl->add_option("--seed", pl_seed, "override run.seed");
    pl->add_option("--jobs", pl_jobs, "override run.jobs");

    CLI11_PARSE(app, argc, argv);

    if (*gen) {
        fs::create_directories(g_out);
        const auto coils =
            phantom::make_coil_maps(g_coils, g_size, mix(g_seed, 0xc0115));
        io::write_coil_maps((fs::path(g_out) / "coils.rcm").string(), coils);
        for (std::size_t i = 0; i < g_count; ++i) {
            phantom::PhantomSpec spec;
            spec.size = g_size;
            spec.rng_seed = mix(g_seed, i);
            spec.n_ellipses = 2 + spec.rng_seed % 9;
            io::write_image(
                (fs::path(g_out) / (subj_name(i) + ".rci")).string(),
                phantom::make_phantom(spec));
        }
        std::cout << "wrote " << g_count << " phantoms to " << g_out << "\n";
        return 0;
    }

    if (*sim) {
        fs::create_directories(s_out);
        const auto coils = io::read_coil_maps(
            (fs::path(s_phantoms) / "coils.rcm").string());
        const auto cfg = traj::TrajectoryConfig::for_readout(s_readout);
        std::vector<std::size_t> indices(s_spokes);
        std::iota(indices.begin(), indices.end(), 0);
        std::size_t count = 0;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(s_phantoms))
            if (e.path().extension() == ".rci") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const auto img = io::read_image(f.string());
            const auto coil_imgs = phantom::apply_coils(img, coils);
            for (std::size_t c = 0; c < coils.n_coils; ++c) {
                const auto set = fourier::ndft_forward(coil_imgs[c], indices,
                                                       cfg);
                io::write_spokes((fs::path(s_out) /
                                  (f.stem().string() + "_c" +
                                   std::to_string(c) + ".rks"))
                                     .string(),
                                 set);
            }
            ++count;
        }
        std::cout << "simulated " << count << " subjects into " << s_out
                  << "\n";
        return 0;
    }

    if (*aug) {
        // group spoke files by subject (name up to "_c")
        std::map<std::string, std::vector<fs::path>> subjects;
        for (const auto& e : fs::directory_iterator(a_in))
            if (e.path().extension() == ".rks") {
                const std::string stem = e.path().stem().string();
                const auto pos = stem.rfind("_c");
                subjects[pos == std::string::npos ? stem : stem.substr(0, pos)]
                    .push_back(e.path());
            }
        if (subjects.empty())
            throw MissingArtifact("no .rks files in " + a_in);
        std::size_t n_train = 0, n_val = 0, n_test = 0;
        if (std::sscanf(a_split.c_str(), "%zu:%zu:%zu", &n_train, &n_val,
                        &n_test) != 3)
            throw ConfigError("--split must be train:val:test counts");
        std::vector<std::string> names;
        for (const auto& [name, _] : subjects) names.push_back(name);
        std::mt19937_64 rng(mix(a_seed, 0x5b711));
        std::shuffle(names.begin(), names.end(), rng);
        if (n_train + n_val + n_test > names.size())
            throw ConfigError("split counts exceed subject count");
        for (const char* d : {"train", "val", "test"})
            fs::create_directories(fs::path(a_out) / d);
        for (std::size_t i = 0; i < n_train + n_val + n_test; ++i) {
            const char* part = i < n_train             ? "train"
                               : i < n_train + n_val   ? "val"
                                                       : "test";
            auto files = subjects[names[i]];
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                const auto set = io::read_spokes(f.string());
                const auto windows =
                    dataset::make_windows(set, a_window, a_step);
                for (std::size_t w = 0; w < windows.size(); ++w) {
                    const auto seq = dataset::tokenize(windows[w], w * a_step);
                    io::write_sequence(
                        (fs::path(a_out) / part /
                         (f.stem().string() + "_w" + std::to_string(w) +
                          ".psq"))
                            .string(),
                        seq, set.cfg.golden_angle);
                }
            }
        }
        std::cout << "augmented " << names.size() << " subjects into "
                  << a_out << "\n";
        return 0;
    }

    if (*tr) {
        cfg::Config c;
        if (!t_config.empty()) c.load_file(t_config);
        fs::create_directories(t_out);
        c.write_resolved((fs::path(t_out) / "config.resolved").string());
        std::vector<int> block_ids;
        if (t_block == "all")
            block_ids = {1, 2, 3};
        else if (t_block == "1" || t_block == "2" || t_block == "3")
            block_ids = {std::stoi(t_block)};
        else
            throw ConfigError("--block must be 1, 2, 3 or all");
        for (int b : block_ids) {
            pipeline::TrainOptions opt;
            opt.model = model_from_config(c);
            opt.model.block = b;
            opt.adam.lr = c.get_real("optim.lr");
            opt.adam.beta1 = c.get_real("optim.beta1");
            opt.adam.beta2 = c.get_real("optim.beta2");
            opt.adam.eps = c.get_real("optim.eps");
            opt.epochs = std::size_t(c.get_int("optim.epochs"));
            opt.batch = std::size_t(c.get_int("optim.batch"));
            opt.lr_patience = std::size_t(c.get_int("optim.lr_patience"));
            opt.lr_factor = c.get_real("optim.lr_factor");
            opt.stop_patience =
                std::size_t(c.get_int("optim.stop_patience"));
            opt.tf_noise = c.get_real("optim.tf_noise");
            opt.seed = mix(std::uint64_t(c.get_int("run.seed")),
                           std::uint64_t(b));
            opt.checkpoint_path =
                (fs::path(t_out) / ("block" + std::to_string(b) + ".ckp"))
                    .string();
            opt.log = &std::cout;
            const auto train = load_samples(
                (fs::path(t_data) / "train").string(), b, opt.model.l_in);
            const auto val = load_samples((fs::path(t_data) / "val").string(),
                                          b, opt.model.l_in);
            pipeline::train_block(train, val, opt);
            std::cout << "block " << b << " checkpoint: "
                      << opt.checkpoint_path << "\n";
        }
        return 0;
    }

    if (*pr) {
        std::vector<model::Transformer> blocks;
        for (int b = 1; b <= 3; ++b) {
            const auto path =
                (fs::path(p_ckpt) / ("block" + std::to_string(b) + ".ckp"))
                    .string();
            if (!fs::exists(path))
                throw MissingArtifact("missing checkpoint: " + path);
            blocks.push_back(
                model::Transformer::from_checkpoint(io::read_checkpoint(path)));
        }
        double scale = 1.0;
        const auto src = io::read_spokes(p_in, &scale);
        const auto combined = pipeline::infer_and_combine(src, blocks);
        io::write_spokes(p_out, combined, scale);
        std::cout << "wrote " << combined.spokes.size() << " spokes to "
                  << p_out << "\n";
        return 0;
    }

    if (*rc) {
        std::vector<fourier::SpokeSet> coil_spokes;
        for (const auto& f : r_in) coil_spokes.push_back(io::read_spokes(f));
        phantom::CoilMaps maps;
        const phantom::CoilMaps* maps_ptr = nullptr;
        if (!r_coils.empty()) {
            maps = io::read_coil_maps(r_coils);
            maps_ptr = &maps;
        }
        const std::size_t size = coil_spokes[0].cfg.n_readout / 2;
        const auto r =
            pipeline::reconstruct(coil_spokes, maps_ptr, size, r_method);
        io::write_raw_plane(r_prefix + "_mag.f32", r.magnitude);
        io::write_raw_plane(r_prefix + "_phase.f32", r.phase);
        io::write_pgm16(r_prefix + "_mag.pgm", r.magnitude, size, size);
        io::write_pgm16(r_prefix + "_phase.pgm", r.phase, size, size);
        std::cout << "wrote " << r_prefix << "_{mag,phase}.{f32,pgm}\n";
        return 0;
    }

    if (*ev) {
        std::vector<metrics::MetricsRecord> records;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(e_pred)) {
            const std::string name = e.path().filename().string();
            if (name.size() > 8 && name.substr(name.size() - 8) == "_mag.f32")
                files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::string base = f.filename().string();
            base = base.substr(0, base.size() - 8);  // strip _mag.f32
            const auto us = base.find('_');
            if (us == std::string::npos) continue;
            const std::string method = base.substr(0, us);
            const std::string subject = base.substr(us + 1);
            if (method == "reference") continue;
            const auto ref_path =
                fs::path(e_ref) / ("reference_" + subject + "_mag.f32");
            if (!fs::exists(ref_path))
                throw MissingArtifact("missing reference plane: " +
                                      ref_path.string());
            auto x = io::read_raw_plane(f.string());
            auto ref = io::read_raw_plane(ref_path.string());
            const auto size = std::size_t(std::lround(std::sqrt(double(x.size()))));
            if (size * size != x.size() || x.size() != ref.size())
                throw FormatError("plane sizes do not match for " + base);
            metrics::normalize_pair(x, ref);
            metrics::MetricsRecord rec;
            rec.method = method;
            rec.subject = subject;
            rec.slice = "0";
            rec.nmse = metrics::nmse(x, ref);
            rec.psnr_db = metrics::psnr(x, ref);
            rec.ssim = metrics::ssim(x, ref, size, size);
            records.push_back(std::move(rec));
        }
        if (records.empty())
            throw MissingArtifact("no prediction planes found in " + e_pred);
        metrics::emit_report(e_out, records);
        std::cout << "wrote " << e_out << "\n";
        return 0;
    }

    if (*pl) {
        cfg::Config c;
        if (!pl_config.empty()) c.load_file(pl_config);
        if (pl_seed >= 0) c.set("run.seed", std::to_string(pl_seed));
        if (pl_jobs >= 0) c.set("run.jobs", std::to_string(pl_jobs));
        pipeline::run_experiment(c, pl_out, std::cout);
        std::cout << "report: " << (fs::path(pl_out) / "report.csv").string()
                  << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return int(ExitCode::config_error);
    } catch (const FormatError& e) {
        std::cerr << "data format error: " << e.what() << "\n";
        return int(ExitCode::data_format_error);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return int(ExitCode::numeric_error);
    } catch (const MissingArtifact& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return int(ExitCode::missing_artifact);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
