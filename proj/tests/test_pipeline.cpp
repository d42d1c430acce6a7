#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "pkt/errors.hpp"
#include "pkt/phantom.hpp"
#include "pkt/pipeline.hpp"

using namespace pkt;

namespace {

std::vector<dataset::TrainSample> tiny_samples(int block, std::size_t count,
                                               std::size_t l_in) {
    std::vector<dataset::TrainSample> out;
    const auto cfg = traj::TrajectoryConfig::for_readout(32);
    for (std::size_t i = 0; i < count; ++i) {
        phantom::PhantomSpec spec;
        spec.size = 16;
        spec.rng_seed = 100 + i;
        const auto img = phantom::make_phantom(spec);
        std::vector<std::size_t> idx(4 * l_in);
        std::iota(idx.begin(), idx.end(), 0);
        const auto spokes = fourier::ndft_forward(img, idx, cfg);
        auto samples =
            dataset::make_train_samples(dataset::tokenize(spokes), l_in);
        out.push_back(std::move(samples[std::size_t(block - 1)]));
    }
    return out;
}

model::ModelConfig tiny_model(std::size_t l_in, int block) {
    model::ModelConfig mc;
    mc.d_model = 64;
    mc.n_stacks = 1;
    mc.n_heads = 2;
    mc.d_k = 32;
    mc.d_v = 32;
    mc.d_ff = 128;
    mc.dropout = 0.05;
    mc.l_in = l_in;
    mc.block = block;
    return mc;
}

}  // namespace

TEST_CASE("training reduces the loss and tracks the best validation model") {
    const std::size_t l_in = 6;
    const auto train = tiny_samples(1, 6, l_in);
    const auto val = tiny_samples(1, 2, l_in);

    pipeline::TrainOptions opt;
    opt.model = tiny_model(l_in, 1);
    opt.adam.lr = 1e-3;
    opt.epochs = 8;
    opt.batch = 3;
    opt.seed = 11;
    const auto res = pipeline::train_block(train, val, opt);

    REQUIRE(res.train_loss.size() >= 2);
    CHECK(res.train_loss.back() < res.train_loss.front());
    CHECK(res.val_loss.back() < res.val_loss.front());
    // returned model scores the best recorded validation loss
    const double best =
        *std::min_element(res.val_loss.begin(), res.val_loss.end());
    CHECK(pipeline::eval_loss(res.model, val) ==
          doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("training is deterministic in the seed") {
    const std::size_t l_in = 4;
    const auto train = tiny_samples(2, 4, l_in);

    pipeline::TrainOptions opt;
    opt.model = tiny_model(l_in, 2);
    opt.epochs = 3;
    opt.batch = 2;
    opt.seed = 21;
    const auto a = pipeline::train_block(train, {}, opt);
    const auto b = pipeline::train_block(train, {}, opt);
    CHECK(a.train_loss == b.train_loss);
    for (std::size_t i = 0; i < a.model.params().size(); ++i)
        CHECK(a.model.params()[i].data == b.model.params()[i].data);
}

TEST_CASE("inference keeps acquired spokes bit-identical") {
    const std::size_t l_in = 5;
    const auto cfg = traj::TrajectoryConfig::for_readout(32);
    phantom::PhantomSpec spec;
    spec.size = 16;
    spec.rng_seed = 77;
    const auto img = phantom::make_phantom(spec);
    std::vector<std::size_t> idx(l_in);
    std::iota(idx.begin(), idx.end(), 0);
    const auto src = fourier::ndft_forward(img, idx, cfg);

    std::vector<model::Transformer> blocks;
    for (int b = 1; b <= 3; ++b)
        blocks.push_back(
            model::Transformer::init(tiny_model(l_in, b), 30 + b));

    const auto full = pipeline::infer_and_combine(src, blocks);
    REQUIRE(full.spokes.size() == 4 * l_in);
    for (std::size_t i = 0; i < l_in; ++i) {
        CHECK(full.spokes[i].index == i);
        CHECK(std::memcmp(full.spokes[i].samples.data(),
                          src.spokes[i].samples.data(),
                          sizeof(cplx) * 32) == 0);
    }
    for (std::size_t i = l_in; i < 4 * l_in; ++i) {
        CHECK(full.spokes[i].index == i);
        CHECK(full.spokes[i].angle_deg ==
              doctest::Approx(traj::spoke_angle(i, cfg)).epsilon(1e-12));
    }

    // wrong block order is rejected
    std::swap(blocks[0], blocks[2]);
    CHECK_THROWS_AS(pipeline::infer_and_combine(src, blocks), FormatError);
}

TEST_CASE("reference reconstruction beats zero-filled on magnitude error") {
    const std::size_t size = 16;
    const auto cfg = traj::TrajectoryConfig::for_readout(32);
    phantom::PhantomSpec spec;
    spec.size = size;
    spec.rng_seed = 55;
    const auto img = phantom::make_phantom(spec);
    const auto maps = phantom::make_coil_maps(2, size, 9);
    const auto coil_imgs = phantom::apply_coils(img, maps);

    const std::size_t full_n = 40, acq_n = 10;
    std::vector<std::size_t> full_idx(full_n), acq_idx(acq_n);
    std::iota(full_idx.begin(), full_idx.end(), 0);
    std::iota(acq_idx.begin(), acq_idx.end(), 0);

    std::vector<fourier::SpokeSet> full_sp, acq_sp;
    for (std::size_t c = 0; c < 2; ++c) {
        full_sp.push_back(fourier::ndft_forward(coil_imgs[c], full_idx, cfg));
        acq_sp.push_back(fourier::ndft_forward(coil_imgs[c], acq_idx, cfg));
    }

    const auto ref = pipeline::reconstruct(full_sp, &maps, size, "reference");
    const auto zf = pipeline::zero_filled_baseline(acq_sp, &maps, size);
    CHECK(ref.method == "reference");
    CHECK(zf.method == "zero-filled");
    REQUIRE(ref.magnitude.size() == size * size);

    std::vector<double> truth(size * size);
    for (std::size_t i = 0; i < truth.size(); ++i)
        truth[i] = std::abs(img.data[i]);
    CHECK(metrics::nmse(ref.magnitude, truth) <
          metrics::nmse(zf.magnitude, truth));
    for (double p : ref.phase) {
        CHECK(p > -3.14159266);
        CHECK(p <= 3.14159266);
    }
}

TEST_CASE("single-sample overfit drives the loss down hard") {
    const std::size_t l_in = 4;
    const auto train = tiny_samples(1, 1, l_in);

    pipeline::TrainOptions opt;
    opt.model = tiny_model(l_in, 1);
    opt.model.dropout = 0.0;
    opt.adam.lr = 1e-3;
    opt.epochs = 400;
    opt.batch = 1;
    opt.seed = 31;
    opt.stop_patience = 400;
    opt.overfit_stop_ratio = 100.0;
    const auto res = pipeline::train_block(train, {}, opt);
    CHECK(res.train_loss.front() / res.train_loss.back() >= 100.0);
}
