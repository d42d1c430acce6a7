#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "pkt/dataset.hpp"
#include "pkt/errors.hpp"
#include "pkt/phantom.hpp"

using namespace pkt;

namespace {

fourier::SpokeSet sample_spokes(std::size_t n_spokes, std::size_t n_readout,
                                std::uint64_t seed) {
    phantom::PhantomSpec spec;
    spec.size = n_readout / 2;
    spec.rng_seed = seed;
    const auto img = phantom::make_phantom(spec);
    const auto cfg = traj::TrajectoryConfig::for_readout(n_readout);
    std::vector<std::size_t> indices(n_spokes);
    std::iota(indices.begin(), indices.end(), 0);
    return fourier::ndft_forward(img, indices, cfg);
}

}  // namespace

TEST_CASE("window counting") {
    CHECK(dataset::window_count(3500, 400, 200) == 16);
    CHECK(dataset::window_count(400, 400, 200) == 1);
    CHECK(dataset::window_count(799, 400, 400) == 1);
    CHECK(dataset::window_count(200, 100, 50) == 3);
    CHECK_THROWS_AS(dataset::window_count(399, 400, 200), ShapeError);
    CHECK_THROWS_AS(dataset::window_count(400, 400, 0), ShapeError);
}

TEST_CASE("effective dataset size bookkeeping") {
    dataset::AugmentationPlan plan;
    plan.n_sub = 8;
    plan.n_reg = 3;
    plan.n_slc = 32;
    plan.n_coil = 30;
    plan.total_spokes = 3500;
    CHECK(dataset::effective_dataset_size(plan) == 184320);

    plan = {};
    plan.n_sub = plan.n_reg = plan.n_slc = plan.n_coil = 1;
    plan.total_spokes = 400;
    CHECK(dataset::effective_dataset_size(plan) == 1);
    plan.total_spokes = 399;
    CHECK(dataset::effective_dataset_size(plan) == 0);
}

TEST_CASE("windows re-base indices and keep original angles") {
    const auto set = sample_spokes(50, 32, 2);
    const auto windows = dataset::make_windows(set, 20, 10);
    CHECK(windows.size() == dataset::window_count(50, 20, 10));
    for (std::size_t w = 0; w < windows.size(); ++w) {
        REQUIRE(windows[w].spokes.size() == 20);
        for (std::size_t i = 0; i < 20; ++i) {
            const auto& ws = windows[w].spokes[i];
            const auto& orig = set.spokes[w * 10 + i];
            CHECK(ws.index == i);
            CHECK(ws.angle_deg == orig.angle_deg);
            CHECK(ws.samples == orig.samples);
        }
    }

    const auto single = dataset::make_windows(set, 50, 10);
    REQUIRE(single.size() == 1);
    for (std::size_t i = 0; i < 50; ++i)
        CHECK(single[0].spokes[i].samples == set.spokes[i].samples);
}

TEST_CASE("percentile interpolates between closest ranks") {
    CHECK(dataset::percentile({3.0, 1.0, 2.0}, 0.0) == doctest::Approx(1.0));
    CHECK(dataset::percentile({3.0, 1.0, 2.0}, 50.0) == doctest::Approx(2.0));
    CHECK(dataset::percentile({3.0, 1.0, 2.0}, 100.0) == doctest::Approx(3.0));
    CHECK(dataset::percentile({0.0, 10.0}, 90.0) == doctest::Approx(9.0));
    CHECK(dataset::percentile({5.0}, 37.0) == doctest::Approx(5.0));
}

TEST_CASE("tokenize then detokenize is the identity") {
    const auto set = sample_spokes(12, 32, 7);
    const auto seq = dataset::tokenize(set);
    CHECK(seq.n_tokens == 12);
    CHECK(seq.d_model == 64);
    CHECK(seq.scale > 0.0);

    const auto back = dataset::detokenize(seq, set.cfg);
    REQUIRE(back.spokes.size() == 12);
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(back.spokes[i].angle_deg ==
              doctest::Approx(set.spokes[i].angle_deg).epsilon(1e-12));
        for (std::size_t j = 0; j < 32; ++j) {
            err += std::norm(back.spokes[i].samples[j] -
                             set.spokes[i].samples[j]);
            ref += std::norm(set.spokes[i].samples[j]);
        }
    }
    CHECK(std::sqrt(err / ref) <= 1e-6);
}

TEST_CASE("token rows are normalized projection halves") {
    const auto set = sample_spokes(5, 32, 9);
    const auto seq = dataset::tokenize(set);
    const auto p = fourier::spoke_to_projection(set.spokes[3]);
    for (std::size_t j = 0; j < 32; ++j) {
        CHECK(seq.row(3)[j] ==
              doctest::Approx(p.samples[j].real() / seq.scale).epsilon(1e-12));
        CHECK(seq.row(3)[32 + j] ==
              doctest::Approx(p.samples[j].imag() / seq.scale).epsilon(1e-12));
    }
}

TEST_CASE("train samples share the source window and split the targets") {
    const auto set = sample_spokes(40, 32, 4);
    const auto seq = dataset::tokenize(set);
    const auto samples = dataset::make_train_samples(seq, 10);
    for (int b = 1; b <= 3; ++b) {
        const auto& s = samples[std::size_t(b - 1)];
        CHECK(s.block == b);
        CHECK(s.src.n_tokens == 10);
        CHECK(s.tgt.n_tokens == 10);
        CHECK(s.src.start_index == 0);
        CHECK(s.tgt.start_index == std::size_t(b) * 10);
        for (std::size_t t = 0; t < 10; ++t)
            for (std::size_t j = 0; j < 64; ++j) {
                CHECK(s.src.row(t)[j] == seq.row(t)[j]);
                CHECK(s.tgt.row(t)[j] == seq.row(std::size_t(b) * 10 + t)[j]);
            }
    }
    CHECK_THROWS_AS(dataset::make_train_samples(seq, 11), ShapeError);
}

TEST_CASE("target angles line up with the trajectory") {
    const auto full = sample_spokes(60, 32, 8);
    const auto windows = dataset::make_windows(full, 40, 20);
    const auto seq = dataset::tokenize(windows[1], 20);  // spokes 20..59
    const auto samples = dataset::make_train_samples(seq, 10);
    for (const auto& s : samples) {
        CHECK(s.tgt.orig_start_index == 20 + std::size_t(s.block) * 10);
        const auto tgt_spokes = dataset::detokenize(s.tgt, full.cfg);
        for (std::size_t t = 0; t < 10; ++t) {
            const std::size_t orig = s.tgt.orig_start_index + t;
            CHECK(tgt_spokes.spokes[t].angle_deg ==
                  doctest::Approx(traj::spoke_angle(orig, full.cfg))
                      .epsilon(1e-12));
        }
    }
}
