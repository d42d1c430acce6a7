#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "pkt/errors.hpp"
#include "pkt/io.hpp"
#include "pkt/phantom.hpp"

using namespace pkt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("pkt_io_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

std::string read_bytes(const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f),
                       std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& p, const std::string& bytes) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << bytes;
}

fourier::SpokeSet some_spokes() {
    phantom::PhantomSpec spec;
    spec.size = 16;
    spec.rng_seed = 1;
    const auto img = phantom::make_phantom(spec);
    std::vector<std::size_t> idx(6);
    std::iota(idx.begin(), idx.end(), 0);
    return fourier::ndft_forward(img, idx,
                                 traj::TrajectoryConfig::for_readout(32));
}

}  // namespace

TEST_CASE("spoke file roundtrip") {
    TempDir tmp;
    const auto set = some_spokes();
    io::write_spokes(tmp.file("a.rks"), set, 3.25);

    double scale = 0.0;
    const auto back = io::read_spokes(tmp.file("a.rks"), &scale);
    CHECK(scale == 3.25);
    CHECK(back.cfg.n_readout == 32);
    CHECK(back.cfg.golden_angle == set.cfg.golden_angle);
    REQUIRE(back.spokes.size() == set.spokes.size());
    for (std::size_t i = 0; i < set.spokes.size(); ++i) {
        CHECK(back.spokes[i].index == i);
        CHECK(back.spokes[i].angle_deg ==
              doctest::Approx(set.spokes[i].angle_deg).epsilon(1e-12));
        for (std::size_t j = 0; j < 32; ++j) {
            // payload is f32: re-reading what was written is exact
            CHECK(back.spokes[i].samples[j].real() ==
                  float(set.spokes[i].samples[j].real()));
            CHECK(back.spokes[i].samples[j].imag() ==
                  float(set.spokes[i].samples[j].imag()));
        }
    }

    // a second write of the read-back data is byte-identical
    io::write_spokes(tmp.file("b.rks"), back, scale);
    io::write_spokes(tmp.file("c.rks"),
                     io::read_spokes(tmp.file("b.rks")), scale);
    CHECK(read_bytes(tmp.file("b.rks")) == read_bytes(tmp.file("c.rks")));
}

TEST_CASE("corrupted magic and truncation are rejected") {
    TempDir tmp;
    io::write_spokes(tmp.file("a.rks"), some_spokes());

    auto bytes = read_bytes(tmp.file("a.rks"));
    auto bad = bytes;
    bad[0] = 'X';
    write_bytes(tmp.file("bad.rks"), bad);
    CHECK_THROWS_AS(io::read_spokes(tmp.file("bad.rks")), FormatError);

    write_bytes(tmp.file("trunc.rks"), bytes.substr(0, bytes.size() - 7));
    CHECK_THROWS_AS(io::read_spokes(tmp.file("trunc.rks")), FormatError);

    write_bytes(tmp.file("extra.rks"), bytes + "zzz");
    CHECK_THROWS_AS(io::read_spokes(tmp.file("extra.rks")), FormatError);

    CHECK_THROWS_AS(io::read_spokes(tmp.file("absent.rks")), MissingArtifact);
}

TEST_CASE("sequence file roundtrip") {
    TempDir tmp;
    const auto seq0 = dataset::tokenize(some_spokes());
    auto seq = dataset::slice_sequence(seq0, 2, 4);
    io::write_sequence(tmp.file("a.psq"), seq, traj::golden_angle_deg());

    double ga = 0.0;
    const auto back = io::read_sequence(tmp.file("a.psq"), &ga);
    CHECK(ga == traj::golden_angle_deg());
    CHECK(back.n_tokens == 4);
    CHECK(back.d_model == 64);
    CHECK(back.start_index == 2);
    CHECK(back.orig_start_index == 2);
    CHECK(back.scale == seq.scale);
    for (std::size_t i = 0; i < back.tokens.size(); ++i)
        CHECK(back.tokens[i] == float(seq.tokens[i]));
}

TEST_CASE("image and coil map roundtrips") {
    TempDir tmp;
    phantom::PhantomSpec spec;
    spec.size = 12;
    spec.rng_seed = 2;
    const auto img = phantom::make_phantom(spec);
    io::write_image(tmp.file("a.rci"), img);
    const auto back = io::read_image(tmp.file("a.rci"));
    CHECK(back.size == 12);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        CHECK(back.data[i].real() == float(img.data[i].real()));
        CHECK(back.data[i].imag() == float(img.data[i].imag()));
    }

    const auto maps = phantom::make_coil_maps(3, 10, 4);
    io::write_coil_maps(tmp.file("m.rcm"), maps);
    const auto maps2 = io::read_coil_maps(tmp.file("m.rcm"));
    REQUIRE(maps2.n_coils == 3);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < maps.maps[c].data.size(); ++i)
            CHECK(maps2.maps[c].data[i].real() ==
                  float(maps.maps[c].data[i].real()));
}

TEST_CASE("checkpoint roundtrip keeps full double precision") {
    TempDir tmp;
    io::Checkpoint ck;
    ck.config_text = "d_model = 8\nblock = 2\n";
    ck.params.push_back({"w", {2, 3}, {0.1, 0.2, 0.3, 1.0 / 3.0, -5.5, 1e-17}});
    ck.params.push_back({"b", {3}, {1.0, 2.0, 3.0}});
    ck.has_adam = true;
    ck.adam_step = 41;
    ck.adam_m.push_back({"w", {2, 3}, {0, 0, 0, 0, 0, 1e-9}});
    ck.adam_m.push_back({"b", {3}, {0, 0, 0.5}});
    ck.adam_v = ck.adam_m;

    io::write_checkpoint(tmp.file("a.ckp"), ck);
    const auto back = io::read_checkpoint(tmp.file("a.ckp"));
    CHECK(back.config_text == ck.config_text);
    REQUIRE(back.params.size() == 2);
    CHECK(back.params[0].name == "w");
    CHECK(back.params[0].dims == std::vector<std::size_t>{2, 3});
    CHECK(back.params[0].data == ck.params[0].data);  // f64 payload, exact
    CHECK(back.has_adam);
    CHECK(back.adam_step == 41);
    CHECK(back.adam_m[1].data == ck.adam_m[1].data);

    auto bytes = read_bytes(tmp.file("a.ckp"));
    bytes[1] = '?';
    write_bytes(tmp.file("bad.ckp"), bytes);
    CHECK_THROWS_AS(io::read_checkpoint(tmp.file("bad.ckp")), FormatError);
}

TEST_CASE("pgm and raw plane output") {
    TempDir tmp;
    std::vector<double> plane = {0.0, 0.5, 1.0, 2.0};
    io::write_pgm16(tmp.file("p.pgm"), plane, 2, 2);
    const auto bytes = read_bytes(tmp.file("p.pgm"));
    CHECK(bytes.substr(0, 2) == "P5");
    CHECK(bytes.find("65535") != std::string::npos);
    // max value maps to 65535 big-endian at the end of the payload
    CHECK((unsigned char)bytes[bytes.size() - 2] == 0xff);
    CHECK((unsigned char)bytes[bytes.size() - 1] == 0xff);
    // min value maps to 0
    CHECK((unsigned char)bytes[bytes.size() - 8] == 0x00);
    CHECK((unsigned char)bytes[bytes.size() - 7] == 0x00);

    io::write_raw_plane(tmp.file("p.f32"), plane);
    const auto back = io::read_raw_plane(tmp.file("p.f32"));
    REQUIRE(back.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(back[i] == plane[i]);
}
