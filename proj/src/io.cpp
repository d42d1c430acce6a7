#include "pkt/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "pkt/errors.hpp"
#include "pkt/trajectory.hpp"

namespace pkt::io {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifact("cannot open: " + path);
    return f;
}

template <typename T>
void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw FormatError("truncated file: " + path);
    return v;
}

void put_magic(std::ofstream& f, const char m[4]) { f.write(m, 4); }

void expect_magic(std::ifstream& f, const char m[4], const std::string& path) {
    char buf[4];
    f.read(buf, 4);
    if (!f || std::memcmp(buf, m, 4) != 0)
        throw FormatError("bad magic in " + path);
}

void put_f32_pairs(std::ofstream& f, const std::vector<cplx>& v) {
    for (const auto& z : v) {
        put<float>(f, float(z.real()));
        put<float>(f, float(z.imag()));
    }
}

void get_f32_pairs(std::ifstream& f, std::vector<cplx>& v,
                   const std::string& path) {
    for (auto& z : v) {
        const float re = get<float>(f, path);
        const float im = get<float>(f, path);
        z = cplx(re, im);
    }
}

constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_spokes(const std::string& path, const fourier::SpokeSet& set,
                  double scale) {
    auto f = open_out(path);
    put_magic(f, "RKS1");
    put<std::uint32_t>(f, kVersion);
    put<std::uint32_t>(f, std::uint32_t(set.spokes.size()));
    put<std::uint32_t>(f, std::uint32_t(set.cfg.n_readout));
    put<double>(f, set.cfg.golden_angle);
    put<double>(f, scale);
    for (const auto& s : set.spokes) put_f32_pairs(f, s.samples);
    if (!f) throw FormatError("write failed: " + path);
}

fourier::SpokeSet read_spokes(const std::string& path, double* scale_out) {
    auto f = open_in(path);
    expect_magic(f, "RKS1", path);
    const auto version = get<std::uint32_t>(f, path);
    if (version != kVersion) throw FormatError("unsupported version: " + path);
    const auto n_spokes = get<std::uint32_t>(f, path);
    const auto n_readout = get<std::uint32_t>(f, path);
    const double golden = get<double>(f, path);
    const double scale = get<double>(f, path);
    if (scale_out) *scale_out = scale;

    fourier::SpokeSet set;
    set.cfg = traj::TrajectoryConfig::for_readout(n_readout);
    set.cfg.golden_angle = golden;
    set.spokes.resize(n_spokes);
    for (std::uint32_t i = 0; i < n_spokes; ++i) {
        auto& s = set.spokes[i];
        s.index = i;
        s.angle_deg = traj::spoke_angle(i, set.cfg);
        s.samples.resize(n_readout);
        get_f32_pairs(f, s.samples, path);
    }
    // header count must exactly match payload
    f.peek();
    if (!f.eof()) throw FormatError("trailing bytes in " + path);
    return set;
}

void write_sequence(const std::string& path,
                    const dataset::ProjectionSequence& seq,
                    double golden_angle_deg) {
    auto f = open_out(path);
    put_magic(f, "PSQ1");
    put<std::uint32_t>(f, kVersion);
    put<std::uint32_t>(f, std::uint32_t(seq.n_tokens));
    put<std::uint32_t>(f, std::uint32_t(seq.d_model));
    put<std::uint32_t>(f, std::uint32_t(seq.start_index));
    put<std::uint32_t>(f, std::uint32_t(seq.orig_start_index));
    put<double>(f, golden_angle_deg);
    put<double>(f, seq.scale);
    for (double v : seq.tokens) put<float>(f, float(v));
    if (!f) throw FormatError("write failed: " + path);
}

dataset::ProjectionSequence read_sequence(const std::string& path,
                                          double* golden_angle_out) {
    auto f = open_in(path);
    expect_magic(f, "PSQ1", path);
    if (get<std::uint32_t>(f, path) != kVersion)
        throw FormatError("unsupported version: " + path);
    dataset::ProjectionSequence seq;
    seq.n_tokens = get<std::uint32_t>(f, path);
    seq.d_model = get<std::uint32_t>(f, path);
    seq.start_index = get<std::uint32_t>(f, path);
    seq.orig_start_index = get<std::uint32_t>(f, path);
    const double golden = get<double>(f, path);
    if (golden_angle_out) *golden_angle_out = golden;
    seq.scale = get<double>(f, path);
    seq.tokens.resize(seq.n_tokens * seq.d_model);
    for (double& v : seq.tokens) v = get<float>(f, path);
    f.peek();
    if (!f.eof()) throw FormatError("trailing bytes in " + path);
    return seq;
}

void write_image(const std::string& path, const ComplexImage& img) {
    auto f = open_out(path);
    put_magic(f, "RCI1");
    put<std::uint32_t>(f, kVersion);
    put<std::uint32_t>(f, std::uint32_t(img.size));
    put<std::uint32_t>(f, std::uint32_t(img.size));
    put_f32_pairs(f, img.data);
    if (!f) throw FormatError("write failed: " + path);
}

ComplexImage read_image(const std::string& path) {
    auto f = open_in(path);
    expect_magic(f, "RCI1", path);
    if (get<std::uint32_t>(f, path) != kVersion)
        throw FormatError("unsupported version: " + path);
    const auto w = get<std::uint32_t>(f, path);
    const auto h = get<std::uint32_t>(f, path);
    if (w != h) throw FormatError("image must be square: " + path);
    ComplexImage img(w);
    get_f32_pairs(f, img.data, path);
    f.peek();
    if (!f.eof()) throw FormatError("trailing bytes in " + path);
    return img;
}

void write_coil_maps(const std::string& path, const phantom::CoilMaps& maps) {
    auto f = open_out(path);
    put_magic(f, "RCM1");
    put<std::uint32_t>(f, kVersion);
    put<std::uint32_t>(f, std::uint32_t(maps.n_coils));
    put<std::uint32_t>(f,
                       std::uint32_t(maps.maps.empty() ? 0 : maps.maps[0].size));
    for (const auto& m : maps.maps) put_f32_pairs(f, m.data);
    if (!f) throw FormatError("write failed: " + path);
}

phantom::CoilMaps read_coil_maps(const std::string& path) {
    auto f = open_in(path);
    expect_magic(f, "RCM1", path);
    if (get<std::uint32_t>(f, path) != kVersion)
        throw FormatError("unsupported version: " + path);
    phantom::CoilMaps maps;
    maps.n_coils = get<std::uint32_t>(f, path);
    const auto size = get<std::uint32_t>(f, path);
    maps.maps.assign(maps.n_coils, ComplexImage(size));
    for (auto& m : maps.maps) get_f32_pairs(f, m.data, path);
    f.peek();
    if (!f.eof()) throw FormatError("trailing bytes in " + path);
    return maps;
}

namespace {

void put_named(std::ofstream& f, const NamedTensor& t) {
    put<std::uint32_t>(f, std::uint32_t(t.name.size()));
    f.write(t.name.data(), std::streamsize(t.name.size()));
    put<std::uint32_t>(f, std::uint32_t(t.dims.size()));
    std::size_t count = 1;
    for (std::size_t d : t.dims) {
        put<std::uint32_t>(f, std::uint32_t(d));
        count *= d;
    }
    if (count != t.data.size())
        throw FormatError("tensor dims inconsistent with payload: " + t.name);
    for (double v : t.data) put<double>(f, v);
}

NamedTensor get_named(std::ifstream& f, const std::string& path) {
    NamedTensor t;
    const auto name_len = get<std::uint32_t>(f, path);
    t.name.resize(name_len);
    f.read(t.name.data(), name_len);
    if (!f) throw FormatError("truncated file: " + path);
    const auto rank = get<std::uint32_t>(f, path);
    std::size_t count = 1;
    t.dims.resize(rank);
    for (auto& d : t.dims) {
        d = get<std::uint32_t>(f, path);
        count *= d;
    }
    t.data.resize(count);
    for (double& v : t.data) v = get<double>(f, path);
    return t;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    auto f = open_out(path);
    put_magic(f, "CKP1");
    put<std::uint32_t>(f, kVersion);
    put<std::uint32_t>(f, std::uint32_t(ckpt.params.size()));
    put<std::uint32_t>(f, std::uint32_t(ckpt.config_text.size()));
    f.write(ckpt.config_text.data(),
            std::streamsize(ckpt.config_text.size()));
    for (const auto& t : ckpt.params) put_named(f, t);
    put<std::uint8_t>(f, ckpt.has_adam ? 1 : 0);
    if (ckpt.has_adam) {
        if (ckpt.adam_m.size() != ckpt.params.size() ||
            ckpt.adam_v.size() != ckpt.params.size())
            throw FormatError("adam state count mismatch");
        put<std::uint64_t>(f, ckpt.adam_step);
        for (const auto& t : ckpt.adam_m) put_named(f, t);
        for (const auto& t : ckpt.adam_v) put_named(f, t);
    }
    if (!f) throw FormatError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    auto f = open_in(path);
    expect_magic(f, "CKP1", path);
    if (get<std::uint32_t>(f, path) != kVersion)
        throw FormatError("unsupported version: " + path);
    Checkpoint ckpt;
    const auto n_params = get<std::uint32_t>(f, path);
    const auto cfg_len = get<std::uint32_t>(f, path);
    ckpt.config_text.resize(cfg_len);
    f.read(ckpt.config_text.data(), cfg_len);
    if (!f) throw FormatError("truncated file: " + path);
    ckpt.params.reserve(n_params);
    for (std::uint32_t i = 0; i < n_params; ++i)
        ckpt.params.push_back(get_named(f, path));
    ckpt.has_adam = get<std::uint8_t>(f, path) != 0;
    if (ckpt.has_adam) {
        ckpt.adam_step = get<std::uint64_t>(f, path);
        for (std::uint32_t i = 0; i < n_params; ++i)
            ckpt.adam_m.push_back(get_named(f, path));
        for (std::uint32_t i = 0; i < n_params; ++i)
            ckpt.adam_v.push_back(get_named(f, path));
    }
    f.peek();
    if (!f.eof()) throw FormatError("trailing bytes in " + path);
    return ckpt;
}

void write_pgm16(const std::string& path, const std::vector<double>& plane,
                 std::size_t width, std::size_t height) {
    if (plane.size() != width * height)
        throw ShapeError("plane size does not match dimensions");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : plane) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = (hi > lo) ? (hi - lo) : 1.0;
    auto f = open_out(path);
    f << "P5\n" << width << " " << height << "\n65535\n";
    for (double v : plane) {
        const auto q = std::uint16_t(
            std::lround((v - lo) / span * 65535.0));
        // PGM is big-endian
        const char bytes[2] = {char(q >> 8), char(q & 0xff)};
        f.write(bytes, 2);
    }
    if (!f) throw FormatError("write failed: " + path);
}

void write_raw_plane(const std::string& path,
                     const std::vector<double>& plane) {
    auto f = open_out(path);
    for (double v : plane) put<float>(f, float(v));
    if (!f) throw FormatError("write failed: " + path);
}

std::vector<double> read_raw_plane(const std::string& path) {
    auto f = open_in(path);
    f.seekg(0, std::ios::end);
    const auto bytes = f.tellg();
    f.seekg(0);
    if (bytes % 4 != 0) throw FormatError("raw plane size not f32: " + path);
    std::vector<double> out(std::size_t(bytes) / 4);
    for (double& v : out) v = get<float>(f, path);
    return out;
}

}  // namespace pkt::io
