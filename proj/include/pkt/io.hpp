#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pkt/dataset.hpp"
#include "pkt/fourier.hpp"
#include "pkt/image.hpp"
#include "pkt/phantom.hpp"

namespace pkt::io {

// All formats are little-endian binary with a 4-byte magic, a u32
// version and explicit element counts; data payloads are f32, except
// checkpoints which keep f64 so training can resume exactly. Readers
// throw FormatError on magic mismatch, bad counts or truncation.

// "RKS1": n_spokes, n_readout, golden_angle_deg, scale, samples
// spoke-major. Spoke indices are implicit 0..n_spokes-1.
void write_spokes(const std::string& path, const fourier::SpokeSet& set,
                  double scale = 1.0);
fourier::SpokeSet read_spokes(const std::string& path,
                              double* scale_out = nullptr);

// "PSQ1": token matrix with start/orig indices and scale.
void write_sequence(const std::string& path,
                    const dataset::ProjectionSequence& seq,
                    double golden_angle_deg);
dataset::ProjectionSequence read_sequence(const std::string& path,
                                          double* golden_angle_out = nullptr);

// "RCI1": single complex image.
void write_image(const std::string& path, const ComplexImage& img);
ComplexImage read_image(const std::string& path);

// "RCM1": coil map stack.
void write_coil_maps(const std::string& path, const phantom::CoilMaps& maps);
phantom::CoilMaps read_coil_maps(const std::string& path);

// "CKP1": named parameter tensors plus optional Adam moments.
struct NamedTensor {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<double> data;
};

struct Checkpoint {
    std::string config_text;  // flat key = value lines
    std::vector<NamedTensor> params;
    bool has_adam = false;
    std::uint64_t adam_step = 0;
    std::vector<NamedTensor> adam_m, adam_v;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// 16-bit binary PGM scaled to the data range, plus raw f32 plane.
void write_pgm16(const std::string& path, const std::vector<double>& plane,
                 std::size_t width, std::size_t height);
void write_raw_plane(const std::string& path,
                     const std::vector<double>& plane);
std::vector<double> read_raw_plane(const std::string& path);

}  // namespace pkt::io
