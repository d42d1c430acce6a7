#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pkt/dataset.hpp"

namespace pkt::metrics {

struct MetricsRecord {
    std::string method;
    std::string subject;
    std::string slice;
    double nmse = 0.0;
    double psnr_db = 0.0;  // +infinity when images are identical
    double ssim = 0.0;
    std::optional<double> proj_nmse;
};

// Both magnitude images divided by their own 90th percentile.
void normalize_pair(std::vector<double>& x, std::vector<double>& ref);

// ||x - ref||^2 / ||ref||^2
double nmse(const std::vector<double>& x, const std::vector<double>& ref);

// 10*log10(max(ref)^2 / mse); identical inputs give +infinity
double psnr(const std::vector<double>& x, const std::vector<double>& ref);

// Mean local SSIM, 11x11 Gaussian window sigma=1.5, K1=0.01, K2=0.03,
// dynamic range max(ref)-min(ref). Windows fully inside the image.
double ssim(const std::vector<double>& x, const std::vector<double>& ref,
            std::size_t width, std::size_t height);

// NMSE over flattened token matrices.
double proj_nmse(const dataset::ProjectionSequence& pred,
                 const dataset::ProjectionSequence& truth);

// Per-record rows plus one "mean +/- std" summary row per method,
// formatted deterministically. Columns: method, subject, slice, nmse,
// psnr_db, ssim, proj_nmse.
std::string format_report(const std::vector<MetricsRecord>& records);
void emit_report(const std::string& path,
                 const std::vector<MetricsRecord>& records);

}  // namespace pkt::metrics
