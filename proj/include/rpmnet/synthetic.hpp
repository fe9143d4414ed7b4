#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rpmnet/dataio.hpp"

namespace rpmnet::synthetic {

/// Isotropic Gaussian cluster of labelled flow records.
struct Blob {
    std::string label;
    std::vector<double> mean;
    double std_dev = 1.0;
    std::size_t count = 0;
};

/// Draws every blob and shuffles the result into one interleaved collection.
std::vector<FlowRecord> sample(std::span<const Blob> blobs, std::uint64_t seed);

/// Cluster centers `scale * e_k` for k = 0..n-1 in `dim` dimensions.
std::vector<std::vector<double>> axis_means(std::size_t n, std::size_t dim, double scale);

/// Four imbalanced known classes (1000/500/200/50) and one unknown cluster
/// whose samples are labelled val_unknown (200) or test_unknown (300);
/// d = 20, std 0.3. Known means are 3 * e_0..e_3; the unknown cluster sits at their
/// centroid, so every pair of means is at least 3 apart.
std::vector<Blob> open_set_benchmark();

/// Writes records as CSV with columns f0..f{d-1},Label.
void write_flows(const std::string& path, std::span<const FlowRecord> records);

}  // namespace rpmnet::synthetic
