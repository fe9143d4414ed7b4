#include "rpmnet/synthetic.hpp"

#include "rpmnet/error.hpp"
#include "rpmnet/rng.hpp"

namespace rpmnet::synthetic {

std::vector<FlowRecord> sample(std::span<const Blob> blobs, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<FlowRecord> out;
    for (const Blob& b : blobs) {
        for (std::size_t i = 0; i < b.count; ++i) {
            FlowRecord r;
            r.label = b.label;
            r.features.reserve(b.mean.size());
            for (double m : b.mean) r.features.push_back(m + b.std_dev * rng.normal());
            out.push_back(std::move(r));
        }
    }
    rng.shuffle(std::span<FlowRecord>(out));
    return out;
}

std::vector<std::vector<double>> axis_means(std::size_t n, std::size_t dim, double scale) {
    if (n > dim) throw ContractError("axis_means: more clusters than dimensions");
    std::vector<std::vector<double>> means(n, std::vector<double>(dim, 0.0));
    for (std::size_t k = 0; k < n; ++k) means[k][k] = scale;
    return means;
}

std::vector<Blob> open_set_benchmark() {
    const auto means = axis_means(4, 20, 3.0);
    // Unknowns sit at the centroid of the known means, 3.0 from each of them.
    std::vector<double> centre(20, 0.0);
    for (std::size_t j = 0; j < 4; ++j) centre[j] = 1.5;
    return {
        {"alpha", means[0], 0.3, 1000},  {"bravo", means[1], 0.3, 500},
        {"charlie", means[2], 0.3, 200}, {"delta", means[3], 0.3, 50},
        {"val_unknown", centre, 0.3, 200}, {"test_unknown", centre, 0.3, 300},
    };
}

void write_flows(const std::string& path, std::span<const FlowRecord> records) {
    FlowDataset data;
    const std::size_t d = records.empty() ? 0 : records.front().features.size();
    for (std::size_t j = 0; j < d; ++j) data.feature_names.push_back("f" + std::to_string(j));
    data.records.assign(records.begin(), records.end());
    write_csv(path, data, "Label");
}

}  // namespace rpmnet::synthetic
