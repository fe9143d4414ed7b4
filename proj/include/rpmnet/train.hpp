#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpmnet/error.hpp"
#include "rpmnet/losses.hpp"
#include "rpmnet/model.hpp"
#include "rpmnet/tensor.hpp"

namespace rpmnet {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct TrainConfig {
    LossWeights weights;
    AdamConfig adam;
    std::size_t epochs = 30;
    std::size_t batch_size = 128;
    std::array<std::size_t, 2> hidden_dims = {256, 128};
    std::size_t embed_dim = 64;
    double dropout_rate = 0.2;
    double gamma = 1.0;
    std::uint64_t seed = 42;

    /// Throws ContractError naming the first invalid field.
    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Normalized features with class indices into `vocabulary`.
struct TrainingSet {
    Tensor features;  // [N x d]
    std::vector<std::size_t> labels;
    std::vector<std::string> vocabulary;

    std::size_t size() const { return labels.size(); }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    LossBreakdown loss;     // sample-weighted means over the epoch's batches
    double train_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;

    friend bool operator==(const TrainHistory& a, const TrainHistory& b);
};

/// Tab-separated table with header `epoch ce margin fisher total acc`.
void write_history(std::ostream& out, const TrainHistory& history);

struct AdamState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every tensor in `params`.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config);

/// Non-finite loss or gradient during training.
class TrainingError : public Error {
public:
    using Error::Error;
};

struct TrainResult {
    ModelParams params;
    TrainHistory history;
};

/// Mini-batch Adam over the full objective. Shuffles, dropout masks and the
/// initialization all draw from one generator seeded with `config.seed`.
TrainResult train(const TrainingSet& data, const TrainConfig& config);

/// Fraction of rows whose highest-distance class matches the label.
double accuracy(const Tensor& features, std::span<const std::size_t> labels, const ModelParams& params);

}  // namespace rpmnet
