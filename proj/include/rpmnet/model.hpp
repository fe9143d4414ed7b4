#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpmnet/graph.hpp"
#include "rpmnet/rng.hpp"
#include "rpmnet/tensor.hpp"

namespace rpmnet {

enum class Mode { Train, Infer };

struct ModelDims {
    std::size_t input_dim = 0;
    std::array<std::size_t, 2> hidden = {256, 128};
    std::size_t embed_dim = 64;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Complete learnable state of the network plus its label vocabulary.
///
/// Layer weights are stored input-major ([in x out]) so a batch X [N x in]
/// maps to X * W + b.
struct ModelParams {
    std::array<Tensor, 3> weights;
    std::array<Tensor, 3> biases;
    Tensor reciprocal_points;  // [K x m]
    Tensor raw_margins;        // [K]; margin R_k = softplus(raw_k)
    double gamma = 1.0;
    ModelDims dims;
    std::vector<std::string> labels;

    std::size_t num_classes() const { return labels.size(); }
    std::vector<double> margins() const;

    /// Trainable tensors in a fixed order: W1 b1 W2 b2 W3 b3 points raw_margins.
    std::vector<Tensor*> trainables();
    std::vector<const Tensor*> trainables() const;

    /// Throws ContractError when shapes disagree with dims/labels or values are non-finite.
    void validate() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Raw margin value whose softplus equals `margin`.
double inverse_softplus(double margin);

/// He-initialized extractor, N(0, 0.1^2) reciprocal points, margins near 1.0.
ModelParams init_params(const ModelDims& dims, std::vector<std::string> labels, double gamma, Rng& rng);

/// Bernoulli keep-masks for the two dropout sites of a batch of `rows`.
using DropoutMasks = std::array<Tensor, 2>;
DropoutMasks sample_dropout_masks(std::size_t rows, const ModelDims& dims, double rate, Rng& rng);

/// Graph handles for the model's trainable leaves.
struct ParamNodes {
    std::array<grad::NodeId, 3> weights{};
    std::array<grad::NodeId, 3> biases{};
    grad::NodeId points = 0;
    grad::NodeId raw_margins = 0;

    std::vector<grad::NodeId> all() const;
};

ParamNodes bind_params(grad::Graph& g, const ModelParams& params);

/// Embedding z = W3 relu(drop(W2 relu(drop(W1 x + b1)) + b2)) + b3.
/// Masks are required exactly when mode is Train and rate > 0.
grad::NodeId embed(grad::Graph& g, const ParamNodes& p, grad::NodeId x, Mode mode, double dropout_rate,
                   const DropoutMasks* masks);

/// Squared distances to the reciprocal points divided by m: [N x K].
grad::NodeId euclidean_term(grad::Graph& g, grad::NodeId z, grad::NodeId points);

/// Hybrid distance d = ||z - p||^2 / m - cos(z, p) for every (sample, point): [N x K].
grad::NodeId rp_distances(grad::Graph& g, grad::NodeId z, grad::NodeId points);

/// Norm floor used in the cosine term.
inline constexpr double kNormFloor = 1e-12;

/// Hybrid distance between one embedding and one reciprocal point.
double rp_distance(std::span<const double> z, std::span<const double> p);

// Inference-mode conveniences over plain tensors.
Tensor embed(const Tensor& x, const ModelParams& params);
Tensor distances(const Tensor& x, const ModelParams& params);
Tensor logits(const Tensor& x, const ModelParams& params);

}  // namespace rpmnet
