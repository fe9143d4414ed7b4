#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rpmnet/graph.hpp"
#include "rpmnet/model.hpp"
#include "rpmnet/tensor.hpp"

namespace rpmnet {

struct LossWeights {
    double alpha = 1.0;   // cross-entropy
    double lambda = 1.0;  // margin
    double beta = 1.0;    // Fisher; 0 gives the plain reciprocal-point model

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
    double ce = 0.0;
    double margin = 0.0;
    double fisher = 0.0;
    double total = 0.0;
    LossWeights weights;
};

/// alpha * ce + lambda * margin + beta * fisher, summed in that order. The
/// graph builds its total with the same operations, so the two agree bitwise.
double weighted_total(const LossWeights& w, double ce, double margin, double fisher);

/// Guard added to the within-class scatter before dividing.
inline constexpr double kScatterEpsilon = 1e-12;

/// Node ids of the loss terms inside a training graph.
struct LossNodes {
    grad::NodeId ce = 0;
    grad::NodeId margin = 0;
    grad::NodeId fisher = 0;
    grad::NodeId total = 0;
    grad::NodeId embeddings = 0;
    grad::NodeId logits = 0;

    LossBreakdown read(const grad::Graph& g, const LossWeights& w) const;
};

/// Row i of the result is the one-hot encoding of labels[i] over K classes.
Tensor one_hot(std::span<const std::size_t> labels, std::size_t num_classes);

// Graph builders. `labels` must lie in [0, K).
grad::NodeId ce_loss(grad::Graph& g, grad::NodeId logits, std::span<const std::size_t> labels);
grad::NodeId margin_loss(grad::Graph& g, grad::NodeId z, grad::NodeId points, grad::NodeId raw_margins,
                         std::span<const std::size_t> labels);
grad::NodeId fisher_loss(grad::Graph& g, grad::NodeId z, std::span<const std::size_t> labels,
                         std::size_t num_classes);

/// Builds the whole objective for one batch on `g` and returns its nodes;
/// the total is the graph's final node.
LossNodes total_loss(grad::Graph& g, const ParamNodes& p, grad::NodeId x, std::span<const std::size_t> labels,
                     const ModelParams& params, const LossWeights& weights, Mode mode, double dropout_rate,
                     const DropoutMasks* masks);

// Value-only versions.
double ce_loss(const Tensor& logits, std::span<const std::size_t> labels);
double margin_loss(const Tensor& embeddings, std::span<const std::size_t> labels, const ModelParams& params);
double fisher_loss(const Tensor& embeddings, std::span<const std::size_t> labels);
LossBreakdown total_loss(const Tensor& x, std::span<const std::size_t> labels, const ModelParams& params,
                         const LossWeights& weights);

}  // namespace rpmnet
