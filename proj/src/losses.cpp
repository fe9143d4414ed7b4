#include "rpmnet/losses.hpp"

#include <algorithm>
#include <string>

#include "rpmnet/error.hpp"

namespace rpmnet {
namespace {

void check_labels(std::span<const std::size_t> labels, std::size_t num_classes, const char* op) {
    for (std::size_t y : labels) {
        if (y >= num_classes) {
            throw ContractError(std::string(op) + ": label " + std::to_string(y) + " out of range [0, " +
                                std::to_string(num_classes) + ")");
        }
    }
}

}  // namespace

double weighted_total(const LossWeights& w, double ce, double margin, double fisher) {
    return (ce * w.alpha + margin * w.lambda) + fisher * w.beta;
}

LossBreakdown LossNodes::read(const grad::Graph& g, const LossWeights& w) const {
    LossBreakdown b;
    b.ce = g.value(ce).item();
    b.margin = g.value(margin).item();
    b.fisher = g.value(fisher).item();
    b.total = g.value(total).item();
    b.weights = w;
    return b;
}

Tensor one_hot(std::span<const std::size_t> labels, std::size_t num_classes) {
    check_labels(labels, num_classes, "one_hot");
    Tensor y({labels.size(), num_classes});
    for (std::size_t i = 0; i < labels.size(); ++i) y(i, labels[i]) = 1.0;
    return y;
}

grad::NodeId ce_loss(grad::Graph& g, grad::NodeId logits, std::span<const std::size_t> labels) {
    return g.softmax_cross_entropy(logits, {labels.begin(), labels.end()});
}

grad::NodeId margin_loss(grad::Graph& g, grad::NodeId z, grad::NodeId points, grad::NodeId raw_margins,
                         std::span<const std::size_t> labels) {
    const std::size_t K = g.value(points).rows();
    const double m = static_cast<double>(g.value(z).cols());
    const grad::NodeId y = g.constant(one_hot(labels, K));
    const grad::NodeId own_point = g.matmul(y, points);
    const grad::NodeId de = g.scale(g.sum_axis(g.square(g.sub(z, own_point)), 1), 1.0 / m);
    const grad::NodeId own_margin = g.matmul(y, g.transpose(g.softplus(raw_margins)));
    return g.mean(g.relu(g.sub(de, own_margin)));
}

grad::NodeId fisher_loss(grad::Graph& g, grad::NodeId z, std::span<const std::size_t> labels,
                         std::size_t num_classes) {
    const std::size_t N = labels.size();
    if (N == 0) throw ContractError("fisher_loss: empty batch");
    if (g.value(z).rows() != N) throw ShapeError("fisher_loss: embeddings and labels differ in length");

    const Tensor y = one_hot(labels, num_classes);
    std::vector<double> counts(num_classes, 0.0);
    for (std::size_t label : labels) counts[label] += 1.0;

    // Class-mean operator: row k averages the samples of class k.
    Tensor averager({num_classes, N});
    for (std::size_t i = 0; i < N; ++i) averager(labels[i], i) = 1.0 / counts[labels[i]];

    const grad::NodeId class_means = g.matmul(g.constant(std::move(averager)), z);
    const grad::NodeId own_mean = g.matmul(g.constant(y), class_means);
    const grad::NodeId within = g.sum(g.square(g.sub(z, own_mean)));

    const grad::NodeId global_mean = g.matmul(g.constant(Tensor::filled({1, N}, 1.0 / static_cast<double>(N))), z);
    const grad::NodeId spread = g.square(g.sub(class_means, global_mean));
    const grad::NodeId weighted = g.mul(spread, g.constant(Tensor::matrix(num_classes, 1, counts)));
    const grad::NodeId between = g.sum(weighted);

    const grad::NodeId ratio = g.div(between, g.add_const(within, kScatterEpsilon));
    return g.div(g.constant(Tensor::scalar(1.0)), g.add_const(ratio, 1.0));
}

LossNodes total_loss(grad::Graph& g, const ParamNodes& p, grad::NodeId x, std::span<const std::size_t> labels,
                     const ModelParams& params, const LossWeights& weights, Mode mode, double dropout_rate,
                     const DropoutMasks* masks) {
    const std::size_t K = params.num_classes();
    check_labels(labels, K, "total_loss");
    LossNodes n;
    n.embeddings = embed(g, p, x, mode, dropout_rate, masks);
    n.logits = g.scale(rp_distances(g, n.embeddings, p.points), params.gamma);
    n.ce = ce_loss(g, n.logits, labels);
    n.margin = margin_loss(g, n.embeddings, p.points, p.raw_margins, labels);
    n.fisher = fisher_loss(g, n.embeddings, labels, K);
    const grad::NodeId weighted_ce = g.scale(n.ce, weights.alpha);
    const grad::NodeId weighted_margin = g.scale(n.margin, weights.lambda);
    const grad::NodeId weighted_fisher = g.scale(n.fisher, weights.beta);
    n.total = g.add(g.add(weighted_ce, weighted_margin), weighted_fisher);
    return n;
}

double ce_loss(const Tensor& logits, std::span<const std::size_t> labels) {
    grad::Graph g;
    return g.value(ce_loss(g, g.constant(logits), labels)).item();
}

double margin_loss(const Tensor& embeddings, std::span<const std::size_t> labels, const ModelParams& params) {
    grad::Graph g;
    const grad::NodeId z = g.constant(embeddings);
    const grad::NodeId points = g.constant(params.reciprocal_points);
    const grad::NodeId raw = g.constant(params.raw_margins);
    return g.value(margin_loss(g, z, points, raw, labels)).item();
}

double fisher_loss(const Tensor& embeddings, std::span<const std::size_t> labels) {
    if (labels.empty()) throw ContractError("fisher_loss: empty batch");
    const std::size_t K = *std::max_element(labels.begin(), labels.end()) + 1;
    grad::Graph g;
    return g.value(fisher_loss(g, g.constant(embeddings), labels, K)).item();
}

LossBreakdown total_loss(const Tensor& x, std::span<const std::size_t> labels, const ModelParams& params,
                         const LossWeights& weights) {
    grad::Graph g;
    const ParamNodes p = bind_params(g, params);
    const LossNodes n = total_loss(g, p, g.constant(x), labels, params, weights, Mode::Infer, 0.0, nullptr);
    return n.read(g, weights);
}

}  // namespace rpmnet
