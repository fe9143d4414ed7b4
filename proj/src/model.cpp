#include "rpmnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rpmnet/error.hpp"

namespace rpmnet {

double inverse_softplus(double margin) { return margin + std::log(-std::expm1(-margin)); }

std::vector<double> ModelParams::margins() const {
    std::vector<double> out(raw_margins.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double x = raw_margins[k];
        out[k] = std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
    }
    return out;
}

std::vector<Tensor*> ModelParams::trainables() {
    return {&weights[0], &biases[0], &weights[1], &biases[1], &weights[2], &biases[2], &reciprocal_points,
            &raw_margins};
}

std::vector<const Tensor*> ModelParams::trainables() const {
    return {&weights[0], &biases[0], &weights[1], &biases[1], &weights[2], &biases[2], &reciprocal_points,
            &raw_margins};
}

void ModelParams::validate() const {
    const std::size_t K = labels.size();
    if (K == 0) throw ContractError("model: empty label vocabulary");
    const std::array<std::size_t, 4> widths = {dims.input_dim, dims.hidden[0], dims.hidden[1], dims.embed_dim};
    for (std::size_t i = 0; i < 3; ++i) {
        if (weights[i].shape() != Shape{widths[i], widths[i + 1]} || biases[i].shape() != Shape{widths[i + 1]}) {
            throw ContractError("model: layer " + std::to_string(i + 1) + " has shape " +
                                shape_to_string(weights[i].shape()) + ", expected [" + std::to_string(widths[i]) +
                                "x" + std::to_string(widths[i + 1]) + "]");
        }
    }
    if (reciprocal_points.shape() != Shape{K, dims.embed_dim}) {
        throw ContractError("model: reciprocal points have shape " + shape_to_string(reciprocal_points.shape()));
    }
    if (raw_margins.shape() != Shape{K}) {
        throw ContractError("model: margins have shape " + shape_to_string(raw_margins.shape()));
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ContractError("model: gamma must be finite and > 0");
    for (const Tensor* t : trainables())
        if (!t->all_finite()) throw ContractError("model: parameters contain NaN or Inf");
}

ModelParams init_params(const ModelDims& dims, std::vector<std::string> labels, double gamma, Rng& rng) {
    if (dims.input_dim == 0 || dims.embed_dim == 0 || dims.hidden[0] == 0 || dims.hidden[1] == 0) {
        throw ContractError("init_params: every layer width must be >= 1");
    }
    ModelParams p;
    p.dims = dims;
    p.gamma = gamma;
    p.labels = std::move(labels);
    const std::array<std::size_t, 4> widths = {dims.input_dim, dims.hidden[0], dims.hidden[1], dims.embed_dim};
    for (std::size_t i = 0; i < 3; ++i) {
        Tensor w({widths[i], widths[i + 1]});
        const double std_dev = std::sqrt(2.0 / static_cast<double>(widths[i]));
        for (double& v : w.data()) v = rng.normal() * std_dev;
        p.weights[i] = std::move(w);
        p.biases[i] = Tensor({widths[i + 1]});
    }
    const std::size_t K = p.labels.size();
    p.reciprocal_points = Tensor({K, dims.embed_dim});
    for (double& v : p.reciprocal_points.data()) v = rng.normal() * 0.1;
    p.raw_margins = Tensor::filled({K}, inverse_softplus(1.0));
    p.validate();
    return p;
}

DropoutMasks sample_dropout_masks(std::size_t rows, const ModelDims& dims, double rate, Rng& rng) {
    DropoutMasks masks;
    for (std::size_t i = 0; i < 2; ++i) {
        Tensor m({rows, dims.hidden[i]});
        for (double& v : m.data()) v = rng.bernoulli(1.0 - rate) ? 1.0 : 0.0;
        masks[i] = std::move(m);
    }
    return masks;
}

std::vector<grad::NodeId> ParamNodes::all() const {
    return {weights[0], biases[0], weights[1], biases[1], weights[2], biases[2], points, raw_margins};
}

ParamNodes bind_params(grad::Graph& g, const ModelParams& params) {
    ParamNodes n;
    for (std::size_t i = 0; i < 3; ++i) {
        n.weights[i] = g.parameter(params.weights[i]);
        n.biases[i] = g.parameter(params.biases[i]);
    }
    n.points = g.parameter(params.reciprocal_points);
    n.raw_margins = g.parameter(params.raw_margins);
    return n;
}

grad::NodeId embed(grad::Graph& g, const ParamNodes& p, grad::NodeId x, Mode mode, double dropout_rate,
                   const DropoutMasks* masks) {
    const bool use_dropout = mode == Mode::Train && dropout_rate > 0.0;
    if (use_dropout != (masks != nullptr)) {
        throw ContractError(use_dropout ? "embed: train mode with dropout needs masks"
                                        : "embed: masks given but dropout is inactive");
    }
    grad::NodeId h = x;
    for (std::size_t i = 0; i < 3; ++i) {
        h = g.add(g.matmul(h, p.weights[i]), p.biases[i]);
        if (i == 2) break;
        h = g.relu(h);
        if (use_dropout) h = g.dropout(h, (*masks)[i], dropout_rate);
    }
    return h;
}

grad::NodeId euclidean_term(grad::Graph& g, grad::NodeId z, grad::NodeId points) {
    const double m = static_cast<double>(g.value(z).cols());
    return g.scale(g.pairwise_sq_dist(z, points), 1.0 / m);
}

grad::NodeId rp_distances(grad::Graph& g, grad::NodeId z, grad::NodeId points) {
    const grad::NodeId de = euclidean_term(g, z, points);
    const grad::NodeId cross = g.matmul(z, g.transpose(points));
    const grad::NodeId zn = g.clamp_min(g.l2_norm_rows(z), kNormFloor);
    const grad::NodeId pn = g.clamp_min(g.l2_norm_rows(points), kNormFloor);
    const grad::NodeId cosine = g.div(cross, g.matmul(zn, g.transpose(pn)));
    return g.sub(de, cosine);
}

double rp_distance(std::span<const double> z, std::span<const double> p) {
    if (z.size() != p.size() || z.empty()) {
        throw ShapeError("rp_distance: vectors of length " + std::to_string(z.size()) + " and " +
                         std::to_string(p.size()));
    }
    double sq = 0.0, cross = 0.0, zz = 0.0, pp = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double diff = z[i] - p[i];
        sq += diff * diff;
        cross += z[i] * p[i];
        zz += z[i] * z[i];
        pp += p[i] * p[i];
    }
    const double de = sq / static_cast<double>(z.size());
    const double dc = cross / (std::max(std::sqrt(zz), kNormFloor) * std::max(std::sqrt(pp), kNormFloor));
    return de - dc;
}

namespace {

struct InferGraph {
    grad::Graph g;
    ParamNodes p;
    grad::NodeId z = 0;
};

InferGraph build_infer(const Tensor& x, const ModelParams& params) {
    if (x.rank() != 2 || x.cols() != params.dims.input_dim) {
        throw ShapeError("embed: input " + shape_to_string(x.shape()) + " does not have width " +
                         std::to_string(params.dims.input_dim));
    }
    InferGraph ig;
    ig.p = bind_params(ig.g, params);
    const grad::NodeId xin = ig.g.constant(x);
    ig.z = embed(ig.g, ig.p, xin, Mode::Infer, 0.0, nullptr);
    return ig;
}

}  // namespace

Tensor embed(const Tensor& x, const ModelParams& params) {
    InferGraph ig = build_infer(x, params);
    return ig.g.value(ig.z);
}

Tensor distances(const Tensor& x, const ModelParams& params) {
    InferGraph ig = build_infer(x, params);
    return ig.g.value(rp_distances(ig.g, ig.z, ig.p.points));
}

Tensor logits(const Tensor& x, const ModelParams& params) {
    InferGraph ig = build_infer(x, params);
    return ig.g.value(ig.g.scale(rp_distances(ig.g, ig.z, ig.p.points), params.gamma));
}

}  // namespace rpmnet
