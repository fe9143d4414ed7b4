#include "rpmnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rpmnet/error.hpp"

namespace rpmnet::grad {
namespace {

struct BroadcastDims {
    std::size_t rows = 1;
    std::size_t cols = 1;
    Shape shape;
};

BroadcastDims broadcast(const Tensor& a, const Tensor& b, std::string_view op) {
    auto fit = [&](std::size_t x, std::size_t y) -> std::size_t {
        if (x == y || y == 1) return x;
        if (x == 1) return y;
        throw ShapeError(std::string(op) + ": cannot broadcast " + shape_to_string(a.shape()) + " with " +
                         shape_to_string(b.shape()));
    };
    BroadcastDims d;
    d.rows = fit(a.rows(), b.rows());
    d.cols = fit(a.cols(), b.cols());
    const std::size_t rank = std::max(a.rank(), b.rank());
    if (rank == 2) d.shape = {d.rows, d.cols};
    else if (rank == 1) d.shape = {d.cols};
    return d;
}

// Flat index into a broadcast operand for output element (r, c).
inline std::size_t bindex(const Tensor& t, std::size_t r, std::size_t c) {
    const std::size_t tr = t.rows();
    const std::size_t tc = t.cols();
    return (tr == 1 ? 0 : r) * tc + (tc == 1 ? 0 : c);
}

std::string describe(std::string_view op, const Tensor& a, const Tensor& b) {
    return std::string(op) + ": incompatible shapes " + shape_to_string(a.shape()) + " and " +
           shape_to_string(b.shape());
}

double softplus_value(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::string_view op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Leaf: return "leaf";
        case OpKind::MatMul: return "matmul";
        case OpKind::Transpose: return "transpose";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::Scale: return "scale";
        case OpKind::AddConst: return "add_const";
        case OpKind::Square: return "square";
        case OpKind::Sqrt: return "sqrt";
        case OpKind::Relu: return "relu";
        case OpKind::Softplus: return "softplus";
        case OpKind::Dropout: return "dropout";
        case OpKind::ClampMin: return "clamp_min";
        case OpKind::Sum: return "sum";
        case OpKind::SumAxis: return "sum_axis";
        case OpKind::Mean: return "mean";
        case OpKind::MaxAxis: return "max_axis";
        case OpKind::Dot: return "dot";
        case OpKind::L2NormRows: return "l2_norm_rows";
        case OpKind::PairwiseSqDist: return "pairwise_sq_dist";
        case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
    }
    return "unknown";
}

void Graph::check_id(NodeId id, std::string_view op) const {
    if (id >= nodes_.size()) {
        throw ContractError(std::string(op) + ": node id " + std::to_string(id) + " does not exist");
    }
}

NodeId Graph::push(Node node) {
    for (NodeId in : node.inputs) check_id(in, op_name(node.kind));
    evaluate(node);
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

NodeId Graph::leaf(Tensor value, bool trainable) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    n.trainable = trainable;
    if (!n.value.all_finite()) throw NonFiniteError("leaf: value contains NaN or Inf");
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

void Graph::set_leaf(NodeId id, Tensor value) {
    check_id(id, "set_leaf");
    Node& n = nodes_[id];
    if (n.kind != OpKind::Leaf) throw ContractError("set_leaf: node is not a leaf");
    if (n.value.shape() != value.shape()) {
        throw ShapeError("set_leaf: expected " + shape_to_string(n.value.shape()) + ", got " +
                         shape_to_string(value.shape()));
    }
    n.value = std::move(value);
}

NodeId Graph::matmul(NodeId a, NodeId b) { return push({OpKind::MatMul, {a, b}}); }
NodeId Graph::transpose(NodeId a) { return push({OpKind::Transpose, {a}}); }
NodeId Graph::add(NodeId a, NodeId b) { return push({OpKind::Add, {a, b}}); }
NodeId Graph::sub(NodeId a, NodeId b) { return push({OpKind::Sub, {a, b}}); }
NodeId Graph::mul(NodeId a, NodeId b) { return push({OpKind::Mul, {a, b}}); }
NodeId Graph::div(NodeId a, NodeId b) { return push({OpKind::Div, {a, b}}); }
NodeId Graph::square(NodeId a) { return push({OpKind::Square, {a}}); }
NodeId Graph::sqrt(NodeId a) { return push({OpKind::Sqrt, {a}}); }
NodeId Graph::relu(NodeId a) { return push({OpKind::Relu, {a}}); }
NodeId Graph::softplus(NodeId a) { return push({OpKind::Softplus, {a}}); }
NodeId Graph::sum(NodeId a) { return push({OpKind::Sum, {a}}); }
NodeId Graph::mean(NodeId a) { return push({OpKind::Mean, {a}}); }
NodeId Graph::dot(NodeId a, NodeId b) { return push({OpKind::Dot, {a, b}}); }
NodeId Graph::l2_norm_rows(NodeId a) { return push({OpKind::L2NormRows, {a}}); }
NodeId Graph::pairwise_sq_dist(NodeId a, NodeId b) { return push({OpKind::PairwiseSqDist, {a, b}}); }

NodeId Graph::scale(NodeId a, double factor) {
    Node n{OpKind::Scale, {a}};
    n.param = factor;
    return push(std::move(n));
}

NodeId Graph::add_const(NodeId a, double offset) {
    Node n{OpKind::AddConst, {a}};
    n.param = offset;
    return push(std::move(n));
}

NodeId Graph::dropout(NodeId a, Tensor mask, double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout: rate must lie in [0, 1)");
    Node n{OpKind::Dropout, {a}};
    n.aux = std::move(mask);
    n.param = rate;
    return push(std::move(n));
}

NodeId Graph::clamp_min(NodeId a, double floor) {
    Node n{OpKind::ClampMin, {a}};
    n.param = floor;
    return push(std::move(n));
}

NodeId Graph::sum_axis(NodeId a, std::size_t axis) {
    if (axis > 1) throw ContractError("sum_axis: axis must be 0 or 1");
    Node n{OpKind::SumAxis, {a}};
    n.axis = axis;
    return push(std::move(n));
}

NodeId Graph::max_axis(NodeId a, std::size_t axis) {
    if (axis > 1) throw ContractError("max_axis: axis must be 0 or 1");
    Node n{OpKind::MaxAxis, {a}};
    n.axis = axis;
    return push(std::move(n));
}

NodeId Graph::softmax_cross_entropy(NodeId logits, std::vector<std::size_t> labels) {
    Node n{OpKind::SoftmaxCrossEntropy, {logits}};
    n.labels = std::move(labels);
    return push(std::move(n));
}

void Graph::evaluate(Node& node) const {
    const std::string_view op = op_name(node.kind);
    auto in = [&](std::size_t i) -> const Tensor& { return nodes_[node.inputs[i]].value; };

    switch (node.kind) {
        case OpKind::Leaf:
            return;

        case OpKind::MatMul: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            if (a.rank() == 0 || b.rank() == 0 || a.cols() != b.rows()) throw ShapeError(describe(op, a, b));
            const std::size_t n = a.rows(), k = a.cols(), p = b.cols();
            Tensor out({n, p});
            for (std::size_t i = 0; i < n; ++i) {
                double* orow = &out(i, 0);
                for (std::size_t t = 0; t < k; ++t) {
                    const double av = a(i, t);
                    if (av == 0.0) continue;
                    const double* brow = &b.data()[t * p];
                    for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
                }
            }
            node.value = std::move(out);
            break;
        }

        case OpKind::Transpose: {
            const Tensor& a = in(0);
            if (a.rank() == 0) {
                node.value = a;
                break;
            }
            Tensor out({a.cols(), a.rows()});
            for (std::size_t i = 0; i < a.rows(); ++i)
                for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
            node.value = std::move(out);
            break;
        }

        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul:
        case OpKind::Div: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            const BroadcastDims d = broadcast(a, b, op);
            Tensor out(d.shape);
            for (std::size_t r = 0; r < d.rows; ++r) {
                for (std::size_t c = 0; c < d.cols; ++c) {
                    const double x = a[bindex(a, r, c)];
                    const double y = b[bindex(b, r, c)];
                    double v = 0.0;
                    switch (node.kind) {
                        case OpKind::Add: v = x + y; break;
                        case OpKind::Sub: v = x - y; break;
                        case OpKind::Mul: v = x * y; break;
                        default: v = x / y; break;
                    }
                    out[r * d.cols + c] = v;
                }
            }
            node.value = std::move(out);
            break;
        }

        case OpKind::Scale:
        case OpKind::AddConst:
        case OpKind::Square:
        case OpKind::Sqrt:
        case OpKind::Relu:
        case OpKind::Softplus:
        case OpKind::ClampMin:
        case OpKind::Dropout: {
            const Tensor& a = in(0);
            if (node.kind == OpKind::Dropout && node.aux.shape() != a.shape()) {
                throw ShapeError(describe(op, a, node.aux));
            }
            Tensor out(a.shape());
            const double keep_scale = node.kind == OpKind::Dropout ? 1.0 / (1.0 - node.param) : 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double x = a[i];
                double v = 0.0;
                switch (node.kind) {
                    case OpKind::Scale: v = x * node.param; break;
                    case OpKind::AddConst: v = x + node.param; break;
                    case OpKind::Square: v = x * x; break;
                    case OpKind::Sqrt: v = std::sqrt(x); break;
                    case OpKind::Relu: v = x > 0.0 ? x : 0.0; break;
                    case OpKind::Softplus: v = softplus_value(x); break;
                    case OpKind::ClampMin: v = std::max(x, node.param); break;
                    default: v = x * node.aux[i] * keep_scale; break;
                }
                out[i] = v;
            }
            node.value = std::move(out);
            break;
        }

        case OpKind::Sum:
        case OpKind::Mean: {
            const Tensor& a = in(0);
            double s = 0.0;
            for (double v : a.data()) s += v;
            if (node.kind == OpKind::Mean) {
                if (a.size() == 0) throw ShapeError("mean: empty tensor");
                s /= static_cast<double>(a.size());
            }
            node.value = Tensor::scalar(s);
            break;
        }

        case OpKind::SumAxis:
        case OpKind::MaxAxis: {
            const Tensor& a = in(0);
            if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_to_string(a.shape()));
            const std::size_t R = a.rows(), C = a.cols();
            const bool over_rows = node.axis == 0;
            const std::size_t outer = over_rows ? C : R;
            const std::size_t inner = over_rows ? R : C;
            if (node.kind == OpKind::MaxAxis && inner == 0) throw ShapeError("max_axis: empty axis");
            Tensor out(over_rows ? Shape{1, C} : Shape{R, 1});
            Tensor arg(out.shape());
            for (std::size_t o = 0; o < outer; ++o) {
                double acc = node.kind == OpKind::SumAxis ? 0.0 : -std::numeric_limits<double>::infinity();
                std::size_t best = 0;
                for (std::size_t i = 0; i < inner; ++i) {
                    const double v = over_rows ? a(i, o) : a(o, i);
                    if (node.kind == OpKind::SumAxis) {
                        acc += v;
                    } else if (v > acc) {
                        acc = v;
                        best = i;
                    }
                }
                out[o] = acc;
                arg[o] = static_cast<double>(best);
            }
            node.value = std::move(out);
            if (node.kind == OpKind::MaxAxis) node.aux = std::move(arg);
            break;
        }

        case OpKind::Dot: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            if (a.size() != b.size()) throw ShapeError(describe(op, a, b));
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
            node.value = Tensor::scalar(s);
            break;
        }

        case OpKind::L2NormRows: {
            const Tensor& a = in(0);
            Tensor out({a.rows(), 1});
            for (std::size_t r = 0; r < a.rows(); ++r) {
                double s = 0.0;
                for (double v : a.row(r)) s += v * v;
                out[r] = std::sqrt(s);
            }
            node.value = std::move(out);
            break;
        }

        case OpKind::PairwiseSqDist: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) throw ShapeError(describe(op, a, b));
            Tensor out({a.rows(), b.rows()});
            for (std::size_t i = 0; i < a.rows(); ++i) {
                const auto ar = a.row(i);
                for (std::size_t k = 0; k < b.rows(); ++k) {
                    const auto br = b.row(k);
                    double s = 0.0;
                    for (std::size_t j = 0; j < ar.size(); ++j) {
                        const double diff = ar[j] - br[j];
                        s += diff * diff;
                    }
                    out(i, k) = s;
                }
            }
            node.value = std::move(out);
            break;
        }

        case OpKind::SoftmaxCrossEntropy: {
            const Tensor& z = in(0);
            if (z.rank() != 2 || z.rows() != node.labels.size() || z.rows() == 0) {
                throw ShapeError("softmax_cross_entropy: logits " + shape_to_string(z.shape()) + " vs " +
                                 std::to_string(node.labels.size()) + " labels");
            }
            const std::size_t N = z.rows(), K = z.cols();
            Tensor probs({N, K});
            double total = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const std::size_t y = node.labels[i];
                if (y >= K) {
                    throw ContractError("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                                        std::to_string(K) + ")");
                }
                const auto row = z.row(i);
                const double m = *std::max_element(row.begin(), row.end());
                double s = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    probs(i, k) = std::exp(row[k] - m);
                    s += probs(i, k);
                }
                for (std::size_t k = 0; k < K; ++k) probs(i, k) /= s;
                total += (m + std::log(s)) - row[y];
            }
            node.value = Tensor::scalar(total / static_cast<double>(N));
            node.aux = std::move(probs);
            break;
        }
    }

    if (!node.value.all_finite()) {
        throw NonFiniteError(std::string(op) + ": produced NaN or Inf");
    }
}

const Tensor& Graph::forward() {
    if (nodes_.empty()) throw ContractError("forward: empty graph");
    for (Node& n : nodes_) evaluate(n);
    return nodes_.back().value;
}

const Tensor& Graph::value(NodeId id) const {
    check_id(id, "value");
    return nodes_[id].value;
}

std::vector<NodeId> Graph::parameters() const {
    std::vector<NodeId> ids;
    for (NodeId i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].kind == OpKind::Leaf && nodes_[i].trainable) ids.push_back(i);
    return ids;
}

std::map<NodeId, Tensor> Graph::gradient(std::span<const NodeId> wrt) const {
    if (nodes_.empty()) throw ContractError("gradient: empty graph");
    if (nodes_.back().value.size() != 1) {
        throw ContractError("gradient: final node is not a scalar (shape " +
                            shape_to_string(nodes_.back().value.shape()) + ")");
    }
    for (NodeId id : wrt) check_id(id, "gradient");

    // Only nodes on a path from a requested id need adjoints.
    std::vector<char> needed(nodes_.size(), 0);
    for (NodeId id : wrt) needed[id] = 1;
    for (NodeId i = 0; i < nodes_.size(); ++i)
        for (NodeId in : nodes_[i].inputs) needed[i] = needed[i] || needed[in];

    std::vector<Tensor> adj(nodes_.size());
    for (NodeId i = 0; i < nodes_.size(); ++i)
        if (needed[i]) adj[i] = Tensor(nodes_[i].value.shape());
    if (!needed.back()) {
        std::map<NodeId, Tensor> zeros;
        for (NodeId id : wrt) zeros.emplace(id, Tensor(nodes_[id].value.shape()));
        return zeros;
    }
    adj.back()[0] = 1.0;

    for (NodeId idx = nodes_.size(); idx-- > 0;) {
        const Node& n = nodes_[idx];
        if (!needed[idx] || n.kind == OpKind::Leaf) continue;
        const Tensor& g = adj[idx];
        auto want = [&](std::size_t i) { return needed[n.inputs[i]] != 0; };
        auto val = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
        auto acc = [&](std::size_t i) -> Tensor& { return adj[n.inputs[i]]; };

        switch (n.kind) {
            case OpKind::Leaf:
                break;

            case OpKind::MatMul: {
                const Tensor& a = val(0);
                const Tensor& b = val(1);
                const std::size_t N = a.rows(), K = a.cols(), P = b.cols();
                if (want(0)) {
                    Tensor& ga = acc(0);
                    for (std::size_t i = 0; i < N; ++i) {
                        const double* grow = &g.data()[i * P];
                        for (std::size_t t = 0; t < K; ++t) {
                            const double* brow = &b.data()[t * P];
                            double s = 0.0;
                            for (std::size_t j = 0; j < P; ++j) s += grow[j] * brow[j];
                            ga[i * K + t] += s;
                        }
                    }
                }
                if (want(1)) {
                    Tensor& gb = acc(1);
                    for (std::size_t i = 0; i < N; ++i) {
                        const double* grow = &g.data()[i * P];
                        for (std::size_t t = 0; t < K; ++t) {
                            const double av = a[i * K + t];
                            if (av == 0.0) continue;
                            double* out = &gb.data()[t * P];
                            for (std::size_t j = 0; j < P; ++j) out[j] += av * grow[j];
                        }
                    }
                }
                break;
            }

            case OpKind::Transpose: {
                Tensor& ga = acc(0);
                const Tensor& a = val(0);
                if (a.rank() == 0) {
                    ga[0] += g[0];
                    break;
                }
                for (std::size_t i = 0; i < a.rows(); ++i)
                    for (std::size_t j = 0; j < a.cols(); ++j) ga[i * a.cols() + j] += g[j * a.rows() + i];
                break;
            }

            case OpKind::Add:
            case OpKind::Sub:
            case OpKind::Mul:
            case OpKind::Div: {
                const Tensor& a = val(0);
                const Tensor& b = val(1);
                const std::size_t R = n.value.rows(), C = n.value.cols();
                for (std::size_t r = 0; r < R; ++r) {
                    for (std::size_t c = 0; c < C; ++c) {
                        const double go = g[r * C + c];
                        const std::size_t ia = bindex(a, r, c);
                        const std::size_t ib = bindex(b, r, c);
                        const double x = a[ia];
                        const double y = b[ib];
                        double da = 0.0, db = 0.0;
                        switch (n.kind) {
                            case OpKind::Add: da = 1.0; db = 1.0; break;
                            case OpKind::Sub: da = 1.0; db = -1.0; break;
                            case OpKind::Mul: da = y; db = x; break;
                            default: da = 1.0 / y; db = -x / (y * y); break;
                        }
                        if (want(0)) acc(0)[ia] += go * da;
                        if (want(1)) acc(1)[ib] += go * db;
                    }
                }
                break;
            }

            case OpKind::Scale:
            case OpKind::AddConst:
            case OpKind::Square:
            case OpKind::Sqrt:
            case OpKind::Relu:
            case OpKind::Softplus:
            case OpKind::ClampMin:
            case OpKind::Dropout: {
                const Tensor& a = val(0);
                Tensor& ga = acc(0);
                const double keep_scale = n.kind == OpKind::Dropout ? 1.0 / (1.0 - n.param) : 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) {
                    const double x = a[i];
                    double d = 0.0;
                    switch (n.kind) {
                        case OpKind::Scale: d = n.param; break;
                        case OpKind::AddConst: d = 1.0; break;
                        case OpKind::Square: d = 2.0 * x; break;
                        case OpKind::Sqrt: d = 0.5 / n.value[i]; break;
                        case OpKind::Relu: d = x > 0.0 ? 1.0 : 0.0; break;
                        case OpKind::Softplus: d = sigmoid(x); break;
                        case OpKind::ClampMin: d = x > n.param ? 1.0 : 0.0; break;
                        default: d = n.aux[i] * keep_scale; break;
                    }
                    ga[i] += g[i] * d;
                }
                break;
            }

            case OpKind::Sum:
            case OpKind::Mean: {
                Tensor& ga = acc(0);
                const double d = n.kind == OpKind::Mean ? g[0] / static_cast<double>(ga.size()) : g[0];
                for (double& v : ga.data()) v += d;
                break;
            }

            case OpKind::SumAxis:
            case OpKind::MaxAxis: {
                const Tensor& a = val(0);
                Tensor& ga = acc(0);
                const std::size_t R = a.rows(), C = a.cols();
                const bool over_rows = n.axis == 0;
                if (n.kind == OpKind::SumAxis) {
                    for (std::size_t r = 0; r < R; ++r)
                        for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += g[over_rows ? c : r];
                } else {
                    const std::size_t outer = over_rows ? C : R;
                    for (std::size_t o = 0; o < outer; ++o) {
                        const auto best = static_cast<std::size_t>(n.aux[o]);
                        const std::size_t flat = over_rows ? best * C + o : o * C + best;
                        ga[flat] += g[o];
                    }
                }
                break;
            }

            case OpKind::Dot: {
                const Tensor& a = val(0);
                const Tensor& b = val(1);
                for (std::size_t i = 0; i < a.size(); ++i) {
                    if (want(0)) acc(0)[i] += g[0] * b[i];
                    if (want(1)) acc(1)[i] += g[0] * a[i];
                }
                break;
            }

            case OpKind::L2NormRows: {
                const Tensor& a = val(0);
                Tensor& ga = acc(0);
                for (std::size_t r = 0; r < a.rows(); ++r) {
                    const double norm = n.value[r];
                    if (norm == 0.0) continue;
                    const double f = g[r] / norm;
                    for (std::size_t j = 0; j < a.cols(); ++j) ga[r * a.cols() + j] += f * a[r * a.cols() + j];
                }
                break;
            }

            case OpKind::PairwiseSqDist: {
                const Tensor& a = val(0);
                const Tensor& b = val(1);
                const std::size_t N = a.rows(), K = b.rows(), M = a.cols();
                for (std::size_t i = 0; i < N; ++i) {
                    for (std::size_t k = 0; k < K; ++k) {
                        const double f = 2.0 * g[i * K + k];
                        if (f == 0.0) continue;
                        for (std::size_t j = 0; j < M; ++j) {
                            const double diff = f * (a[i * M + j] - b[k * M + j]);
                            if (want(0)) acc(0)[i * M + j] += diff;
                            if (want(1)) acc(1)[k * M + j] -= diff;
                        }
                    }
                }
                break;
            }

            case OpKind::SoftmaxCrossEntropy: {
                Tensor& ga = acc(0);
                const std::size_t N = n.aux.rows(), K = n.aux.cols();
                const double f = g[0] / static_cast<double>(N);
                for (std::size_t i = 0; i < N; ++i) {
                    for (std::size_t k = 0; k < K; ++k) {
                        const double target = k == n.labels[i] ? 1.0 : 0.0;
                        ga[i * K + k] += f * (n.aux[i * K + k] - target);
                    }
                }
                break;
            }
        }
    }

    std::map<NodeId, Tensor> out;
    for (NodeId id : wrt) out.emplace(id, adj[id]);
    return out;
}

double Graph::min_kink_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (const Node& n : nodes_) {
        if (n.kind == OpKind::Relu || n.kind == OpKind::ClampMin) {
            const double kink = n.kind == OpKind::Relu ? 0.0 : n.param;
            for (double v : nodes_[n.inputs[0]].value.data()) best = std::min(best, std::abs(v - kink));
        } else if (n.kind == OpKind::MaxAxis) {
            const Tensor& a = nodes_[n.inputs[0]].value;
            const bool over_rows = n.axis == 0;
            const std::size_t outer = over_rows ? a.cols() : a.rows();
            const std::size_t inner = over_rows ? a.rows() : a.cols();
            for (std::size_t o = 0; o < outer; ++o) {
                const double top = n.value[o];
                const auto arg = static_cast<std::size_t>(n.aux[o]);
                for (std::size_t i = 0; i < inner; ++i) {
                    if (i == arg) continue;
                    const double v = over_rows ? a(i, o) : a(o, i);
                    best = std::min(best, top - v);
                }
            }
        }
    }
    return best;
}

}  // namespace rpmnet::grad
