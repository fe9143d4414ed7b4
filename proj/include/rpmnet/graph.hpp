#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "rpmnet/tensor.hpp"

namespace rpmnet::grad {

using NodeId = std::size_t;

enum class OpKind {
    Leaf,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    Div,
    Scale,
    AddConst,
    Square,
    Sqrt,
    Relu,
    Softplus,
    Dropout,
    ClampMin,
    Sum,
    SumAxis,
    Mean,
    MaxAxis,
    Dot,
    L2NormRows,
    PairwiseSqDist,
    SoftmaxCrossEntropy,
};

std::string_view op_name(OpKind kind);

/// Tape for reverse-mode differentiation.
///
/// Nodes are appended in topological order: every op's inputs already exist
/// when it is created. Each builder evaluates its node immediately, so values
/// are available right after construction; forward() re-evaluates the whole
/// tape from the leaves, which is what you want after set_leaf().
///
/// Binary elementwise ops broadcast over 2-D views: a dimension of 1 (or a
/// scalar) stretches to match the other operand.
class Graph {
public:
    NodeId leaf(Tensor value, bool trainable = false);
    NodeId constant(Tensor value) { return leaf(std::move(value), false); }
    NodeId parameter(Tensor value) { return leaf(std::move(value), true); }
    void set_leaf(NodeId id, Tensor value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId scale(NodeId a, double factor);
    NodeId add_const(NodeId a, double offset);
    NodeId square(NodeId a);
    NodeId sqrt(NodeId a);
    NodeId relu(NodeId a);
    NodeId softplus(NodeId a);
    /// Inverted dropout: a * mask / (1 - rate). `mask` holds 0/1 entries.
    NodeId dropout(NodeId a, Tensor mask, double rate);
    NodeId clamp_min(NodeId a, double floor);
    NodeId sum(NodeId a);
    /// Reduces a 2-D tensor over `axis`, keeping it as a size-1 dimension.
    NodeId sum_axis(NodeId a, std::size_t axis);
    NodeId mean(NodeId a);
    /// Maximum over `axis` of a 2-D tensor; ties route the gradient to the first index.
    NodeId max_axis(NodeId a, std::size_t axis);
    NodeId dot(NodeId a, NodeId b);
    /// Euclidean norm of each row -> [rows x 1]. Gradient at a zero row is 0.
    NodeId l2_norm_rows(NodeId a);
    /// ||a_i - b_j||^2 for rows of a [N x m] and b [K x m] -> [N x K].
    NodeId pairwise_sq_dist(NodeId a, NodeId b);
    /// Mean over rows of -log softmax(logits)[label].
    NodeId softmax_cross_entropy(NodeId logits, std::vector<std::size_t> labels);

    /// Re-evaluates every non-leaf node in order and returns the last node's value.
    const Tensor& forward();

    /// d(final node)/d(node) for each requested id. Requires a scalar final node.
    std::map<NodeId, Tensor> gradient(std::span<const NodeId> wrt) const;

    const Tensor& value(NodeId id) const;
    std::size_t size() const { return nodes_.size(); }
    OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
    std::vector<NodeId> parameters() const;

    /// Smallest distance of any ReLU/clamp input to its kink, or of a max
    /// winner to its runner-up. Used to skip finite-difference checks that
    /// would straddle a non-differentiable point.
    double min_kink_distance() const;

private:
    struct Node {
        Node() = default;
        Node(OpKind k, std::vector<NodeId> in) : kind(k), inputs(std::move(in)) {}

        OpKind kind = OpKind::Leaf;
        std::vector<NodeId> inputs;
        Tensor value;
        Tensor aux;
        std::vector<std::size_t> labels;
        double param = 0.0;
        std::size_t axis = 0;
        bool trainable = false;
    };

    NodeId push(Node node);
    void evaluate(Node& node) const;
    void check_id(NodeId id, std::string_view op) const;

    std::vector<Node> nodes_;
};

}  // namespace rpmnet::grad
