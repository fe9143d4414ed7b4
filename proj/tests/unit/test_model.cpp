#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rpmnet/error.hpp"
#include "rpmnet/model.hpp"

using namespace rpmnet;

namespace {

ModelParams random_params(std::size_t d, std::size_t K, std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    ModelDims dims;
    dims.input_dim = d;
    dims.hidden = {12, 9};
    dims.embed_dim = m;
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < K; ++k) labels.push_back("c" + std::to_string(k));
    return init_params(dims, labels, 1.0, rng);
}

Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

}  // namespace

TEST_CASE("rp_distance examples") {
    const std::vector<double> p = {0.3, -1.2, 2.0};
    CHECK(rp_distance(p, p) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(rp_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 1.0);
    CHECK(rp_distance(std::vector<double>{1, 0}, std::vector<double>{-1, 0}) == 3.0);
}

TEST_CASE("rp_distance is bounded below by -1") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const Tensor z = oracle::random_tensor(rng, {6});
        const Tensor p = oracle::random_tensor(rng, {6});
        CHECK(rp_distance(z.data(), p.data()) >= -1.0);
        CHECK(rp_distance(z.data(), p.data()) == doctest::Approx(oracle::hybrid_distance(z.data(), p.data())));
    }
}

TEST_CASE("rp_distance with a zero embedding uses the norm floor") {
    CHECK(rp_distance(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == 12.5);
}

TEST_CASE("embed examples") {
    ModelParams p = random_params(4, 2, 3, 1);
    for (auto& w : p.weights) w = Tensor(w.shape());
    for (auto& b : p.biases) b = Tensor(b.shape());
    const Tensor z = embed(Tensor::matrix({{1, -2, 3, 4}}), p);
    CHECK(z == Tensor::matrix(1, 3, {0, 0, 0}));

    ModelParams id = random_params(3, 2, 3, 1);
    id.dims.hidden = {3, 3};
    for (std::size_t i = 0; i < 3; ++i) {
        id.weights[i] = identity(3);
        id.biases[i] = Tensor({3});
    }
    const Tensor x = Tensor::matrix({{0.5, 2.0, 0.0}, {1.0, 0.25, 3.0}});
    CHECK(embed(x, id) == x);

    const ModelParams r = random_params(4, 3, 5, 9);
    const Tensor rows = Tensor::matrix({{0.1, 0.2, 0.3, 0.4}, {0.1, 0.2, 0.3, 0.4}});
    const Tensor e = embed(rows, r);
    for (std::size_t j = 0; j < 5; ++j) CHECK(e(0, j) == e(1, j));
}

TEST_CASE("embed rejects a width mismatch") {
    const ModelParams p = random_params(4, 2, 3, 1);
    CHECK_THROWS_AS(embed(Tensor::matrix({{1, 2, 3}}), p), ShapeError);
}

TEST_CASE("embed requires masks exactly when dropout is active") {
    const ModelParams p = random_params(4, 2, 3, 1);
    grad::Graph g;
    const ParamNodes nodes = bind_params(g, p);
    const grad::NodeId x = g.constant(Tensor::matrix({{1, 2, 3, 4}}));
    CHECK_THROWS_AS(embed(g, nodes, x, Mode::Train, 0.2, nullptr), ContractError);
    Rng rng(2);
    const DropoutMasks masks = sample_dropout_masks(1, p.dims, 0.2, rng);
    CHECK_THROWS_AS(embed(g, nodes, x, Mode::Infer, 0.2, &masks), ContractError);
    CHECK_NOTHROW(embed(g, nodes, x, Mode::Train, 0.2, &masks));
    CHECK_NOTHROW(embed(g, nodes, x, Mode::Train, 0.0, nullptr));
}

TEST_CASE("embed in infer mode is batch-order independent") {
    const ModelParams p = random_params(4, 3, 5, 4);
    Rng rng(8);
    const Tensor x = oracle::random_tensor(rng, {6, 4});
    const Tensor full = embed(x, p);
    for (std::size_t i = 0; i < 6; ++i) {
        const Tensor one = embed(Tensor::matrix(1, 4, {x.row(i).begin(), x.row(i).end()}), p);
        for (std::size_t j = 0; j < 5; ++j) CHECK(one(0, j) == full(i, j));
    }
}

TEST_CASE("logit examples") {
    ModelParams p = random_params(3, 2, 3, 1);
    p.dims.hidden = {3, 3};
    for (std::size_t i = 0; i < 3; ++i) {
        p.weights[i] = identity(3);
        p.biases[i] = Tensor({3});
    }
    p.reciprocal_points = Tensor::matrix({{1, 2, 0.5}, {-1, 0, 0}});
    const Tensor x = Tensor::matrix({{1, 2, 0.5}});
    const Tensor l1 = logits(x, p);
    CHECK(l1(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));

    p.gamma = 2.0;
    const Tensor l2 = logits(x, p);
    for (std::size_t k = 0; k < 2; ++k) CHECK(l2(0, k) == 2.0 * l1(0, k));
}

TEST_CASE("argmax of logits is invariant to gamma") {
    ModelParams p = random_params(4, 3, 5, 6);
    Rng rng(1);
    const Tensor x = oracle::random_tensor(rng, {20, 4});
    auto argmaxes = [&](double gamma) {
        p.gamma = gamma;
        const Tensor l = logits(x, p);
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < l.rows(); ++i) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < l.cols(); ++k)
                if (l(i, k) > l(i, best)) best = k;
            out.push_back(best);
        }
        return out;
    };
    const auto base = argmaxes(1.0);
    CHECK(argmaxes(0.3) == base);
    CHECK(argmaxes(7.5) == base);
}

TEST_CASE("logits are permutation-equivariant in the reciprocal points") {
    ModelParams p = random_params(4, 3, 5, 12);
    Rng rng(3);
    const Tensor x = oracle::random_tensor(rng, {5, 4});
    const Tensor before = logits(x, p);
    ModelParams q = p;
    const std::vector<std::size_t> perm = {2, 0, 1};
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < 5; ++j) q.reciprocal_points(k, j) = p.reciprocal_points(perm[k], j);
    const Tensor after = logits(x, q);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t k = 0; k < 3; ++k) CHECK(after(i, k) == before(i, perm[k]));
}

TEST_CASE("graph distances agree with the scalar formula") {
    const ModelParams p = random_params(4, 3, 5, 2);
    Rng rng(4);
    const Tensor x = oracle::random_tensor(rng, {7, 4});
    const Tensor z = embed(x, p);
    const Tensor d = distances(x, p);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(d(i, k) == doctest::Approx(oracle::hybrid_distance(z.row(i), p.reciprocal_points.row(k))).epsilon(1e-12));
}

TEST_CASE("initialization") {
    const ModelParams p = random_params(10, 4, 6, 42);
    for (double r : p.margins()) CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.reciprocal_points.shape() == Shape{4, 6});
    CHECK(p.weights[0].shape() == Shape{10, 12});
    for (double b : p.biases[0].data()) CHECK(b == 0.0);
    CHECK_NOTHROW(p.validate());
    ModelParams bad = p;
    bad.raw_margins = Tensor({3});
    CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("inverse_softplus round-trips") {
    for (double r : {1e-3, 0.5, 1.0, 3.0, 40.0}) CHECK(std::log1p(std::exp(inverse_softplus(r))) == doctest::Approx(r).epsilon(1e-12));
}
