#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rpmnet/error.hpp"
#include "rpmnet/losses.hpp"

using namespace rpmnet;

namespace {

// Reciprocal points and margins only; the extractor is never used here.
ModelParams point_params(Tensor points, std::vector<double> margins) {
    ModelParams p;
    p.reciprocal_points = std::move(points);
    std::vector<double> raw;
    for (double r : margins) raw.push_back(inverse_softplus(r));
    p.raw_margins = Tensor::vector(raw);
    return p;
}

ModelParams small_model(std::uint64_t seed) {
    Rng rng(seed);
    ModelDims dims;
    dims.input_dim = 5;
    dims.hidden = {8, 6};
    dims.embed_dim = 4;
    return init_params(dims, {"a", "b", "c"}, 1.0, rng);
}

// Brute-force Fisher ratio straight from the scatter definitions.
double fisher_oracle(const Tensor& z, const std::vector<std::size_t>& y) {
    const std::size_t n = z.rows(), m = z.cols();
    std::size_t K = 0;
    for (std::size_t v : y) K = std::max(K, v + 1);
    std::vector<std::vector<double>> mean(K, std::vector<double>(m, 0.0));
    std::vector<double> count(K, 0.0), global(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        count[y[i]] += 1;
        for (std::size_t j = 0; j < m; ++j) {
            mean[y[i]][j] += z(i, j);
            global[j] += z(i, j) / static_cast<double>(n);
        }
    }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < m; ++j)
            if (count[k] > 0) mean[k][j] /= count[k];
    double sw = 0, sb = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) sw += std::pow(z(i, j) - mean[y[i]][j], 2);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < m; ++j) sb += count[k] * std::pow(mean[k][j] - global[j], 2);
    return 1.0 / (1.0 + sb / (sw + kScatterEpsilon));
}

}  // namespace

TEST_CASE("cross-entropy examples") {
    const std::vector<std::size_t> label0 = {0};
    CHECK(ce_loss(Tensor::matrix({{0.7, 0.7, 0.7, 0.7}}), label0) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(ce_loss(Tensor::matrix({{10, -10}}), label0) == doctest::Approx(2.0611536e-9).epsilon(1e-6));

    const Tensor a = Tensor::matrix({{1.5, -0.5}});
    const Tensor pair = Tensor::matrix({{1.5, -0.5}, {-0.5, 1.5}});
    const std::vector<std::size_t> labels = {0, 1};
    CHECK(ce_loss(pair, labels) == doctest::Approx(ce_loss(a, label0)).epsilon(1e-15));

    const std::vector<std::size_t> bad = {2};
    CHECK_THROWS_AS(ce_loss(Tensor::matrix({{1, 2}}), bad), ContractError);
}

TEST_CASE("margin loss examples") {
    const ModelParams p = point_params(Tensor::matrix({{0, 0, 0, 0}}), {1.0});
    const std::vector<std::size_t> one = {0};
    // d_e = (1 + 1 + 4) / 4 = 1.5
    CHECK(std::abs(margin_loss(Tensor::matrix({{1, 1, 2, 0}}), one, p) - 0.5) <= 1e-12);
    // Inside the margin: d_e = 0.25.
    CHECK(margin_loss(Tensor::matrix({{1, 0, 0, 0}}), one, p) == 0.0);
    const std::vector<std::size_t> two = {0, 0};
    CHECK(std::abs(margin_loss(Tensor::matrix({{1, 1, 2, 0}, {1, 0, 0, 0}}), two, p) - 0.25) <= 1e-12);
}

TEST_CASE("margin loss ignores samples strictly inside their margin") {
    const ModelParams p = point_params(Tensor::matrix({{0, 0}, {3, 3}}), {1.0, 0.5});
    const std::vector<std::size_t> y = {0, 1, 0};
    const double base = margin_loss(Tensor::matrix({{0.2, 0.1}, {3.1, 2.9}, {2.0, 2.0}}), y, p);
    const double moved = margin_loss(Tensor::matrix({{-0.3, 0.4}, {2.8, 3.1}, {2.0, 2.0}}), y, p);
    CHECK(base == moved);
}

TEST_CASE("fisher loss examples") {
    const std::vector<std::size_t> y = {0, 0, 1, 1};
    CHECK(std::abs(fisher_loss(Tensor::matrix(4, 1, {0, 2, 4, 6}), y) - 0.2) <= 1e-12);
    CHECK(std::abs(fisher_loss(Tensor::matrix(4, 1, {0, 2, -1, 3}), y) - 1.0) <= 1e-12);
    const double collapsed = fisher_loss(Tensor::matrix(4, 1, {1, 1, 5, 5}), y);
    CHECK(collapsed > 0.0);
    CHECK(std::abs(collapsed - kScatterEpsilon / (kScatterEpsilon + 16.0)) <= 1e-12);
}

TEST_CASE("fisher loss matches a direct scatter computation") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(30);
        const Tensor z = oracle::random_tensor(rng, {n, 3});
        std::vector<std::size_t> y(n);
        for (auto& v : y) v = rng.below(4);
        const double f = fisher_loss(z, y);
        CHECK(f > 0.0);
        CHECK(f <= 1.0);
        CHECK(f == doctest::Approx(fisher_oracle(z, y)).epsilon(1e-12));
    }
}

TEST_CASE("fisher loss is translation invariant and decreasing in between-class scatter") {
    const std::vector<std::size_t> y = {0, 0, 1, 1};
    const double base = fisher_loss(Tensor::matrix(4, 2, {0, 1, 2, 1, 4, 0, 6, 2}), y);
    const double shifted = fisher_loss(Tensor::matrix(4, 2, {10, -2, 12, -2, 14, -3, 16, -1}), y);
    CHECK(shifted == doctest::Approx(base).epsilon(1e-12));
    double previous = 2.0;
    for (double gap : {0.5, 1.0, 2.0, 4.0}) {
        const double f = fisher_loss(Tensor::matrix(4, 1, {0, 2, gap, gap + 2}), y);
        CHECK(f < previous);
        previous = f;
    }
}

TEST_CASE("total loss combination") {
    CHECK(weighted_total(LossWeights{}, 1.0, 0.5, 0.2) == doctest::Approx(1.7).epsilon(1e-15));

    const ModelParams p = small_model(3);
    Rng rng(9);
    const Tensor x = oracle::random_tensor(rng, {6, 5});
    const std::vector<std::size_t> y = {0, 1, 2, 0, 1, 1};
    const LossWeights w{0.7, 1.3, 2.1};
    const LossBreakdown b = total_loss(x, y, p, w);
    CHECK(b.total == weighted_total(w, b.ce, b.margin, b.fisher));
    CHECK(b.ce >= 0.0);
    CHECK(b.margin >= 0.0);
    CHECK(b.fisher > 0.0);
    CHECK(b.fisher <= 1.0);

    const LossBreakdown plain = total_loss(x, y, p, LossWeights{1.0, 1.0, 0.0});
    CHECK(plain.total == b.ce + b.margin);
}

TEST_CASE("zero weights give a zero total with zero gradients") {
    const ModelParams p = small_model(5);
    Rng rng(10);
    const Tensor x = oracle::random_tensor(rng, {4, 5});
    const std::vector<std::size_t> y = {0, 1, 2, 2};
    grad::Graph g;
    const ParamNodes nodes = bind_params(g, p);
    const LossWeights zero{0.0, 0.0, 0.0};
    const LossNodes n = total_loss(g, nodes, g.constant(x), y, p, zero, Mode::Infer, 0.0, nullptr);
    CHECK(g.value(n.total).item() == 0.0);
    const auto ids = nodes.all();
    for (const auto& [id, grad] : g.gradient(ids))
        for (double v : grad.data()) CHECK(v == 0.0);
}

TEST_CASE("total loss rejects out-of-range labels") {
    const ModelParams p = small_model(5);
    const std::vector<std::size_t> y = {3};
    CHECK_THROWS_AS(total_loss(Tensor::matrix({{1, 2, 3, 4, 5}}), y, p, LossWeights{}), ContractError);
}
