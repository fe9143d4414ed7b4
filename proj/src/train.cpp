#include "rpmnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "rpmnet/log.hpp"
#include "rpmnet/rng.hpp"

namespace rpmnet {

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw ContractError("train config: " + what); };
    for (double w : {weights.alpha, weights.lambda, weights.beta})
        if (!std::isfinite(w) || w < 0.0) fail("loss weights must be finite and >= 0");
    if (!(adam.lr > 0.0) || !std::isfinite(adam.lr)) fail("lr must be > 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) fail("adam beta1 must lie in [0, 1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) fail("adam beta2 must lie in [0, 1)");
    if (!(adam.eps > 0.0)) fail("adam eps must be > 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (embed_dim < 1) fail("embed_dim must be >= 1");
    if (hidden_dims[0] < 1 || hidden_dims[1] < 1) fail("hidden_dims must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("gamma must be finite and > 0");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {
        {"alpha", c.weights.alpha},
        {"lambda", c.weights.lambda},
        {"beta", c.weights.beta},
        {"lr", c.adam.lr},
        {"adam_beta1", c.adam.beta1},
        {"adam_beta2", c.adam.beta2},
        {"adam_eps", c.adam.eps},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"hidden_dims", c.hidden_dims},
        {"embed_dim", c.embed_dim},
        {"dropout_rate", c.dropout_rate},
        {"gamma", c.gamma},
        {"seed", c.seed},
    };
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    if (!j.is_object()) throw ContractError("train config: expected a JSON object");
    static const std::set<std::string> known = {"alpha",      "lambda", "beta",         "lr",    "adam_beta1",
                                                "adam_beta2", "adam_eps", "epochs",     "batch_size",
                                                "hidden_dims", "embed_dim", "dropout_rate", "gamma", "seed"};
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ContractError("train config: unknown key '" + key + "'");
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) j.at(key).get_to(field);
        };
        get("alpha", c.weights.alpha);
        get("lambda", c.weights.lambda);
        get("beta", c.weights.beta);
        get("lr", c.adam.lr);
        get("adam_beta1", c.adam.beta1);
        get("adam_beta2", c.adam.beta2);
        get("adam_eps", c.adam.eps);
        get("epochs", c.epochs);
        get("batch_size", c.batch_size);
        get("hidden_dims", c.hidden_dims);
        get("embed_dim", c.embed_dim);
        get("dropout_rate", c.dropout_rate);
        get("gamma", c.gamma);
        get("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

bool operator==(const TrainHistory& a, const TrainHistory& b) {
    if (a.epochs.size() != b.epochs.size()) return false;
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
        const auto& x = a.epochs[i];
        const auto& y = b.epochs[i];
        if (x.epoch != y.epoch || x.train_accuracy != y.train_accuracy || x.loss.ce != y.loss.ce ||
            x.loss.margin != y.loss.margin || x.loss.fisher != y.loss.fisher || x.loss.total != y.loss.total) {
            return false;
        }
    }
    return true;
}

void write_history(std::ostream& out, const TrainHistory& history) {
    out << "epoch\tce\tmargin\tfisher\ttotal\tacc\n";
    for (const EpochRecord& r : history.epochs) {
        out << fmt::format("{}\t{:.10f}\t{:.10f}\t{:.10f}\t{:.10f}\t{:.6f}\n", r.epoch, r.loss.ce, r.loss.margin,
                           r.loss.fisher, r.loss.total, r.train_accuracy);
    }
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
    if (state.first_moment.empty()) {
        for (const Tensor* p : params) {
            state.first_moment.emplace_back(p->shape());
            state.second_moment.emplace_back(p->shape());
        }
    }
    if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        if (g.shape() != p.shape()) {
            throw ShapeError("adam_step: gradient " + shape_to_string(g.shape()) + " for parameter " +
                             shape_to_string(p.shape()));
        }
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
            v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            p[j] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
        }
    }
}

double accuracy(const Tensor& features, std::span<const std::size_t> labels, const ModelParams& params) {
    if (labels.empty()) return 0.0;
    const Tensor d = distances(features, params);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto row = d.row(i);
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
    const std::size_t d = x.cols();
    Tensor out({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = x.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace

TrainResult train(const TrainingSet& data, const TrainConfig& config) {
    config.validate();
    const std::size_t N = data.size();
    if (N == 0) throw ContractError("train: empty training set");
    if (data.features.rank() != 2 || data.features.rows() != N) {
        throw ShapeError("train: features " + shape_to_string(data.features.shape()) + " vs " + std::to_string(N) +
                         " labels");
    }
    const std::size_t K = data.vocabulary.size();
    std::vector<std::size_t> support(K, 0);
    for (std::size_t y : data.labels) {
        if (y >= K) throw ContractError("train: label index " + std::to_string(y) + " outside the vocabulary");
        ++support[y];
    }
    for (std::size_t k = 0; k < K; ++k)
        if (support[k] == 0) log().warn("class '{}' has no training samples; keeping it in the vocabulary", data.vocabulary[k]);

    Rng rng(config.seed);
    ModelDims dims;
    dims.input_dim = data.features.cols();
    dims.hidden = config.hidden_dims;
    dims.embed_dim = config.embed_dim;

    TrainResult result;
    result.params = init_params(dims, data.vocabulary, config.gamma, rng);
    ModelParams& params = result.params;

    AdamState adam;
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        LossBreakdown sums;
        std::size_t batch_index = 0;
        const std::size_t batch_count = (N + config.batch_size - 1) / config.batch_size;
        for (std::size_t start = 0; start < N; start += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(N, start + config.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            std::vector<std::size_t> labels(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = data.labels[rows[i]];

            const bool dropout = config.dropout_rate > 0.0;
            DropoutMasks masks;
            if (dropout) masks = sample_dropout_masks(rows.size(), dims, config.dropout_rate, rng);

            grad::Graph g;
            const ParamNodes p = bind_params(g, params);
            LossBreakdown batch;
            std::map<grad::NodeId, Tensor> grads;
            try {
                const grad::NodeId x = g.constant(gather_rows(data.features, rows));
                const LossNodes nodes = total_loss(g, p, x, labels, params, config.weights, Mode::Train,
                                                   config.dropout_rate, dropout ? &masks : nullptr);
                batch = nodes.read(g, config.weights);
                const auto ids = p.all();
                grads = g.gradient(ids);
                for (const auto& [id, t] : grads)
                    if (!t.all_finite()) throw NonFiniteError("gradient contains NaN or Inf");
            } catch (const NonFiniteError& e) {
                throw TrainingError(fmt::format("training diverged at epoch {} batch {}: {}", epoch, batch_index + 1,
                                                e.what()));
            }

            std::vector<Tensor> ordered;
            ordered.reserve(8);
            for (grad::NodeId id : p.all()) ordered.push_back(std::move(grads.at(id)));
            const auto targets = params.trainables();
            adam_step(targets, ordered, adam, config.adam);
            for (const Tensor* t : targets)
                if (!t->all_finite())
                    throw TrainingError(fmt::format("training diverged at epoch {} batch {}: update produced NaN or Inf",
                                                    epoch, batch_index + 1));

            const double w = static_cast<double>(rows.size());
            sums.ce += batch.ce * w;
            sums.margin += batch.margin * w;
            sums.fisher += batch.fisher * w;
            sums.total += batch.total * w;
        }

        EpochRecord record;
        record.epoch = epoch;
        const double n = static_cast<double>(N);
        record.loss = {sums.ce / n, sums.margin / n, sums.fisher / n, sums.total / n, config.weights};
        try {
            record.train_accuracy = accuracy(data.features, data.labels, params);
        } catch (const NonFiniteError& e) {
            throw TrainingError(fmt::format("training diverged at epoch {} batch {}: {}", epoch, batch_count, e.what()));
        }
        log().debug("epoch {} total {:.6f} ce {:.6f} margin {:.6f} fisher {:.6f} acc {:.4f}", epoch,
                    record.loss.total, record.loss.ce, record.loss.margin, record.loss.fisher,
                    record.train_accuracy);
        result.history.epochs.push_back(record);
    }
    return result;
}

}  // namespace rpmnet
