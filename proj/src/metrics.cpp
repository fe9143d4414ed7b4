#include "rpmnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <utility>

#include "rpmnet/error.hpp"

namespace rpmnet {
namespace {

double safe_ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<double> oriented(std::span<const double> scores, bool higher_is_positive) {
    std::vector<double> out(scores.begin(), scores.end());
    if (!higher_is_positive)
        for (double& v : out) v = -v;
    return out;
}

nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json threshold_value(double tau) {
    if (std::isinf(tau)) return tau > 0 ? "inf" : "-inf";
    return tau;
}

}  // namespace

MacroMetrics macro_prf(std::span<const std::size_t> predictions, std::span<const std::size_t> truths,
                       std::size_t num_classes) {
    if (predictions.size() != truths.size()) {
        throw ContractError("macro_prf: " + std::to_string(predictions.size()) + " predictions vs " +
                            std::to_string(truths.size()) + " truths");
    }
    if (num_classes == 0) throw ContractError("macro_prf: no classes");
    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    MacroMetrics out;
    out.per_class.resize(num_classes);
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const std::size_t t = truths[i];
        const std::size_t p = predictions[i];
        if (t >= num_classes) throw ContractError("macro_prf: truth index " + std::to_string(t) + " out of range");
        if (p != kRejected && p >= num_classes) {
            throw ContractError("macro_prf: prediction index " + std::to_string(p) + " out of range");
        }
        ++out.per_class[t].support;
        if (p == t) {
            ++tp[t];
        } else {
            ++fn[t];
            if (p != kRejected) ++fp[p];
        }
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        ClassMetrics& c = out.per_class[k];
        c.precision = safe_ratio(tp[k], tp[k] + fp[k]);
        c.recall = safe_ratio(tp[k], tp[k] + fn[k]);
        c.f1 = c.precision + c.recall == 0.0 ? 0.0 : 2.0 * c.precision * c.recall / (c.precision + c.recall);
        out.precision += c.precision;
        out.recall += c.recall;
        out.f1 += c.f1;
    }
    const double k = static_cast<double>(num_classes);
    out.precision /= k;
    out.recall /= k;
    out.f1 /= k;
    return out;
}

double auroc(std::span<const double> scores, std::span<const bool> is_known, bool higher_means_known) {
    if (scores.size() != is_known.size()) throw ContractError("auroc: scores and flags differ in length");
    const std::vector<double> s = oriented(scores, higher_means_known);
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });

    std::uint64_t known_total = 0, unknown_total = 0;
    for (bool k : is_known) (k ? known_total : unknown_total) += 1;
    if (known_total == 0 || unknown_total == 0) {
        throw ContractError("auroc: needs both known and unknown samples");
    }

    // Ascending sweep: each known beats every unknown in lower tie groups.
    std::uint64_t wins = 0, ties = 0, unknown_below = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double v = s[order[i]];
        std::uint64_t group_known = 0, group_unknown = 0;
        while (i < order.size() && s[order[i]] == v) {
            (is_known[order[i]] ? group_known : group_unknown) += 1;
            ++i;
        }
        wins += group_known * unknown_below;
        ties += group_known * group_unknown;
        unknown_below += group_unknown;
    }
    return static_cast<double>(2 * wins + ties) /
           (2.0 * static_cast<double>(known_total) * static_cast<double>(unknown_total));
}

double aupr(std::span<const double> scores, std::span<const bool> is_positive, bool higher_means_positive) {
    if (scores.size() != is_positive.size()) throw ContractError("aupr: scores and flags differ in length");
    const std::size_t positives = static_cast<std::size_t>(std::count(is_positive.begin(), is_positive.end(), true));
    if (positives == 0) throw ContractError("aupr: no positive samples");

    const std::vector<double> s = oriented(scores, higher_means_positive);
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

    // One operating point per tie group: cumulative true positives and precision.
    std::vector<std::size_t> tps;
    std::vector<double> precision;
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double v = s[order[i]];
        while (i < order.size() && s[order[i]] == v) {
            (is_positive[order[i]] ? tp : fp) += 1;
            ++i;
        }
        tps.push_back(tp);
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    for (std::size_t j = precision.size() - 1; j-- > 0;) precision[j] = std::max(precision[j], precision[j + 1]);

    double area = 0.0;
    std::size_t previous = 0;
    for (std::size_t j = 0; j < tps.size(); ++j) {
        area += static_cast<double>(tps[j] - previous) * precision[j];
        previous = tps[j];
    }
    return area / static_cast<double>(positives);
}

EvalReport evaluate_scored(std::span<const ScoredSample> known, std::span<const std::size_t> known_labels,
                           std::span<const ScoredSample> unknown, const Threshold& threshold,
                           const std::vector<std::string>& labels) {
    if (known.size() != known_labels.size()) throw ContractError("evaluate: scores and labels differ in length");
    const std::size_t K = labels.size();
    EvalReport r;
    r.labels = labels;
    r.tau = threshold.tau;
    r.known_count = known.size();
    r.unknown_count = unknown.size();
    r.confusion.assign(K, std::vector<std::size_t>(K + 1, 0));

    std::vector<std::size_t> predictions(known.size());
    for (std::size_t i = 0; i < known.size(); ++i) {
        const bool rejected = known[i].score < threshold.tau;
        predictions[i] = rejected ? kRejected : known[i].predicted_class;
        if (known_labels[i] >= K) throw ContractError("evaluate: label index out of range");
        r.confusion[known_labels[i]][rejected ? K : known[i].predicted_class] += 1;
        if (rejected) ++r.known_rejected;
    }
    r.known = macro_prf(predictions, known_labels, K);
    for (const ScoredSample& s : unknown)
        if (s.score < threshold.tau) ++r.unknown_detected;

    if (!unknown.empty() && !known.empty()) {
        const std::size_t n = known.size() + unknown.size();
        std::vector<double> scores;
        scores.reserve(n);
        auto known_flags = std::make_unique<bool[]>(n);
        auto unknown_flags = std::make_unique<bool[]>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const bool is_known_sample = i < known.size();
            scores.push_back(is_known_sample ? known[i].score : unknown[i - known.size()].score);
            known_flags[i] = is_known_sample;
            unknown_flags[i] = !is_known_sample;
        }
        const std::span<const bool> is_known(known_flags.get(), n);
        const std::span<const bool> is_unknown(unknown_flags.get(), n);
        r.auroc = auroc(scores, is_known, true);
        r.aupr_in = aupr(scores, is_known, true);
        r.aupr_out = aupr(scores, is_unknown, false);
    }
    return r;
}

EvalReport evaluate(const ModelParams& params, const Threshold& threshold, const Tensor& known_features,
                    std::span<const std::size_t> known_labels, const Tensor& unknown_features) {
    const auto known = score(known_features, params);
    const auto unknown = score(unknown_features, params);
    return evaluate_scored(known, known_labels, unknown, threshold, params.labels);
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t k = 0; k < r.labels.size(); ++k) {
        const ClassMetrics& c = r.known.per_class[k];
        per_class.push_back({{"label", r.labels[k]},
                             {"precision", c.precision},
                             {"recall", c.recall},
                             {"f1", c.f1},
                             {"support", c.support}});
    }
    nlohmann::json columns = r.labels;
    columns.push_back("rejected");
    return {
        {"Precision", r.known.precision},
        {"Recall", r.known.recall},
        {"F1-Score", r.known.f1},
        {"AUROC", optional_number(r.auroc)},
        {"AUPR-IN", optional_number(r.aupr_in)},
        {"AUPR-OUT", optional_number(r.aupr_out)},
        {"per_class", per_class},
        {"confusion", {{"columns", columns}, {"rows", r.confusion}}},
        {"counts",
         {{"known", r.known_count},
          {"unknown", r.unknown_count},
          {"known_rejected", r.known_rejected},
          {"unknown_detected", r.unknown_detected}}},
        {"tau", threshold_value(r.tau)},
    };
}

}  // namespace rpmnet
