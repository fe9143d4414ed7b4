#include "rpmnet/openset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include "rpmnet/error.hpp"

namespace rpmnet {
namespace {

ScoreSummary summarize(std::span<const double> scores) {
    ScoreSummary s;
    s.count = scores.size();
    if (scores.empty()) return s;
    s.min = *std::min_element(scores.begin(), scores.end());
    s.max = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (double v : scores) total += v;
    s.mean = total / static_cast<double>(scores.size());
    return s;
}

// F1 = 2tp / (2tp + fp + fn), kept as an exact fraction for comparisons.
struct F1Fraction {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 1;

    bool better_than(const F1Fraction& other) const {
        return static_cast<unsigned __int128>(numerator) * other.denominator >
               static_cast<unsigned __int128>(other.numerator) * denominator;
    }
    double value() const { return numerator == 0 ? 0.0 : static_cast<double>(numerator) / static_cast<double>(denominator); }
};

F1Fraction f1_fraction(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
    if (tp == 0) return {0, 1};
    return {2 * tp, 2 * tp + fp + fn};
}

void require_finite(std::span<const double> scores, const char* what) {
    for (double v : scores)
        if (!std::isfinite(v)) throw ContractError(std::string("calibrate: non-finite ") + what + " score");
}

}  // namespace

std::vector<ScoredSample> score_embeddings(const Tensor& embeddings, const Tensor& points) {
    grad::Graph g;
    const grad::NodeId z = g.constant(embeddings);
    const grad::NodeId p = g.constant(points);
    const Tensor& d = g.value(rp_distances(g, z, p));
    std::vector<ScoredSample> out(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const auto row = d.row(i);
        ScoredSample& s = out[i];
        s.distances.assign(row.begin(), row.end());
        const auto best = std::max_element(row.begin(), row.end());
        s.score = *best;
        s.predicted_class = static_cast<std::size_t>(best - row.begin());
    }
    return out;
}

std::vector<ScoredSample> score(const Tensor& features, const ModelParams& params) {
    return score_embeddings(embed(features, params), params.reciprocal_points);
}

std::vector<ScoredSample> detect(std::vector<ScoredSample> scored, const Threshold& threshold) {
    for (ScoredSample& s : scored) s.is_unknown = s.score < threshold.tau;
    return scored;
}

double unknown_f1(std::span<const double> known_scores, std::span<const double> unknown_scores, double tau) {
    std::uint64_t tp = 0, fp = 0;
    for (double v : unknown_scores) tp += v < tau ? 1 : 0;
    for (double v : known_scores) fp += v < tau ? 1 : 0;
    return f1_fraction(tp, fp, unknown_scores.size() - tp).value();
}

Threshold calibrate(std::span<const double> known_scores, std::span<const double> unknown_scores) {
    if (known_scores.empty() || unknown_scores.empty()) {
        throw ContractError("calibrate: needs at least one known and one unknown validation score");
    }
    require_finite(known_scores, "known");
    require_finite(unknown_scores, "unknown");

    std::vector<std::pair<double, bool>> all;  // (score, is_unknown)
    all.reserve(known_scores.size() + unknown_scores.size());
    for (double v : known_scores) all.emplace_back(v, false);
    for (double v : unknown_scores) all.emplace_back(v, true);
    std::sort(all.begin(), all.end());

    const std::uint64_t total_unknown = unknown_scores.size();
    std::uint64_t tp = 0, fp = 0;  // samples strictly below the current candidate

    double best_tau = -std::numeric_limits<double>::infinity();
    F1Fraction best = f1_fraction(0, 0, total_unknown);

    std::size_t i = 0;
    while (i < all.size()) {
        // Absorb the tie group at all[i].first.
        const double v = all[i].first;
        while (i < all.size() && all[i].first == v) {
            (all[i].second ? tp : fp) += 1;
            ++i;
        }
        double tau = std::numeric_limits<double>::infinity();
        if (i < all.size()) {
            const double next = all[i].first;
            tau = v + (next - v) / 2.0;
            if (!(tau > v)) tau = next;
        }
        const F1Fraction f = f1_fraction(tp, fp, total_unknown - tp);
        if (f.better_than(best)) {
            best = f;
            best_tau = tau;
        }
    }

    Threshold t;
    t.tau = best_tau;
    t.known = summarize(known_scores);
    t.unknown = summarize(unknown_scores);
    t.validation_f1 = best.value();
    return t;
}

std::vector<double> msp_from_logits(const Tensor& logits) {
    std::vector<double> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        const double m = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double v : row) s += std::exp(v - m);
        // The max logit contributes exp(0) = 1 to the numerator.
        out[i] = 1.0 / s;
    }
    return out;
}

std::vector<double> msp_score(const Tensor& features, const ModelParams& params) {
    return msp_from_logits(logits(features, params));
}

}  // namespace rpmnet
