#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They are deliberately naive: all pairs, full sweeps, brute force.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <set>
#include <span>
#include <vector>

#include "rpmnet/graph.hpp"
#include "rpmnet/rng.hpp"
#include "rpmnet/tensor.hpp"

namespace oracle {

// Fraction of (known, unknown) pairs ordered correctly, ties counted half.
inline double auroc(std::span<const double> scores, std::span<const bool> known) {
    double good = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!known[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (known[j]) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) good += 1.0;
            else if (scores[i] == scores[j]) good += 0.5;
        }
    }
    return good / pairs;
}

// Step-wise PR area from a full sweep: for every distinct threshold t, predict
// positive when score >= t. Each recall level reached is credited with the
// largest precision seen at that recall or any higher recall.
inline double aupr(std::span<const double> scores, std::span<const bool> positive) {
    std::set<double> distinct(scores.begin(), scores.end());
    std::size_t total_pos = 0;
    for (bool p : positive) total_pos += p ? 1 : 0;
    struct Point { std::size_t tp; double precision; };
    std::vector<Point> points;
    for (double t : distinct) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) (positive[i] ? tp : fp) += 1;
        }
        points.push_back({tp, static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }
    // Recall levels in increasing order with the best precision at or beyond each.
    std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) { return a.tp < b.tp; });
    double area = 0.0;
    std::size_t prev_tp = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].tp == prev_tp) continue;
        double best = 0.0;
        for (std::size_t j = i; j < points.size(); ++j) best = std::max(best, points[j].precision);
        area += static_cast<double>(points[i].tp - prev_tp) * best;
        prev_tp = points[i].tp;
    }
    return area / static_cast<double>(total_pos);
}

// Unknown-as-positive F1 of rejecting scores strictly below tau.
inline double unknown_f1(std::span<const double> known, std::span<const double> unknown, double tau) {
    double tp = 0, fp = 0;
    for (double s : unknown) tp += s < tau ? 1 : 0;
    for (double s : known) fp += s < tau ? 1 : 0;
    const double fn = static_cast<double>(unknown.size()) - tp;
    if (tp == 0) return 0.0;
    return 2 * tp / (2 * tp + fp + fn);
}

// Best F1 over every threshold that can split the pooled scores differently,
// found by trying each pooled score plus the two infinities as tau.
inline double best_unknown_f1(std::span<const double> known, std::span<const double> unknown) {
    double best = 0.0;
    std::vector<double> taus(known.begin(), known.end());
    taus.insert(taus.end(), unknown.begin(), unknown.end());
    taus.push_back(std::numeric_limits<double>::infinity());
    taus.push_back(-std::numeric_limits<double>::infinity());
    for (double t : taus) best = std::max(best, unknown_f1(known, unknown, t));
    return best;
}

inline double hybrid_distance(std::span<const double> z, std::span<const double> p) {
    double sq = 0, dot = 0, nz = 0, np = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        sq += (z[i] - p[i]) * (z[i] - p[i]);
        dot += z[i] * p[i];
        nz += z[i] * z[i];
        np += p[i] * p[i];
    }
    return sq / static_cast<double>(z.size()) - dot / (std::max(std::sqrt(nz), 1e-12) * std::max(std::sqrt(np), 1e-12));
}

inline rpmnet::Tensor random_tensor(rpmnet::Rng& rng, rpmnet::Shape shape, double scale = 1.0) {
    rpmnet::Tensor t(std::move(shape));
    for (double& v : t.data()) v = scale * rng.normal();
    return t;
}

// Central finite differences of f around `inputs`.
inline std::vector<rpmnet::Tensor> numeric_gradient(
    const std::function<double(const std::vector<rpmnet::Tensor>&)>& f, std::vector<rpmnet::Tensor> inputs,
    double step = 1e-5) {
    std::vector<rpmnet::Tensor> grads;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        rpmnet::Tensor g(inputs[k].shape());
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double orig = inputs[k][i];
            inputs[k][i] = orig + step;
            const double up = f(inputs);
            inputs[k][i] = orig - step;
            const double down = f(inputs);
            inputs[k][i] = orig;
            g[i] = (up - down) / (2 * step);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

// ||a - b|| / max(||a||, ||b||, tiny), computed over all tensors jointly.
inline double relative_error(std::span<const rpmnet::Tensor> a, std::span<const rpmnet::Tensor> b) {
    double diff = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t i = 0; i < a[k].size(); ++i) {
            diff += (a[k][i] - b[k][i]) * (a[k][i] - b[k][i]);
            na += a[k][i] * a[k][i];
            nb += b[k][i] * b[k][i];
        }
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
    return std::sqrt(diff) / denom;
}

}  // namespace oracle
