#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpmnet/model.hpp"
#include "rpmnet/tensor.hpp"

namespace rpmnet {

struct ScoredSample {
    std::vector<double> distances;  // d(z, P_k) for every class
    double score = 0.0;             // max of distances
    std::size_t predicted_class = 0;
    std::optional<bool> is_unknown;  // set by detect()
};

struct ScoreSummary {
    std::size_t count = 0;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;

    friend bool operator==(const ScoreSummary&, const ScoreSummary&) = default;
};

/// Rejection threshold. Samples scoring strictly below tau are unknown.
/// tau may be -inf (reject nothing) or +inf (reject everything).
struct Threshold {
    double tau = 0.0;
    std::string method = "max-unknown-f1";
    ScoreSummary known;
    ScoreSummary unknown;
    double validation_f1 = 0.0;

    friend bool operator==(const Threshold&, const Threshold&) = default;
};

/// Scores precomputed embeddings against the reciprocal points.
std::vector<ScoredSample> score_embeddings(const Tensor& embeddings, const Tensor& points);

/// Inference-mode scoring of a feature batch.
std::vector<ScoredSample> score(const Tensor& features, const ModelParams& params);

/// Marks is_unknown = (score < tau) on a copy of the batch.
std::vector<ScoredSample> detect(std::vector<ScoredSample> scored, const Threshold& threshold);

/// Picks the candidate tau (-inf, midpoints of adjacent distinct scores,
/// +inf) maximizing F1 of unknown-as-positive detection. Ties go to the
/// smallest tau.
Threshold calibrate(std::span<const double> known_scores, std::span<const double> unknown_scores);

/// F1 of flagging unknowns with `score < tau`.
double unknown_f1(std::span<const double> known_scores, std::span<const double> unknown_scores, double tau);

/// Maximum softmax probability over gamma-scaled distances. Higher means
/// more likely known, the opposite orientation to score().
std::vector<double> msp_score(const Tensor& features, const ModelParams& params);
std::vector<double> msp_from_logits(const Tensor& logits);

}  // namespace rpmnet
