#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpmnet/model.hpp"
#include "rpmnet/openset.hpp"
#include "rpmnet/tensor.hpp"

namespace rpmnet {

/// Prediction bucket for known samples rejected as unknown. It counts as a
/// miss for the true class and as a prediction of no class.
inline constexpr std::size_t kRejected = std::numeric_limits<std::size_t>::max();

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct MacroMetrics {
    std::vector<ClassMetrics> per_class;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Per-class and unweighted-mean precision/recall/F1. 0/0 counts as 0.
/// Predictions may be kRejected.
MacroMetrics macro_prf(std::span<const std::size_t> predictions, std::span<const std::size_t> truths,
                       std::size_t num_classes);

/// P(score_known > score_unknown) + P(tie)/2.
double auroc(std::span<const double> scores, std::span<const bool> is_known, bool higher_means_known = true);

/// Area under the precision-recall curve. Thresholds sweep the distinct
/// scores from high to low; each achieved recall level is weighted by the
/// best precision reached at that recall or beyond.
double aupr(std::span<const double> scores, std::span<const bool> is_positive, bool higher_means_positive = true);

struct EvalReport {
    std::vector<std::string> labels;
    MacroMetrics known;
    /// Rows are true classes; columns are predicted classes plus a final
    /// "rejected" column.
    std::vector<std::vector<std::size_t>> confusion;
    std::size_t known_count = 0;
    std::size_t unknown_count = 0;
    std::size_t known_rejected = 0;
    std::size_t unknown_detected = 0;
    double tau = 0.0;
    std::optional<double> auroc;
    std::optional<double> aupr_in;
    std::optional<double> aupr_out;
};

/// Known-class metrics with rejection applied, plus ranking metrics of the
/// raw score over knowns and unknowns (absent when there are no unknowns).
EvalReport evaluate(const ModelParams& params, const Threshold& threshold, const Tensor& known_features,
                    std::span<const std::size_t> known_labels, const Tensor& unknown_features);

/// Same as evaluate() with scores already computed.
EvalReport evaluate_scored(std::span<const ScoredSample> known, std::span<const std::size_t> known_labels,
                           std::span<const ScoredSample> unknown, const Threshold& threshold,
                           const std::vector<std::string>& labels);

/// Report document. Headline keys: Precision, Recall, F1-Score, AUROC,
/// AUPR-IN, AUPR-OUT (null when undefined).
nlohmann::json to_json(const EvalReport& report);

}  // namespace rpmnet
