#pragma once

// Binary metrics with EarlyPD as the positive class, and stratified folds.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "striatum/image.hpp"

namespace striatum {

/// Layout [[TP, FN], [FP, TN]].
struct ConfusionMatrix {
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;

    std::size_t total() const noexcept { return tp + fn + fp + tn; }
    void add(bool actual_positive, bool predicted_positive) noexcept;
    ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// A ratio with a zero denominator is std::nullopt, never NaN.
struct RatioMetrics {
    std::optional<double> accuracy, precision, recall, specificity;
};

RatioMetrics metrics_from_confusion(const ConfusionMatrix& cm);

/// Mann-Whitney AUC: P(s+ > s-) + P(s+ == s-) / 2. `positive[i]` is nonzero for
/// positives. Throws unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> positive);

/// Step-wise average precision over descending scores, tied scores forming one
/// step: sum over groups of (R_g - R_{g-1}) * P_g. Throws without positives.
double average_precision(std::span<const double> scores, std::span<const int> positive);

struct FoldPlan {
    std::size_t k = 10;
    std::uint64_t seed = 0;
    std::vector<std::size_t> assignment;  // sample index -> fold id

    std::vector<std::size_t> test_indices(std::size_t fold) const;
    std::vector<std::size_t> train_indices(std::size_t fold) const;
};

/// Seeded shuffle within each class, then round-robin over folds. Classes are
/// visited in label order and the round-robin position carries over from one
/// class to the next, which keeps fold sizes within one of each other.
FoldPlan stratified_kfold(std::span<const ClassLabel> labels, std::size_t k, std::uint64_t seed);

}  // namespace striatum
