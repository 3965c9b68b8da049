#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "striatum/classifiers.hpp"
#include "striatum/metrics.hpp"

namespace striatum {

struct ScoredPrediction {
    std::size_t index = 0;  // position in the evaluated dataset
    std::string id;         // image source id
    std::size_t fold = 0;
    double score = 0.0;
    ClassLabel label = ClassLabel::Normal;
    ClassLabel predicted = ClassLabel::Normal;
};

struct FoldDiagnostics {
    std::size_t fold = 0;
    std::size_t train_size = 0, test_size = 0;
    std::size_t epochs_run = 0;
    double final_train_loss = 0.0;
    ConfusionMatrix confusion;
};

struct EvalReport {
    ModelSpec spec;
    TrainConfig config;
    std::size_t k = 0;
    std::uint64_t fold_seed = 0;
    PreprocTag preproc = PreprocTag::SingleSlice;
    ConfusionMatrix confusion;  // pooled over all folds
    RatioMetrics ratios;
    std::optional<double> auc, apr;  // undefined when a class is missing
    std::vector<FoldDiagnostics> folds;
    std::vector<ScoredPrediction> predictions;  // ordered by sample index
};

/// Fit on the training indices and return one score per test index.
using FoldScorer = std::function<std::vector<double>(std::span<const std::size_t> train, std::span<const std::size_t> test,
                                                     std::size_t fold, FoldDiagnostics& diag)>;

/// Runs `scorer` on every fold (up to `jobs` at once) and pools the out-of-fold
/// scores. Thresholds follow `family`. Any fold failure is rethrown naming the fold.
EvalReport pooled_crossval(std::span<const LabeledSample> data, const FoldPlan& plan, ModelFamily family,
                           const FoldScorer& scorer, std::size_t jobs = 1);

/// Per-fold model seeds are derive_seed(spec.seed, fold) and derive_seed(cfg.seed, fold),
/// so results do not depend on `jobs`.
EvalReport crossval(const ModelSpec& spec, const TrainConfig& cfg, std::span<const LabeledSample> data,
                    const FoldPlan& plan, std::size_t jobs = 1);

/// Fill confusion, ratios, auc and apr from `predictions`.
void summarize(EvalReport& report);

struct HoldoutResult {
    std::string name;
    std::size_t tn = 0, fp = 0;
    double accuracy() const { return static_cast<double>(tn) / static_cast<double>(tn + fp); }
};

/// Hold-out samples are scored as ground-truth negatives.
std::vector<HoldoutResult> evaluate_holdout(const std::vector<std::pair<std::string, const TrainedModel*>>& models,
                                            std::span<const LabeledSample> holdout);

/// "tn=<n> fp=<m>"
std::string format_holdout_line(const HoldoutResult& r);

}  // namespace striatum
