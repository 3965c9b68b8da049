#include "striatum/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "striatum/error.hpp"
#include "striatum/rng.hpp"

namespace striatum {

void ConfusionMatrix::add(bool actual_positive, bool predicted_positive) noexcept {
    if (actual_positive)
        ++(predicted_positive ? tp : fn);
    else
        ++(predicted_positive ? fp : tn);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) noexcept {
    tp += o.tp;
    fn += o.fn;
    fp += o.fp;
    tn += o.tn;
    return *this;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

void check_inputs(std::span<const double> scores, std::span<const int> positive) {
    if (scores.size() != positive.size()) throw InvalidArgument("scores and labels differ in length");
    for (double s : scores)
        if (std::isnan(s)) throw InvalidArgument("NaN score");
}

// Indices sorted by descending score.
std::vector<std::size_t> descending(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace

RatioMetrics metrics_from_confusion(const ConfusionMatrix& cm) {
    return {ratio(cm.tp + cm.tn, cm.total()), ratio(cm.tp, cm.tp + cm.fp), ratio(cm.tp, cm.tp + cm.fn),
            ratio(cm.tn, cm.tn + cm.fp)};
}

double auc(std::span<const double> scores, std::span<const int> positive) {
    check_inputs(scores, positive);
    const auto order = descending(scores);
    // Walk tie groups from the top; each negative in a group beats none of the
    // positives above and ties with the positives in its own group.
    double wins = 0.0;
    std::size_t pos_above = 0, n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i, p = 0, n = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (positive[order[j]] ? p : n) += 1;
            ++j;
        }
        wins += static_cast<double>(n) * (static_cast<double>(pos_above) + 0.5 * static_cast<double>(p));
        pos_above += p;
        n_pos += p;
        n_neg += n;
        i = j;
    }
    if (n_pos == 0 || n_neg == 0) throw InvalidArgument("auc needs both classes present");
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double average_precision(std::span<const double> scores, std::span<const int> positive) {
    check_inputs(scores, positive);
    const std::size_t n_pos = static_cast<std::size_t>(std::count_if(positive.begin(), positive.end(), [](int v) { return v != 0; }));
    if (n_pos == 0) throw InvalidArgument("average_precision needs at least one positive");
    const auto order = descending(scores);
    double ap = 0.0;
    std::size_t tp = 0, seen = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i, p = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            p += positive[order[j]] != 0;
            ++j;
        }
        tp += p;
        seen += j - i;
        if (p > 0)
            ap += (static_cast<double>(p) / static_cast<double>(n_pos)) * (static_cast<double>(tp) / static_cast<double>(seen));
        i = j;
    }
    return ap;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != fold) out.push_back(i);
    return out;
}

FoldPlan stratified_kfold(std::span<const ClassLabel> labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw InvalidArgument("k must be at least 2");
    std::map<ClassLabel, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    if (by_class.empty()) throw InvalidArgument("no samples to split");
    for (const auto& [label, members] : by_class)
        if (members.size() < k)
            throw InvalidArgument("k = " + std::to_string(k) + " exceeds the " + std::to_string(members.size()) + " samples of class " +
                                  std::string(to_string(label)));

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignment.assign(labels.size(), 0);
    std::size_t next = 0;
    for (auto& [label, members] : by_class) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t idx : members) {
            plan.assignment[idx] = next;
            next = (next + 1) % k;
        }
    }
    return plan;
}

}  // namespace striatum
