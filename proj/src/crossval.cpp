#include "striatum/crossval.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "striatum/error.hpp"

namespace striatum {

EvalReport pooled_crossval(std::span<const LabeledSample> data, const FoldPlan& plan, ModelFamily family,
                           const FoldScorer& scorer, std::size_t jobs) {
    if (plan.assignment.size() != data.size()) throw InvalidArgument("fold plan does not match the dataset size");
    for (const auto& s : data)
        if (s.role == CohortRole::Holdout) throw InvalidArgument("hold-out sample " + s.image.source_id + " in cross-validation data");

    EvalReport report;
    report.k = plan.k;
    report.fold_seed = plan.seed;
    if (!data.empty()) report.preproc = data[0].image.preproc;
    report.folds.resize(plan.k);
    std::vector<std::vector<double>> fold_scores(plan.k);
    std::vector<std::exception_ptr> errors(plan.k);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t f = next++; f < plan.k; f = next++) {
            try {
                const auto train = plan.train_indices(f), test = plan.test_indices(f);
                FoldDiagnostics& d = report.folds[f];
                d.fold = f;
                d.train_size = train.size();
                d.test_size = test.size();
                fold_scores[f] = scorer(train, test, f, d);
                if (fold_scores[f].size() != test.size()) throw Error("scorer returned the wrong number of scores");
            } catch (...) {
                errors[f] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, plan.k));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t f = 0; f < plan.k; ++f) {
        if (!errors[f]) continue;
        try {
            std::rethrow_exception(errors[f]);
        } catch (const std::exception& e) {
            throw TrainingError("fold " + std::to_string(f) + " failed: " + e.what());
        }
    }

    report.predictions.resize(data.size());
    for (std::size_t f = 0; f < plan.k; ++f) {
        const auto test = plan.test_indices(f);
        for (std::size_t j = 0; j < test.size(); ++j) {
            const std::size_t i = test[j];
            ScoredPrediction& p = report.predictions[i];
            p.index = i;
            p.id = data[i].image.source_id;
            p.fold = f;
            p.score = fold_scores[f][j];
            p.label = data[i].label;
            p.predicted = label_from_score(family, p.score);
            report.folds[f].confusion.add(p.label == ClassLabel::EarlyPD, p.predicted == ClassLabel::EarlyPD);
        }
    }
    summarize(report);
    return report;
}

void summarize(EvalReport& report) {
    report.confusion = {};
    std::vector<double> scores;
    std::vector<int> positive;
    for (const auto& p : report.predictions) {
        report.confusion.add(p.label == ClassLabel::EarlyPD, p.predicted == ClassLabel::EarlyPD);
        scores.push_back(p.score);
        positive.push_back(p.label == ClassLabel::EarlyPD);
    }
    report.ratios = metrics_from_confusion(report.confusion);
    const bool both = report.confusion.tp + report.confusion.fn > 0 && report.confusion.fp + report.confusion.tn > 0;
    report.auc = both ? std::optional(auc(scores, positive)) : std::nullopt;
    report.apr = report.confusion.tp + report.confusion.fn > 0 ? std::optional(average_precision(scores, positive)) : std::nullopt;
}

EvalReport crossval(const ModelSpec& spec, const TrainConfig& cfg, std::span<const LabeledSample> data, const FoldPlan& plan,
                    std::size_t jobs) {
    cfg.validate();
    const FoldScorer scorer = [&](std::span<const std::size_t> train, std::span<const std::size_t> test, std::size_t fold,
                                  FoldDiagnostics& d) {
        ModelSpec s = spec;
        s.seed = derive_seed(spec.seed, fold);
        TrainConfig c = cfg;
        c.seed = derive_seed(cfg.seed, fold);
        const TrainedModel m = fit(s, c, data, train);
        d.epochs_run = m.meta.epochs_run;
        d.final_train_loss = m.meta.final_train_loss;
        std::vector<double> out;
        out.reserve(test.size());
        for (std::size_t i : test) out.push_back(score(m, data[i].image));
        return out;
    };
    EvalReport r = pooled_crossval(data, plan, spec.family, scorer, jobs);
    r.spec = spec;
    r.config = cfg;
    return r;
}

std::vector<HoldoutResult> evaluate_holdout(const std::vector<std::pair<std::string, const TrainedModel*>>& models,
                                            std::span<const LabeledSample> holdout) {
    if (holdout.empty()) throw InvalidArgument("hold-out set is empty");
    std::vector<HoldoutResult> out;
    for (const auto& [name, model] : models) {
        HoldoutResult r{name, 0, 0};
        for (const auto& s : holdout) {
            if (s.role != CohortRole::Holdout) throw InvalidArgument("sample " + s.image.source_id + " is not a hold-out sample");
            ++(predict(*model, s.image) == ClassLabel::EarlyPD ? r.fp : r.tn);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_holdout_line(const HoldoutResult& r) {
    return "tn=" + std::to_string(r.tn) + " fp=" + std::to_string(r.fp);
}

}  // namespace striatum
