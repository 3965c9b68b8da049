#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "doctest.h"
#include "striatum/error.hpp"
#include "striatum/phantom.hpp"
#include "striatum/report.hpp"
#include "striatum/rng.hpp"
#include "test_support.hpp"

using namespace striatum;
using testing::TempDir;

namespace {

// Brute force over all positive/negative pairs.
double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] && !y[j]) {
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
            }
    return wins / pairs;
}

// Precision and recall at every distinct threshold, straight from the definition.
double ap_thresholds(const std::vector<double>& s, const std::vector<int>& y) {
    std::vector<double> thresholds = s;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    const double n_pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
    double ap = 0.0, prev_recall = 0.0;
    for (double t : thresholds) {
        double tp = 0.0, selected = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] >= t) {
                selected += 1.0;
                tp += y[i];
            }
        const double recall = tp / n_pos;
        ap += (recall - prev_recall) * (tp / selected);
        prev_recall = recall;
    }
    return ap;
}

// Every sequence of tie groups (positives, negatives) with total size n.
void for_each_composition(std::size_t n, const std::function<void(const std::vector<std::pair<int, int>>&)>& fn) {
    std::vector<std::pair<int, int>> groups;
    std::function<void(std::size_t)> rec = [&](std::size_t left) {
        if (left == 0) {
            fn(groups);
            return;
        }
        for (std::size_t size = 1; size <= left; ++size)
            for (std::size_t p = 0; p <= size; ++p) {
                groups.emplace_back(static_cast<int>(p), static_cast<int>(size - p));
                rec(left - size);
                groups.pop_back();
            }
    };
    rec(n);
}

std::vector<LabeledSample> labels_only(const std::vector<ClassLabel>& labels) {
    std::vector<LabeledSample> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        LabeledSample s;
        s.image.rows = 1;
        s.image.cols = 1;
        s.image.pixels = {0.5};
        s.image.source_id = "s" + std::to_string(i);
        s.label = labels[i];
        out.push_back(s);
    }
    return out;
}

std::vector<ClassLabel> cohort_labels(std::size_t n_normal, std::size_t n_pd) {
    std::vector<ClassLabel> l(n_normal, ClassLabel::Normal);
    l.insert(l.end(), n_pd, ClassLabel::EarlyPD);
    return l;
}

std::vector<LabeledSample> phantom_cohort(std::size_t per_class, std::uint64_t seed) {
    PhantomConfig n;
    n.n = per_class;
    n.seed = derive_seed(seed, 1);
    PhantomConfig p = n;
    p.cls = PhantomClass::PDLike;
    p.seed = derive_seed(seed, 2);
    auto a = to_labeled(generate(n));
    for (auto& s : to_labeled(generate(p))) a.push_back(std::move(s));
    return a;
}

}  // namespace

TEST_CASE("metrics_from_confusion on printed rows") {
    const auto r = metrics_from_confusion({433, 10, 1, 209});
    CHECK(100 * *r.accuracy == doctest::Approx(98.32).epsilon(0.00005 / 0.9832));
    CHECK(std::abs(100 * *r.accuracy - 98.32) < 0.005);
    CHECK(std::abs(100 * *r.precision - 99.77) < 0.005);
    CHECK(std::abs(100 * *r.recall - 97.74) < 0.005);
    CHECK(std::abs(100 * *r.specificity - 99.52) < 0.005);

    const auto s = metrics_from_confusion({439, 4, 2, 208});
    CHECK(std::abs(100 * *s.accuracy - 99.08) < 0.005);
    CHECK(std::abs(100 * *s.recall - 99.10) < 0.005);
    CHECK(std::abs(100 * *s.specificity - 99.05) < 0.005);

    const auto l = metrics_from_confusion({431, 12, 12, 198});
    CHECK(std::abs(100 * *l.accuracy - 96.32) < 0.005);
    CHECK(*l.precision == *l.recall);
    CHECK(std::abs(100 * *l.precision - 97.29) < 0.005);
    CHECK(std::abs(100 * *l.specificity - 94.29) < 0.005);
}

TEST_CASE("zero denominators are undefined rather than NaN") {
    const auto r = metrics_from_confusion({0, 0, 0, 5});
    CHECK(!r.precision);
    CHECK(!r.recall);
    CHECK(*r.specificity == 1.0);
    CHECK(*r.accuracy == 1.0);
    CHECK(*metrics_from_confusion({0, 0, 3, 2}).precision == 0.0);
    CHECK(!metrics_from_confusion({}).accuracy);
}

TEST_CASE("auc examples") {
    CHECK(auc(std::vector{0.9, 0.8, 0.4}, std::vector{1, 0, 1}) == 0.5);
    CHECK(auc(std::vector{0.1, 0.2, 0.8, 0.9}, std::vector{0, 0, 1, 1}) == 1.0);
    CHECK(auc(std::vector{0.3, 0.3, 0.3, 0.3}, std::vector{0, 1, 0, 1}) == 0.5);
    CHECK_THROWS_AS(auc(std::vector{0.1, 0.2}, std::vector{1, 1}), InvalidArgument);
    CHECK_THROWS_AS(auc(std::vector{0.1}, std::vector{1, 0}), InvalidArgument);
}

TEST_CASE("average precision examples") {
    CHECK(average_precision(std::vector{0.9, 0.8, 0.4}, std::vector{1, 0, 1}) == doctest::Approx(5.0 / 6.0));
    CHECK(average_precision(std::vector{0.9, 0.8, 0.1, 0.0}, std::vector{1, 1, 0, 0}) == 1.0);
    for (std::size_t n = 1; n <= 9; ++n) {
        std::vector<double> s(n);
        std::vector<int> y(n, 0);
        for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(n - i);
        y[n - 1] = 1;
        CHECK(average_precision(s, y) == doctest::Approx(1.0 / static_cast<double>(n)));
    }
    CHECK_THROWS_AS(average_precision(std::vector{0.1, 0.2}, std::vector{0, 0}), InvalidArgument);
}

TEST_CASE("auc and average precision agree with brute force on every tie pattern up to 8 samples") {
    Rng rng(2);
    std::size_t datasets = 0;
    for (std::size_t n = 1; n <= 8; ++n)
        for_each_composition(n, [&](const std::vector<std::pair<int, int>>& groups) {
            std::vector<double> s;
            std::vector<int> y;
            for (std::size_t g = 0; g < groups.size(); ++g) {
                const double score = std::exp(-static_cast<double>(g));  // descending, one value per group
                for (int k = 0; k < groups[g].first; ++k) s.push_back(score), y.push_back(1);
                for (int k = 0; k < groups[g].second; ++k) s.push_back(score), y.push_back(0);
            }
            // Presentation order must not matter.
            std::vector<std::size_t> perm(s.size());
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
            rng.shuffle(std::span<std::size_t>(perm));
            std::vector<double> ps(s.size());
            std::vector<int> py(s.size());
            for (std::size_t i = 0; i < perm.size(); ++i) ps[i] = s[perm[i]], py[i] = y[perm[i]];

            const auto n_pos = std::count(py.begin(), py.end(), 1);
            if (n_pos > 0) REQUIRE(average_precision(ps, py) == doctest::Approx(ap_thresholds(ps, py)).epsilon(1e-12));
            if (n_pos > 0 && n_pos < static_cast<long>(py.size()))
                REQUIRE(auc(ps, py) == doctest::Approx(auc_pairs(ps, py)).epsilon(1e-12));
            ++datasets;
        });
    MESSAGE(datasets, " tie patterns checked");
    CHECK(datasets > 10000);
}

TEST_CASE("auc is invariant under strictly monotone maps and flips under negation") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(40);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = rng.normal();
            y[i] = static_cast<int>(rng.below(2));
        }
        y[0] = 1;
        y[1] = 0;
        const double base = auc(s, y);
        const double a = rng.uniform(0.1, 3.0), b = rng.normal();
        std::vector<double> t(n), neg(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = std::exp(a * s[i]) + b + std::atan(s[i]);
            neg[i] = -s[i];
        }
        CHECK(auc(t, y) == doctest::Approx(base).epsilon(1e-12));
        CHECK(base + auc(neg, y) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("stratified folds: exact examples") {
    const auto five = stratified_kfold(cohort_labels(5, 5), 5, 1);
    for (std::size_t f = 0; f < 5; ++f) {
        const auto t = five.test_indices(f);
        REQUIRE(t.size() == 2);
        CHECK(t[0] < 5);
        CHECK(t[1] >= 5);
    }

    const auto labels = cohort_labels(210, 443);
    const auto plan = stratified_kfold(labels, 10, 7);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> shapes;  // (pd, normal) -> folds
    for (std::size_t f = 0; f < 10; ++f) {
        std::size_t pd = 0, nm = 0;
        for (std::size_t i : plan.test_indices(f)) (labels[i] == ClassLabel::EarlyPD ? pd : nm) += 1;
        ++shapes[{pd, nm}];
    }
    CHECK(shapes.size() == 2);
    CHECK(shapes[{45, 21}] == 3);
    CHECK(shapes[{44, 21}] == 7);

    CHECK(stratified_kfold(labels, 10, 7).assignment == plan.assignment);
    CHECK(stratified_kfold(labels, 10, 8).assignment != plan.assignment);
    CHECK_THROWS_AS(stratified_kfold(cohort_labels(3, 20), 5, 1), InvalidArgument);
    CHECK_THROWS_AS(stratified_kfold(cohort_labels(3, 20), 1, 1), InvalidArgument);
}

TEST_CASE("stratified folds: per-class counts differ by at most one (fuzzed)") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = 2 + rng.below(9);
        std::vector<ClassLabel> labels;
        const std::size_t classes = 2 + rng.below(2);
        for (std::size_t c = 0; c < classes; ++c) labels.insert(labels.end(), k + rng.below(60), static_cast<ClassLabel>(c));
        rng.shuffle(std::span<ClassLabel>(labels));
        const auto plan = stratified_kfold(labels, k, rng.next_u64());
        REQUIRE(plan.assignment.size() == labels.size());
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t c = 0; c < classes; ++c) {
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (labels[i] == static_cast<ClassLabel>(c)) ++counts[plan.assignment[i]];
            const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
            CHECK(*hi - *lo <= 1);
        }
        for (std::size_t f : plan.assignment) ++sizes.at(f);
        const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        CHECK(*hi - *lo <= 1);
        std::size_t covered = 0;
        for (std::size_t f = 0; f < k; ++f) covered += plan.test_indices(f).size() + 0 * plan.train_indices(f).size();
        CHECK(covered == labels.size());
    }
}

TEST_CASE("pooled cross-validation with oracle scorers") {
    const auto data = labels_only(cohort_labels(20, 30));
    const auto plan = stratified_kfold(std::vector<ClassLabel>(cohort_labels(20, 30)), 5, 3);

    const FoldScorer perfect = [&](auto, std::span<const std::size_t> test, std::size_t, FoldDiagnostics&) {
        std::vector<double> s;
        for (std::size_t i : test) s.push_back(data[i].label == ClassLabel::EarlyPD ? 0.9 : 0.1);
        return s;
    };
    const auto r = pooled_crossval(data, plan, ModelFamily::LogReg, perfect);
    CHECK(*r.ratios.accuracy == 1.0);
    CHECK(*r.auc == 1.0);
    CHECK(*r.apr == 1.0);
    CHECK(r.confusion.total() == data.size());
    CHECK(r.confusion == ConfusionMatrix{30, 0, 0, 20});
    for (std::size_t i = 0; i < r.predictions.size(); ++i) {
        CHECK(r.predictions[i].index == i);
        CHECK(r.predictions[i].fold == plan.assignment[i]);
    }
    ConfusionMatrix sum;
    for (const auto& f : r.folds) sum += f.confusion;
    CHECK(sum == r.confusion);

    const FoldScorer constant = [](auto, std::span<const std::size_t> test, std::size_t, FoldDiagnostics&) {
        return std::vector<double>(test.size(), 0.5);
    };
    const auto c = pooled_crossval(data, plan, ModelFamily::LogReg, constant, 3);
    CHECK(*c.auc == 0.5);
    CHECK(c.confusion == ConfusionMatrix{0, 30, 0, 20});
    CHECK(!c.ratios.precision);

    const FoldScorer failing = [](auto, std::span<const std::size_t> test, std::size_t fold, FoldDiagnostics&) {
        if (fold == 3) throw TrainingError("boom");
        return std::vector<double>(test.size(), 0.5);
    };
    try {
        pooled_crossval(data, plan, ModelFamily::LogReg, failing, 2);
        FAIL("expected an error");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("fold 3") != std::string::npos);
    }

    auto with_holdout = data;
    with_holdout[0].role = CohortRole::Holdout;
    CHECK_THROWS_AS(pooled_crossval(with_holdout, plan, ModelFamily::LogReg, constant), InvalidArgument);
}

TEST_CASE("crossval results do not depend on the number of jobs") {
    const auto data = phantom_cohort(15, 4);
    std::vector<ClassLabel> labels;
    for (const auto& s : data) labels.push_back(s.label);
    const auto plan = stratified_kfold(labels, 5, 9);
    const auto spec = ModelSpec::defaults(ModelFamily::LinearSVM, 1);
    const auto cfg = TrainConfig::defaults(ModelFamily::LinearSVM);
    const auto a = crossval(spec, cfg, data, plan, 1);
    const auto b = crossval(spec, cfg, data, plan, 4);
    CHECK(report_json(a, "t") == report_json(b, "t"));
    CHECK(a.confusion.total() == data.size());
    CHECK(*a.ratios.accuracy >= 0.9);
}

TEST_CASE("hold-out evaluation") {
    TrainedModel normal_only;
    normal_only.spec = ModelSpec::defaults(ModelFamily::LinearSVM);
    normal_only.rows = 1;
    normal_only.cols = 1;
    normal_only.weights = {0.0};
    normal_only.intercept = -1.0;
    TrainedModel pd_only = normal_only;
    pd_only.intercept = 1.0;

    auto holdout = labels_only(std::vector<ClassLabel>(80, ClassLabel::SWEDD));
    for (auto& s : holdout) s.role = CohortRole::Holdout;
    const auto r = evaluate_holdout({{"normal", &normal_only}, {"pd", &pd_only}}, holdout);
    REQUIRE(r.size() == 2);
    CHECK(r[0].tn == 80);
    CHECK(r[0].fp == 0);
    CHECK(r[0].accuracy() == 1.0);
    CHECK(format_holdout_line(r[0]) == "tn=80 fp=0");
    CHECK(format_holdout_line(r[1]) == "tn=0 fp=80");
    CHECK(format_holdout_line({"cnn", 76, 4}) == "tn=76 fp=4");
    CHECK(HoldoutResult{"cnn", 76, 4}.accuracy() == 0.95);
    CHECK(format_holdout_table(r).find("normal") != std::string::npos);

    CHECK_THROWS_AS(evaluate_holdout({{"x", &normal_only}}, {}), InvalidArgument);
    CHECK_THROWS_AS(evaluate_holdout({{"x", &normal_only}}, labels_only({ClassLabel::Normal})), InvalidArgument);
}

TEST_CASE("report JSON round trip, determinism and internal consistency") {
    TempDir dir("report");
    const auto data = phantom_cohort(10, 5);
    std::vector<ClassLabel> labels;
    for (const auto& s : data) labels.push_back(s.label);
    const auto plan = stratified_kfold(labels, 4, 2);
    const auto r = crossval(ModelSpec::defaults(ModelFamily::LogReg, 3), TrainConfig::defaults(ModelFamily::LogReg), data, plan);

    emit_report(r, dir / "a.json", "2026-01-01T00:00:00Z");
    emit_report(r, dir / "b.json");
    const auto back = read_report(dir / "a.json");
    CHECK(back.ratios.accuracy == r.ratios.accuracy);
    CHECK(back.ratios.precision == r.ratios.precision);
    CHECK(back.auc == r.auc);
    CHECK(back.apr == r.apr);
    CHECK(back.confusion == r.confusion);
    CHECK(back.spec == r.spec);
    CHECK(report_json(back, "x") == report_json(r, "x"));

    // Everything but the timestamp line is identical.
    auto strip = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        std::string line, out;
        while (std::getline(in, line))
            if (line.find("\"generated_at\"") == std::string::npos) out += line + "\n";
        return out;
    };
    CHECK(strip(dir / "a.json") == strip(dir / "b.json"));

    const auto recomputed = metrics_from_confusion(back.confusion);
    CHECK(recomputed.accuracy == back.ratios.accuracy);
    CHECK(recomputed.specificity == back.ratios.specificity);

    write_predictions_csv(r, dir / "p.csv");
    std::ifstream csv(dir / "p.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "index,id,fold,score,label,predicted");
    std::size_t lines = 0;
    for (std::string l; std::getline(csv, l);) ++lines;
    CHECK(lines == data.size());

    const std::string table = format_metrics_table({{"LogReg", r}});
    CHECK(table.find("LogReg") != std::string::npos);

    std::ofstream(dir / "bad.json") << "{\"schema_version\": 99}";
    CHECK_THROWS_AS(read_report(dir / "bad.json"), InvalidArgument);
    CHECK_THROWS_AS(read_report(dir / "none.json"), IoError);
}
