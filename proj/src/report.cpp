#include "striatum/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "striatum/error.hpp"
#include "striatum/json_io.hpp"

namespace striatum {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> number_or_null(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json confusion_json(const ConfusionMatrix& c) { return {{"tp", c.tp}, {"fn", c.fn}, {"fp", c.fp}, {"tn", c.tn}}; }

ConfusionMatrix confusion_from(const json& j) {
    return {j.at("tp").get<std::size_t>(), j.at("fn").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("tn").get<std::size_t>()};
}

ClassLabel label_from(const json& j) {
    const auto l = parse_label(j.get<std::string>());
    if (!l) throw InvalidArgument("report: unknown label " + j.get<std::string>());
    return *l;
}

std::string percent(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) { return s.size() >= width ? s : s + std::string(width - s.size(), ' '); }

}  // namespace

std::string current_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string report_json(const EvalReport& r, const std::string& timestamp) {
    json folds = json::array();
    for (const auto& f : r.folds)
        folds.push_back({{"fold", f.fold},
                         {"train_size", f.train_size},
                         {"test_size", f.test_size},
                         {"epochs_run", f.epochs_run},
                         {"final_train_loss", f.final_train_loss},
                         {"confusion", confusion_json(f.confusion)},
                         {"accuracy", optional_number(metrics_from_confusion(f.confusion).accuracy)}});
    json preds = json::array();
    for (const auto& p : r.predictions)
        preds.push_back({{"index", p.index},
                         {"id", p.id},
                         {"fold", p.fold},
                         {"score", p.score},
                         {"label", to_string(p.label)},
                         {"predicted", to_string(p.predicted)}});
    const json doc = {
        {"schema_version", kReportSchemaVersion},
        {"generated_at", timestamp},
        {"model", to_json(r.spec)},
        {"train_config", to_json(r.config)},
        {"seeds", {{"model", r.spec.seed}, {"train", r.config.seed}, {"folds", r.fold_seed}}},
        {"k", r.k},
        {"preproc", to_string(r.preproc)},
        {"confusion", confusion_json(r.confusion)},
        {"metrics",
         {{"accuracy", optional_number(r.ratios.accuracy)},
          {"auc", optional_number(r.auc)},
          {"apr", optional_number(r.apr)},
          {"precision", optional_number(r.ratios.precision)},
          {"recall", optional_number(r.ratios.recall)},
          {"specificity", optional_number(r.ratios.specificity)}}},
        {"folds", folds},
        {"predictions", preds},
    };
    return doc.dump(2) + "\n";
}

EvalReport parse_report(const std::string& text) {
    EvalReport r;
    try {
        const json j = json::parse(text);
        const int version = j.at("schema_version").get<int>();
        if (version != kReportSchemaVersion)
            throw InvalidArgument("report schema version " + std::to_string(version) + " is not supported");
        r.spec = spec_from_json(j.at("model"));
        r.config = config_from_json(j.at("train_config"));
        r.k = j.at("k").get<std::size_t>();
        r.fold_seed = j.at("seeds").at("folds").get<std::uint64_t>();
        const auto pre = parse_preproc(j.at("preproc").get<std::string>());
        if (!pre) throw InvalidArgument("report: unknown preproc tag");
        r.preproc = *pre;
        r.confusion = confusion_from(j.at("confusion"));
        const json& m = j.at("metrics");
        r.ratios = {number_or_null(m.at("accuracy")), number_or_null(m.at("precision")), number_or_null(m.at("recall")),
                    number_or_null(m.at("specificity"))};
        r.auc = number_or_null(m.at("auc"));
        r.apr = number_or_null(m.at("apr"));
        for (const auto& f : j.at("folds"))
            r.folds.push_back({f.at("fold").get<std::size_t>(), f.at("train_size").get<std::size_t>(),
                               f.at("test_size").get<std::size_t>(), f.at("epochs_run").get<std::size_t>(),
                               f.at("final_train_loss").get<double>(), confusion_from(f.at("confusion"))});
        for (const auto& p : j.at("predictions"))
            r.predictions.push_back({p.at("index").get<std::size_t>(), p.at("id").get<std::string>(), p.at("fold").get<std::size_t>(),
                                     p.at("score").get<double>(), label_from(p.at("label")), label_from(p.at("predicted"))});
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed report: ") + e.what());
    }
    return r;
}

void emit_report(const EvalReport& report, const std::filesystem::path& path, const std::optional<std::string>& timestamp) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create report " + path.string());
    out << report_json(report, timestamp.value_or(current_timestamp()));
    if (!out) throw IoError("write failed for " + path.string());
}

EvalReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_report(ss.str());
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
}

void write_predictions_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out << "index,id,fold,score,label,predicted\n";
    char buf[40];
    for (const auto& p : report.predictions) {
        std::snprintf(buf, sizeof buf, "%.17g", p.score);
        out << p.index << ',' << p.id << ',' << p.fold << ',' << buf << ',' << to_string(p.label) << ','
            << to_string(p.predicted) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::string format_metrics_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::ostringstream out;
    out << pad("Method", 22) << pad("Accuracy", 10) << pad("AUC", 8) << pad("APR", 8) << pad("Precision", 11) << pad("Recall", 9)
        << pad("Specificity", 13) << "Confusion [[TP, FN], [FP, TN]]\n";
    for (const auto& [name, r] : rows) {
        const auto& c = r.confusion;
        out << pad(name, 22) << pad(percent(r.ratios.accuracy), 10) << pad(percent(r.auc), 8) << pad(percent(r.apr), 8)
            << pad(percent(r.ratios.precision), 11) << pad(percent(r.ratios.recall), 9) << pad(percent(r.ratios.specificity), 13)
            << "[[" << c.tp << ", " << c.fn << "], [" << c.fp << ", " << c.tn << "]]\n";
    }
    return out.str();
}

std::string format_holdout_table(const std::vector<HoldoutResult>& rows) {
    std::ostringstream out;
    out << pad("Method", 22) << pad("TN", 6) << pad("FP", 6) << "Accuracy\n";
    for (const auto& r : rows)
        out << pad(r.name, 22) << pad(std::to_string(r.tn), 6) << pad(std::to_string(r.fp), 6) << percent(r.accuracy()) << "\n";
    return out.str();
}

}  // namespace striatum
