#include "striatum/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "striatum/classifiers.hpp"
#include "striatum/crossval.hpp"
#include "striatum/error.hpp"
#include "striatum/ingest.hpp"
#include "striatum/json_io.hpp"
#include "striatum/model_io.hpp"
#include "striatum/phantom.hpp"
#include "striatum/report.hpp"
#include "striatum/tpe.hpp"

namespace striatum {

namespace {

using nlohmann::json;

const std::vector<std::string> kCommands = {"generate-phantoms", "crossval", "train", "predict",
                                            "hyperopt", "eval-swedd", "report"};

// JSON config: top-level keys apply to the active subcommand; an object keyed by
// a subcommand name applies only to that subcommand. Arrays feed repeatable flags.
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(std::string active) : active_(std::move(active)) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw CLI::ConversionError("config", std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config", "top level must be a JSON object");
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : j.items()) {
            const bool is_command = std::find(kCommands.begin(), kCommands.end(), key) != kCommands.end();
            if (is_command) {
                if (!value.is_object()) throw CLI::ConversionError("config", "\"" + key + "\" must be an object");
                if (key != active_) continue;
                for (const auto& [k, v] : value.items()) items.push_back(item(k, v));
            } else {
                items.push_back(item(key, value));
            }
        }
        return items;
    }

private:
    CLI::ConfigItem item(const std::string& key, const json& v) const {
        CLI::ConfigItem it;
        if (!active_.empty()) it.parents = {active_};
        it.name = key;
        auto text = [&](const json& x) {
            if (x.is_string()) return x.get<std::string>();
            if (x.is_boolean()) return std::string(x.get<bool>() ? "true" : "false");
            if (x.is_number() || x.is_null()) return x.dump();
            throw CLI::ConversionError(key, "config values must be scalars or arrays of scalars");
        };
        if (v.is_array())
            for (const auto& x : v) it.inputs.push_back(text(x));
        else
            it.inputs.push_back(text(v));
        return it;
    }

    std::string active_;
};

struct SliceFlags {
    std::string preproc = "single";
    int first = 35, last = 48, single = 41, offset = 0;
    bool flip = false;

    PreprocTag tag() const {
        const auto t = parse_preproc(preproc);
        if (!t) throw InvalidArgument("--preproc must be average or single, got '" + preproc + "'");
        return *t;
    }
    SliceOptions options() const { return {first, last, single, offset, flip}; }
};

void add_slice_flags(CLI::App* c, SliceFlags& f, bool preproc_optional = false) {
    if (!preproc_optional)
        c->add_option("--preproc", f.preproc, "Slice preprocessing: average (slices first..last) or single")
            ->capture_default_str();
    c->add_option("--slice-first", f.first, "First slice of the average (0-based)")->capture_default_str();
    c->add_option("--slice-last", f.last, "Last slice of the average (0-based, inclusive)")->capture_default_str();
    c->add_option("--slice", f.single, "Slice used by single mode (0-based)")->capture_default_str();
    c->add_option("--slice-offset", f.offset, "Added to every slice index (-1 for 1-based numbering)")
        ->capture_default_str();
    c->add_flag("--flip-rows", f.flip, "Reverse the Y axis when extracting slices");
}

struct TrainFlags {
    std::string model = "cnn";
    std::optional<std::string> spec_path;
    std::optional<double> reg_c;
    std::optional<std::string> optimizer;
    std::optional<double> lr;
    std::optional<std::size_t> batch_size, epochs, patience;
    std::optional<double> val_fraction;

    ModelFamily family() const {
        const auto f = parse_family(model);
        if (!f) throw InvalidArgument("--model must be cnn, mlp, logreg or svm, got '" + model + "'");
        return *f;
    }
};

void add_train_flags(CLI::App* c, TrainFlags& f, bool with_spec = true) {
    c->add_option("--model", f.model, "Model family: cnn, mlp, logreg, svm")->capture_default_str();
    if (with_spec)
        c->add_option("--spec", f.spec_path, "Architecture JSON (a model spec or a hyperopt best-trial file)");
    c->add_option("--reg-c", f.reg_c, "Inverse L1 strength for logreg/svm (default 1.0 / 0.5)");
    c->add_option("--optimizer", f.optimizer, "adam or sgd for cnn/mlp (default adam)");
    c->add_option("--lr", f.lr, "Learning rate, or initial step for logreg/svm (default 1e-3 / 1.0)");
    c->add_option("--batch-size", f.batch_size, "Minibatch size (default 32)");
    c->add_option("--epochs", f.epochs, "Maximum epochs or iterations (default 100 / 500)");
    c->add_option("--patience", f.patience, "Early-stopping patience, 0 disables (default 10 / 0)");
    c->add_option("--val-fraction", f.val_fraction, "Validation fraction for early stopping (default 0.1 / 0)");
}

// Independent streams for weight init, training order and fold assignment.
std::uint64_t model_seed(std::uint64_t seed) { return derive_seed(seed, 0x6d6f64656cULL); }
std::uint64_t train_seed(std::uint64_t seed) { return derive_seed(seed, 0x747261696eULL); }
std::uint64_t fold_seed(std::uint64_t seed) { return derive_seed(seed, 0x666f6c6473ULL); }

ModelSpec make_spec(const TrainFlags& f, std::uint64_t seed) {
    const ModelFamily family = f.family();
    ModelSpec spec = ModelSpec::defaults(family, model_seed(seed));
    if (f.spec_path) {
        std::ifstream in(*f.spec_path);
        if (!in) throw IoError("cannot open spec file " + *f.spec_path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw InvalidArgument(*f.spec_path + ": " + e.what());
        }
        if (j.contains("model")) j = j.at("model");
        ModelSpec loaded = spec_from_json(j);
        if (loaded.family != family)
            throw InvalidArgument(*f.spec_path + " describes a " + std::string(to_string(loaded.family)) + " model, not " +
                                  std::string(to_string(family)));
        spec.architecture = loaded.architecture;
        spec.reg_c = loaded.reg_c;
    }
    if (f.reg_c) {
        if (!(*f.reg_c > 0.0)) throw InvalidArgument("--reg-c must be positive");
        spec.reg_c = *f.reg_c;
    }
    return spec;
}

TrainConfig make_config(const TrainFlags& f, std::uint64_t seed) {
    TrainConfig cfg = TrainConfig::defaults(f.family());
    cfg.seed = train_seed(seed);
    if (f.optimizer) {
        const auto o = parse_optimizer(*f.optimizer);
        if (!o) throw InvalidArgument("--optimizer must be adam or sgd, got '" + *f.optimizer + "'");
        cfg.optimizer = *o;
    }
    if (f.lr) cfg.learning_rate = *f.lr;
    if (f.batch_size) cfg.batch_size = *f.batch_size;
    if (f.epochs) cfg.max_epochs = *f.epochs;
    if (f.patience) cfg.early_stop_patience = *f.patience;
    if (f.val_fraction) cfg.validation_fraction = *f.val_fraction;
    cfg.validate();
    return cfg;
}

void add_seed(CLI::App* c, std::uint64_t& seed) {
    c->add_option("--seed", seed, "Global seed (falls back to STRIATUM_SEED, then 0)")
        ->envname("STRIATUM_SEED")
        ->capture_default_str();
}

// Rows of one cohort role, loaded with the requested preprocessing.
std::vector<LabeledSample> load_role(const std::string& manifest_path, CohortRole role, PreprocTag tag,
                                     const SliceOptions& opts, std::ostream& err) {
    Manifest m = read_manifest(manifest_path);
    std::erase_if(m.rows, [&](const ManifestRow& r) { return role_for(r.label) != role; });
    if (m.rows.empty())
        throw InvalidArgument(manifest_path + (role == CohortRole::TrainEval ? " has no normal or pd rows"
                                                                             : " has no swedd rows"));
    return load_dataset(m, tag, opts, &err).samples;
}

std::vector<ClassLabel> labels_of(const std::vector<LabeledSample>& data) {
    std::vector<ClassLabel> out;
    for (const auto& s : data) out.push_back(s.label);
    return out;
}

std::string report_name(const EvalReport& r) {
    return std::string(to_string(r.spec.family)) + " (" + std::string(to_string(r.preproc)) + ")";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

std::string format_assignment(const Assignment& a) {
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, v] : a) {
        os << (first ? "" : " ") << k << '=';
        std::visit([&](const auto& x) { os << x; }, v);
        first = false;
    }
    return os.str();
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::size_t normal = 210, pd = 443, swedd = 80;
    std::uint64_t seed = 0;
    std::string out_dir;
    double noise = 0.02, severity = 0.7;
    std::string prefix = "phantom_";
};

void cmd_generate(const GenerateArgs& a, std::ostream& out) {
    if (a.normal + a.pd + a.swedd == 0) throw InvalidArgument("at least one of --normal, --pd, --swedd must be positive");
    Manifest m;
    m.base_dir = a.out_dir;
    const std::pair<PhantomClass, std::size_t> plan[] = {
        {PhantomClass::NormalLike, a.normal}, {PhantomClass::PDLike, a.pd}, {PhantomClass::SweddLike, a.swedd}};
    constexpr std::size_t kChunk = 16;
    for (const auto& [cls, n] : plan) {
        for (std::size_t first = 0; first < n; first += kChunk) {
            PhantomConfig cfg;
            cfg.cls = cls;
            cfg.first = first;
            cfg.n = std::min(kChunk, n - first);
            cfg.seed = derive_seed(a.seed, static_cast<std::uint64_t>(cls) + 1);
            cfg.noise_sigma = a.noise;
            cfg.severity = a.severity;
            cfg.emit = PhantomEmit::Volume;
            const auto rows = write_phantom_volumes(generate(cfg), a.out_dir, a.prefix);
            m.rows.insert(m.rows.end(), rows.begin(), rows.end());
        }
    }
    const auto manifest_path = std::filesystem::path(a.out_dir) / "manifest.csv";
    write_manifest(m, manifest_path);
    out << "normal " << a.normal << "\npd " << a.pd << "\nswedd " << a.swedd << "\nmanifest " << manifest_path.string()
        << '\n';
}

struct CrossvalArgs {
    TrainFlags train;
    SliceFlags slices;
    std::string manifest;
    std::size_t k = 10, jobs = 1;
    std::uint64_t seed = 0;
    std::optional<std::string> report, predictions;
};

void cmd_crossval(const CrossvalArgs& a, std::ostream& out, std::ostream& err) {
    const ModelSpec spec = make_spec(a.train, a.seed);
    const TrainConfig cfg = make_config(a.train, a.seed);
    if (a.jobs == 0) throw InvalidArgument("--jobs must be at least 1");
    const auto data = load_role(a.manifest, CohortRole::TrainEval, a.slices.tag(), a.slices.options(), err);
    const FoldPlan plan = stratified_kfold(labels_of(data), a.k, fold_seed(a.seed));
    const EvalReport r = crossval(spec, cfg, data, plan, a.jobs);
    out << format_metrics_table({{report_name(r), r}});
    if (a.report) emit_report(r, *a.report);
    if (a.predictions) write_predictions_csv(r, *a.predictions);
}

struct TrainArgs {
    TrainFlags train;
    SliceFlags slices;
    std::string manifest, out_path;
    std::uint64_t seed = 0;
};

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    const ModelSpec spec = make_spec(a.train, a.seed);
    const TrainConfig cfg = make_config(a.train, a.seed);
    const auto data = load_role(a.manifest, CohortRole::TrainEval, a.slices.tag(), a.slices.options(), err);
    const TrainedModel model = fit(spec, cfg, data);
    save_model(model, a.out_path);
    char line[160];
    std::snprintf(line, sizeof line, "trained %s on %zu images (%s), %zu epochs, final loss %.6g\n",
                  std::string(to_string(spec.family)).c_str(), data.size(), std::string(to_string(model.preproc)).c_str(),
                  model.meta.epochs_run, model.meta.final_train_loss);
    out << line << "model " << a.out_path << '\n';
}

struct PredictArgs {
    std::string model_path;
    std::optional<std::string> preproc, manifest, out_csv;
    SliceFlags slices;
    std::vector<std::string> files;
};

void cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
    const TrainedModel model = load_model(a.model_path);
    if (a.preproc) {
        const auto t = parse_preproc(*a.preproc);
        if (!t) throw InvalidArgument("--preproc must be average or single, got '" + *a.preproc + "'");
        if (*t != model.preproc)
            throw InvalidArgument("model was trained on " + std::string(to_string(model.preproc)) + " images but --preproc " +
                                  std::string(to_string(*t)) + " was requested");
    }
    std::vector<std::pair<std::string, std::filesystem::path>> inputs;
    for (const auto& f : a.files) inputs.emplace_back(f, f);
    if (a.manifest) {
        const Manifest m = read_manifest(*a.manifest);
        for (const auto& r : m.rows) {
            std::filesystem::path p(r.path);
            inputs.emplace_back(r.path, p.is_relative() ? m.base_dir / p : p);
        }
    }
    if (inputs.empty()) throw InvalidArgument("predict needs input files or --manifest");

    std::ostringstream csv;
    csv << "path,class,score\n";
    for (const auto& [name, path] : inputs) {
        const Volume v = read_nifti(path);
        if (v.clamped > 0) err << "warning: " << name << ": " << v.clamped << " voxels clamped to [0, 32767]\n";
        const SliceImage img = normalize(select_slices(v, model.preproc, a.slices.options()), model.preproc, name);
        const double s = score(model, img);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", s);
        const std::string cls(to_string(label_from_score(model.spec.family, s)));
        out << name << '\t' << cls << '\t' << buf << '\n';
        csv << name << ',' << cls << ',' << buf << '\n';
    }
    if (a.out_csv) write_text(*a.out_csv, csv.str());
}

struct HyperoptArgs {
    TrainFlags train;
    SliceFlags slices;
    std::string manifest, history;
    std::optional<std::string> out_path;
    std::size_t budget = 30, k = 10;
    std::uint64_t seed = 0;
    std::size_t n_startup = 10, n_candidates = 24;
    double gamma = 0.25;
};

void cmd_hyperopt(const HyperoptArgs& a, std::ostream& out, std::ostream& err) {
    const ModelFamily family = a.train.family();
    if (family != ModelFamily::CNN && family != ModelFamily::MLP)
        throw InvalidArgument("hyperopt searches cnn or mlp architectures");
    if (a.budget < 1) throw InvalidArgument("--budget must be at least 1");
    const TrainConfig cfg = make_config(a.train, a.seed);
    TpeConfig tpe;
    tpe.n_startup = a.n_startup;
    tpe.gamma = a.gamma;
    tpe.n_candidates = a.n_candidates;
    tpe.seed = derive_seed(a.seed, 0x747065ULL);
    tpe.validate();
    const ParamSpace space = default_search_space(family);

    std::vector<Trial> history = read_history(a.history, space);
    if (history.size() > a.budget)
        throw InvalidArgument(a.history + " already holds " + std::to_string(history.size()) + " trials, more than --budget " +
                              std::to_string(a.budget));
    if (!history.empty()) out << "resuming from " << history.size() << " trials\n";

    const auto data = load_role(a.manifest, CohortRole::TrainEval, a.slices.tag(), a.slices.options(), err);
    const FoldPlan plan = stratified_kfold(labels_of(data), a.k, fold_seed(a.seed));
    const std::uint64_t mseed = model_seed(a.seed);

    auto objective = [&](const Assignment& x) {
        const EvalReport r = crossval(spec_from_assignment(family, x, mseed), cfg, data, plan, 1);
        return -r.ratios.accuracy.value_or(0.0);
    };
    auto on_trial = [&](const Trial& t) {
        append_trial(a.history, t);
        char buf[64];
        if (t.objective)
            std::snprintf(buf, sizeof buf, "%.4f", -*t.objective);
        else
            std::snprintf(buf, sizeof buf, "failed");
        out << "trial " << t.id << " accuracy " << buf << "  " << format_assignment(t.assignment) << '\n';
        if (!t.objective) err << "trial " << t.id << " failed: " << t.error << '\n';
    };
    const OptimizeResult res = optimize(objective, space, a.budget, tpe, std::move(history), on_trial);

    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", -*res.best.objective);
    out << "best trial " << res.best.id << " accuracy " << buf << "  " << format_assignment(res.best.assignment) << '\n';
    if (a.out_path) {
        const json best = {{"trial", res.best.id},
                           {"assignment", trial_to_json(res.best).at("assignment")},
                           {"objective", *res.best.objective},
                           {"cv_accuracy", -*res.best.objective},
                           {"model", to_json(spec_from_assignment(family, res.best.assignment, mseed))}};
        write_text(*a.out_path, best.dump(2) + "\n");
    }
}

struct EvalSweddArgs {
    std::vector<std::string> models;
    std::string manifest;
    SliceFlags slices;
    std::optional<std::string> out_path;
};

void cmd_eval_swedd(const EvalSweddArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<TrainedModel> models;
    for (const auto& p : a.models) models.push_back(load_model(p));
    std::map<PreprocTag, std::vector<LabeledSample>> holdout;
    for (const auto& m : models)
        if (!holdout.count(m.preproc))
            holdout[m.preproc] = load_role(a.manifest, CohortRole::Holdout, m.preproc, a.slices.options(), err);

    std::vector<HoldoutResult> rows;
    std::set<std::string> names;
    for (std::size_t i = 0; i < models.size(); ++i) {
        std::string name(to_string(models[i].spec.family));
        if (!names.insert(name).second) name += " (" + std::filesystem::path(a.models[i]).stem().string() + ")";
        names.insert(name);
        const auto r = evaluate_holdout({{name, &models[i]}}, holdout.at(models[i].preproc));
        rows.push_back(r.front());
    }
    out << format_holdout_table(rows);
    json j = {{"holdout", json::array()}};
    for (const auto& r : rows) {
        out << r.name << ' ' << format_holdout_line(r) << '\n';
        j["holdout"].push_back({{"model", r.name}, {"tn", r.tn}, {"fp", r.fp}, {"accuracy", r.accuracy()}});
    }
    if (a.out_path) write_text(*a.out_path, j.dump(2) + "\n");
}

struct ReportArgs {
    std::vector<std::string> inputs;
    std::optional<std::string> predictions;
};

void cmd_report(const ReportArgs& a, std::ostream& out) {
    std::vector<std::pair<std::string, EvalReport>> rows;
    for (const auto& p : a.inputs) {
        EvalReport r = read_report(p);
        rows.emplace_back(report_name(r), std::move(r));
    }
    out << format_metrics_table(rows);
    if (a.predictions) {
        if (rows.size() != 1) throw InvalidArgument("--predictions needs exactly one --input");
        write_predictions_csv(rows.front().second, *a.predictions);
    }
}

std::string active_command(const std::vector<std::string>& args) {
    for (const auto& a : args)
        if (std::find(kCommands.begin(), kCommands.end(), a) != kCommands.end()) return a;
    return {};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Parkinson's disease classification from DaTSCAN SPECT slices", "striatum"};
    app.require_subcommand(1);
    app.config_formatter(std::make_shared<JsonConfig>(active_command(args)));
    app.set_config("--config", "", "JSON file whose keys mirror long flag names; flags on the command line win");
    app.allow_config_extras(CLI::config_extras_mode::error);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate-phantoms", "Write synthetic NIfTI volumes and a manifest");
    g->add_option("--normal", gen.normal, "Normal-like count")->capture_default_str();
    g->add_option("--pd", gen.pd, "PD-like count")->capture_default_str();
    g->add_option("--swedd", gen.swedd, "SWEDD-like count")->capture_default_str();
    g->add_option("--out", gen.out_dir, "Output directory")->required();
    g->add_option("--noise", gen.noise, "Noise sigma as a fraction of 32767")->capture_default_str();
    g->add_option("--severity", gen.severity, "PD attenuation in [0, 1]")->capture_default_str();
    g->add_option("--prefix", gen.prefix, "File name prefix")->capture_default_str();
    add_seed(g, gen.seed);

    CrossvalArgs cv;
    auto* c = app.add_subcommand("crossval", "Stratified k-fold cross-validation with pooled metrics");
    add_train_flags(c, cv.train);
    add_slice_flags(c, cv.slices);
    c->add_option("--manifest", cv.manifest, "Manifest CSV")->required();
    c->add_option("--k", cv.k, "Number of folds")->capture_default_str();
    c->add_option("--jobs", cv.jobs, "Folds trained in parallel")->capture_default_str();
    c->add_option("--report", cv.report, "Write the evaluation report JSON here");
    c->add_option("--predictions", cv.predictions, "Write out-of-fold predictions CSV here");
    add_seed(c, cv.seed);

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Fit one model on every normal and pd row and save it");
    add_train_flags(t, tr.train);
    add_slice_flags(t, tr.slices);
    t->add_option("--manifest", tr.manifest, "Manifest CSV")->required();
    t->add_option("--out", tr.out_path, "Model file to write")->required();
    add_seed(t, tr.seed);

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Classify NIfTI volumes with a saved model");
    p->add_option("--model-file", pr.model_path, "Saved model")->required();
    p->add_option("--preproc", pr.preproc, "Must match the model's preprocessing when given");
    add_slice_flags(p, pr.slices, true);
    p->add_option("--manifest", pr.manifest, "Predict every row of this manifest");
    p->add_option("--out", pr.out_csv, "Also write path,class,score CSV here");
    p->add_option("files", pr.files, "NIfTI files");

    HyperoptArgs ho;
    auto* h = app.add_subcommand("hyperopt", "TPE search over cnn or mlp architectures");
    add_train_flags(h, ho.train, false);
    add_slice_flags(h, ho.slices);
    h->add_option("--manifest", ho.manifest, "Manifest CSV")->required();
    h->add_option("--history", ho.history, "JSON-lines trial history; an existing file is resumed")->required();
    h->add_option("--out", ho.out_path, "Write the best trial and its model spec here");
    h->add_option("--budget", ho.budget, "Total number of trials")->capture_default_str();
    h->add_option("--k", ho.k, "Folds per objective evaluation")->capture_default_str();
    h->add_option("--n-startup", ho.n_startup, "Random trials before the Parzen model is used")->capture_default_str();
    h->add_option("--gamma", ho.gamma, "Fraction of trials in the good set")->capture_default_str();
    h->add_option("--n-candidates", ho.n_candidates, "Candidates scored per suggestion")->capture_default_str();
    add_seed(h, ho.seed);

    EvalSweddArgs es;
    auto* e = app.add_subcommand("eval-swedd", "Score the swedd rows of a manifest as negatives");
    e->add_option("--model-file", es.models, "Saved model (repeatable)")->required();
    e->add_option("--manifest", es.manifest, "Manifest CSV")->required();
    add_slice_flags(e, es.slices, true);
    e->add_option("--out", es.out_path, "Write the counts as JSON here");

    ReportArgs rp;
    auto* r = app.add_subcommand("report", "Print metrics tables from saved reports");
    r->add_option("--input", rp.inputs, "Report JSON (repeatable)")->required();
    r->add_option("--predictions", rp.predictions, "Write the predictions CSV of a single report");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex, out, err);
        return 2;
    }

    try {
        if (g->parsed()) cmd_generate(gen, out);
        if (c->parsed()) cmd_crossval(cv, out, err);
        if (t->parsed()) cmd_train(tr, out, err);
        if (p->parsed()) cmd_predict(pr, out, err);
        if (h->parsed()) cmd_hyperopt(ho, out, err);
        if (e->parsed()) cmd_eval_swedd(es, out, err);
        if (r->parsed()) cmd_report(rp, out);
    } catch (const InvalidArgument& ex) {
        err << "error: " << ex.what() << '\n';
        return 2;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace striatum
