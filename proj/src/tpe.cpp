#include "striatum/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include "striatum/error.hpp"

namespace striatum {

using nlohmann::json;

void ParamSpace::validate() const {
    if (dims.empty()) throw InvalidArgument("search space is empty");
    std::set<std::string> names;
    for (const auto& d : dims) {
        if (d.name.empty()) throw InvalidArgument("dimension without a name");
        if (!names.insert(d.name).second) throw InvalidArgument("duplicate dimension " + d.name);
        if (d.kind == Dimension::Kind::Categorical) {
            if (d.choices.empty()) throw InvalidArgument("categorical " + d.name + " has no choices");
            continue;
        }
        if (!(d.lo < d.hi)) throw InvalidArgument("dimension " + d.name + " needs lo < hi");
        if (d.kind == Dimension::Kind::LogUniform && !(d.lo > 0.0)) throw InvalidArgument("log-uniform " + d.name + " needs lo > 0");
        if (d.kind == Dimension::Kind::Integer && (d.lo != std::round(d.lo) || d.hi != std::round(d.hi)))
            throw InvalidArgument("integer " + d.name + " needs integral bounds");
    }
}

void TpeConfig::validate() const {
    if (n_startup == 0) throw InvalidArgument("n_startup must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must be in (0, 1)");
    if (n_candidates == 0) throw InvalidArgument("n_candidates must be positive");
}

double real_param(const Assignment& a, const std::string& name) {
    const auto it = a.find(name);
    if (it == a.end()) throw InvalidArgument("assignment lacks " + name);
    if (const auto* d = std::get_if<double>(&it->second)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    throw InvalidArgument(name + " is categorical");
}

std::int64_t int_param(const Assignment& a, const std::string& name) {
    const auto it = a.find(name);
    if (it == a.end()) throw InvalidArgument("assignment lacks " + name);
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
    throw InvalidArgument(name + " is not an integer");
}

const std::string& choice_param(const Assignment& a, const std::string& name) {
    const auto it = a.find(name);
    if (it == a.end()) throw InvalidArgument("assignment lacks " + name);
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw InvalidArgument(name + " is not categorical");
}

bool within_space(const Assignment& a, const ParamSpace& space) {
    if (a.size() != space.dims.size()) return false;
    for (const auto& d : space.dims) {
        const auto it = a.find(d.name);
        if (it == a.end()) return false;
        switch (d.kind) {
            case Dimension::Kind::Uniform:
            case Dimension::Kind::LogUniform: {
                const auto* v = std::get_if<double>(&it->second);
                if (!v || !(*v >= d.lo && *v <= d.hi)) return false;
                break;
            }
            case Dimension::Kind::Integer: {
                const auto* v = std::get_if<std::int64_t>(&it->second);
                if (!v || static_cast<double>(*v) < d.lo || static_cast<double>(*v) > d.hi) return false;
                break;
            }
            case Dimension::Kind::Categorical: {
                const auto* v = std::get_if<std::string>(&it->second);
                if (!v || std::find(d.choices.begin(), d.choices.end(), *v) == d.choices.end()) return false;
                break;
            }
        }
    }
    return true;
}

std::size_t good_set_size(std::size_t completed, double gamma) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(completed))));
}

namespace {

// Numeric dimensions live on an internal interval: log scale for log-uniform,
// [lo - 0.5, hi + 0.5] for integers so that rounding gives every value equal mass.
struct Interval {
    double a, b;
};

Interval internal(const Dimension& d) {
    switch (d.kind) {
        case Dimension::Kind::LogUniform: return {std::log(d.lo), std::log(d.hi)};
        case Dimension::Kind::Integer: return {d.lo - 0.5, d.hi + 0.5};
        default: return {d.lo, d.hi};
    }
}

double to_internal(const Dimension& d, const ParamValue& v) {
    if (d.kind == Dimension::Kind::LogUniform) return std::log(std::get<double>(v));
    if (d.kind == Dimension::Kind::Integer) return static_cast<double>(std::get<std::int64_t>(v));
    if (d.kind == Dimension::Kind::Categorical) {
        const auto& s = std::get<std::string>(v);
        return static_cast<double>(std::find(d.choices.begin(), d.choices.end(), s) - d.choices.begin());
    }
    return std::get<double>(v);
}

ParamValue from_internal(const Dimension& d, double x) {
    switch (d.kind) {
        case Dimension::Kind::Uniform: return std::clamp(x, d.lo, d.hi);
        case Dimension::Kind::LogUniform: return std::clamp(std::exp(x), d.lo, d.hi);
        case Dimension::Kind::Integer: return static_cast<std::int64_t>(std::clamp(std::round(x), d.lo, d.hi));
        case Dimension::Kind::Categorical: return d.choices[static_cast<std::size_t>(x)];
    }
    return x;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Truncated Gaussian mixture: one kernel per observation plus a broad prior kernel.
class Parzen {
public:
    Parzen(std::vector<double> obs, Interval iv) : iv_(iv) {
        const double range = iv.b - iv.a;
        mus_ = std::move(obs);
        mus_.push_back(0.5 * (iv.a + iv.b));
        std::sort(mus_.begin(), mus_.end());
        sigmas_.resize(mus_.size());
        for (std::size_t i = 0; i < mus_.size(); ++i) {
            const double left = i == 0 ? mus_[i] - iv.a : mus_[i] - mus_[i - 1];
            const double right = i + 1 == mus_.size() ? iv.b - mus_[i] : mus_[i + 1] - mus_[i];
            sigmas_[i] = std::clamp(std::max(left, right), 0.01 * range, range);
        }
        // The prior kernel always spans the whole interval.
        prior_ = static_cast<std::size_t>(std::find(mus_.begin(), mus_.end(), 0.5 * (iv.a + iv.b)) - mus_.begin());
        sigmas_[prior_] = range;
        mass_.resize(mus_.size());
        for (std::size_t i = 0; i < mus_.size(); ++i)
            mass_[i] = normal_cdf((iv.b - mus_[i]) / sigmas_[i]) - normal_cdf((iv.a - mus_[i]) / sigmas_[i]);
    }

    double sample(Rng& rng) const {
        const std::size_t i = rng.below(mus_.size());
        for (int tries = 0; tries < 100; ++tries) {
            const double x = rng.normal(mus_[i], sigmas_[i]);
            if (x >= iv_.a && x <= iv_.b) return x;
        }
        return std::clamp(mus_[i], iv_.a, iv_.b);
    }

    double log_density(double x) const {
        double p = 0.0;
        for (std::size_t i = 0; i < mus_.size(); ++i) {
            const double z = (x - mus_[i]) / sigmas_[i];
            p += std::exp(-0.5 * z * z) / (sigmas_[i] * std::sqrt(2.0 * std::numbers::pi) * mass_[i]);
        }
        return std::log(p / static_cast<double>(mus_.size()));
    }

private:
    Interval iv_;
    std::vector<double> mus_, sigmas_, mass_;
    std::size_t prior_ = 0;
};

// Smoothed category frequencies: (count + 1) / (n + K).
class Categorical {
public:
    Categorical(const std::vector<double>& obs, std::size_t k) : probs_(k, 1.0) {
        for (double o : obs) probs_[static_cast<std::size_t>(o)] += 1.0;
        const double total = static_cast<double>(obs.size() + k);
        for (double& p : probs_) p /= total;
    }

    double sample(Rng& rng) const {
        double u = rng.uniform();
        for (std::size_t i = 0; i < probs_.size(); ++i) {
            if (u < probs_[i]) return static_cast<double>(i);
            u -= probs_[i];
        }
        return static_cast<double>(probs_.size() - 1);
    }

    double log_density(double x) const { return std::log(probs_[static_cast<std::size_t>(x)]); }

private:
    std::vector<double> probs_;
};

Trial run_trial(const Objective& objective, Assignment a, std::size_t id) {
    Trial t;
    t.id = id;
    t.assignment = std::move(a);
    try {
        const double y = objective(t.assignment);
        if (!std::isfinite(y)) throw Error("objective returned a non-finite value");
        t.objective = y;
    } catch (const std::exception& e) {
        t.status = TrialStatus::Failed;
        t.error = e.what();
    }
    return t;
}

OptimizeResult finish(std::vector<Trial> history) {
    const Trial* best = nullptr;
    for (const auto& t : history)
        if (t.status == TrialStatus::Complete && (!best || *t.objective < *best->objective)) best = &t;
    if (!best) throw Error("every trial failed" + (history.empty() ? std::string() : ": " + history.back().error));
    OptimizeResult r{*best, {}};
    r.history = std::move(history);
    return r;
}

}  // namespace

Assignment sample_prior(const ParamSpace& space, Rng& rng) {
    space.validate();
    Assignment a;
    for (const auto& d : space.dims) {
        if (d.kind == Dimension::Kind::Categorical) {
            a[d.name] = d.choices[rng.below(d.choices.size())];
        } else {
            const Interval iv = internal(d);
            a[d.name] = from_internal(d, rng.uniform(iv.a, iv.b));
        }
    }
    return a;
}

Assignment suggest(const std::vector<Trial>& history, const ParamSpace& space, const TpeConfig& cfg, Rng& rng) {
    space.validate();
    cfg.validate();
    std::vector<const Trial*> done;
    for (const auto& t : history)
        if (t.status == TrialStatus::Complete && t.objective) done.push_back(&t);
    if (done.size() < cfg.n_startup) return sample_prior(space, rng);

    std::stable_sort(done.begin(), done.end(), [](const Trial* x, const Trial* y) { return *x->objective < *y->objective; });
    const std::size_t n_good = good_set_size(done.size(), cfg.gamma);

    struct Model {
        std::optional<Parzen> l_num, g_num;
        std::optional<Categorical> l_cat, g_cat;
    };
    std::vector<Model> models(space.dims.size());
    for (std::size_t k = 0; k < space.dims.size(); ++k) {
        const Dimension& d = space.dims[k];
        std::vector<double> good, bad;
        for (std::size_t i = 0; i < done.size(); ++i)
            (i < n_good ? good : bad).push_back(to_internal(d, done[i]->assignment.at(d.name)));
        if (d.kind == Dimension::Kind::Categorical) {
            models[k].l_cat.emplace(good, d.choices.size());
            models[k].g_cat.emplace(bad, d.choices.size());
        } else {
            models[k].l_num.emplace(good, internal(d));
            models[k].g_num.emplace(bad, internal(d));
        }
    }

    std::vector<double> best_x;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<double> x(space.dims.size());
    for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < space.dims.size(); ++k) {
            const Model& m = models[k];
            if (m.l_cat) {
                x[k] = m.l_cat->sample(rng);
                s += m.l_cat->log_density(x[k]) - m.g_cat->log_density(x[k]);
            } else {
                x[k] = m.l_num->sample(rng);
                s += m.l_num->log_density(x[k]) - m.g_num->log_density(x[k]);
            }
        }
        if (s > best_score || best_x.empty()) {
            best_score = s;
            best_x = x;
        }
    }
    Assignment a;
    for (std::size_t k = 0; k < space.dims.size(); ++k) a[space.dims[k].name] = from_internal(space.dims[k], best_x[k]);
    return a;
}

OptimizeResult optimize(const Objective& objective, const ParamSpace& space, std::size_t budget, const TpeConfig& cfg,
                        std::vector<Trial> history, const TrialCallback& on_trial) {
    if (budget == 0) throw InvalidArgument("budget must be at least 1");
    space.validate();
    cfg.validate();
    for (std::size_t i = 0; i < history.size(); ++i)
        if (history[i].id != i) throw InvalidArgument("history trial ids must be 0, 1, 2, ...");
    while (history.size() < budget) {
        Rng rng(derive_seed(cfg.seed, history.size()));
        Trial t = run_trial(objective, suggest(history, space, cfg, rng), history.size());
        if (on_trial) on_trial(t);
        history.push_back(std::move(t));
    }
    return finish(std::move(history));
}

OptimizeResult random_search(const Objective& objective, const ParamSpace& space, std::size_t budget, std::uint64_t seed) {
    if (budget == 0) throw InvalidArgument("budget must be at least 1");
    std::vector<Trial> history;
    for (std::size_t t = 0; t < budget; ++t) {
        Rng rng(derive_seed(seed, t));
        history.push_back(run_trial(objective, sample_prior(space, rng), t));
    }
    return finish(std::move(history));
}

json trial_to_json(const Trial& t) {
    json a = json::object();
    for (const auto& [name, v] : t.assignment) std::visit([&, &n = name](const auto& x) { a[n] = x; }, v);
    json j = {{"id", t.id},
              {"assignment", a},
              {"objective", t.objective ? json(*t.objective) : json(nullptr)},
              {"status", t.status == TrialStatus::Complete ? "complete" : "failed"}};
    if (!t.error.empty()) j["error"] = t.error;
    return j;
}

Trial trial_from_json(const json& j, const ParamSpace& space) {
    Trial t;
    t.id = j.at("id").get<std::size_t>();
    const std::string status = j.at("status").get<std::string>();
    if (status != "complete" && status != "failed") throw InvalidArgument("unknown trial status " + status);
    t.status = status == "complete" ? TrialStatus::Complete : TrialStatus::Failed;
    if (!j.at("objective").is_null()) t.objective = j.at("objective").get<double>();
    if (t.status == TrialStatus::Complete && !t.objective) throw InvalidArgument("complete trial without objective");
    if (t.status == TrialStatus::Failed && t.objective) throw InvalidArgument("failed trial with an objective");
    if (j.contains("error")) t.error = j.at("error").get<std::string>();
    const json& a = j.at("assignment");
    for (const auto& d : space.dims) {
        if (!a.contains(d.name)) throw InvalidArgument("trial " + std::to_string(t.id) + " lacks " + d.name);
        const json& v = a.at(d.name);
        switch (d.kind) {
            case Dimension::Kind::Integer: t.assignment[d.name] = v.get<std::int64_t>(); break;
            case Dimension::Kind::Categorical: t.assignment[d.name] = v.get<std::string>(); break;
            default: t.assignment[d.name] = v.get<double>(); break;
        }
    }
    if (!within_space(t.assignment, space) || a.size() != space.dims.size())
        throw InvalidArgument("trial " + std::to_string(t.id) + " does not fit the search space");
    return t;
}

std::vector<Trial> read_history(const std::filesystem::path& path, const ParamSpace& space) {
    std::vector<Trial> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(trial_from_json(json::parse(line), space));
        } catch (const std::exception& e) {
            throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void append_trial(const std::filesystem::path& path, const Trial& t) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot append to " + path.string());
    out << trial_to_json(t).dump() << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

ParamSpace default_search_space(ModelFamily family) {
    switch (family) {
        case ModelFamily::CNN:
            return {{Dimension::categorical("conv1_filters", {"16", "32", "64", "128"}),
                     Dimension::categorical("conv1_kernel", {"3", "5", "7"}),
                     Dimension::categorical("conv2_filters", {"16", "32", "64"}),
                     Dimension::categorical("conv2_kernel", {"3", "5"}),
                     Dimension::categorical("dense_units", {"8", "16", "32", "64"}), Dimension::uniform("dropout", 0.0, 0.5)}};
        case ModelFamily::MLP:
            return {{Dimension::categorical("hidden_units", {"16", "32", "64", "128"}), Dimension::uniform("dropout", 0.0, 0.5)}};
        default: throw InvalidArgument("no search space for " + std::string(to_string(family)));
    }
}

ModelSpec spec_from_assignment(ModelFamily family, const Assignment& a, std::uint64_t seed) {
    if (!within_space(a, default_search_space(family))) throw InvalidArgument("assignment does not fit the search space");
    auto n = [&](const std::string& name) { return static_cast<std::size_t>(std::stoul(choice_param(a, name))); };
    ModelSpec s;
    s.family = family;
    s.seed = seed;
    if (family == ModelFamily::CNN)
        s.architecture = {LayerDesc::conv(n("conv1_filters"), n("conv1_kernel")),
                          LayerDesc::pool(),
                          LayerDesc::conv(n("conv2_filters"), n("conv2_kernel")),
                          LayerDesc::pool(),
                          LayerDesc::flatten(),
                          LayerDesc::dense(n("dense_units")),
                          LayerDesc::dropout(real_param(a, "dropout")),
                          LayerDesc::dense(2)};
    else
        s.architecture = {LayerDesc::flatten(), LayerDesc::dense(n("hidden_units")), LayerDesc::dropout(real_param(a, "dropout")),
                          LayerDesc::dense(2)};
    return s;
}

}  // namespace striatum
