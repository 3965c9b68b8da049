#pragma once

// Tree-structured Parzen Estimator over mixed spaces. Objectives are minimized.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "striatum/classifiers.hpp"
#include "striatum/rng.hpp"

namespace striatum {

struct Dimension {
    enum class Kind { Uniform, LogUniform, Integer, Categorical };
    std::string name;
    Kind kind = Kind::Uniform;
    double lo = 0.0, hi = 1.0;
    std::vector<std::string> choices;

    static Dimension uniform(std::string name, double lo, double hi) { return {std::move(name), Kind::Uniform, lo, hi, {}}; }
    static Dimension log_uniform(std::string name, double lo, double hi) { return {std::move(name), Kind::LogUniform, lo, hi, {}}; }
    static Dimension integer(std::string name, std::int64_t lo, std::int64_t hi) {
        return {std::move(name), Kind::Integer, static_cast<double>(lo), static_cast<double>(hi), {}};
    }
    static Dimension categorical(std::string name, std::vector<std::string> choices) {
        return {std::move(name), Kind::Categorical, 0.0, 0.0, std::move(choices)};
    }
};

struct ParamSpace {
    std::vector<Dimension> dims;
    void validate() const;
};

using ParamValue = std::variant<double, std::int64_t, std::string>;
using Assignment = std::map<std::string, ParamValue>;

double real_param(const Assignment& a, const std::string& name);
std::int64_t int_param(const Assignment& a, const std::string& name);
const std::string& choice_param(const Assignment& a, const std::string& name);

/// True when `a` has exactly the dimensions of `space`, each in bounds.
bool within_space(const Assignment& a, const ParamSpace& space);

enum class TrialStatus { Complete, Failed };

struct Trial {
    std::size_t id = 0;
    Assignment assignment;
    std::optional<double> objective;  // empty for failed trials
    TrialStatus status = TrialStatus::Complete;
    std::string error;
};

struct TpeConfig {
    std::size_t n_startup = 10;
    double gamma = 0.25;
    std::size_t n_candidates = 24;
    std::uint64_t seed = 0;
    void validate() const;
};

/// max(1, ceil(gamma * completed)).
std::size_t good_set_size(std::size_t completed, double gamma);

/// One draw from the prior (uniform in the internal scale of each dimension).
Assignment sample_prior(const ParamSpace& space, Rng& rng);

/// Prior sample while fewer than n_startup trials completed; afterwards the
/// candidate from the good-set density maximizing sum_d log l(x_d) - log g(x_d).
Assignment suggest(const std::vector<Trial>& history, const ParamSpace& space, const TpeConfig& cfg, Rng& rng);

using Objective = std::function<double(const Assignment&)>;
using TrialCallback = std::function<void(const Trial&)>;

struct OptimizeResult {
    Trial best;
    std::vector<Trial> history;
};

/// Continues `history` until it holds `budget` trials. Trial t draws from
/// Rng(derive_seed(cfg.seed, t)), so a resumed search matches an uninterrupted one.
/// A throwing objective yields a failed trial; if none completes, throws.
OptimizeResult optimize(const Objective& objective, const ParamSpace& space, std::size_t budget, const TpeConfig& cfg,
                        std::vector<Trial> history = {}, const TrialCallback& on_trial = {});

/// Prior sampling only, with the same per-trial seeding as optimize.
OptimizeResult random_search(const Objective& objective, const ParamSpace& space, std::size_t budget, std::uint64_t seed);

nlohmann::json trial_to_json(const Trial& t);
Trial trial_from_json(const nlohmann::json& j, const ParamSpace& space);

/// One JSON object per line. Blank lines are skipped.
std::vector<Trial> read_history(const std::filesystem::path& path, const ParamSpace& space);
void append_trial(const std::filesystem::path& path, const Trial& t);

/// CNN: conv1_filters, conv1_kernel, conv2_filters, conv2_kernel, dense_units, dropout.
/// MLP: hidden_units, dropout.
ParamSpace default_search_space(ModelFamily family);

/// Architecture for an assignment from default_search_space(family).
ModelSpec spec_from_assignment(ModelFamily family, const Assignment& a, std::uint64_t seed = 0);

}  // namespace striatum
