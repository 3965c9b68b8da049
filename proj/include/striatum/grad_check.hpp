#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "striatum/network.hpp"

namespace striatum {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;  // flat parameter index; input entries follow the parameters
    std::size_t checked = 0;
    /// Entries whose ±eps probe changed the activation pattern; their reference
    /// derivative was taken on the smooth piece containing the unperturbed point.
    std::size_t pattern_changes = 0;
};

struct GradCheckOptions {
    double eps = 1e-3;
    std::size_t max_params = 0;  // 0 = every parameter; otherwise a seeded sample without replacement
    std::uint64_t seed = 0;
    bool include_input = false;  // also check d loss / d input
    std::size_t max_inputs = 0;  // 0 = every input entry; otherwise a seeded sample
    Mode mode = Mode::Infer;     // Train exercises dropout with one fixed mask
};

/// Analytic gradients to be checked; defaults to `backward`.
using GradientFn = std::function<NetworkGrads(const Network&, const ForwardTrace&)>;

/// Central-difference check of every (or a sample of) parameter derivative.
/// Relative error uses the denominator max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const Network& net, const Tensor& input, std::size_t label,
                           const GradCheckOptions& options = {}, const GradientFn& analytic = {});

double relative_error(double analytic, double numeric);

}  // namespace striatum
