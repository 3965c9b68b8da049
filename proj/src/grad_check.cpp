#include "striatum/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "striatum/error.hpp"

namespace striatum {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

namespace {

bool same_decisions(const ActivationPattern& a, const ActivationPattern& b) {
    return a.relu == b.relu && a.argmax == b.argmax;
}

}  // namespace

GradCheckResult grad_check(const Network& net, const Tensor& input, std::size_t label, const GradCheckOptions& options,
                           const GradientFn& analytic) {
    validate(net);
    if (!(options.eps > 0.0)) throw InvalidArgument("grad_check eps must be positive");

    Rng rng(options.seed);
    const ForwardTrace base = forward(net, input, options.mode, &rng, label);
    const NetworkGrads grads = analytic ? analytic(net, base) : backward(net, base, options.include_input);

    const std::size_t n_params = flat_parameter_count(net);
    std::vector<std::size_t> indices(n_params);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (options.max_params > 0 && options.max_params < n_params) {
        Rng pick(derive_seed(options.seed, 1));
        pick.shuffle(std::span<std::size_t>(indices));
        indices.resize(options.max_params);
        std::sort(indices.begin(), indices.end());
    }
    if (options.include_input) {
        if (grads.input.size() != input.size()) throw InvalidArgument("analytic gradient lacks an input gradient");
        std::vector<std::size_t> inputs(input.size());
        std::iota(inputs.begin(), inputs.end(), n_params);
        if (options.max_inputs > 0 && options.max_inputs < inputs.size()) {
            Rng pick(derive_seed(options.seed, 2));
            pick.shuffle(std::span<std::size_t>(inputs));
            inputs.resize(options.max_inputs);
            std::sort(inputs.begin(), inputs.end());
        }
        indices.insert(indices.end(), inputs.begin(), inputs.end());
    }

    // Probes keep the base dropout mask and recompute ReLU/pool decisions.
    ActivationPattern live;
    live.dropout_scale = base.pattern.dropout_scale;

    Network work = net;
    Tensor x = input;
    GradCheckResult result;

    for (std::size_t idx : indices) {
        double& slot = idx < n_params ? flat_parameter(work, idx) : x[idx - n_params];
        const double analytic_value = idx < n_params ? flat_gradient(grads, idx) : grads.input[idx - n_params];
        const double saved = slot;

        slot = saved + options.eps;
        const ForwardTrace plus = forward(work, x, Mode::Infer, nullptr, label, &live);
        slot = saved - options.eps;
        const ForwardTrace minus = forward(work, x, Mode::Infer, nullptr, label, &live);
        double numeric = (plus.head->loss - minus.head->loss) / (2.0 * options.eps);

        // A kink inside [-eps, +eps]: difference on the piece holding the base point.
        if (!same_decisions(plus.pattern, base.pattern) || !same_decisions(minus.pattern, base.pattern)) {
            ++result.pattern_changes;
            slot = saved + options.eps;
            const double lp = forward(work, x, Mode::Infer, nullptr, label, &base.pattern).head->loss;
            slot = saved - options.eps;
            const double lm = forward(work, x, Mode::Infer, nullptr, label, &base.pattern).head->loss;
            numeric = (lp - lm) / (2.0 * options.eps);
        }
        slot = saved;

        const double err = relative_error(analytic_value, numeric);
        if (result.checked == 0 || err > result.max_rel_error) {
            result.max_rel_error = err;
            result.worst_index = idx;
        }
        ++result.checked;
    }
    return result;
}

}  // namespace striatum
