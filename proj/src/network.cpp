#include "striatum/network.hpp"

#include <cmath>
#include <string>

#include "striatum/error.hpp"

namespace striatum {

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
}

std::vector<Shape> shape_trace(const Network& net) {
    std::vector<Shape> shapes;
    Shape cur = net.input_shape;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerParams& l = net.layers[i];
        switch (l.kind) {
            case LayerKind::Conv2D: cur = conv2d_output_shape(cur, l); break;
            case LayerKind::MaxPool2D: cur = maxpool2d_output_shape(cur, l.pool, l.stride); break;
            case LayerKind::Dense:
                if (cur.size() != 1 || cur[0] != l.weights.dim(1))
                    throw ShapeError("layer " + std::to_string(i) + " Dense expects (" +
                                     std::to_string(l.weights.dim(1)) + "), got " + shape_to_string(cur));
                cur = {l.weights.dim(0)};
                break;
            case LayerKind::Flatten: cur = {shape_size(cur)}; break;
            case LayerKind::SoftmaxCE:
                if (cur.size() != 1 || i + 1 != net.layers.size())
                    throw ShapeError("SoftmaxCE must be the last layer and follow a vector");
                break;
            case LayerKind::ReLU:
            case LayerKind::Dropout: break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

void validate(const Network& net) {
    if (net.layers.empty() || net.layers.back().kind != LayerKind::SoftmaxCE)
        throw InvalidArgument("network must end in a SoftmaxCE head");
    for (const auto& l : net.layers) l.validate();
    (void)shape_trace(net);
}

void he_initialize(Network& net, Rng& rng) {
    for (auto& l : net.layers) {
        if (!l.has_parameters()) continue;
        const std::size_t fan_in = l.weights.size() / l.weights.dim(0);
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (double& w : l.weights.values()) w = rng.normal(0.0, sd);
        l.bias.fill(0.0);
    }
}

namespace {

template <typename Member>
bool overrides(const ActivationPattern* frozen, Member member, std::size_t layer) {
    return frozen && layer < (frozen->*member).size() && !(frozen->*member)[layer].empty();
}

}  // namespace

ForwardTrace forward(const Network& net, const Tensor& input, Mode mode, Rng* rng, std::optional<std::size_t> label,
                     const ActivationPattern* frozen) {
    if (input.shape() != net.input_shape)
        throw ShapeError("network expects input " + shape_to_string(net.input_shape) + ", got " +
                         shape_to_string(input.shape()));
    const std::size_t n = net.layers.size();
    ForwardTrace t;
    t.inputs.reserve(n);
    t.pattern.relu.resize(n);
    t.pattern.argmax.resize(n);
    t.pattern.dropout_scale.resize(n);

    Tensor cur = input;
    for (std::size_t i = 0; i < n; ++i) {
        const LayerParams& l = net.layers[i];
        t.inputs.push_back(cur);
        switch (l.kind) {
            case LayerKind::Conv2D: cur = conv2d_forward(cur, l); break;
            case LayerKind::Dense: cur = dense_forward(cur, l); break;
            case LayerKind::Flatten: cur = cur.reshaped({cur.size()}); break;
            case LayerKind::ReLU:
                t.pattern.relu[i] = overrides(frozen, &ActivationPattern::relu, i) ? frozen->relu[i] : relu_mask(cur);
                cur = apply_mask(cur, t.pattern.relu[i]);
                break;
            case LayerKind::MaxPool2D:
                if (overrides(frozen, &ActivationPattern::argmax, i)) {
                    t.pattern.argmax[i] = frozen->argmax[i];
                    cur = gather(cur, maxpool2d_output_shape(cur.shape(), l.pool, l.stride), t.pattern.argmax[i]);
                } else {
                    auto r = maxpool2d_forward(cur, l.pool, l.stride);
                    t.pattern.argmax[i] = std::move(r.argmax);
                    cur = std::move(r.output);
                }
                break;
            case LayerKind::Dropout:
                if (overrides(frozen, &ActivationPattern::dropout_scale, i)) {
                    t.pattern.dropout_scale[i] = frozen->dropout_scale[i];
                    cur = apply_scale(cur, t.pattern.dropout_scale[i]);
                } else if (mode == Mode::Train && l.dropout_rate > 0.0) {
                    if (!rng) throw InvalidArgument("training-mode dropout needs an Rng");
                    auto r = dropout(cur, l.dropout_rate, mode, *rng);
                    t.pattern.dropout_scale[i] = std::move(r.scale);
                    cur = std::move(r.output);
                }
                break;
            case LayerKind::SoftmaxCE:
                t.logits = cur;
                if (label) t.head = softmax_ce(cur, *label);
                break;
        }
    }
    if (t.logits.empty()) throw InvalidArgument("network must end in a SoftmaxCE head");
    return t;
}

NetworkGrads backward(const Network& net, const ForwardTrace& trace, bool need_input_grad) {
    if (!trace.head) throw InvalidArgument("backward needs a forward trace computed with a label");
    const std::size_t n = net.layers.size();
    NetworkGrads grads;
    grads.layers.resize(n);

    // The first parameter layer's input gradient is only needed on request.
    std::size_t first_param = n;
    for (std::size_t i = 0; i < n; ++i)
        if (net.layers[i].has_parameters()) {
            first_param = i;
            break;
        }

    Tensor g = trace.head->grad;
    for (std::size_t i = n - 1; i-- > 0;) {
        const LayerParams& l = net.layers[i];
        const Tensor& x = trace.inputs[i];
        const bool need_in = need_input_grad || i > first_param;
        switch (l.kind) {
            case LayerKind::Conv2D: {
                auto cg = conv2d_backward(g, x, l, need_in);
                grads.layers[i] = {std::move(cg.weights), std::move(cg.bias)};
                g = std::move(cg.input);
                break;
            }
            case LayerKind::Dense: {
                auto dg = dense_backward(g, x, l);
                grads.layers[i] = {std::move(dg.weights), std::move(dg.bias)};
                g = std::move(dg.input);
                break;
            }
            case LayerKind::Flatten: g = g.reshaped(x.shape()); break;
            case LayerKind::ReLU: g = apply_mask(g, trace.pattern.relu[i]); break;
            case LayerKind::MaxPool2D: g = maxpool2d_backward(g, x.shape(), trace.pattern.argmax[i]); break;
            case LayerKind::Dropout: g = dropout_backward(g, trace.pattern.dropout_scale[i]); break;
            case LayerKind::SoftmaxCE: break;
        }
        if (g.empty() && i > 0 && !need_in) break;
    }
    if (need_input_grad) grads.input = std::move(g);
    return grads;
}

Tensor predict_logits(const Network& net, const Tensor& input) {
    return forward(net, input, Mode::Infer, nullptr).logits;
}

std::size_t flat_parameter_count(const Network& net) { return net.parameter_count(); }

double& flat_parameter(Network& net, std::size_t index) {
    for (auto& l : net.layers) {
        if (index < l.weights.size()) return l.weights[index];
        index -= l.weights.size();
        if (index < l.bias.size()) return l.bias[index];
        index -= l.bias.size();
    }
    throw InvalidArgument("flat parameter index out of range");
}

double flat_gradient(const NetworkGrads& grads, std::size_t index) {
    for (const auto& l : grads.layers) {
        if (index < l.weights.size()) return l.weights[index];
        index -= l.weights.size();
        if (index < l.bias.size()) return l.bias[index];
        index -= l.bias.size();
    }
    throw InvalidArgument("flat gradient index out of range");
}

}  // namespace striatum
