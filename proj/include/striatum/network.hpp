#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "striatum/layers.hpp"
#include "striatum/rng.hpp"
#include "striatum/tensor.hpp"

namespace striatum {

/// A feed-forward stack of layers ending in a SoftmaxCE head.
struct Network {
    Shape input_shape;
    std::vector<LayerParams> layers;

    std::size_t parameter_count() const;
};

/// Output shape after every layer (the SoftmaxCE head reports the logits shape).
/// Throws ShapeError when the stack does not compose for `input_shape`.
std::vector<Shape> shape_trace(const Network& net);

/// Validate layer parameters and shape composition.
void validate(const Network& net);

/// He-normal weights (sd = sqrt(2 / fan_in)) and zero biases for every parameter layer.
void he_initialize(Network& net, Rng& rng);

/// The data-dependent choices a forward pass makes: ReLU on/off, pooling argmax,
/// dropout scale. Re-using a pattern evaluates the smooth piece of the network
/// that contains the pattern's originating point.
struct ActivationPattern {
    std::vector<std::vector<std::uint8_t>> relu;      // indexed by layer
    std::vector<std::vector<std::uint32_t>> argmax;   // indexed by layer
    std::vector<std::vector<double>> dropout_scale;   // indexed by layer

    friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;
};

struct ForwardTrace {
    std::vector<Tensor> inputs;  // input of each layer
    ActivationPattern pattern;
    Tensor logits;
    std::optional<LossAndGrad> head;  // present when a label was given
};

/// Run the network. `rng` is required only in Train mode with active dropout.
/// Non-empty entries of `frozen` replace the decisions the inputs would induce;
/// empty entries are computed as usual.
ForwardTrace forward(const Network& net, const Tensor& input, Mode mode, Rng* rng,
                     std::optional<std::size_t> label = std::nullopt, const ActivationPattern* frozen = nullptr);

/// Per-layer parameter gradients; empty tensors for parameterless layers.
struct LayerGrads {
    Tensor weights;
    Tensor bias;
};

struct NetworkGrads {
    std::vector<LayerGrads> layers;
    Tensor input;  // filled when requested
};

/// Reverse pass over a trace produced with a label.
NetworkGrads backward(const Network& net, const ForwardTrace& trace, bool need_input_grad = false);

/// Logits in inference mode.
Tensor predict_logits(const Network& net, const Tensor& input);

/// Flat views over all parameters: layer by layer, weights then bias.
std::size_t flat_parameter_count(const Network& net);
double& flat_parameter(Network& net, std::size_t index);
double flat_gradient(const NetworkGrads& grads, std::size_t index);

}  // namespace striatum
