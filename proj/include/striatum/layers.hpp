#pragma once

// Forward and reverse-mode kernels for the layer types used by the CNN and
// MLP classifiers. Images are (H, W, C) row-major; convolution is valid-mode
// cross-correlation with stride 1 and no padding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "striatum/rng.hpp"
#include "striatum/tensor.hpp"

namespace striatum {

enum class LayerKind { Conv2D, MaxPool2D, Dense, ReLU, Dropout, Flatten, SoftmaxCE };

std::string_view to_string(LayerKind kind);

enum class Mode { Train, Infer };

struct LayerParams {
    LayerKind kind = LayerKind::ReLU;
    Tensor weights;  // Conv2D: (out, in, kH, kW); Dense: (out, in)
    Tensor bias;     // length out
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t pool = 0;
    std::size_t stride = 0;
    double dropout_rate = 0.0;

    /// Zero-initialized parameter layers; use an initializer to fill them.
    static LayerParams conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
                              std::size_t kernel_w);
    static LayerParams dense(std::size_t in_units, std::size_t out_units);
    static LayerParams maxpool2d(std::size_t pool = 2, std::size_t stride = 2);
    static LayerParams relu();
    static LayerParams dropout(double rate);
    static LayerParams flatten();
    static LayerParams softmax_ce();

    bool has_parameters() const noexcept { return kind == LayerKind::Conv2D || kind == LayerKind::Dense; }
    std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }
    std::size_t in_channels() const { return weights.dim(1); }
    std::size_t out_channels() const { return weights.dim(0); }

    /// Throws InvalidArgument/ShapeError if the parameter tensors disagree with the kind.
    void validate() const;
};

// Convolution

Tensor conv2d_forward(const Tensor& input, const LayerParams& params);

struct ConvGrads {
    Tensor input;  // empty when not requested
    Tensor weights;
    Tensor bias;
};

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const LayerParams& params,
                          bool need_input_grad = true);

/// Output shape of a valid-mode convolution, or ShapeError.
Shape conv2d_output_shape(const Shape& input, const LayerParams& params);

// Max pooling

struct PoolResult {
    Tensor output;
    std::vector<std::uint32_t> argmax;  // flat input index chosen for each output element
};

/// Ties go to the first maximal element of the tile in row-major order.
PoolResult maxpool2d_forward(const Tensor& input, std::size_t pool = 2, std::size_t stride = 2);
Tensor maxpool2d_backward(const Tensor& grad_out, const Shape& input_shape, std::span<const std::uint32_t> argmax);
Shape maxpool2d_output_shape(const Shape& input, std::size_t pool = 2, std::size_t stride = 2);

/// Pooling that routes through a fixed argmax instead of recomputing it.
Tensor gather(const Tensor& input, const Shape& output_shape, std::span<const std::uint32_t> argmax);

// Dense

Tensor dense_forward(const Tensor& input, const LayerParams& params);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const LayerParams& params);

// ReLU: derivative at exactly 0 is 0.

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);
std::vector<std::uint8_t> relu_mask(const Tensor& input);
Tensor apply_mask(const Tensor& input, std::span<const std::uint8_t> mask);

// Dropout (inverted): survivors are scaled by 1/(1-rate) in training; inference is the identity.

struct DropoutResult {
    Tensor output;
    std::vector<double> scale;  // per element: 0 or 1/(1-rate); empty when the layer is the identity
};

DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng);
Tensor dropout_backward(const Tensor& grad_out, std::span<const double> scale);
Tensor apply_scale(const Tensor& input, std::span<const double> scale);

// Softmax cross-entropy head

struct LossAndGrad {
    double loss = 0.0;
    Tensor grad;
};

std::vector<double> softmax(std::span<const double> logits);
LossAndGrad softmax_ce(const Tensor& logits, std::size_t label);

}  // namespace striatum
