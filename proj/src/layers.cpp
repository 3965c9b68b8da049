#include "striatum/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "striatum/error.hpp"

namespace striatum {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// Scratch buffers reused across calls on the same thread.
thread_local AlignedVector tl_cols;
thread_local AlignedVector tl_wperm;

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

// Weights (out, in, kH, kW) -> (out, kH, kW, in), which matches the im2col column order.
void permute_weights_to_hwc(const LayerParams& p, AlignedVector& dst) {
    const std::size_t co = p.weights.dim(0), ci = p.weights.dim(1), kh = p.kernel_h, kw = p.kernel_w;
    dst.resize(co * kh * kw * ci);
    const double* w = p.weights.data().data();
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t i = 0; i < kh; ++i)
                for (std::size_t j = 0; j < kw; ++j)
                    dst[((o * kh + i) * kw + j) * ci + c] = w[((o * ci + c) * kh + i) * kw + j];
}

// Row p = (oh, ow) holds the kH x kW x C patch; each kernel row is one contiguous copy.
void im2col(const Tensor& input, std::size_t kh, std::size_t kw, AlignedVector& cols) {
    const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
    const std::size_t ho = h - kh + 1, wo = w - kw + 1;
    const std::size_t row_len = kw * c;
    const std::size_t k = kh * row_len;
    cols.resize(ho * wo * k);
    const double* src = input.data().data();
    double* dst = cols.data();
    for (std::size_t oh = 0; oh < ho; ++oh)
        for (std::size_t ow = 0; ow < wo; ++ow)
            for (std::size_t i = 0; i < kh; ++i, dst += row_len)
                std::memcpy(dst, src + ((oh + i) * w + ow) * c, row_len * sizeof(double));
}

void col2im_add(const double* cols, std::size_t kh, std::size_t kw, Tensor& grad_input) {
    const std::size_t h = grad_input.dim(0), w = grad_input.dim(1), c = grad_input.dim(2);
    const std::size_t ho = h - kh + 1, wo = w - kw + 1;
    const std::size_t row_len = kw * c;
    double* dst = grad_input.data().data();
    for (std::size_t oh = 0; oh < ho; ++oh)
        for (std::size_t ow = 0; ow < wo; ++ow)
            for (std::size_t i = 0; i < kh; ++i, cols += row_len) {
                double* d = dst + ((oh + i) * w + ow) * c;
                for (std::size_t t = 0; t < row_len; ++t) d[t] += cols[t];
            }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::MaxPool2D: return "MaxPool2D";
        case LayerKind::Dense: return "Dense";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::Dropout: return "Dropout";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::SoftmaxCE: return "SoftmaxCE";
    }
    return "?";
}

LayerParams LayerParams::conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
                                std::size_t kernel_w) {
    LayerParams p;
    p.kind = LayerKind::Conv2D;
    p.weights = Tensor({out_channels, in_channels, kernel_h, kernel_w});
    p.bias = Tensor({out_channels});
    p.kernel_h = kernel_h;
    p.kernel_w = kernel_w;
    p.stride = 1;
    return p;
}

LayerParams LayerParams::dense(std::size_t in_units, std::size_t out_units) {
    LayerParams p;
    p.kind = LayerKind::Dense;
    p.weights = Tensor({out_units, in_units});
    p.bias = Tensor({out_units});
    return p;
}

LayerParams LayerParams::maxpool2d(std::size_t pool, std::size_t stride) {
    LayerParams p;
    p.kind = LayerKind::MaxPool2D;
    p.pool = pool;
    p.stride = stride;
    return p;
}

LayerParams LayerParams::relu() { return LayerParams{}; }

LayerParams LayerParams::dropout(double rate) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw InvalidArgument("dropout rate must be in [0, 1), got " + std::to_string(rate));
    LayerParams p;
    p.kind = LayerKind::Dropout;
    p.dropout_rate = rate;
    return p;
}

LayerParams LayerParams::flatten() {
    LayerParams p;
    p.kind = LayerKind::Flatten;
    return p;
}

LayerParams LayerParams::softmax_ce() {
    LayerParams p;
    p.kind = LayerKind::SoftmaxCE;
    return p;
}

void LayerParams::validate() const {
    switch (kind) {
        case LayerKind::Conv2D:
            require(weights.rank() == 4 && weights.dim(2) == kernel_h && weights.dim(3) == kernel_w,
                    "Conv2D weights must be (out, in, kH, kW), got " + shape_to_string(weights.shape()));
            require(bias.rank() == 1 && bias.size() == weights.dim(0),
                    "Conv2D bias length must equal out_channels");
            break;
        case LayerKind::Dense:
            require(weights.rank() == 2, "Dense weights must be (out, in), got " + shape_to_string(weights.shape()));
            require(bias.rank() == 1 && bias.size() == weights.dim(0), "Dense bias length must equal out_units");
            break;
        case LayerKind::Dropout:
            if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
                throw InvalidArgument("dropout rate must be in [0, 1)");
            break;
        case LayerKind::MaxPool2D:
            if (pool == 0 || stride == 0) throw InvalidArgument("pool size and stride must be positive");
            break;
        default:
            break;
    }
}

Shape conv2d_output_shape(const Shape& input, const LayerParams& params) {
    require(input.size() == 3, "Conv2D expects an (H, W, C) input, got " + shape_to_string(input));
    require(params.kind == LayerKind::Conv2D, "layer is not Conv2D");
    require(input[2] == params.in_channels(),
            "Conv2D channel mismatch: input has " + std::to_string(input[2]) + " channels, filters expect " +
                std::to_string(params.in_channels()));
    require(input[0] >= params.kernel_h && input[1] >= params.kernel_w,
            "Conv2D kernel " + std::to_string(params.kernel_h) + "x" + std::to_string(params.kernel_w) +
                " larger than input " + shape_to_string(input));
    return {input[0] - params.kernel_h + 1, input[1] - params.kernel_w + 1, params.out_channels()};
}

Tensor conv2d_forward(const Tensor& input, const LayerParams& params) {
    const Shape out_shape = conv2d_output_shape(input.shape(), params);
    const std::size_t p = out_shape[0] * out_shape[1];
    const std::size_t co = out_shape[2];
    const std::size_t k = params.kernel_h * params.kernel_w * input.dim(2);

    im2col(input, params.kernel_h, params.kernel_w, tl_cols);
    permute_weights_to_hwc(params, tl_wperm);

    Tensor out(out_shape);
    Eigen::Map<const RowMat> cols(tl_cols.data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
    Eigen::Map<const RowMat> w(tl_wperm.data(), static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(k));
    Eigen::Map<const Eigen::RowVectorXd> b(params.bias.data().data(), static_cast<Eigen::Index>(co));
    Eigen::Map<RowMat> y(out.data().data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(co));
    y.noalias() = cols * w.transpose();
    y.rowwise() += b;
    return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const LayerParams& params,
                          bool need_input_grad) {
    const Shape out_shape = conv2d_output_shape(input.shape(), params);
    require(grad_out.shape() == out_shape, "Conv2D backward: grad shape " + shape_to_string(grad_out.shape()) +
                                               " != output shape " + shape_to_string(out_shape));
    const std::size_t p = out_shape[0] * out_shape[1];
    const std::size_t co = out_shape[2];
    const std::size_t ci = input.dim(2);
    const std::size_t kh = params.kernel_h, kw = params.kernel_w;
    const std::size_t k = kh * kw * ci;
    const auto ep = static_cast<Eigen::Index>(p), eco = static_cast<Eigen::Index>(co),
               ek = static_cast<Eigen::Index>(k);

    im2col(input, kh, kw, tl_cols);
    Eigen::Map<const RowMat> cols(tl_cols.data(), ep, ek);
    Eigen::Map<const RowMat> g(grad_out.data().data(), ep, eco);

    ConvGrads grads;
    grads.bias = Tensor({co});
    Eigen::Map<Eigen::RowVectorXd>(grads.bias.data().data(), eco) = g.colwise().sum();

    RowMat gw_hwc = g.transpose() * cols;  // (out, kH*kW*in)
    grads.weights = Tensor(params.weights.shape());
    double* gw = grads.weights.data().data();
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t i = 0; i < kh; ++i)
                for (std::size_t j = 0; j < kw; ++j)
                    gw[((o * ci + c) * kh + i) * kw + j] =
                        gw_hwc(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>((i * kw + j) * ci + c));

    if (need_input_grad) {
        permute_weights_to_hwc(params, tl_wperm);
        Eigen::Map<const RowMat> w(tl_wperm.data(), eco, ek);
        RowMat gcols = g * w;  // (P, K)
        grads.input = Tensor(input.shape());
        col2im_add(gcols.data(), kh, kw, grads.input);
    }
    return grads;
}

Shape maxpool2d_output_shape(const Shape& input, std::size_t pool, std::size_t stride) {
    require(input.size() == 3, "MaxPool2D expects an (H, W, C) input, got " + shape_to_string(input));
    require(pool > 0 && stride > 0, "MaxPool2D pool and stride must be positive");
    require(input[0] >= pool && input[1] >= pool,
            "MaxPool2D input " + shape_to_string(input) + " smaller than the pooling window");
    return {(input[0] - pool) / stride + 1, (input[1] - pool) / stride + 1, input[2]};
}

PoolResult maxpool2d_forward(const Tensor& input, std::size_t pool, std::size_t stride) {
    const Shape out_shape = maxpool2d_output_shape(input.shape(), pool, stride);
    if (input.size() > std::numeric_limits<std::uint32_t>::max()) throw ShapeError("MaxPool2D input too large");
    const std::size_t w = input.dim(1), c = input.dim(2);
    const std::size_t ho = out_shape[0], wo = out_shape[1];
    PoolResult r{Tensor(out_shape), std::vector<std::uint32_t>(ho * wo * c)};
    const double* x = input.data().data();
    std::size_t o = 0;
    for (std::size_t oh = 0; oh < ho; ++oh)
        for (std::size_t ow = 0; ow < wo; ++ow)
            for (std::size_t ch = 0; ch < c; ++ch, ++o) {
                std::size_t best = ((oh * stride) * w + ow * stride) * c + ch;
                double best_v = x[best];
                for (std::size_t i = 0; i < pool; ++i)
                    for (std::size_t j = 0; j < pool; ++j) {
                        const std::size_t idx = ((oh * stride + i) * w + ow * stride + j) * c + ch;
                        if (x[idx] > best_v) {
                            best_v = x[idx];
                            best = idx;
                        }
                    }
                r.output[o] = best_v;
                r.argmax[o] = static_cast<std::uint32_t>(best);
            }
    return r;
}

Tensor maxpool2d_backward(const Tensor& grad_out, const Shape& input_shape, std::span<const std::uint32_t> argmax) {
    require(grad_out.size() == argmax.size(), "MaxPool2D backward: grad has " + std::to_string(grad_out.size()) +
                                                  " elements, cache has " + std::to_string(argmax.size()));
    Tensor grad_in(input_shape);
    for (std::size_t o = 0; o < argmax.size(); ++o) {
        require(argmax[o] < grad_in.size(), "MaxPool2D backward: cached index out of range");
        grad_in[argmax[o]] += grad_out[o];
    }
    return grad_in;
}

Tensor gather(const Tensor& input, const Shape& output_shape, std::span<const std::uint32_t> argmax) {
    Tensor out(output_shape);
    require(out.size() == argmax.size(), "gather: index count does not match output shape");
    for (std::size_t o = 0; o < argmax.size(); ++o) out[o] = input[argmax[o]];
    return out;
}

Tensor dense_forward(const Tensor& input, const LayerParams& params) {
    require(params.kind == LayerKind::Dense, "layer is not Dense");
    const std::size_t out_units = params.weights.dim(0), in_units = params.weights.dim(1);
    require(input.rank() == 1 && input.size() == in_units,
            "Dense expects a vector of " + std::to_string(in_units) + " values, got " +
                shape_to_string(input.shape()));
    Tensor out({out_units});
    Eigen::Map<const RowMat> w(params.weights.data().data(), static_cast<Eigen::Index>(out_units),
                               static_cast<Eigen::Index>(in_units));
    Eigen::Map<const Vec> x(input.data().data(), static_cast<Eigen::Index>(in_units));
    Eigen::Map<const Vec> b(params.bias.data().data(), static_cast<Eigen::Index>(out_units));
    Eigen::Map<Vec>(out.data().data(), static_cast<Eigen::Index>(out_units)).noalias() = w * x + b;
    return out;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const LayerParams& params) {
    const std::size_t out_units = params.weights.dim(0), in_units = params.weights.dim(1);
    require(grad_out.rank() == 1 && grad_out.size() == out_units, "Dense backward: grad length mismatch");
    require(input.size() == in_units, "Dense backward: cached input length mismatch");
    const auto eo = static_cast<Eigen::Index>(out_units), ei = static_cast<Eigen::Index>(in_units);
    Eigen::Map<const RowMat> w(params.weights.data().data(), eo, ei);
    Eigen::Map<const Vec> x(input.data().data(), ei);
    Eigen::Map<const Vec> g(grad_out.data().data(), eo);

    DenseGrads grads{Tensor({in_units}), Tensor(params.weights.shape()), grad_out};
    Eigen::Map<Vec>(grads.input.data().data(), ei).noalias() = w.transpose() * g;
    Eigen::Map<RowMat>(grads.weights.data().data(), eo, ei).noalias() = g * x.transpose();
    return grads;
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
    require(grad_out.shape() == input.shape(), "ReLU backward: shape mismatch");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(input[i] > 0.0)) g[i] = 0.0;
    return g;
}

std::vector<std::uint8_t> relu_mask(const Tensor& input) {
    std::vector<std::uint8_t> mask(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) mask[i] = input[i] > 0.0 ? 1 : 0;
    return mask;
}

Tensor apply_mask(const Tensor& input, std::span<const std::uint8_t> mask) {
    require(mask.size() == input.size(), "mask length does not match tensor");
    Tensor out = input;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!mask[i]) out[i] = 0.0;
    return out;
}

DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw InvalidArgument("dropout rate must be in [0, 1), got " + std::to_string(rate));
    if (mode == Mode::Infer || rate == 0.0) return {input, {}};
    const double keep_scale = 1.0 / (1.0 - rate);
    DropoutResult r{Tensor(input.shape()), std::vector<double>(input.size())};
    for (std::size_t i = 0; i < input.size(); ++i) {
        r.scale[i] = rng.uniform() >= rate ? keep_scale : 0.0;
        r.output[i] = input[i] * r.scale[i];
    }
    return r;
}

Tensor apply_scale(const Tensor& input, std::span<const double> scale) {
    if (scale.empty()) return input;
    require(scale.size() == input.size(), "dropout scale length does not match tensor");
    Tensor out = input;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scale[i];
    return out;
}

Tensor dropout_backward(const Tensor& grad_out, std::span<const double> scale) { return apply_scale(grad_out, scale); }

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    if (p.empty()) return p;
    const double m = *std::max_element(p.begin(), p.end());
    double z = 0.0;
    for (double& v : p) {
        v = std::exp(v - m);
        z += v;
    }
    for (double& v : p) v /= z;
    return p;
}

LossAndGrad softmax_ce(const Tensor& logits, std::size_t label) {
    if (label >= logits.size())
        throw InvalidArgument("label " + std::to_string(label) + " out of range for " +
                              std::to_string(logits.size()) + " classes");
    const auto x = logits.data();
    const double m = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (double v : x) z += std::exp(v - m);
    const double log_z = m + std::log(z);

    LossAndGrad r{log_z - x[label], Tensor(logits.shape())};
    for (std::size_t i = 0; i < x.size(); ++i) r.grad[i] = std::exp(x[i] - log_z);
    r.grad[label] -= 1.0;
    return r;
}

}  // namespace striatum
