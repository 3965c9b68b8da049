#pragma once

// The four slice classifiers behind one fit / score / predict contract.
//
// CNN and MLP are trained by minibatch gradient descent on softmax
// cross-entropy. The L1-regularized logistic regression and linear SVM are
// trained full-batch by proximal (sub)gradient descent on
//
//     mean_i loss(y_i, w.x_i + b) + lambda * |w|_1,   lambda = 1 / (reg_c * n)
//
// with the intercept unpenalized. Each accepted step is required not to
// increase the objective, so the objective is monotone across epochs.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "striatum/image.hpp"
#include "striatum/network.hpp"

namespace striatum {

enum class ModelFamily { CNN, MLP, LogReg, LinearSVM };

std::string_view to_string(ModelFamily family);
std::optional<ModelFamily> parse_family(std::string_view text);

/// One entry of a CNN/MLP architecture. Hidden Dense layers are followed by
/// ReLU, convolutions by ReLU; the final Dense feeds the softmax head.
struct LayerDesc {
    enum class Kind { Conv2D, MaxPool2D, Flatten, Dense, Dropout };
    Kind kind = Kind::Dense;
    std::size_t size = 0;    // filters (Conv2D) or units (Dense)
    std::size_t kernel = 0;  // square kernel extent (Conv2D)
    double rate = 0.0;       // Dropout

    static LayerDesc conv(std::size_t filters, std::size_t kernel) { return {Kind::Conv2D, filters, kernel, 0.0}; }
    static LayerDesc pool() { return {Kind::MaxPool2D, 0, 0, 0.0}; }
    static LayerDesc flatten() { return {Kind::Flatten, 0, 0, 0.0}; }
    static LayerDesc dense(std::size_t units) { return {Kind::Dense, units, 0, 0.0}; }
    static LayerDesc dropout(double rate) { return {Kind::Dropout, 0, 0, rate}; }

    friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

struct ModelSpec {
    ModelFamily family = ModelFamily::CNN;
    std::vector<LayerDesc> architecture;  // CNN / MLP
    double reg_c = 1.0;                   // LogReg / LinearSVM
    std::uint64_t seed = 0;

    /// CNN: conv 5x5x64, pool, conv 3x3x32, pool, flatten, dense 16, dropout 0.2, dense 2.
    /// MLP: flatten, dense 32, dropout 0.4, dense 2. LogReg reg_c 1.0, LinearSVM reg_c 0.5.
    static ModelSpec defaults(ModelFamily family, std::uint64_t seed = 0);

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

enum class Optimizer { Adam, SGD };

struct TrainConfig {
    Optimizer optimizer = Optimizer::Adam;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t early_stop_patience = 10;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;

    /// Network defaults above; linear models use learning_rate as the initial
    /// step of the backtracking search and max_epochs as the iteration cap.
    static TrainConfig defaults(ModelFamily family);
    void validate() const;
};

struct TrainMeta {
    std::size_t epochs_run = 0;
    double final_train_loss = 0.0;
    double best_validation_loss = 0.0;  // 0 when no validation split was used
    std::vector<double> loss_history;   // mean training loss (networks) or objective (linear) per epoch
};

struct TrainedModel {
    ModelSpec spec;
    PreprocTag preproc = PreprocTag::SingleSlice;
    std::size_t rows = kSliceRows;
    std::size_t cols = kSliceCols;
    Network network;              // CNN / MLP
    std::vector<double> weights;  // LogReg / LinearSVM, one per pixel
    double intercept = 0.0;
    TrainMeta meta;

    bool is_network() const noexcept {
        return spec.family == ModelFamily::CNN || spec.family == ModelFamily::MLP;
    }
};

/// Network for a (rows, cols, 1) input with He-normal weights drawn from spec.seed.
Network build_network(const ModelSpec& spec, std::size_t rows = kSliceRows, std::size_t cols = kSliceCols);
Network build_cnn(const ModelSpec& spec, std::size_t rows = kSliceRows, std::size_t cols = kSliceCols);

/// Output shape after each Conv2D, MaxPool2D, Flatten and Dense layer.
std::vector<Shape> layer_shape_chain(const Network& net);

/// Binary target used in training: EarlyPD = 1, Normal = 0. SWEDD is rejected.
std::size_t binary_target(ClassLabel label);

TrainedModel fit(const ModelSpec& spec, const TrainConfig& cfg, std::span<const LabeledSample> data);
TrainedModel fit(const ModelSpec& spec, const TrainConfig& cfg, std::span<const LabeledSample> data,
                 std::span<const std::size_t> indices);

/// Positive-class probability (CNN, MLP, LogReg) or signed margin (LinearSVM).
double score(const TrainedModel& model, const SliceImage& image);

/// Probability scores threshold at 0.5, margins at 0; ties go to Normal.
ClassLabel predict(const TrainedModel& model, const SliceImage& image);
ClassLabel label_from_score(ModelFamily family, double score);

/// sign(w) * max(|w| - threshold, 0).
double l1_prox(double w, double threshold);

/// Hinge loss at margin y*s, and its derivative with respect to s; kink at 1 takes 0.
std::pair<double, double> hinge_loss(double margin, double y);

/// Regularized objective of a linear model on the given samples, as minimized by fit.
double linear_objective(const TrainedModel& model, std::span<const LabeledSample> data,
                        std::span<const std::size_t> indices);

}  // namespace striatum
