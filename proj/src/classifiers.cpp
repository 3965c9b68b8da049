#include "striatum/classifiers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "striatum/error.hpp"

namespace striatum {

std::string_view to_string(ModelFamily family) {
    switch (family) {
        case ModelFamily::CNN: return "cnn";
        case ModelFamily::MLP: return "mlp";
        case ModelFamily::LogReg: return "logreg";
        case ModelFamily::LinearSVM: return "svm";
    }
    return "?";
}

std::optional<ModelFamily> parse_family(std::string_view text) {
    std::string t(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "cnn") return ModelFamily::CNN;
    if (t == "mlp") return ModelFamily::MLP;
    if (t == "logreg" || t == "logistic") return ModelFamily::LogReg;
    if (t == "svm" || t == "linearsvm" || t == "linear_svm") return ModelFamily::LinearSVM;
    return std::nullopt;
}

ModelSpec ModelSpec::defaults(ModelFamily family, std::uint64_t seed) {
    ModelSpec s;
    s.family = family;
    s.seed = seed;
    switch (family) {
        case ModelFamily::CNN:
            s.architecture = {LayerDesc::conv(64, 5), LayerDesc::pool(),      LayerDesc::conv(32, 3),
                              LayerDesc::pool(),      LayerDesc::flatten(),   LayerDesc::dense(16),
                              LayerDesc::dropout(0.2), LayerDesc::dense(2)};
            break;
        case ModelFamily::MLP:
            s.architecture = {LayerDesc::flatten(), LayerDesc::dense(32), LayerDesc::dropout(0.4), LayerDesc::dense(2)};
            break;
        case ModelFamily::LogReg: s.reg_c = 1.0; break;
        case ModelFamily::LinearSVM: s.reg_c = 0.5; break;
    }
    return s;
}

TrainConfig TrainConfig::defaults(ModelFamily family) {
    TrainConfig c;
    if (family == ModelFamily::LogReg || family == ModelFamily::LinearSVM) {
        c.learning_rate = 1.0;
        c.max_epochs = 500;
        c.early_stop_patience = 0;
        c.validation_fraction = 0.0;
    }
    return c;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
    if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
    if (max_epochs == 0) throw InvalidArgument("max_epochs must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction <= 0.5))
        throw InvalidArgument("validation_fraction must be in [0, 0.5]");
}

// ---------------------------------------------------------------------------
// Network construction

Network build_network(const ModelSpec& spec, std::size_t rows, std::size_t cols) {
    if (spec.family != ModelFamily::CNN && spec.family != ModelFamily::MLP)
        throw InvalidArgument("build_network needs a CNN or MLP spec");
    if (spec.architecture.empty() || spec.architecture.back().kind != LayerDesc::Kind::Dense)
        throw InvalidArgument("architecture must end with the output Dense layer");
    if (spec.architecture.back().size != 2) throw InvalidArgument("output layer must have 2 units");

    std::size_t last_dense = 0;
    for (std::size_t i = 0; i < spec.architecture.size(); ++i)
        if (spec.architecture[i].kind == LayerDesc::Kind::Dense) last_dense = i;

    Network net;
    net.input_shape = {rows, cols, 1};
    Shape cur = net.input_shape;
    try {
        for (std::size_t i = 0; i < spec.architecture.size(); ++i) {
            const LayerDesc& d = spec.architecture[i];
            switch (d.kind) {
                case LayerDesc::Kind::Conv2D: {
                    if (cur.size() != 3) throw ShapeError("Conv2D after Flatten");
                    if (d.size == 0 || d.kernel == 0) throw InvalidArgument("Conv2D needs filters and kernel > 0");
                    auto layer = LayerParams::conv2d(cur[2], d.size, d.kernel, d.kernel);
                    cur = conv2d_output_shape(cur, layer);
                    net.layers.push_back(std::move(layer));
                    net.layers.push_back(LayerParams::relu());
                    break;
                }
                case LayerDesc::Kind::MaxPool2D:
                    cur = maxpool2d_output_shape(cur);
                    net.layers.push_back(LayerParams::maxpool2d());
                    break;
                case LayerDesc::Kind::Flatten:
                    cur = {shape_size(cur)};
                    net.layers.push_back(LayerParams::flatten());
                    break;
                case LayerDesc::Kind::Dense:
                    if (cur.size() != 1) throw ShapeError("Dense layer needs a Flatten before it");
                    if (d.size == 0) throw InvalidArgument("Dense needs units > 0");
                    net.layers.push_back(LayerParams::dense(cur[0], d.size));
                    cur = {d.size};
                    net.layers.push_back(i == last_dense ? LayerParams::softmax_ce() : LayerParams::relu());
                    break;
                case LayerDesc::Kind::Dropout: net.layers.push_back(LayerParams::dropout(d.rate)); break;
            }
        }
    } catch (const ShapeError& e) {
        throw ShapeError(std::string("architecture shape chain is inconsistent: ") + e.what());
    }
    validate(net);
    Rng rng(spec.seed);
    he_initialize(net, rng);
    return net;
}

Network build_cnn(const ModelSpec& spec, std::size_t rows, std::size_t cols) {
    if (spec.family != ModelFamily::CNN) throw InvalidArgument("build_cnn needs a CNN spec");
    return build_network(spec, rows, cols);
}

std::vector<Shape> layer_shape_chain(const Network& net) {
    const auto shapes = shape_trace(net);
    std::vector<Shape> chain;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerKind k = net.layers[i].kind;
        if (k == LayerKind::Conv2D || k == LayerKind::MaxPool2D || k == LayerKind::Flatten || k == LayerKind::Dense)
            chain.push_back(shapes[i]);
    }
    return chain;
}

std::size_t binary_target(ClassLabel label) {
    switch (label) {
        case ClassLabel::Normal: return 0;
        case ClassLabel::EarlyPD: return 1;
        case ClassLabel::SWEDD: break;
    }
    throw InvalidArgument("SWEDD samples are hold-out only and cannot be used for training");
}

// ---------------------------------------------------------------------------
// Shared helpers

double l1_prox(double w, double threshold) {
    if (threshold < 0.0) throw InvalidArgument("l1_prox threshold must be nonnegative");
    const double mag = std::abs(w) - threshold;
    if (mag <= 0.0) return 0.0;
    return w > 0.0 ? mag : -mag;
}

std::pair<double, double> hinge_loss(double margin, double y) {
    if (margin < 1.0) return {1.0 - margin, -y};
    return {0.0, 0.0};
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

Tensor image_tensor(const SliceImage& img) { return Tensor({img.rows, img.cols, 1}, img.pixels); }

struct CheckedData {
    std::vector<std::size_t> targets;  // parallel to indices
    PreprocTag preproc;
    std::size_t rows, cols;
};

CheckedData check_training_data(std::span<const LabeledSample> data, std::span<const std::size_t> indices) {
    if (indices.empty()) throw InvalidArgument("fit needs at least one sample");
    CheckedData c{{}, data[indices[0]].image.preproc, data[indices[0]].image.rows, data[indices[0]].image.cols};
    std::size_t counts[2] = {0, 0};
    for (std::size_t idx : indices) {
        if (idx >= data.size()) throw InvalidArgument("sample index out of range");
        const LabeledSample& s = data[idx];
        if (s.role == CohortRole::Holdout) throw InvalidArgument("hold-out sample " + s.image.source_id + " in training data");
        const std::size_t t = binary_target(s.label);
        if (s.image.preproc != c.preproc) throw InvalidArgument("training images mix preprocessing modes");
        if (s.image.rows != c.rows || s.image.cols != c.cols) throw InvalidArgument("training images differ in size");
        s.image.validate();
        ++counts[t];
        c.targets.push_back(t);
    }
    if (counts[0] == 0 || counts[1] == 0)
        throw InvalidArgument("fit needs both classes present (normal=" + std::to_string(counts[0]) +
                              ", pd=" + std::to_string(counts[1]) + ")");
    return c;
}

// ---------------------------------------------------------------------------
// Network training

struct OptimizerState {
    std::vector<std::vector<double>> m, v;
    std::size_t step = 0;
};

std::vector<Tensor*> parameter_tensors(Network& net) {
    std::vector<Tensor*> out;
    for (auto& l : net.layers)
        if (l.has_parameters()) {
            out.push_back(&l.weights);
            out.push_back(&l.bias);
        }
    return out;
}

std::vector<Tensor*> gradient_tensors(NetworkGrads& g, const Network& net) {
    std::vector<Tensor*> out;
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        if (net.layers[i].has_parameters()) {
            out.push_back(&g.layers[i].weights);
            out.push_back(&g.layers[i].bias);
        }
    return out;
}

void apply_update(Network& net, NetworkGrads& grads, const TrainConfig& cfg, OptimizerState& st) {
    auto params = parameter_tensors(net);
    auto gs = gradient_tensors(grads, net);
    if (st.m.empty()) {
        for (auto* p : params) {
            st.m.emplace_back(p->size(), 0.0);
            st.v.emplace_back(p->size(), 0.0);
        }
    }
    ++st.step;
    if (cfg.optimizer == Optimizer::SGD) {
        for (std::size_t t = 0; t < params.size(); ++t)
            for (std::size_t i = 0; i < params[t]->size(); ++i) (*params[t])[i] -= cfg.learning_rate * (*gs[t])[i];
        return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto& m = st.m[t];
        auto& v = st.v[t];
        Tensor& p = *params[t];
        const Tensor& g = *gs[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
}

void accumulate(NetworkGrads& acc, const NetworkGrads& g) {
    if (acc.layers.empty()) {
        acc.layers = g.layers;
        return;
    }
    for (std::size_t i = 0; i < acc.layers.size(); ++i) {
        auto& a = acc.layers[i];
        const auto& b = g.layers[i];
        for (std::size_t j = 0; j < a.weights.size(); ++j) a.weights[j] += b.weights[j];
        for (std::size_t j = 0; j < a.bias.size(); ++j) a.bias[j] += b.bias[j];
    }
}

void scale(NetworkGrads& acc, double s) {
    for (auto& l : acc.layers) {
        for (double& w : l.weights.values()) w *= s;
        for (double& b : l.bias.values()) b *= s;
    }
}

double mean_loss(const Network& net, const std::vector<Tensor>& inputs, const std::vector<std::size_t>& targets,
                 std::span<const std::size_t> which) {
    double total = 0.0;
    for (std::size_t k : which) total += forward(net, inputs[k], Mode::Infer, nullptr, targets[k]).head->loss;
    return total / static_cast<double>(which.size());
}

void fit_network(TrainedModel& model, const TrainConfig& cfg, std::span<const LabeledSample> data,
                 std::span<const std::size_t> indices, const CheckedData& checked) {
    model.network = build_network(model.spec, checked.rows, checked.cols);
    Network& net = model.network;

    std::vector<Tensor> inputs;
    inputs.reserve(indices.size());
    for (std::size_t idx : indices) inputs.push_back(image_tensor(data[idx].image));
    const std::vector<std::size_t>& targets = checked.targets;

    std::vector<std::size_t> order(indices.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> val;
    if (cfg.early_stop_patience > 0 && cfg.validation_fraction > 0.0) {
        Rng split(derive_seed(cfg.seed, 0x5a11));
        split.shuffle(std::span<std::size_t>(order));
        const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(order.size())));
        if (n_val > 0 && n_val < order.size()) {
            val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
            order.erase(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
        }
    }

    Rng rng(cfg.seed);
    OptimizerState opt;
    Network best = net;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            NetworkGrads acc;
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t s = order[k];
                const ForwardTrace t = forward(net, inputs[s], Mode::Train, &rng, targets[s]);
                if (!std::isfinite(t.head->loss))
                    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + " on sample " +
                                        data[indices[s]].image.source_id);
                epoch_loss += t.head->loss;
                accumulate(acc, backward(net, t));
            }
            scale(acc, 1.0 / static_cast<double>(end - start));
            apply_update(net, acc, cfg, opt);
        }
        model.meta.epochs_run = epoch + 1;
        model.meta.final_train_loss = epoch_loss / static_cast<double>(order.size());
        model.meta.loss_history.push_back(model.meta.final_train_loss);

        if (!val.empty()) {
            const double vl = mean_loss(net, inputs, targets, val);
            if (!std::isfinite(vl)) throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch + 1));
            if (vl < best_val) {
                best_val = vl;
                best = net;
                since_best = 0;
            } else if (++since_best >= cfg.early_stop_patience) {
                break;
            }
        }
    }
    if (!val.empty()) {
        net = std::move(best);
        model.meta.best_validation_loss = best_val;
    }
}

// ---------------------------------------------------------------------------
// Linear models

struct LinearProblem {
    RowMat x;               // centered features, n x d
    Eigen::VectorXd mean;   // feature means
    Eigen::VectorXd y;      // {0,1} for LogReg, {-1,+1} for SVM
    double lambda = 0.0;
    bool hinge = false;

    double objective(const Eigen::VectorXd& w, double b) const {
        const Eigen::VectorXd s = (x * w).array() + b;
        double loss = 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            loss += hinge ? std::max(0.0, 1.0 - y[i] * s[i]) : softplus(s[i]) - y[i] * s[i];
        return loss / static_cast<double>(s.size()) + lambda * w.lpNorm<1>();
    }

    // (Sub)gradient of the unregularized mean loss.
    void gradient(const Eigen::VectorXd& w, double b, Eigen::VectorXd& gw, double& gb) const {
        const Eigen::VectorXd s = (x * w).array() + b;
        Eigen::VectorXd r(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i)
            r[i] = hinge ? hinge_loss(y[i] * s[i], y[i]).second : sigmoid(s[i]) - y[i];
        const double n = static_cast<double>(s.size());
        gw.noalias() = x.transpose() * r / n;
        gb = r.sum() / n;
    }
};

void fit_linear(TrainedModel& model, const TrainConfig& cfg, std::span<const LabeledSample> data,
                std::span<const std::size_t> indices, const CheckedData& checked) {
    if (!(model.spec.reg_c > 0.0)) throw InvalidArgument("reg_c must be positive");
    const auto n = static_cast<Eigen::Index>(indices.size());
    const auto d = static_cast<Eigen::Index>(checked.rows * checked.cols);

    LinearProblem p;
    p.hinge = model.spec.family == ModelFamily::LinearSVM;
    p.x.resize(n, d);
    p.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& px = data[indices[static_cast<std::size_t>(i)]].image.pixels;
        p.x.row(i) = Eigen::Map<const Eigen::RowVectorXd>(px.data(), d);
        const double t = static_cast<double>(checked.targets[static_cast<std::size_t>(i)]);
        p.y[i] = p.hinge ? 2.0 * t - 1.0 : t;
    }
    p.mean = p.x.colwise().mean().transpose();
    p.x.rowwise() -= p.mean.transpose();
    p.lambda = 1.0 / (model.spec.reg_c * static_cast<double>(n));

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d), gw(d), w_next(d);
    double b = 0.0, gb = 0.0;
    double step = cfg.learning_rate;
    double f = p.objective(w, b);
    model.meta.loss_history.push_back(f);

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        p.gradient(w, b, gw, gb);
        bool accepted = false;
        double f_next = f, b_next = b;
        for (int tries = 0; tries < 60; ++tries) {
            for (Eigen::Index j = 0; j < d; ++j) w_next[j] = l1_prox(w[j] - step * gw[j], step * p.lambda);
            b_next = b - step * gb;
            f_next = p.objective(w_next, b_next);
            if (f_next <= f) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no non-increasing step left: stationary up to the step floor
        if (!std::isfinite(f_next)) throw TrainingError("non-finite objective at epoch " + std::to_string(epoch + 1));
        const double improvement = f - f_next;
        w.swap(w_next);
        b = b_next;
        f = f_next;
        step *= 1.5;
        model.meta.epochs_run = epoch + 1;
        model.meta.loss_history.push_back(f);
        if (improvement <= 1e-12 * std::max(1.0, f)) break;
    }

    model.weights.assign(w.data(), w.data() + d);
    model.intercept = b - w.dot(p.mean);  // undo centering
    model.meta.final_train_loss = f;
}

void check_image(const TrainedModel& model, const SliceImage& image) {
    if (image.rows != model.rows || image.cols != model.cols)
        throw InvalidArgument("image " + image.source_id + " is " + std::to_string(image.rows) + "x" +
                              std::to_string(image.cols) + ", model expects " + std::to_string(model.rows) + "x" +
                              std::to_string(model.cols));
    if (image.preproc != model.preproc)
        throw InvalidArgument("image " + image.source_id + " was preprocessed as " + std::string(to_string(image.preproc)) +
                              " but the model was trained on " + std::string(to_string(model.preproc)));
    image.validate();
}

}  // namespace

TrainedModel fit(const ModelSpec& spec, const TrainConfig& cfg, std::span<const LabeledSample> data) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return fit(spec, cfg, data, all);
}

TrainedModel fit(const ModelSpec& spec, const TrainConfig& cfg, std::span<const LabeledSample> data,
                 std::span<const std::size_t> indices) {
    cfg.validate();
    const CheckedData checked = check_training_data(data, indices);
    TrainedModel model;
    model.spec = spec;
    model.preproc = checked.preproc;
    model.rows = checked.rows;
    model.cols = checked.cols;
    if (model.is_network())
        fit_network(model, cfg, data, indices, checked);
    else
        fit_linear(model, cfg, data, indices, checked);
    return model;
}

double linear_objective(const TrainedModel& model, std::span<const LabeledSample> data,
                        std::span<const std::size_t> indices) {
    if (model.is_network()) throw InvalidArgument("linear_objective needs a linear model");
    const bool hinge = model.spec.family == ModelFamily::LinearSVM;
    double loss = 0.0;
    for (std::size_t idx : indices) {
        const auto& px = data[idx].image.pixels;
        const double s = std::inner_product(px.begin(), px.end(), model.weights.begin(), model.intercept);
        const double t = static_cast<double>(binary_target(data[idx].label));
        loss += hinge ? std::max(0.0, 1.0 - (2.0 * t - 1.0) * s) : softplus(s) - t * s;
    }
    double l1 = 0.0;
    for (double w : model.weights) l1 += std::abs(w);
    const double n = static_cast<double>(indices.size());
    return loss / n + l1 / (model.spec.reg_c * n);
}

double score(const TrainedModel& model, const SliceImage& image) {
    check_image(model, image);
    if (model.is_network()) {
        const Tensor logits = predict_logits(model.network, image_tensor(image));
        return softmax(logits.data())[1];
    }
    if (model.weights.size() != image.pixels.size()) throw InvalidArgument("model weight count does not match image");
    const double s = std::inner_product(image.pixels.begin(), image.pixels.end(), model.weights.begin(), model.intercept);
    return model.spec.family == ModelFamily::LogReg ? sigmoid(s) : s;
}

ClassLabel label_from_score(ModelFamily family, double s) {
    const double threshold = family == ModelFamily::LinearSVM ? 0.0 : 0.5;
    return s > threshold ? ClassLabel::EarlyPD : ClassLabel::Normal;
}

ClassLabel predict(const TrainedModel& model, const SliceImage& image) {
    return label_from_score(model.spec.family, score(model, image));
}

}  // namespace striatum
