#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "respcf/dataset.hpp"
#include "respcf/rng.hpp"

namespace respcf {

enum class Activation { relu, tanh, sigmoid };

inline std::string activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
    }
    throw std::logic_error("unknown activation");
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation: " + name);
}

struct RegressorConfig {
    std::vector<int> hidden_layers{100, 100};
    Activation activation = Activation::relu;
    int epochs = 200;
    int batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const {
        if (hidden_layers.empty()) throw std::invalid_argument("at least one hidden layer required");
        for (const int w : hidden_layers)
            if (w < 1) throw std::invalid_argument("hidden layer widths must be >= 1");
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    }
};

class ModelIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Fully-connected feedforward regressor.  Hidden layers share one
// activation; the output layer is linear.  Immutable after training, so
// prediction is safe to share across threads.
class TrainedModel {
public:
    struct Layer {
        Eigen::MatrixXd weights;   // fan_in x fan_out
        Eigen::RowVectorXd bias;   // 1 x fan_out
    };

    TrainedModel() = default;

    // Seeded uniform fan-in initialization: W ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
    TrainedModel(int input_dim, const std::vector<int>& hidden_layers, Activation activation,
                 std::uint64_t seed)
        : activation_(activation) {
        if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
        Rng rng(seed);
        int fan_in = input_dim;
        std::vector<int> widths = hidden_layers;
        widths.push_back(1);
        layers_.reserve(widths.size());
        for (const int fan_out : widths) {
            Layer layer;
            layer.weights.resize(fan_in, fan_out);
            const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                    layer.weights(r, c) = rng.uniform(-scale, scale);
            layer.bias = Eigen::RowVectorXd::Zero(fan_out);
            layers_.push_back(std::move(layer));
            fan_in = fan_out;
        }
    }

    int input_dim() const {
        return layers_.empty() ? 0 : static_cast<int>(layers_.front().weights.rows());
    }
    Activation activation() const { return activation_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    std::vector<int> hidden_widths() const {
        std::vector<int> widths;
        for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
            widths.push_back(static_cast<int>(layers_[l].weights.cols()));
        return widths;
    }

    bool finite() const {
        for (const Layer& layer : layers_)
            if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
        return true;
    }

    // One prediction per input row.
    Eigen::VectorXd predict_batch(const Eigen::MatrixXd& inputs) const {
        if (inputs.cols() != input_dim())
            throw std::invalid_argument("predict: expected " + std::to_string(input_dim()) +
                                        " features, got " + std::to_string(inputs.cols()));
        Eigen::MatrixXd a = inputs;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Eigen::MatrixXd z = (a * layers_[l].weights).rowwise() + layers_[l].bias;
            if (l + 1 < layers_.size()) apply_activation(z);
            a = std::move(z);
        }
        return a.col(0);
    }

    double predict(const std::vector<double>& features) const {
        Eigen::MatrixXd x(1, static_cast<Eigen::Index>(features.size()));
        for (std::size_t i = 0; i < features.size(); ++i)
            x(0, static_cast<Eigen::Index>(i)) = features[i];
        return predict_batch(x)(0);
    }

    double predict(const Sample& sample) const { return predict(sample.features); }

    void apply_activation(Eigen::MatrixXd& z) const {
        switch (activation_) {
            case Activation::relu:
                z = z.cwiseMax(0.0);
                break;
            case Activation::tanh:
                z = z.array().tanh().matrix();
                break;
            case Activation::sigmoid:
                z = (1.0 / (1.0 + (-z.array()).exp())).matrix();
                break;
        }
    }

    // Derivative of the activation given pre-activations z.
    Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& z) const {
        switch (activation_) {
            case Activation::relu:
                return (z.array() > 0.0).cast<double>().matrix();
            case Activation::tanh: {
                Eigen::ArrayXXd t = z.array().tanh();
                return (1.0 - t * t).matrix();
            }
            case Activation::sigmoid: {
                Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
                return (s * (1.0 - s)).matrix();
            }
        }
        throw std::logic_error("unknown activation");
    }

    void save(const std::string& path) const {
        nlohmann::json j;
        j["format"] = "respcf-model";
        j["version"] = kFormatVersion;
        j["input_dim"] = input_dim();
        j["hidden_layers"] = hidden_widths();
        j["activation"] = activation_name(activation_);
        nlohmann::json jl = nlohmann::json::array();
        for (const Layer& layer : layers_) {
            nlohmann::json entry;
            entry["rows"] = layer.weights.rows();
            entry["cols"] = layer.weights.cols();
            std::vector<double> w;
            w.reserve(static_cast<std::size_t>(layer.weights.size()));
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                    w.push_back(layer.weights(r, c));
            entry["weights"] = std::move(w);
            entry["bias"] = std::vector<double>(layer.bias.data(),
                                                layer.bias.data() + layer.bias.size());
            jl.push_back(std::move(entry));
        }
        j["layers"] = std::move(jl);
        if (normalization) {
            nlohmann::json jn = nlohmann::json::array();
            for (const auto& f : normalization->features)
                jn.push_back({{"min", f.min},
                              {"range", f.range},
                              {"constant", f.constant},
                              {"categorical", f.categorical}});
            j["normalization"] = std::move(jn);
        }
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ModelIoError("cannot write model file: " + path);
        out << j.dump(2) << '\n';
    }

    static TrainedModel load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ModelIoError("cannot open model file: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ModelIoError("corrupt model file " + path + ": " + e.what());
        }
        try {
            if (j.at("format").get<std::string>() != "respcf-model")
                throw ModelIoError("not a model file: " + path);
            if (j.at("version").get<int>() != kFormatVersion)
                throw ModelIoError("unsupported model file version " +
                                   std::to_string(j.at("version").get<int>()) + " in " + path);
            TrainedModel model;
            model.activation_ = activation_from_name(j.at("activation").get<std::string>());
            for (const auto& entry : j.at("layers")) {
                Layer layer;
                const auto rows = entry.at("rows").get<Eigen::Index>();
                const auto cols = entry.at("cols").get<Eigen::Index>();
                const auto w = entry.at("weights").get<std::vector<double>>();
                const auto b = entry.at("bias").get<std::vector<double>>();
                if (w.size() != static_cast<std::size_t>(rows * cols) ||
                    b.size() != static_cast<std::size_t>(cols))
                    throw ModelIoError("corrupt model file " + path + ": layer shape mismatch");
                layer.weights.resize(rows, cols);
                std::size_t k = 0;
                for (Eigen::Index r = 0; r < rows; ++r)
                    for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w[k++];
                layer.bias = Eigen::Map<const Eigen::RowVectorXd>(b.data(), cols);
                model.layers_.push_back(std::move(layer));
            }
            if (model.layers_.empty() || model.layers_.back().weights.cols() != 1)
                throw ModelIoError("corrupt model file " + path + ": bad architecture");
            if (j.contains("normalization")) {
                NormalizationParams params;
                for (const auto& f : j.at("normalization")) {
                    NormalizationParams::Feature feature;
                    feature.min = f.at("min").get<double>();
                    feature.range = f.at("range").get<double>();
                    feature.constant = f.at("constant").get<bool>();
                    feature.categorical = f.at("categorical").get<bool>();
                    params.features.push_back(feature);
                }
                model.normalization = std::move(params);
            }
            return model;
        } catch (const nlohmann::json::exception& e) {
            throw ModelIoError("corrupt model file " + path + ": " + e.what());
        }
    }

    std::optional<NormalizationParams> normalization;

    static constexpr int kFormatVersion = 1;

private:
    std::vector<Layer> layers_;
    Activation activation_ = Activation::relu;
};

struct TrainReport {
    std::vector<double> epoch_mse;  // training MSE per epoch
    double validation_mse = 0.0;
    double seconds = 0.0;
};

namespace detail {

inline Eigen::MatrixXd feature_matrix(const Dataset& ds) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(ds.size()),
                      static_cast<Eigen::Index>(ds.n_features()));
    for (std::size_t j = 0; j < ds.size(); ++j)
        for (std::size_t i = 0; i < ds.n_features(); ++i)
            x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                ds.samples[j].features[i];
    return x;
}

inline Eigen::VectorXd target_vector(const Dataset& ds) {
    return Eigen::Map<const Eigen::VectorXd>(ds.targets.data(),
                                             static_cast<Eigen::Index>(ds.targets.size()));
}

}  // namespace detail

// Mini-batch gradient descent on MSE with adaptive moment estimates.
// Deterministic for fixed (data, config, seed).
inline std::pair<TrainedModel, TrainReport> train(const Dataset& train_set,
                                                  const Dataset& val_set,
                                                  const RegressorConfig& config) {
    config.validate();
    if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
    if (val_set.size() == 0) throw std::invalid_argument("train: empty validation set");
    if (train_set.n_features() != val_set.n_features())
        throw std::invalid_argument("train: feature count mismatch between train and val sets");

    const auto t_start = std::chrono::steady_clock::now();

    const Eigen::MatrixXd features = detail::feature_matrix(train_set);
    const Eigen::VectorXd targets = detail::target_vector(train_set);
    const auto n_samples = features.rows();
    const auto n_layers = static_cast<std::size_t>(config.hidden_layers.size()) + 1;

    TrainedModel model(static_cast<int>(features.cols()), config.hidden_layers,
                       config.activation, config.seed);

    // Adam state
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::vector<Eigen::MatrixXd> m_w(n_layers), v_w(n_layers);
    std::vector<Eigen::RowVectorXd> m_b(n_layers), v_b(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& layer = model.layers()[l];
        m_w[l] = Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
        v_w[l] = m_w[l];
        m_b[l] = Eigen::RowVectorXd::Zero(layer.bias.size());
        v_b[l] = m_b[l];
    }

    Rng shuffle_rng(derive_seed(config.seed, 1));  // stream 1: batch shuffling
    TrainReport report;
    report.epoch_mse.reserve(static_cast<std::size_t>(config.epochs));

    std::vector<std::size_t> order(static_cast<std::size_t>(n_samples));
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<Eigen::MatrixXd> pre_activations(n_layers);   // z per layer
    std::vector<Eigen::MatrixXd> activations(n_layers + 1);   // a0 = batch input

    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double squared_error_sum = 0.0;
        for (Eigen::Index start = 0; start < n_samples;
             start += static_cast<Eigen::Index>(config.batch_size)) {
            const auto batch = std::min<Eigen::Index>(config.batch_size, n_samples - start);
            Eigen::MatrixXd x(batch, features.cols());
            Eigen::VectorXd y(batch);
            for (Eigen::Index r = 0; r < batch; ++r) {
                const auto src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(start + r)]);
                x.row(r) = features.row(src);
                y(r) = targets(src);
            }

            // forward
            activations[0] = std::move(x);
            for (std::size_t l = 0; l < n_layers; ++l) {
                pre_activations[l] =
                    (activations[l] * model.layers()[l].weights).rowwise() + model.layers()[l].bias;
                if (l + 1 < n_layers) {
                    activations[l + 1] = pre_activations[l];
                    model.apply_activation(activations[l + 1]);
                } else {
                    activations[l + 1] = pre_activations[l];
                }
            }

            const Eigen::VectorXd residual = activations[n_layers].col(0) - y;
            squared_error_sum += residual.squaredNorm();

            // backward: d(batch MSE)/d(output) = 2 r / batch
            Eigen::MatrixXd dz = (2.0 / static_cast<double>(batch)) * residual;
            ++step;
            const double bias_corr1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bias_corr2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t l = n_layers; l-- > 0;) {
                const Eigen::MatrixXd grad_w = activations[l].transpose() * dz;
                const Eigen::RowVectorXd grad_b = dz.colwise().sum();
                if (l > 0) {
                    Eigen::MatrixXd da = dz * model.layers()[l].weights.transpose();
                    dz = da.cwiseProduct(model.activation_derivative(pre_activations[l - 1]));
                }
                auto adam_update = [&](auto& param, auto& m, auto& v, const auto& grad) {
                    m = beta1 * m + (1.0 - beta1) * grad;
                    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
                    param.array() -= config.learning_rate * (m.array() / bias_corr1) /
                                     ((v.array() / bias_corr2).sqrt() + adam_eps);
                };
                adam_update(model.layers()[l].weights, m_w[l], v_w[l], grad_w);
                adam_update(model.layers()[l].bias, m_b[l], v_b[l], grad_b);
            }
        }
        const double epoch_mse = squared_error_sum / static_cast<double>(n_samples);
        if (!std::isfinite(epoch_mse))
            throw std::runtime_error(
                "training diverged (non-finite loss at epoch " + std::to_string(epoch + 1) +
                "); try a smaller learning rate");
        report.epoch_mse.push_back(epoch_mse);
    }

    const Eigen::VectorXd val_pred = model.predict_batch(detail::feature_matrix(val_set));
    report.validation_mse =
        (val_pred - detail::target_vector(val_set)).squaredNorm() / static_cast<double>(val_set.size());
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(model), std::move(report)};
}

namespace detail {

// Squared-error loss of one sample against a fixed target.
inline double sample_loss(const TrainedModel& model, const std::vector<double>& x, double target) {
    const double diff = model.predict(x) - target;
    return diff * diff;
}

}  // namespace detail

// Compares the analytic loss gradient with central finite differences
// (step 1e-5) over every weight and bias.  Returns the maximum relative
// error.  For relu nets, hidden pre-activations are first shifted away
// from the kink so the finite-difference stencil stays on one side.
inline double gradient_check(const TrainedModel& input_model, const Sample& sample,
                             double step = 1e-5) {
    if (!input_model.finite()) throw std::invalid_argument("gradient_check: non-finite model");
    TrainedModel model = input_model;
    const std::size_t n_layers = model.layers().size();

    if (model.activation() == Activation::relu) {
        constexpr double margin = 1e-3;
        Eigen::MatrixXd a(1, static_cast<Eigen::Index>(sample.features.size()));
        for (std::size_t i = 0; i < sample.features.size(); ++i)
            a(0, static_cast<Eigen::Index>(i)) = sample.features[i];
        for (std::size_t l = 0; l + 1 < n_layers; ++l) {
            Eigen::MatrixXd z = (a * model.layers()[l].weights).rowwise() + model.layers()[l].bias;
            for (Eigen::Index u = 0; u < z.cols(); ++u) {
                const double zu = z(0, u);
                if (std::abs(zu) < margin) {
                    const double shifted = (zu >= 0.0) ? margin : -margin;
                    model.layers()[l].bias(u) += shifted - zu;
                    z(0, u) = shifted;
                }
            }
            model.apply_activation(z);
            a = std::move(z);
        }
    }

    const double target = model.predict(sample.features) + 1.0;

    // analytic gradient (single-sample backprop)
    std::vector<Eigen::MatrixXd> pre(n_layers);
    std::vector<Eigen::MatrixXd> act(n_layers + 1);
    act[0].resize(1, static_cast<Eigen::Index>(sample.features.size()));
    for (std::size_t i = 0; i < sample.features.size(); ++i)
        act[0](0, static_cast<Eigen::Index>(i)) = sample.features[i];
    for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = (act[l] * model.layers()[l].weights).rowwise() + model.layers()[l].bias;
        act[l + 1] = pre[l];
        if (l + 1 < n_layers) model.apply_activation(act[l + 1]);
    }
    std::vector<Eigen::MatrixXd> grad_w(n_layers);
    std::vector<Eigen::RowVectorXd> grad_b(n_layers);
    Eigen::MatrixXd dz(1, 1);
    dz(0, 0) = 2.0 * (act[n_layers](0, 0) - target);
    for (std::size_t l = n_layers; l-- > 0;) {
        grad_w[l] = act[l].transpose() * dz;
        grad_b[l] = dz.colwise().sum();
        if (l > 0) {
            Eigen::MatrixXd da = dz * model.layers()[l].weights.transpose();
            dz = da.cwiseProduct(model.activation_derivative(pre[l - 1]));
        }
    }

    double max_rel_error = 0.0;
    auto check_param = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + step;
        const double loss_plus = detail::sample_loss(model, sample.features, target);
        param = saved - step;
        const double loss_minus = detail::sample_loss(model, sample.features, target);
        param = saved;
        const double numeric = (loss_plus - loss_minus) / (2.0 * step);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        max_rel_error = std::max(max_rel_error, std::abs(analytic - numeric) / denom);
    };
    for (std::size_t l = 0; l < n_layers; ++l) {
        auto& layer = model.layers()[l];
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                check_param(layer.weights(r, c), grad_w[l](r, c));
        for (Eigen::Index c = 0; c < layer.bias.size(); ++c)
            check_param(layer.bias(c), grad_b[l](c));
    }
    return max_rel_error;
}

}  // namespace respcf
