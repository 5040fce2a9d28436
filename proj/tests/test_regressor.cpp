#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "respcf/dataset.hpp"
#include "respcf/regressor.hpp"

using namespace respcf;
using Catch::Approx;

namespace {

Dataset linear_dataset(std::size_t count, std::uint64_t seed) {
    Dataset ds;
    ds.specs = {{"x", FeatureKind::numeric, 0.0, 1.0, {}}};
    Rng rng(seed);
    for (std::size_t j = 0; j < count; ++j) {
        const double x = rng.uniform();
        ds.samples.push_back({{x}, j});
        ds.targets.push_back(2.0 * x);
    }
    return ds;
}

RegressorConfig small_config() {
    RegressorConfig config;
    config.hidden_layers = {16};
    config.epochs = 300;
    config.batch_size = 16;
    config.learning_rate = 1e-2;
    config.seed = 5;
    return config;
}

}  // namespace

TEST_CASE("training fits a linear target", "[regressor]") {
    const Dataset train_set = linear_dataset(256, 1);
    const Dataset val_set = linear_dataset(64, 2);
    const auto [model, report] = train(train_set, val_set, small_config());

    REQUIRE(report.validation_mse < 1e-3);
    REQUIRE(report.epoch_mse.size() == 300);
    for (const double mse : report.epoch_mse) {
        REQUIRE(mse >= 0.0);
        REQUIRE(std::isfinite(mse));
    }
    REQUIRE(report.seconds >= 0.0);

    SECTION("training samples are predicted within the report's error scale") {
        const double bound = std::sqrt(2.0 * report.epoch_mse.back());
        std::size_t within = 0;
        for (std::size_t j = 0; j < train_set.size(); ++j)
            if (std::abs(model.predict(train_set.samples[j]) - train_set.targets[j]) <= bound)
                ++within;
        REQUIRE(within >= train_set.size() * 7 / 10);
    }
}

TEST_CASE("config validation", "[regressor]") {
    const Dataset ds = linear_dataset(16, 3);
    RegressorConfig config = small_config();
    SECTION("zero epochs rejected") {
        config.epochs = 0;
        REQUIRE_THROWS_AS(train(ds, ds, config), std::invalid_argument);
    }
    SECTION("non-positive learning rate rejected") {
        config.learning_rate = 0.0;
        REQUIRE_THROWS_AS(train(ds, ds, config), std::invalid_argument);
    }
    SECTION("zero-width layer rejected") {
        config.hidden_layers = {8, 0};
        REQUIRE_THROWS_AS(train(ds, ds, config), std::invalid_argument);
    }
    SECTION("feature count mismatch rejected") {
        const Dataset wide = generate_synthetic(16, 1);
        REQUIRE_THROWS_AS(train(ds, wide, config), std::invalid_argument);
    }
}

TEST_CASE("prediction is a pure function", "[regressor]") {
    const Dataset ds = linear_dataset(64, 7);
    RegressorConfig config = small_config();
    config.epochs = 20;
    const auto [model, report] = train(ds, ds, config);

    SECTION("identical samples give identical predictions") {
        const Sample s = ds.samples[5];
        REQUIRE(model.predict(s) == model.predict(s));
    }
    SECTION("batch prediction is consistent with pointwise prediction") {
        Eigen::MatrixXd x(2, 1);
        x << 0.25, 0.75;
        const Eigen::VectorXd batch = model.predict_batch(x);
        REQUIRE(batch(0) == Approx(model.predict({0.25})).margin(1e-12));
        REQUIRE(batch(1) == Approx(model.predict({0.75})).margin(1e-12));
    }
    SECTION("dimension mismatch is rejected") {
        REQUIRE_THROWS_AS(model.predict({0.1, 0.2}), std::invalid_argument);
    }
}

TEST_CASE("training is deterministic", "[regressor]") {
    const Dataset train_set = linear_dataset(64, 11);
    const Dataset val_set = linear_dataset(16, 12);
    RegressorConfig config = small_config();
    config.epochs = 25;
    const auto [model_a, report_a] = train(train_set, val_set, config);
    const auto [model_b, report_b] = train(train_set, val_set, config);
    REQUIRE(report_a.validation_mse == report_b.validation_mse);
    for (std::size_t l = 0; l < model_a.layers().size(); ++l) {
        REQUIRE(model_a.layers()[l].weights == model_b.layers()[l].weights);
        REQUIRE(model_a.layers()[l].bias == model_b.layers()[l].bias);
    }
}

TEST_CASE("divergent training raises an error", "[regressor]") {
    Dataset ds;
    ds.specs = {{"x", FeatureKind::numeric, 0.0, 1e300, {}}};
    for (std::size_t j = 0; j < 8; ++j) {
        ds.samples.push_back({{1e300}, j});
        ds.targets.push_back(0.0);
    }
    RegressorConfig config = small_config();
    config.epochs = 3;
    REQUIRE_THROWS_WITH(train(ds, ds, config),
                        Catch::Matchers::ContainsSubstring("learning rate"));
}

TEST_CASE("gradient check", "[regressor]") {
    SECTION("fresh random 2-4-1 net passes below 1e-4") {
        const TrainedModel model(2, {4}, Activation::relu, 17);
        const Sample sample{{0.3, -0.4}, 0};
        REQUIRE(gradient_check(model, sample) < 1e-4);
    }
    SECTION("tanh and sigmoid activations also pass") {
        for (const Activation act : {Activation::tanh, Activation::sigmoid}) {
            const TrainedModel model(3, {5, 4}, act, 23);
            const Sample sample{{0.1, 0.9, -0.2}, 0};
            REQUIRE(gradient_check(model, sample) < 1e-4);
        }
    }
    SECTION("zero-weight net with zero input exercises the bias path") {
        TrainedModel model(2, {4}, Activation::relu, 1);
        for (auto& layer : model.layers()) {
            layer.weights.setZero();
            layer.bias.setZero();
        }
        const Sample sample{{0.0, 0.0}, 0};
        REQUIRE(gradient_check(model, sample) < 1e-4);
    }
    SECTION("pre-activations near the relu kink are shifted before checking") {
        TrainedModel model(1, {2}, Activation::relu, 2);
        // craft z = w*x + b = 1e-6 at x = 1: the finite-difference stencil
        // would straddle the kink without the shift
        model.layers()[0].weights(0, 0) = 0.5;
        model.layers()[0].bias(0) = -0.5 + 1e-6;
        model.layers()[0].weights(0, 1) = -0.5;
        model.layers()[0].bias(1) = 0.5 - 1e-6;
        model.layers()[1].weights(0, 0) = 1.0;
        model.layers()[1].weights(1, 0) = 1.0;
        model.layers()[1].bias(0) = 0.0;
        const Sample sample{{1.0}, 0};
        REQUIRE(gradient_check(model, sample) < 1e-4);
    }
}

TEST_CASE("model persistence", "[regressor]") {
    const auto dir = std::filesystem::temp_directory_path();
    const Dataset ds = linear_dataset(64, 31);
    RegressorConfig config = small_config();
    config.epochs = 10;
    auto [model, report] = train(ds, ds, config);

    SECTION("round trip reproduces predictions bit-exactly") {
        const auto path = (dir / "respcf_model.json").string();
        NormalizationParams params;
        params.features.push_back({0.0, 1.0, false, false});
        model.normalization = params;
        model.save(path);
        const TrainedModel loaded = TrainedModel::load(path);
        Rng rng(3);
        for (int i = 0; i < 100; ++i) {
            const std::vector<double> x{rng.uniform()};
            REQUIRE(model.predict(x) == loaded.predict(x));
        }
        REQUIRE(loaded.normalization.has_value());
        REQUIRE(loaded.normalization->features.size() == 1);
        REQUIRE(loaded.activation() == model.activation());
    }
    SECTION("truncated file is reported as corrupt") {
        const auto path = (dir / "respcf_model_trunc.json").string();
        model.save(path);
        std::error_code ec;
        std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2, ec);
        REQUIRE_FALSE(ec);
        REQUIRE_THROWS_AS(TrainedModel::load(path), ModelIoError);
        REQUIRE_THROWS_WITH(TrainedModel::load(path),
                            Catch::Matchers::ContainsSubstring("corrupt"));
    }
    SECTION("version mismatch is rejected") {
        const auto path = (dir / "respcf_model_ver.json").string();
        model.save(path);
        std::ifstream in(path);
        nlohmann::json j;
        in >> j;
        in.close();
        j["version"] = 999;
        std::ofstream out(path);
        out << j.dump();
        out.close();
        REQUIRE_THROWS_WITH(TrainedModel::load(path),
                            Catch::Matchers::ContainsSubstring("version"));
    }
    SECTION("width mismatch surfaces at predict time") {
        const auto path = (dir / "respcf_model_width.json").string();
        model.save(path);
        const TrainedModel loaded = TrainedModel::load(path);
        REQUIRE_THROWS_AS(loaded.predict({0.1, 0.2, 0.3, 0.4, 0.5}), std::invalid_argument);
    }
}

TEST_CASE("medium synthetic training reaches a sane error", "[regressor][slow]") {
    const Dataset ds = generate_synthetic(2000, 77);
    const auto folds = kfold_split(ds, 5, 9);
    const Dataset train_raw = ds.subset(folds[0].train_indices);
    const Dataset val_raw = ds.subset(folds[0].validation_indices);

    Dataset train_obs = train_raw;
    train_obs.specs = infer_specs(train_obs);
    const auto [train_norm, params] = normalize(train_obs);
    const Dataset val_norm = apply_normalization(val_raw, params);

    RegressorConfig config;
    config.hidden_layers = {64, 64};
    config.epochs = 60;
    config.seed = 4;
    const auto [model, report] = train(train_norm, val_norm, config);
    INFO("validation mse " << report.validation_mse);
    // target variance is ~33, so anything near it means nothing was learned;
    // full-scale quality is covered by the acceptance suite
    REQUIRE(report.validation_mse < 1.0);
}
