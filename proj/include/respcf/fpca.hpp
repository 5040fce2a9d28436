#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "respcf/curves.hpp"

namespace respcf {

struct ScoreVector {
    std::vector<double> v;

    std::size_t size() const { return v.size(); }
};

// Functional PCA of an aligned curve ensemble on a shared uniform grid,
// implemented as weighted PCA with trapezoidal quadrature weights.
// Immutable after fit; projection and distance are pure.
struct FpcaModel {
    std::vector<double> mean_curve;             // length G
    std::vector<std::vector<double>> eigenfunctions;  // K vectors of length G
    std::vector<double> eigenvalues;            // descending, >= 0
    std::vector<double> explained_variance_ratio;  // one entry per kept component
    std::vector<double> quadrature_weights;     // length G
    std::size_t components = 0;                 // K
    double cumulative_explained = 0.0;          // ratio covered by the K components
    bool low_variance_warning = false;          // cumulative ratio < 0.995

    std::size_t grid_size() const { return mean_curve.size(); }

    void save(const std::string& path) const {
        nlohmann::json j;
        j["format"] = "respcf-fpca";
        j["version"] = 1;
        j["mean_curve"] = mean_curve;
        j["eigenfunctions"] = eigenfunctions;
        j["eigenvalues"] = eigenvalues;
        j["explained_variance_ratio"] = explained_variance_ratio;
        j["quadrature_weights"] = quadrature_weights;
        j["components"] = components;
        j["cumulative_explained"] = cumulative_explained;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write fpca file: " + path);
        out << j.dump(2) << '\n';
    }

    static FpcaModel load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open fpca file: " + path);
        nlohmann::json j;
        try {
            in >> j;
            if (j.at("format").get<std::string>() != "respcf-fpca")
                throw std::runtime_error("not an fpca file: " + path);
            FpcaModel model;
            model.mean_curve = j.at("mean_curve").get<std::vector<double>>();
            model.eigenfunctions = j.at("eigenfunctions").get<std::vector<std::vector<double>>>();
            model.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
            model.explained_variance_ratio =
                j.at("explained_variance_ratio").get<std::vector<double>>();
            model.quadrature_weights = j.at("quadrature_weights").get<std::vector<double>>();
            model.components = j.at("components").get<std::size_t>();
            model.cumulative_explained = j.at("cumulative_explained").get<double>();
            model.low_variance_warning = model.cumulative_explained < 0.995;
            return model;
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("corrupt fpca file " + path + ": " + e.what());
        }
    }
};

// Trapezoid rule weights for the given ascending grid.
inline std::vector<double> trapezoid_weights(const std::vector<double>& grid) {
    const std::size_t g = grid.size();
    if (g < 2) throw std::invalid_argument("trapezoid_weights: need at least two grid points");
    std::vector<double> w(g, 0.0);
    for (std::size_t i = 0; i + 1 < g; ++i) {
        const double h = grid[i + 1] - grid[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

namespace fpca {

// Mean-centered weighted PCA via SVD of the centered curve matrix.
// Keeps the top K components; explained-variance ratios come from the
// full spectrum.  Eigenfunction signs are fixed by making the
// largest-magnitude coefficient positive.
inline FpcaModel fit(const CurveSet& set, std::size_t components = 3) {
    const std::size_t n = set.curves.size();
    const std::size_t g = set.grid.size();
    if (components < 1) throw std::invalid_argument("fpca::fit: K must be >= 1");
    if (n < components)
        throw std::invalid_argument("fpca::fit: need at least K curves, got " +
                                    std::to_string(n));

    Eigen::MatrixXd curves(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(g));
    for (std::size_t j = 0; j < n; ++j) {
        const auto& values = set.curves[j].values;
        if (values.size() != g)
            throw std::invalid_argument("fpca::fit: curve length mismatch against grid");
        for (std::size_t i = 0; i < g; ++i) {
            if (!std::isfinite(values[i]))
                throw std::invalid_argument("fpca::fit: non-finite curve value");
            curves(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = values[i];
        }
    }

    FpcaModel model;
    model.components = components;
    model.quadrature_weights = trapezoid_weights(set.grid.values);

    const Eigen::RowVectorXd mean = curves.colwise().mean();
    model.mean_curve.assign(mean.data(), mean.data() + mean.size());

    Eigen::VectorXd sqrt_w(static_cast<Eigen::Index>(g));
    for (std::size_t i = 0; i < g; ++i)
        sqrt_w(static_cast<Eigen::Index>(i)) = std::sqrt(model.quadrature_weights[i]);

    Eigen::MatrixXd centered = curves.rowwise() - mean;
    centered = centered * sqrt_w.asDiagonal();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();

    const double total = sigma.squaredNorm();
    const double denom = (n > 1) ? static_cast<double>(n - 1) : 1.0;

    for (std::size_t k = 0; k < components; ++k) {
        const double sv = (static_cast<Eigen::Index>(k) < sigma.size())
                              ? sigma(static_cast<Eigen::Index>(k))
                              : 0.0;
        model.eigenvalues.push_back(sv * sv / denom);
        model.explained_variance_ratio.push_back(total > 0.0 ? sv * sv / total : 0.0);

        std::vector<double> xi(g, 0.0);
        if (static_cast<Eigen::Index>(k) < svd.matrixV().cols()) {
            for (std::size_t i = 0; i < g; ++i)
                xi[i] = svd.matrixV()(static_cast<Eigen::Index>(i),
                                      static_cast<Eigen::Index>(k)) /
                        sqrt_w(static_cast<Eigen::Index>(i));
            std::size_t arg = 0;
            for (std::size_t i = 1; i < g; ++i)
                if (std::abs(xi[i]) > std::abs(xi[arg])) arg = i;
            if (xi[arg] < 0.0)
                for (double& value : xi) value = -value;
        }
        model.eigenfunctions.push_back(std::move(xi));
    }

    for (const double r : model.explained_variance_ratio) model.cumulative_explained += r;
    model.low_variance_warning = model.cumulative_explained < 0.995;
    return model;
}

// v_k = <curve - mean, xi_k> under the quadrature-weighted inner product.
inline ScoreVector project(const FpcaModel& model, const ResponseCurve& curve) {
    if (curve.values.size() != model.grid_size())
        throw std::invalid_argument("fpca::project: curve length does not match model grid");
    ScoreVector scores;
    scores.v.resize(model.components, 0.0);
    for (std::size_t k = 0; k < model.components; ++k) {
        double acc = 0.0;
        const auto& xi = model.eigenfunctions[k];
        for (std::size_t i = 0; i < model.grid_size(); ++i)
            acc += model.quadrature_weights[i] * (curve.values[i] - model.mean_curve[i]) * xi[i];
        scores.v[k] = acc;
    }
    return scores;
}

// Euclidean distance between score vectors (the paper's d_s with K = 3).
inline double distance(const ScoreVector& a, const ScoreVector& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("fpca::distance: score dimension mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a.v[k] - b.v[k];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

}  // namespace fpca

}  // namespace respcf
