#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <concepts>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "respcf/dataset.hpp"

namespace respcf {

// Anything that can stand in for the trained network during curve
// generation: the regressor itself, or a closed-form oracle in tests.
template <typename M>
concept Predictor = requires(const M& m, const Eigen::MatrixXd& x) {
    { m.input_dim() } -> std::convertible_to<int>;
    { m.predict_batch(x) } -> std::convertible_to<Eigen::VectorXd>;
};

struct CurveGrid {
    std::size_t active_index = 0;
    std::vector<double> values;  // strictly ascending, spans the observed range

    std::size_t size() const { return values.size(); }
};

struct ResponseCurve {
    std::vector<double> values;
    std::size_t sample_index = 0;
    bool aligned = false;
};

struct CurveSet {
    std::vector<ResponseCurve> curves;  // one aligned curve per dataset sample
    CurveGrid grid;
};

// G equally spaced points over the observed range of the active feature.
inline CurveGrid make_grid(const Dataset& ds, std::size_t active_index, std::size_t grid_size) {
    if (active_index >= ds.n_features())
        throw std::invalid_argument("make_grid: active feature index out of range");
    if (grid_size < 2) throw std::invalid_argument("make_grid: grid size must be >= 2");
    const FeatureSpec& spec = ds.specs[active_index];
    if (spec.kind == FeatureKind::categorical)
        throw std::invalid_argument("make_grid: response curves over categorical feature '" +
                                    spec.name + "' are not supported");
    if (!(spec.range() > 0.0))
        throw std::invalid_argument("make_grid: active feature '" + spec.name +
                                    "' has zero observed range");

    CurveGrid grid;
    grid.active_index = active_index;
    grid.values.resize(grid_size);
    const double step = spec.range() / static_cast<double>(grid_size - 1);
    for (std::size_t g = 0; g < grid_size; ++g)
        grid.values[g] = spec.observed_min + static_cast<double>(g) * step;
    grid.values.front() = spec.observed_min;
    grid.values.back() = spec.observed_max;
    return grid;
}

// Sweeps the active feature over the grid with all passive features held
// at the sample's values.  The result is unaligned.
template <Predictor M>
ResponseCurve response_curve(const M& model, const Sample& sample, const CurveGrid& grid) {
    const std::size_t n = sample.features.size();
    if (static_cast<int>(n) != model.input_dim())
        throw std::invalid_argument("response_curve: sample width does not match model input");
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(n));
    for (Eigen::Index g = 0; g < inputs.rows(); ++g) {
        for (std::size_t i = 0; i < n; ++i)
            inputs(g, static_cast<Eigen::Index>(i)) = sample.features[i];
        inputs(g, static_cast<Eigen::Index>(grid.active_index)) =
            grid.values[static_cast<std::size_t>(g)];
    }
    const Eigen::VectorXd pred = model.predict_batch(inputs);
    ResponseCurve curve;
    curve.sample_index = sample.index;
    curve.values.assign(pred.data(), pred.data() + pred.size());
    return curve;
}

// Subtracts the curve minimum; pairwise differences are preserved and the
// minimum of the result is exactly zero.
inline ResponseCurve align(const ResponseCurve& curve) {
    if (curve.values.empty()) throw std::invalid_argument("align: empty curve");
    ResponseCurve out = curve;
    const double lowest = *std::min_element(out.values.begin(), out.values.end());
    for (double& v : out.values) v -= lowest;
    out.aligned = true;
    return out;
}

template <Predictor M>
CurveSet curve_set(const M& model, const Dataset& ds, const CurveGrid& grid) {
    CurveSet set;
    set.grid = grid;
    set.curves.reserve(ds.size());
    for (const Sample& sample : ds.samples)
        set.curves.push_back(align(response_curve(model, sample, grid)));
    return set;
}

}  // namespace respcf
