#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "respcf/curves.hpp"
#include "respcf/dataset.hpp"
#include "respcf/fpca.hpp"
#include "respcf/rng.hpp"
#include "support/oracles.hpp"

using namespace respcf;
using Catch::Approx;

namespace {

CurveGrid unit_grid(std::size_t g) {
    CurveGrid grid;
    grid.active_index = 0;
    grid.values.resize(g);
    for (std::size_t i = 0; i < g; ++i)
        grid.values[i] = static_cast<double>(i) / static_cast<double>(g - 1);
    return grid;
}

CurveSet make_set(const std::vector<std::vector<double>>& curves, const CurveGrid& grid) {
    CurveSet set;
    set.grid = grid;
    for (std::size_t j = 0; j < curves.size(); ++j)
        set.curves.push_back({curves[j], j, true});
    return set;
}

double weighted_inner(const FpcaModel& model, const std::vector<double>& a,
                      const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += model.quadrature_weights[i] * a[i] * b[i];
    return acc;
}

std::vector<double> reconstruct(const FpcaModel& model, const ScoreVector& scores) {
    std::vector<double> out = model.mean_curve;
    for (std::size_t k = 0; k < model.components; ++k)
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += scores.v[k] * model.eigenfunctions[k][i];
    return out;
}

}  // namespace

TEST_CASE("fpca fit degenerate ensembles", "[fpca]") {
    const CurveGrid grid = unit_grid(20);
    SECTION("identical curves give zero eigenvalues and zero scores") {
        std::vector<double> c(20);
        for (std::size_t i = 0; i < 20; ++i) c[i] = std::sin(0.3 * static_cast<double>(i));
        const CurveSet set = make_set({c, c, c, c}, grid);
        const FpcaModel model = fpca::fit(set, 3);
        for (const double ev : model.eigenvalues) REQUIRE(ev == Approx(0.0).margin(1e-20));
        const ScoreVector scores = fpca::project(model, set.curves[1]);
        for (const double v : scores.v) REQUIRE(v == Approx(0.0).margin(1e-12));
    }
    SECTION("rank-1 ensemble {c, -c} explains everything with one component") {
        std::vector<double> c(20), neg(20);
        for (std::size_t i = 0; i < 20; ++i) {
            c[i] = 0.1 * static_cast<double>(i) - 0.5;
            neg[i] = -c[i];
        }
        const CurveSet set = make_set({c, neg}, grid);
        const FpcaModel model = fpca::fit(set, 2);
        REQUIRE(model.explained_variance_ratio[0] == Approx(1.0).margin(1e-12));
        REQUIRE(model.eigenvalues[1] == Approx(0.0).margin(1e-16));
        REQUIRE(model.eigenvalues[0] > 0.0);
    }
    SECTION("rejects fewer curves than components") {
        std::vector<double> c(20, 1.0);
        REQUIRE_THROWS_AS(fpca::fit(make_set({c, c}, grid), 3), std::invalid_argument);
    }
    SECTION("rejects non-finite curve values") {
        std::vector<double> c(20, 1.0);
        std::vector<double> bad(20, 1.0);
        bad[5] = std::numeric_limits<double>::quiet_NaN();
        REQUIRE_THROWS_AS(fpca::fit(make_set({c, bad, c}, grid), 2), std::invalid_argument);
    }
}

TEST_CASE("fpca full-rank reconstruction", "[fpca]") {
    const std::size_t n = 50, g = 30;
    const CurveGrid grid = unit_grid(g);
    Rng rng(11);
    std::vector<std::vector<double>> curves(n, std::vector<double>(g));
    for (auto& c : curves)
        for (double& v : c) v = rng.uniform(-2.0, 2.0);
    const CurveSet set = make_set(curves, grid);
    const std::size_t full_rank = std::min(n, g);
    const FpcaModel model = fpca::fit(set, full_rank);

    for (std::size_t j = 0; j < n; ++j) {
        const ScoreVector scores = fpca::project(model, set.curves[j]);
        const std::vector<double> rec = reconstruct(model, scores);
        for (std::size_t i = 0; i < g; ++i)
            REQUIRE(rec[i] == Approx(curves[j][i]).margin(1e-8));
    }
}

TEST_CASE("fpca orthonormality and spectrum ordering", "[fpca]") {
    const std::size_t n = 40, g = 25;
    const CurveGrid grid = unit_grid(g);
    Rng rng(13);
    std::vector<std::vector<double>> curves(n, std::vector<double>(g));
    for (auto& c : curves)
        for (double& v : c) v = rng.uniform(0.0, 3.0);
    const FpcaModel model = fpca::fit(make_set(curves, grid), 5);

    SECTION("eigenfunctions are orthonormal under the weighted inner product") {
        for (std::size_t a = 0; a < model.components; ++a)
            for (std::size_t b = 0; b < model.components; ++b) {
                const double ip =
                    weighted_inner(model, model.eigenfunctions[a], model.eigenfunctions[b]);
                REQUIRE(std::abs(ip - (a == b ? 1.0 : 0.0)) < 1e-8);
            }
    }
    SECTION("eigenvalues are non-negative and descending") {
        for (std::size_t k = 0; k < model.components; ++k) {
            REQUIRE(model.eigenvalues[k] >= 0.0);
            if (k > 0) REQUIRE(model.eigenvalues[k] <= model.eigenvalues[k - 1]);
        }
    }
    SECTION("explained variance ratios sum to at most one") {
        double total = 0.0;
        for (const double r : model.explained_variance_ratio) total += r;
        REQUIRE(total <= 1.0 + 1e-12);
    }
    SECTION("sign convention: largest-magnitude coefficient is positive") {
        for (const auto& xi : model.eigenfunctions) {
            double best = 0.0;
            for (const double v : xi)
                if (std::abs(v) > std::abs(best)) best = v;
            REQUIRE(best >= 0.0);
        }
    }
    SECTION("random noise ensemble sets the low-variance warning for K=1") {
        const FpcaModel narrow = fpca::fit(make_set(curves, grid), 1);
        REQUIRE(narrow.low_variance_warning);
        REQUIRE(narrow.cumulative_explained < 0.995);
    }
}

TEST_CASE("fpca projection", "[fpca]") {
    const std::size_t n = 30, g = 40;
    const CurveGrid grid = unit_grid(g);
    Rng rng(17);
    std::vector<std::vector<double>> curves(n, std::vector<double>(g));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < g; ++i)
            curves[j][i] = rng.uniform(0.0, 1.0) +
                           std::sin(static_cast<double>(i) * 0.2) * rng.uniform(0.0, 2.0);
    const CurveSet set = make_set(curves, grid);
    const FpcaModel model = fpca::fit(set, 3);

    SECTION("the mean curve projects to the zero score vector") {
        const ScoreVector scores = fpca::project(model, {model.mean_curve, 0, true});
        for (const double v : scores.v) REQUIRE(v == 0.0);
    }
    SECTION("mean plus an eigenfunction projects to a unit coordinate") {
        std::vector<double> shifted = model.mean_curve;
        for (std::size_t i = 0; i < g; ++i) shifted[i] += model.eigenfunctions[0][i];
        const ScoreVector scores = fpca::project(model, {shifted, 0, true});
        REQUIRE(scores.v[0] == Approx(1.0).margin(1e-8));
        REQUIRE(scores.v[1] == Approx(0.0).margin(1e-8));
        REQUIRE(scores.v[2] == Approx(0.0).margin(1e-8));
    }
    SECTION("training-curve residuals obey the discarded-variance bound") {
        const FpcaModel full = fpca::fit(set, std::min(n, g));
        double total = 0.0;
        for (const double ev : full.eigenvalues) total += ev * static_cast<double>(n - 1);
        double kept = 0.0;
        for (const double r : model.explained_variance_ratio) kept += r;
        const double allowed = (1.0 - kept) * total;
        for (std::size_t j = 0; j < n; ++j) {
            const ScoreVector scores = fpca::project(model, set.curves[j]);
            const std::vector<double> rec = reconstruct(model, scores);
            double resid = 0.0;
            for (std::size_t i = 0; i < g; ++i) {
                const double d = curves[j][i] - rec[i];
                resid += model.quadrature_weights[i] * d * d;
            }
            REQUIRE(resid <= allowed + 1e-9);
        }
    }
    SECTION("projection contracts the weighted L2 distance") {
        for (std::size_t j = 1; j < 10; ++j) {
            const ScoreVector a = fpca::project(model, set.curves[0]);
            const ScoreVector b = fpca::project(model, set.curves[j]);
            const double full = testsupport::weighted_l2_distance(curves[0], curves[j],
                                                                  grid.values);
            REQUIRE(fpca::distance(a, b) <= full + 1e-9);
        }
    }
    SECTION("grid mismatch is rejected") {
        REQUIRE_THROWS_AS(fpca::project(model, {{1.0, 2.0}, 0, true}), std::invalid_argument);
    }
}

TEST_CASE("score distance", "[fpca]") {
    SECTION("identity") {
        const ScoreVector v{{0.3, -0.2, 1.4}};
        REQUIRE(fpca::distance(v, v) == 0.0);
    }
    SECTION("unit scores give sqrt(2)") {
        REQUIRE(fpca::distance({{1, 0, 0}}, {{0, 1, 0}}) == Approx(std::sqrt(2.0)));
    }
    SECTION("dimension mismatch is rejected") {
        REQUIRE_THROWS_AS(fpca::distance({{1, 2}}, {{1, 2, 3}}), std::invalid_argument);
    }
    SECTION("metric axioms on random triples") {
        Rng rng(23);
        for (int rep = 0; rep < 200; ++rep) {
            ScoreVector a, b, c;
            for (int k = 0; k < 3; ++k) {
                a.v.push_back(rng.uniform(-5.0, 5.0));
                b.v.push_back(rng.uniform(-5.0, 5.0));
                c.v.push_back(rng.uniform(-5.0, 5.0));
            }
            const double ab = fpca::distance(a, b);
            const double ba = fpca::distance(b, a);
            const double ac = fpca::distance(a, c);
            const double cb = fpca::distance(c, b);
            REQUIRE(ab >= 0.0);
            REQUIRE(ab == ba);
            REQUIRE(fpca::distance(a, a) == 0.0);
            REQUIRE(ab <= ac + cb + 1e-12);
        }
    }
}

TEST_CASE("fpca on synthetic oracle curves explains 99.5 percent with K=3", "[fpca]") {
    const testsupport::SyntheticOracleModel model;
    Dataset ds = generate_synthetic(400, 31);
    ds.specs = infer_specs(ds);
    const CurveGrid grid = make_grid(ds, 0, 100);
    const CurveSet set = curve_set(model, ds, grid);
    const FpcaModel fitted = fpca::fit(set, 3);
    INFO("cumulative explained: " << fitted.cumulative_explained);
    REQUIRE(fitted.cumulative_explained >= 0.995);
    REQUIRE_FALSE(fitted.low_variance_warning);
}

TEST_CASE("fpca persistence round trip", "[fpca]") {
    const CurveGrid grid = unit_grid(15);
    Rng rng(41);
    std::vector<std::vector<double>> curves(10, std::vector<double>(15));
    for (auto& c : curves)
        for (double& v : c) v = rng.uniform(0.0, 1.0);
    const FpcaModel model = fpca::fit(make_set(curves, grid), 3);
    const auto path =
        (std::filesystem::temp_directory_path() / "respcf_fpca.json").string();
    model.save(path);
    const FpcaModel loaded = FpcaModel::load(path);
    REQUIRE(loaded.mean_curve == model.mean_curve);
    REQUIRE(loaded.eigenfunctions == model.eigenfunctions);
    REQUIRE(loaded.eigenvalues == model.eigenvalues);
    REQUIRE(loaded.quadrature_weights == model.quadrature_weights);
    REQUIRE(loaded.components == model.components);
}
