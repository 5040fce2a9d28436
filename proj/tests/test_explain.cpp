#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "respcf/explain.hpp"
#include "respcf/rng.hpp"

using namespace respcf;
using namespace respcf::explain;
using Catch::Approx;

namespace {

cfe::CfeResult result_for(const Sample& original, const std::vector<double>& counterfactual,
                          double epsilon, bool success) {
    cfe::CfeResult result;
    result.sample_index = original.index;
    result.counterfactual = {counterfactual, original.index};
    result.epsilon = epsilon;
    result.success = success;
    return result;
}

LocalExplanation local_with(std::vector<std::size_t> alpha, std::size_t index = 0,
                            bool success = true) {
    LocalExplanation out;
    out.sample_index = index;
    out.alpha = std::move(alpha);
    out.epsilon = 0.4;
    out.success = success;
    return out;
}

}  // namespace

TEST_CASE("local explanations", "[explain]") {
    const Sample original{{0.5, 1.0, 2.0, 3.0}, 7};
    SECTION("unchanged counterfactual yields an empty alpha") {
        const auto local =
            local_explanation(original, result_for(original, original.features, 0.4, false), 0);
        REQUIRE(local.alpha.empty());
        REQUIRE(local.sample_index == 7);
        REQUIRE_FALSE(local.success);
    }
    SECTION("a single modified feature is identified") {
        const auto local = local_explanation(
            original, result_for(original, {0.5, 1.0, 2.0, 9.0}, 0.4, true), 0);
        REQUIRE(local.alpha == std::vector<std::size_t>{3});
        REQUIRE(local.success);
    }
    SECTION("the active feature is never part of alpha") {
        const auto local = local_explanation(
            original, result_for(original, {0.9, 1.5, 2.0, 3.0}, 0.4, true), 0);
        REQUIRE(local.alpha == std::vector<std::size_t>{1});
    }
    SECTION("sub-tolerance changes are ignored") {
        const auto local = local_explanation(
            original, result_for(original, {0.5, 1.0 + 1e-12, 2.0, 3.0}, 0.4, true), 0);
        REQUIRE(local.alpha.empty());
    }
    SECTION("results from a different sample are rejected") {
        Sample other = original;
        other.index = 8;
        REQUIRE_THROWS_AS(
            local_explanation(other, result_for(original, original.features, 0.4, true), 0),
            std::invalid_argument);
    }
}

TEST_CASE("global relevance", "[explain]") {
    SECTION("ratio of samples whose alpha contains the feature") {
        const std::vector<LocalExplanation> locals{local_with({1}), local_with({1, 2})};
        const auto relevance = global_relevance(locals, 4);
        REQUIRE(relevance[1] == 1.0);
        REQUIRE(relevance[2] == 0.5);
        REQUIRE(relevance[0] == 0.0);
        REQUIRE(relevance[3] == 0.0);
    }
    SECTION("all-empty alphas give zero relevance") {
        const std::vector<LocalExplanation> locals{local_with({}), local_with({})};
        const auto relevance = global_relevance(locals, 3);
        REQUIRE(relevance == std::vector<double>{0.0, 0.0, 0.0});
    }
    SECTION("empty input is rejected") {
        REQUIRE_THROWS_AS(global_relevance({}, 3), std::invalid_argument);
    }
}

TEST_CASE("top combinations", "[explain]") {
    SECTION("counts alpha multisets and reports ratios") {
        const std::vector<LocalExplanation> locals{local_with({1, 2}), local_with({1, 2}),
                                                   local_with({3})};
        const auto combos = top_combinations(locals, 5);
        REQUIRE(combos.size() == 2);
        REQUIRE(combos[0].features == std::vector<std::size_t>{1, 2});
        REQUIRE(combos[0].ratio == Approx(2.0 / 3.0));
        REQUIRE(combos[1].features == std::vector<std::size_t>{3});
        REQUIRE(combos[1].ratio == Approx(1.0 / 3.0));
    }
    SECTION("k larger than the distinct sets returns everything") {
        const std::vector<LocalExplanation> locals{local_with({0}), local_with({1})};
        REQUIRE(top_combinations(locals, 10).size() == 2);
    }
    SECTION("count ties break lexicographically") {
        const std::vector<LocalExplanation> locals{local_with({2, 3}), local_with({1, 4})};
        const auto combos = top_combinations(locals, 2);
        REQUIRE(combos[0].features == std::vector<std::size_t>{1, 4});
        REQUIRE(combos[1].features == std::vector<std::size_t>{2, 3});
    }
    SECTION("min_size filters to interaction sets") {
        const std::vector<LocalExplanation> locals{local_with({1}), local_with({1}),
                                                   local_with({1, 2})};
        const auto combos = top_combinations(locals, 5, 2);
        REQUIRE(combos.size() == 1);
        REQUIRE(combos[0].features == std::vector<std::size_t>{1, 2});
        REQUIRE(combos[0].ratio == Approx(1.0 / 3.0));  // ratio stays over all N
    }
    SECTION("counting is invariant to sample order") {
        std::vector<LocalExplanation> locals{local_with({1, 2}), local_with({3}),
                                             local_with({1, 2}), local_with({0})};
        const auto before = top_combinations(locals, 4);
        Rng rng(5);
        rng.shuffle(locals);
        const auto after = top_combinations(locals, 4);
        REQUIRE(before.size() == after.size());
        for (std::size_t i = 0; i < before.size(); ++i) {
            REQUIRE(before[i].features == after[i].features);
            REQUIRE(before[i].count == after[i].count);
        }
    }
}

TEST_CASE("fold reports and aggregation", "[explain]") {
    const std::vector<LocalExplanation> fold_a{local_with({1, 2}), local_with({1, 2}),
                                               local_with({2}), local_with({})};
    const std::vector<LocalExplanation> fold_b{local_with({1, 2}), local_with({3}),
                                               local_with({2}), local_with({2})};

    SECTION("single-fold report carries relevance and combination counts") {
        const GlobalReport report = fold_report(fold_a, 0.4, 4);
        REQUIRE(report.fold_count == 1);
        REQUIRE(report.relevance_mean[2] == Approx(0.75));
        REQUIRE(report.relevance_mean[1] == Approx(0.5));
        REQUIRE(report.combinations[0].features == std::vector<std::size_t>{1, 2});
        REQUIRE(report.combinations[0].mean_ratio == Approx(0.5));
        REQUIRE(report.interaction_combinations.size() == 1);
    }
    SECTION("identical folds aggregate with zero spread") {
        const GlobalReport fold = fold_report(fold_a, 0.4, 4);
        const GlobalReport agg = aggregate_folds({fold, fold, fold});
        REQUIRE(agg.fold_count == 3);
        for (const double sd : agg.relevance_std) REQUIRE(sd == Approx(0.0).margin(1e-15));
        REQUIRE(agg.combinations[0].std_ratio == Approx(0.0).margin(1e-15));
        REQUIRE(agg.combinations[0].mean_ratio == Approx(0.5));
    }
    SECTION("two folds use the sample standard deviation") {
        // ratios of {1,2}: 0.5 in fold A, 0.25 in fold B
        const GlobalReport agg =
            aggregate_folds({fold_report(fold_a, 0.4, 4), fold_report(fold_b, 0.4, 4)});
        const auto& combo = agg.combinations;
        const auto it = std::find_if(combo.begin(), combo.end(), [](const auto& c) {
            return c.features == std::vector<std::size_t>{1, 2};
        });
        REQUIRE(it != combo.end());
        REQUIRE(it->total_count == 3);
        REQUIRE(it->mean_ratio == Approx(0.375));
        REQUIRE(it->std_ratio == Approx(std::sqrt((0.125 * 0.125) * 2.0)));  // n-1 = 1
    }
    SECTION("documented convention example: ratios 0.1 and 0.3") {
        std::vector<double> values{0.1, 0.3};
        // the report uses the sample convention; 0.2 mean, ~0.1414 std
        const GlobalReport agg =
            aggregate_folds({fold_report(fold_a, 0.4, 4), fold_report(fold_b, 0.4, 4)});
        (void)agg;
        const double mean = (values[0] + values[1]) / 2.0;
        const double sd = std::sqrt(((0.1 - mean) * (0.1 - mean) + (0.3 - mean) * (0.3 - mean)) /
                                    1.0);
        REQUIRE(mean == Approx(0.2));
        REQUIRE(sd == Approx(0.1414).margin(5e-5));
    }
    SECTION("aggregation rejects mismatched folds") {
        GlobalReport fold1 = fold_report(fold_a, 0.4, 4);
        GlobalReport fold2 = fold_report(fold_b, 0.4, 4);
        fold2.epsilon = 0.6;
        REQUIRE_THROWS_AS(aggregate_folds({fold1, fold2}), std::invalid_argument);
        fold2 = fold_report(fold_b, 0.4, 4);
        fold2.n_features = 9;
        REQUIRE_THROWS_AS(aggregate_folds({fold1, fold2}), std::invalid_argument);
    }
    SECTION("missing combinations count as ratio zero in other folds") {
        const GlobalReport agg =
            aggregate_folds({fold_report(fold_a, 0.4, 4), fold_report(fold_b, 0.4, 4)});
        const auto it = std::find_if(agg.combinations.begin(), agg.combinations.end(),
                                     [](const auto& c) {
                                         return c.features == std::vector<std::size_t>{3};
                                     });
        REQUIRE(it != agg.combinations.end());
        REQUIRE(it->mean_ratio == Approx(0.125));  // 0 in fold A, 0.25 in fold B
    }
}
