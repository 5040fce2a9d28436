#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "respcf/cfe.hpp"
#include "respcf/dataset.hpp"

namespace respcf {
namespace explain {

// alpha_j: the set of passive features modified in sample j's selected
// counterfactual.
struct LocalExplanation {
    std::size_t sample_index = 0;
    std::vector<std::size_t> alpha;  // ascending feature indices, never contains s
    double epsilon = 0.0;
    bool success = false;
};

inline LocalExplanation local_explanation(const Sample& original, const cfe::CfeResult& result,
                                          std::size_t active_index,
                                          double tie_tolerance = cfe::kTieTolerance) {
    if (result.sample_index != original.index)
        throw std::invalid_argument("local_explanation: result does not belong to this sample");
    LocalExplanation out;
    out.sample_index = original.index;
    out.epsilon = result.epsilon;
    out.success = result.success;
    for (std::size_t i = 0; i < original.features.size(); ++i) {
        if (i == active_index) continue;
        if (std::abs(original.features[i] - result.counterfactual.features[i]) > tie_tolerance)
            out.alpha.push_back(i);
    }
    return out;
}

// r_i = (1/N) sum_j 1[i in alpha_j], over all N local explanations
// (failed searches included; callers may filter beforehand).
inline std::vector<double> global_relevance(const std::vector<LocalExplanation>& locals,
                                            std::size_t n_features) {
    if (locals.empty()) throw std::invalid_argument("global_relevance: empty explanation list");
    std::vector<double> relevance(n_features, 0.0);
    for (const auto& local : locals)
        for (const std::size_t i : local.alpha) relevance.at(i) += 1.0;
    for (double& r : relevance) r /= static_cast<double>(locals.size());
    return relevance;
}

struct CombinationCount {
    std::vector<std::size_t> features;  // ascending
    std::size_t count = 0;
    double ratio = 0.0;  // count / N
};

// Exact multiset counting of alpha sets; top k by count, ties broken by
// lexicographic feature indices.  min_size filters to interaction sets
// (the paper's combination tables list multi-feature sets only).
inline std::vector<CombinationCount> top_combinations(const std::vector<LocalExplanation>& locals,
                                                      std::size_t k, std::size_t min_size = 1) {
    if (k < 1) throw std::invalid_argument("top_combinations: k must be >= 1");
    std::map<std::vector<std::size_t>, std::size_t> counts;
    for (const auto& local : locals) {
        if (local.alpha.size() < min_size) continue;
        ++counts[local.alpha];
    }
    std::vector<CombinationCount> out;
    out.reserve(counts.size());
    for (const auto& [features, count] : counts)
        out.push_back({features, count,
                       static_cast<double>(count) / static_cast<double>(locals.size())});
    std::sort(out.begin(), out.end(), [](const CombinationCount& a, const CombinationCount& b) {
        return a.count != b.count ? a.count > b.count : a.features < b.features;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

// Global explanation for one epsilon: per-feature relevance plus the most
// frequent feature combinations, per fold and aggregated across folds.
struct GlobalReport {
    double epsilon = 0.0;
    std::size_t fold_count = 0;
    std::size_t n_features = 0;
    std::vector<std::size_t> fold_sample_counts;  // explanation count per fold

    std::vector<double> relevance_mean;               // per feature
    std::vector<double> relevance_std;                // sample std across folds
    std::vector<std::vector<double>> per_fold_relevance;

    struct Combination {
        std::vector<std::size_t> features;
        std::size_t total_count = 0;     // occurrences across all folds
        double mean_ratio = 0.0;         // mean of per-fold ratios
        double std_ratio = 0.0;          // sample std of per-fold ratios
    };
    std::vector<Combination> combinations;              // all alpha sets
    std::vector<Combination> interaction_combinations;  // |alpha| >= 2 only

    // per-fold combination counts, kept so fold reports can be aggregated
    std::vector<std::map<std::vector<std::size_t>, std::size_t>> fold_combination_counts;
};

namespace detail {

inline std::pair<double, double> mean_and_sample_std(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (const double v : values) mean += v;
    mean /= n;
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

inline std::vector<GlobalReport::Combination> rank_combinations(
    const std::vector<std::map<std::vector<std::size_t>, std::size_t>>& fold_counts,
    const std::vector<std::size_t>& fold_sample_counts, std::size_t k, std::size_t min_size) {
    std::map<std::vector<std::size_t>, std::size_t> totals;
    for (const auto& counts : fold_counts)
        for (const auto& [features, count] : counts) {
            if (features.size() < min_size) continue;
            totals[features] += count;
        }
    std::vector<GlobalReport::Combination> ranked;
    ranked.reserve(totals.size());
    for (const auto& [features, total] : totals) {
        GlobalReport::Combination combo;
        combo.features = features;
        combo.total_count = total;
        std::vector<double> ratios;
        ratios.reserve(fold_counts.size());
        for (std::size_t f = 0; f < fold_counts.size(); ++f) {
            const auto it = fold_counts[f].find(features);
            const double count = (it != fold_counts[f].end()) ? static_cast<double>(it->second)
                                                              : 0.0;
            ratios.push_back(count / static_cast<double>(fold_sample_counts[f]));
        }
        const auto [mean, sd] = mean_and_sample_std(ratios);
        combo.mean_ratio = mean;
        combo.std_ratio = sd;
        ranked.push_back(std::move(combo));
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.total_count != b.total_count ? a.total_count > b.total_count
                                              : a.features < b.features;
    });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

}  // namespace detail

// Report for a single fold.
inline GlobalReport fold_report(const std::vector<LocalExplanation>& locals, double epsilon,
                                std::size_t n_features, std::size_t top_k = 5) {
    if (locals.empty()) throw std::invalid_argument("fold_report: empty explanation list");
    GlobalReport report;
    report.epsilon = epsilon;
    report.fold_count = 1;
    report.n_features = n_features;
    report.fold_sample_counts = {locals.size()};
    report.relevance_mean = global_relevance(locals, n_features);
    report.relevance_std.assign(n_features, 0.0);
    report.per_fold_relevance = {report.relevance_mean};

    std::map<std::vector<std::size_t>, std::size_t> counts;
    for (const auto& local : locals) ++counts[local.alpha];
    report.fold_combination_counts = {std::move(counts)};
    report.combinations = detail::rank_combinations(report.fold_combination_counts,
                                                    report.fold_sample_counts, top_k, 1);
    report.interaction_combinations = detail::rank_combinations(
        report.fold_combination_counts, report.fold_sample_counts, top_k, 2);
    return report;
}

// Cross-fold aggregation: combinations are selected by total count across
// folds; relevance and ratio spreads use the sample standard deviation.
inline GlobalReport aggregate_folds(const std::vector<GlobalReport>& folds,
                                    std::size_t top_k = 5) {
    if (folds.empty()) throw std::invalid_argument("aggregate_folds: no fold reports");
    const GlobalReport& first = folds.front();
    for (const GlobalReport& fold : folds) {
        if (fold.n_features != first.n_features || fold.epsilon != first.epsilon)
            throw std::invalid_argument("aggregate_folds: fold reports are inconsistent");
    }

    GlobalReport report;
    report.epsilon = first.epsilon;
    report.n_features = first.n_features;
    for (const GlobalReport& fold : folds) {
        report.fold_count += fold.fold_count;
        for (const auto& rel : fold.per_fold_relevance) report.per_fold_relevance.push_back(rel);
        for (const auto& counts : fold.fold_combination_counts)
            report.fold_combination_counts.push_back(counts);
        for (const std::size_t count : fold.fold_sample_counts)
            report.fold_sample_counts.push_back(count);
    }

    report.relevance_mean.resize(report.n_features);
    report.relevance_std.resize(report.n_features);
    for (std::size_t i = 0; i < report.n_features; ++i) {
        std::vector<double> values;
        values.reserve(report.per_fold_relevance.size());
        for (const auto& rel : report.per_fold_relevance) values.push_back(rel[i]);
        const auto [mean, sd] = detail::mean_and_sample_std(values);
        report.relevance_mean[i] = mean;
        report.relevance_std[i] = sd;
    }
    report.combinations = detail::rank_combinations(report.fold_combination_counts,
                                                    report.fold_sample_counts, top_k, 1);
    report.interaction_combinations = detail::rank_combinations(
        report.fold_combination_counts, report.fold_sample_counts, top_k, 2);
    return report;
}

}  // namespace explain
}  // namespace respcf
