#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "respcf/csv.hpp"
#include "respcf/rng.hpp"

namespace respcf {

enum class FeatureKind { numeric, categorical };

// Per-feature metadata.  For numeric features [observed_min, observed_max]
// is the value box and its width is the Gower normalizer; categorical
// features carry their level set instead and the range fields are unused.
struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    double observed_min = 0.0;
    double observed_max = 0.0;
    std::vector<std::string> levels;  // categorical only; codes are positions

    double range() const { return observed_max - observed_min; }
};

struct Sample {
    std::vector<double> features;  // categorical levels stored as integer codes
    std::size_t index = 0;
};

struct FoldSplit {
    int fold_id = 0;  // 1-based
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> validation_indices;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<double> targets;
    std::vector<FeatureSpec> specs;
    std::optional<std::size_t> active_index;  // 0-based feature position

    std::size_t size() const { return samples.size(); }
    std::size_t n_features() const { return specs.size(); }

    std::size_t feature_index(const std::string& name) const {
        for (std::size_t i = 0; i < specs.size(); ++i)
            if (specs[i].name == name) return i;
        throw std::invalid_argument("unknown feature: " + name);
    }

    // Row subset preserving specs and original sample indices.
    Dataset subset(const std::vector<std::size_t>& indices) const {
        Dataset out;
        out.specs = specs;
        out.active_index = active_index;
        out.samples.reserve(indices.size());
        out.targets.reserve(indices.size());
        for (const std::size_t i : indices) {
            out.samples.push_back(samples.at(i));
            out.targets.push_back(targets.at(i));
        }
        return out;
    }
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Closed-form target of the synthetic regression problem.
inline double synthetic_target(const std::vector<double>& x) {
    return sigmoid((10.0 * x[0] - 5.0) + x[1]) * x[2] * x[2] * x[3] + 10.0 * x[4];
}

// Five-feature synthetic dataset: x1~U(0,1), x2~U(-3,3), x3~U(1,2),
// x4~U(1,2), x5~U(0,2).  Targets are noiseless by default; noise_stddev
// adds seeded Gaussian noise for robustness experiments.
inline Dataset generate_synthetic(std::size_t count, std::uint64_t seed,
                                  double noise_stddev = 0.0) {
    if (count == 0) throw std::invalid_argument("generate_synthetic: empty dataset requested");

    static constexpr double lo[5] = {0.0, -3.0, 1.0, 1.0, 0.0};
    static constexpr double hi[5] = {1.0, 3.0, 2.0, 2.0, 2.0};

    Dataset ds;
    ds.specs.reserve(5);
    for (int i = 0; i < 5; ++i)
        ds.specs.push_back({"x" + std::to_string(i + 1), FeatureKind::numeric, lo[i], hi[i], {}});

    Rng rng(seed);
    ds.samples.reserve(count);
    ds.targets.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        Sample s;
        s.index = j;
        s.features.resize(5);
        for (int i = 0; i < 5; ++i) s.features[i] = rng.uniform(lo[i], hi[i]);
        double y = synthetic_target(s.features);
        if (noise_stddev > 0.0) y += noise_stddev * rng.normal();
        ds.samples.push_back(std::move(s));
        ds.targets.push_back(y);
    }
    ds.active_index = 0;  // the paper's choice s = x1
    return ds;
}

// Observed min/max per numeric feature, computed from the given rows.
inline std::vector<FeatureSpec> infer_specs(const Dataset& ds) {
    std::vector<FeatureSpec> specs = ds.specs;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].kind != FeatureKind::numeric) continue;
        double mn = std::numeric_limits<double>::infinity();
        double mx = -std::numeric_limits<double>::infinity();
        for (const Sample& s : ds.samples) {
            mn = std::min(mn, s.features[i]);
            mx = std::max(mx, s.features[i]);
        }
        specs[i].observed_min = mn;
        specs[i].observed_max = mx;
    }
    return specs;
}

// Sidecar schema: JSON object mapping column name -> {"kind": ...}.
// Declared here as a plain map so dataset loading does not pull in the
// JSON dependency; the CLI parses the sidecar file.
using ColumnKinds = std::map<std::string, FeatureKind>;

inline Dataset load_csv(const std::string& path, const std::string& target_column,
                        const ColumnKinds& kinds = {}) {
    const auto rows = read_csv_file(path);
    if (rows.empty()) throw std::runtime_error("empty dataset: " + path + " has no header row");
    const auto& header = rows.front();

    std::size_t target_col = header.size();
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == target_column) target_col = c;
    if (target_col == header.size())
        throw std::runtime_error("target column '" + target_column + "' not found in " + path);
    if (rows.size() == 1)
        throw std::runtime_error("empty dataset: " + path + " has a header but no data rows");

    Dataset ds;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == target_col) continue;
        FeatureSpec spec;
        spec.name = header[c];
        const auto it = kinds.find(spec.name);
        spec.kind = (it != kinds.end()) ? it->second : FeatureKind::numeric;
        ds.specs.push_back(std::move(spec));
    }

    // level -> code maps for categorical columns, keyed by feature position
    std::vector<std::map<std::string, double>> level_codes(ds.specs.size());

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw CsvError("expected " + std::to_string(header.size()) + " fields, got " +
                               std::to_string(row.size()),
                           r + 1, row.size());
        Sample s;
        s.index = r - 1;
        s.features.reserve(ds.specs.size());
        std::size_t f = 0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == target_col) {
                ds.targets.push_back(parse_numeric_cell(row[c], r + 1, c + 1));
                continue;
            }
            if (ds.specs[f].kind == FeatureKind::numeric) {
                s.features.push_back(parse_numeric_cell(row[c], r + 1, c + 1));
            } else {
                auto& codes = level_codes[f];
                const auto [it, inserted] =
                    codes.emplace(row[c], static_cast<double>(ds.specs[f].levels.size()));
                if (inserted) ds.specs[f].levels.push_back(row[c]);
                s.features.push_back(it->second);
            }
            ++f;
        }
        ds.samples.push_back(std::move(s));
    }

    ds.specs = infer_specs(ds);
    return ds;
}

inline void write_csv(const Dataset& ds, const std::string& path,
                      const std::string& target_name = "y") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (const auto& spec : ds.specs) out << csv_escape(spec.name) << ',';
    out << csv_escape(target_name) << '\n';
    out.precision(17);
    for (std::size_t j = 0; j < ds.size(); ++j) {
        const Sample& s = ds.samples[j];
        for (std::size_t i = 0; i < s.features.size(); ++i) {
            if (ds.specs[i].kind == FeatureKind::categorical)
                out << csv_escape(ds.specs[i].levels.at(static_cast<std::size_t>(s.features[i])));
            else
                out << s.features[i];
            out << ',';
        }
        out << ds.targets[j] << '\n';
    }
}

// Shuffled partition into k near-equal validation folds; the first
// (N mod k) folds take one extra sample.
inline std::vector<FoldSplit> kfold_split(const Dataset& ds, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
    const std::size_t n = ds.size();
    if (n < static_cast<std::size_t>(k))
        throw std::invalid_argument("kfold_split: dataset smaller than k");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].fold_id = static_cast<int>(f) + 1;
        folds[f].validation_indices.assign(order.begin() + pos, order.begin() + pos + len);
        pos += len;
    }
    for (std::size_t f = 0; f < folds.size(); ++f) {
        auto& train = folds[f].train_indices;
        train.reserve(n - folds[f].validation_indices.size());
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g == f) continue;
            train.insert(train.end(), folds[g].validation_indices.begin(),
                         folds[g].validation_indices.end());
        }
    }
    return folds;
}

// Min-max scaling parameters, taken from training-fold statistics.
struct NormalizationParams {
    struct Feature {
        double min = 0.0;
        double range = 1.0;
        bool constant = false;
        bool categorical = false;
    };
    std::vector<Feature> features;

    double normalize_value(std::size_t i, double v) const {
        const Feature& f = features.at(i);
        if (f.categorical) return v;
        if (f.constant) return 0.0;
        return (v - f.min) / f.range;
    }
    double denormalize_value(std::size_t i, double v) const {
        const Feature& f = features.at(i);
        if (f.categorical) return v;
        if (f.constant) return f.min;
        return f.min + v * f.range;
    }
};

inline Dataset apply_normalization(const Dataset& ds, const NormalizationParams& params) {
    if (params.features.size() != ds.n_features())
        throw std::invalid_argument("normalization params do not match dataset width");
    Dataset out = ds;
    for (Sample& s : out.samples)
        for (std::size_t i = 0; i < s.features.size(); ++i)
            s.features[i] = params.normalize_value(i, s.features[i]);
    for (std::size_t i = 0; i < out.specs.size(); ++i) {
        FeatureSpec& spec = out.specs[i];
        if (spec.kind != FeatureKind::numeric) continue;
        spec.observed_min = params.normalize_value(i, spec.observed_min);
        spec.observed_max = params.normalize_value(i, spec.observed_max);
    }
    return out;
}

// Min-max scales numeric features to [0,1] using this dataset's observed
// statistics.  Targets are left unscaled.  Constant features map to 0 and
// are flagged on the returned params rather than treated as errors.
inline std::pair<Dataset, NormalizationParams> normalize(const Dataset& ds) {
    NormalizationParams params;
    params.features.resize(ds.n_features());
    const auto observed = infer_specs(ds);
    for (std::size_t i = 0; i < ds.n_features(); ++i) {
        auto& f = params.features[i];
        if (ds.specs[i].kind == FeatureKind::categorical) {
            f.categorical = true;
            continue;
        }
        f.min = observed[i].observed_min;
        const double range = observed[i].observed_max - observed[i].observed_min;
        if (range > 0.0) {
            f.range = range;
        } else {
            f.range = 1.0;
            f.constant = true;
        }
    }
    return {apply_normalization(ds, params), params};
}

inline Sample denormalize_sample(const Sample& s, const NormalizationParams& params) {
    Sample out = s;
    for (std::size_t i = 0; i < out.features.size(); ++i)
        out.features[i] = params.denormalize_value(i, out.features[i]);
    return out;
}

}  // namespace respcf
