#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "respcf/curves.hpp"
#include "respcf/dataset.hpp"
#include "respcf/fpca.hpp"
#include "respcf/rng.hpp"

namespace respcf {
namespace cfe {

// Below this threshold (on model-input values) a passive feature does not
// count as modified; exact float equality is not robust after variation
// operators.
inline constexpr double kTieTolerance = 1e-9;

// A counterfactual candidate holds values for the passive features only,
// in ascending dataset order with the active feature skipped.
struct Candidate {
    std::vector<double> passive_values;
    std::vector<bool> change_mask;  // true where the value differs from the original
};

struct ObjectiveTriple {
    double g1 = 0.0;  // capped negative shape distance, in [-eps, 0]
    int g2 = 0;       // number of modified passive features
    double g3 = 0.0;  // mean Gower distance over passive features, in [0, 1]
};

// z_t dominates z_q: no worse in all three objectives, strictly better in
// at least one.
inline bool dominates(const ObjectiveTriple& a, const ObjectiveTriple& b) {
    if (a.g1 > b.g1 || a.g2 > b.g2 || a.g3 > b.g3) return false;
    return a.g1 < b.g1 || a.g2 < b.g2 || a.g3 < b.g3;
}

struct NsgaConfig {
    int population_size = 50;
    int generations = 100;
    double crossover_prob = 0.9;
    double mutation_prob = 0.25;
    double reset_prob = 0.2;       // per-gene reset to the original value
    double crossover_eta = 15.0;   // simulated binary crossover spread
    double mutation_eta = 20.0;    // polynomial mutation spread
    std::uint64_t seed = 0;

    void validate() const {
        if (population_size < 4 || population_size % 2 != 0)
            throw std::invalid_argument("population_size must be even and >= 4");
        if (generations < 1) throw std::invalid_argument("generations must be >= 1");
        for (const double p : {crossover_prob, mutation_prob, reset_prob})
            if (p < 0.0 || p > 1.0)
                throw std::invalid_argument("probabilities must lie in [0, 1]");
    }
};

inline std::vector<std::size_t> passive_indices(std::size_t n_features, std::size_t active) {
    std::vector<std::size_t> out;
    out.reserve(n_features - 1);
    for (std::size_t i = 0; i < n_features; ++i)
        if (i != active) out.push_back(i);
    return out;
}

inline std::vector<bool> compute_change_mask(const std::vector<double>& original_passive,
                                             const std::vector<double>& candidate_passive,
                                             double tie_tolerance = kTieTolerance) {
    std::vector<bool> mask(original_passive.size(), false);
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = std::abs(candidate_passive[i] - original_passive[i]) > tie_tolerance;
    return mask;
}

// First objective: maximize the shape distance, capped at epsilon.
inline double g1(double distance, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("g1: epsilon must be positive");
    if (distance < 0.0) throw std::invalid_argument("g1: distance must be non-negative");
    const double capped = std::min(distance, epsilon);
    return capped == 0.0 ? 0.0 : -capped;
}

// Second objective: L0 count of modified passive features.
inline int g2(const std::vector<bool>& change_mask) {
    return static_cast<int>(std::count(change_mask.begin(), change_mask.end(), true));
}

inline int g2(const std::vector<double>& original_passive,
              const std::vector<double>& candidate_passive,
              double tie_tolerance = kTieTolerance) {
    return g2(compute_change_mask(original_passive, candidate_passive, tie_tolerance));
}

// Third objective: mean Gower distance over passive features.  Numeric
// features contribute |x - x'| / r_i; categorical features contribute an
// inequality indicator; constant features (r_i = 0) contribute 0.
inline double g3(const std::vector<double>& original_passive,
                 const std::vector<double>& candidate_passive,
                 const std::vector<FeatureSpec>& passive_specs) {
    if (original_passive.size() != candidate_passive.size() ||
        original_passive.size() != passive_specs.size())
        throw std::invalid_argument("g3: dimension mismatch");
    if (passive_specs.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < passive_specs.size(); ++i) {
        const FeatureSpec& spec = passive_specs[i];
        if (spec.kind == FeatureKind::categorical) {
            acc += (original_passive[i] != candidate_passive[i]) ? 1.0 : 0.0;
        } else {
            const double range = spec.range();
            if (range > 0.0) acc += std::abs(original_passive[i] - candidate_passive[i]) / range;
        }
    }
    return acc / static_cast<double>(passive_specs.size());
}

struct EvaluatedCandidate {
    Candidate candidate;
    ObjectiveTriple objectives;
    double distance = 0.0;  // uncapped d_s against the original sample
};

// Deb's fast non-dominated sort.  Front 0 is the non-dominated set;
// subsequent fronts are formed after removing earlier ones.
inline std::vector<std::vector<std::size_t>> non_dominated_sort(
    const std::vector<ObjectiveTriple>& points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> domination_count(n, 0);
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(points[p], points[q]))
                dominated[p].push_back(q);
            else if (dominates(points[q], points[p]))
                ++domination_count[p];
        }
        if (domination_count[p] == 0) current.push_back(p);
    }
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<std::size_t> next;
        for (const std::size_t p : fronts.back())
            for (const std::size_t q : dominated[p])
                if (--domination_count[q] == 0) next.push_back(q);
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

// Per-member crowding distance within one front.  Boundary members get
// +inf; interior members accumulate range-normalized neighbor gaps; an
// objective with zero range contributes nothing.
inline std::vector<double> crowding_distance(const std::vector<ObjectiveTriple>& front) {
    const std::size_t m = front.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (m == 0) return {};
    std::vector<double> crowd(m, 0.0);
    if (m <= 2) {
        std::fill(crowd.begin(), crowd.end(), inf);
        return crowd;
    }
    const auto objective = [&](std::size_t i, int axis) -> double {
        switch (axis) {
            case 0: return front[i].g1;
            case 1: return static_cast<double>(front[i].g2);
            default: return front[i].g3;
        }
    };
    std::vector<std::size_t> order(m);
    for (int axis = 0; axis < 3; ++axis) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double va = objective(a, axis), vb = objective(b, axis);
            return va != vb ? va < vb : a < b;
        });
        crowd[order.front()] = inf;
        crowd[order.back()] = inf;
        const double range = objective(order.back(), axis) - objective(order.front(), axis);
        if (!(range > 0.0)) continue;
        for (std::size_t k = 1; k + 1 < m; ++k) {
            if (crowd[order[k]] == inf) continue;
            crowd[order[k]] +=
                (objective(order[k + 1], axis) - objective(order[k - 1], axis)) / range;
        }
    }
    return crowd;
}

namespace detail {

struct GenomeHash {
    std::size_t operator()(const std::vector<double>& genome) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const double v : genome) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h = (h ^ bits) * 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

inline void canonicalize_zeros(std::vector<double>& genome) {
    for (double& v : genome)
        if (v == 0.0) v = 0.0;  // collapse -0.0 so hashing matches equality
}

}  // namespace detail

// Invoked with the full counterfactual feature vector and its evaluation;
// used by tests to audit every candidate the search ever sees.
using EvaluationObserver =
    std::function<void(const std::vector<double>& x_prime, const EvaluatedCandidate&)>;

// Evaluates candidates against one original sample: builds the
// counterfactual input, generates and aligns its response curve, projects
// it onto the fold's fPCA basis and scores the objective triple.
// Results are memoized per genome; evaluation is a pure function of the
// genome so caching cannot change outcomes.
template <Predictor M>
class CandidateEvaluator {
public:
    CandidateEvaluator(const M& model, const FpcaModel& fpca_model, const CurveGrid& grid,
                       const std::vector<FeatureSpec>& specs, const Sample& original,
                       double epsilon, EvaluationObserver observer = {})
        : model_(model),
          fpca_(fpca_model),
          grid_(grid),
          original_(original),
          epsilon_(epsilon),
          observer_(std::move(observer)) {
        if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
        if (grid.active_index >= original.features.size())
            throw std::invalid_argument("active index out of range");
        passive_ = passive_indices(original.features.size(), grid.active_index);
        for (const std::size_t i : passive_) {
            passive_specs_.push_back(specs.at(i));
            original_passive_.push_back(original.features[i]);
        }
        original_scores_ = fpca::project(fpca_, align(response_curve(model_, original_, grid_)));
    }

    const std::vector<std::size_t>& passive() const { return passive_; }
    const std::vector<FeatureSpec>& passive_specs() const { return passive_specs_; }
    const std::vector<double>& original_passive() const { return original_passive_; }
    const ScoreVector& original_scores() const { return original_scores_; }
    double epsilon() const { return epsilon_; }

    std::vector<double> full_features(const Candidate& candidate) const {
        std::vector<double> x = original_.features;
        for (std::size_t i = 0; i < passive_.size(); ++i)
            x[passive_[i]] = candidate.passive_values[i];
        return x;
    }

    EvaluatedCandidate evaluate(Candidate candidate) {
        detail::canonicalize_zeros(candidate.passive_values);
        candidate.change_mask = compute_change_mask(original_passive_, candidate.passive_values);

        double distance = 0.0;
        const auto it = cache_.find(candidate.passive_values);
        if (it != cache_.end()) {
            distance = it->second;
        } else {
            Sample probe;
            probe.index = original_.index;
            probe.features = full_features(candidate);
            const ScoreVector scores =
                fpca::project(fpca_, align(response_curve(model_, probe, grid_)));
            distance = fpca::distance(original_scores_, scores);
            cache_.emplace(candidate.passive_values, distance);
        }

        EvaluatedCandidate out;
        out.objectives.g1 = g1(distance, epsilon_);
        out.objectives.g2 = g2(candidate.change_mask);
        out.objectives.g3 = g3(original_passive_, candidate.passive_values, passive_specs_);
        out.distance = distance;
        out.candidate = std::move(candidate);
        if (observer_) observer_(full_features(out.candidate), out);
        return out;
    }

private:
    const M& model_;
    const FpcaModel& fpca_;
    const CurveGrid& grid_;
    Sample original_;
    double epsilon_;
    EvaluationObserver observer_;
    std::vector<std::size_t> passive_;
    std::vector<FeatureSpec> passive_specs_;
    std::vector<double> original_passive_;
    ScoreVector original_scores_;
    std::unordered_map<std::vector<double>, double, detail::GenomeHash> cache_;
};

// Stand-alone objective evaluation for one candidate (the search itself
// uses a CandidateEvaluator to reuse the cached original scores).
template <Predictor M>
ObjectiveTriple evaluate_candidate(const M& model, const FpcaModel& fpca_model,
                                   const CurveGrid& grid, const std::vector<FeatureSpec>& specs,
                                   const Sample& original, const Candidate& candidate,
                                   double epsilon) {
    CandidateEvaluator<M> evaluator(model, fpca_model, grid, specs, original, epsilon);
    return evaluator.evaluate(candidate).objectives;
}

namespace detail {

template <Predictor M>
class Search {
public:
    Search(CandidateEvaluator<M>& evaluator, const NsgaConfig& config)
        : ev_(evaluator), config_(config), rng_(config.seed) {}

    std::vector<EvaluatedCandidate> run() {
        initialize();
        for (int gen = 0; gen < config_.generations; ++gen) step();
        return extract_front();
    }

private:
    using Genome = std::vector<double>;

    void initialize() {
        const std::size_t n_passive = ev_.passive().size();
        population_.clear();
        population_.reserve(static_cast<std::size_t>(config_.population_size));

        Candidate original;
        original.passive_values = ev_.original_passive();
        population_.push_back(ev_.evaluate(std::move(original)));

        // Remaining members perturb a random subset of 1..3 passive
        // features, seeding the sparse region of the objective space.
        std::vector<std::size_t> positions(n_passive);
        std::iota(positions.begin(), positions.end(), std::size_t{0});
        const std::size_t max_subset = std::min<std::size_t>(3, n_passive);
        while (population_.size() < static_cast<std::size_t>(config_.population_size)) {
            Candidate cand;
            cand.passive_values = ev_.original_passive();
            const std::size_t subset = 1 + rng_.uniform_index(max_subset);
            for (std::size_t j = 0; j < subset; ++j) {
                const std::size_t swap_with = j + rng_.uniform_index(n_passive - j);
                std::swap(positions[j], positions[swap_with]);
                cand.passive_values[positions[j]] = random_gene(positions[j]);
            }
            population_.push_back(ev_.evaluate(std::move(cand)));
        }
    }

    void step() {
        rank_population();
        std::vector<EvaluatedCandidate> offspring;
        offspring.reserve(population_.size());
        while (offspring.size() < population_.size()) {
            const std::size_t pa = tournament();
            const std::size_t pb = tournament();
            auto [child_a, child_b] = crossover(population_[pa].candidate.passive_values,
                                                population_[pb].candidate.passive_values);
            mutate(child_a);
            mutate(child_b);
            offspring.push_back(ev_.evaluate(Candidate{std::move(child_a), {}}));
            if (offspring.size() < population_.size())
                offspring.push_back(ev_.evaluate(Candidate{std::move(child_b), {}}));
        }
        select_survivors(std::move(offspring));
    }

    void rank_population() {
        std::vector<ObjectiveTriple> objectives;
        objectives.reserve(population_.size());
        for (const auto& member : population_) objectives.push_back(member.objectives);
        const auto fronts = non_dominated_sort(objectives);
        rank_.assign(population_.size(), 0);
        crowd_.assign(population_.size(), 0.0);
        for (std::size_t f = 0; f < fronts.size(); ++f) {
            std::vector<ObjectiveTriple> front_objectives;
            front_objectives.reserve(fronts[f].size());
            for (const std::size_t i : fronts[f]) front_objectives.push_back(objectives[i]);
            const auto crowd = crowding_distance(front_objectives);
            for (std::size_t k = 0; k < fronts[f].size(); ++k) {
                rank_[fronts[f][k]] = f;
                crowd_[fronts[f][k]] = crowd[k];
            }
        }
    }

    std::size_t tournament() {
        const std::size_t a = rng_.uniform_index(population_.size());
        const std::size_t b = rng_.uniform_index(population_.size());
        if (rank_[a] != rank_[b]) return rank_[a] < rank_[b] ? a : b;
        if (crowd_[a] != crowd_[b]) return crowd_[a] > crowd_[b] ? a : b;
        return std::min(a, b);
    }

    double random_gene(std::size_t position) {
        const FeatureSpec& spec = ev_.passive_specs()[position];
        if (spec.kind == FeatureKind::categorical) {
            const std::size_t n_levels = std::max<std::size_t>(1, spec.levels.size());
            return static_cast<double>(rng_.uniform_index(n_levels));
        }
        return rng_.uniform(spec.observed_min, spec.observed_max);
    }

    // Simulated binary crossover (Deb & Agrawal); categorical genes swap
    // with probability 1/2.
    std::pair<Genome, Genome> crossover(const Genome& parent_a, const Genome& parent_b) {
        Genome child_a = parent_a;
        Genome child_b = parent_b;
        if (rng_.uniform() > config_.crossover_prob) return {child_a, child_b};
        const double eta = config_.crossover_eta;
        for (std::size_t i = 0; i < child_a.size(); ++i) {
            if (rng_.uniform() > 0.5) continue;
            const FeatureSpec& spec = ev_.passive_specs()[i];
            if (spec.kind == FeatureKind::categorical) {
                std::swap(child_a[i], child_b[i]);
                continue;
            }
            const double y1 = std::min(parent_a[i], parent_b[i]);
            const double y2 = std::max(parent_a[i], parent_b[i]);
            if (!(y2 - y1 > 1e-14)) continue;
            const double yl = spec.observed_min;
            const double yu = spec.observed_max;
            const double rand = rng_.uniform();

            auto spread = [&](double beta) {
                const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
                if (rand <= 1.0 / alpha) return std::pow(rand * alpha, 1.0 / (eta + 1.0));
                return std::pow(1.0 / (2.0 - rand * alpha), 1.0 / (eta + 1.0));
            };
            double c1 = 0.5 * ((y1 + y2) - spread(1.0 + 2.0 * (y1 - yl) / (y2 - y1)) * (y2 - y1));
            double c2 = 0.5 * ((y1 + y2) + spread(1.0 + 2.0 * (yu - y2) / (y2 - y1)) * (y2 - y1));
            c1 = std::clamp(c1, yl, yu);
            c2 = std::clamp(c2, yl, yu);
            if (rng_.uniform() <= 0.5) std::swap(c1, c2);
            child_a[i] = c1;
            child_b[i] = c2;
        }
        return {child_a, child_b};
    }

    // Polynomial mutation followed by a per-gene reset to the original
    // value; the reset is what creates the sparse candidates g2 rewards.
    void mutate(Genome& genome) {
        const double eta = config_.mutation_eta;
        for (std::size_t i = 0; i < genome.size(); ++i) {
            if (rng_.uniform() <= config_.mutation_prob) {
                const FeatureSpec& spec = ev_.passive_specs()[i];
                if (spec.kind == FeatureKind::categorical) {
                    genome[i] = random_gene(i);
                } else if (spec.range() > 0.0) {
                    const double yl = spec.observed_min;
                    const double yu = spec.observed_max;
                    const double y = genome[i];
                    const double delta1 = (y - yl) / (yu - yl);
                    const double delta2 = (yu - y) / (yu - yl);
                    const double rand = rng_.uniform();
                    const double mut_pow = 1.0 / (eta + 1.0);
                    double deltaq;
                    if (rand <= 0.5) {
                        const double xy = 1.0 - delta1;
                        deltaq = std::pow(2.0 * rand + (1.0 - 2.0 * rand) * std::pow(xy, eta + 1.0),
                                          mut_pow) -
                                 1.0;
                    } else {
                        const double xy = 1.0 - delta2;
                        deltaq = 1.0 - std::pow(2.0 * (1.0 - rand) +
                                                    2.0 * (rand - 0.5) * std::pow(xy, eta + 1.0),
                                                mut_pow);
                    }
                    genome[i] = std::clamp(y + deltaq * (yu - yl), yl, yu);
                }
            }
            if (rng_.uniform() <= config_.reset_prob)
                genome[i] = ev_.original_passive()[i];
        }
    }

    void select_survivors(std::vector<EvaluatedCandidate> offspring) {
        std::vector<EvaluatedCandidate> combined = std::move(population_);
        combined.insert(combined.end(), std::make_move_iterator(offspring.begin()),
                        std::make_move_iterator(offspring.end()));
        std::vector<ObjectiveTriple> objectives;
        objectives.reserve(combined.size());
        for (const auto& member : combined) objectives.push_back(member.objectives);
        const auto fronts = non_dominated_sort(objectives);

        population_.clear();
        const std::size_t target = static_cast<std::size_t>(config_.population_size);
        for (const auto& front : fronts) {
            if (population_.size() + front.size() <= target) {
                for (const std::size_t i : front) population_.push_back(std::move(combined[i]));
                if (population_.size() == target) break;
                continue;
            }
            std::vector<ObjectiveTriple> front_objectives;
            front_objectives.reserve(front.size());
            for (const std::size_t i : front) front_objectives.push_back(objectives[i]);
            const auto crowd = crowding_distance(front_objectives);
            std::vector<std::size_t> order(front.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return crowd[a] != crowd[b] ? crowd[a] > crowd[b] : front[a] < front[b];
            });
            for (const std::size_t k : order) {
                if (population_.size() == target) break;
                population_.push_back(std::move(combined[front[k]]));
            }
            break;
        }
    }

    std::vector<EvaluatedCandidate> extract_front() {
        // duplicates removed before the final front extraction
        std::vector<EvaluatedCandidate> unique;
        unique.reserve(population_.size());
        for (auto& member : population_) {
            const bool seen = std::any_of(unique.begin(), unique.end(), [&](const auto& u) {
                return u.candidate.passive_values == member.candidate.passive_values;
            });
            if (!seen) unique.push_back(std::move(member));
        }
        std::vector<ObjectiveTriple> objectives;
        objectives.reserve(unique.size());
        for (const auto& member : unique) objectives.push_back(member.objectives);
        const auto fronts = non_dominated_sort(objectives);
        std::vector<EvaluatedCandidate> front;
        front.reserve(fronts.front().size());
        for (const std::size_t i : fronts.front()) front.push_back(std::move(unique[i]));
        return front;
    }

    CandidateEvaluator<M>& ev_;
    NsgaConfig config_;
    Rng rng_;
    std::vector<EvaluatedCandidate> population_;
    std::vector<std::size_t> rank_;
    std::vector<double> crowd_;
};

}  // namespace detail

// Runs the NSGA-II counterfactual search for one sample and returns the
// final population's non-dominated front (deduplicated, deterministic for
// a fixed seed).  The original sample is injected into the initial
// population, so the front is never empty.
template <Predictor M>
std::vector<EvaluatedCandidate> nsga2_search(const M& model, const FpcaModel& fpca_model,
                                             const CurveGrid& grid,
                                             const std::vector<FeatureSpec>& specs,
                                             const Sample& original, double epsilon,
                                             const NsgaConfig& config,
                                             EvaluationObserver observer = {}) {
    config.validate();
    CandidateEvaluator<M> evaluator(model, fpca_model, grid, specs, original, epsilon,
                                    std::move(observer));
    detail::Search<M> search(evaluator, config);
    return search.run();
}

// Paper selection rule: among front members attaining the minimum g1,
// pick the minimum g2; ties broken by minimum g3, then lowest index.
inline std::size_t select_solution_index(const std::vector<EvaluatedCandidate>& front) {
    if (front.empty()) throw std::invalid_argument("select_solution: empty front");
    std::size_t best = 0;
    for (std::size_t i = 1; i < front.size(); ++i) {
        const auto& a = front[i].objectives;
        const auto& b = front[best].objectives;
        if (a.g1 != b.g1) {
            if (a.g1 < b.g1) best = i;
        } else if (a.g2 != b.g2) {
            if (a.g2 < b.g2) best = i;
        } else if (a.g3 < b.g3) {
            best = i;
        }
    }
    return best;
}

inline const EvaluatedCandidate& select_solution(const std::vector<EvaluatedCandidate>& front) {
    return front[select_solution_index(front)];
}

struct CfeResult {
    std::size_t sample_index = 0;
    Sample counterfactual;                       // active feature equals the original's
    std::vector<EvaluatedCandidate> pareto_front;
    std::size_t selected = 0;                    // index into pareto_front
    double achieved_distance = 0.0;
    bool success = false;                        // achieved_distance >= epsilon
    double epsilon = 0.0;
};

// Full per-sample counterfactual generation: search, then selection.
// The search seed is derived from (config.seed, sample_index) so results
// do not depend on scheduling order.
template <Predictor M>
CfeResult generate_cfe(const M& model, const FpcaModel& fpca_model, const CurveGrid& grid,
                       const Dataset& ds, std::size_t sample_index, double epsilon,
                       const NsgaConfig& config, EvaluationObserver observer = {}) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("generate_cfe: epsilon must be positive");
    const Sample& original = ds.samples.at(sample_index);
    NsgaConfig derived = config;
    derived.seed = derive_seed(config.seed, sample_index);

    CfeResult result;
    result.sample_index = sample_index;
    result.epsilon = epsilon;
    result.pareto_front = nsga2_search(model, fpca_model, grid, ds.specs, original, epsilon,
                                       derived, std::move(observer));
    result.selected = select_solution_index(result.pareto_front);
    const EvaluatedCandidate& chosen = result.pareto_front[result.selected];
    result.achieved_distance = chosen.distance;
    result.success = chosen.distance >= epsilon;

    result.counterfactual.index = sample_index;
    result.counterfactual.features = original.features;
    const auto passive = passive_indices(ds.n_features(), grid.active_index);
    for (std::size_t i = 0; i < passive.size(); ++i)
        result.counterfactual.features[passive[i]] = chosen.candidate.passive_values[i];
    return result;
}

}  // namespace cfe
}  // namespace respcf
