#pragma once

// Population-based design search: a univariate-normal estimation of
// distribution algorithm with penalty fitness and optional select generation,
// and a genetic-algorithm baseline sharing the same evaluation machinery.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "continuum/core.hpp"
#include "continuum/parallel.hpp"
#include "continuum/rng.hpp"

namespace continuum {

enum class Algorithm { Eda, Ga };

inline const char* algorithm_name(Algorithm a) { return a == Algorithm::Eda ? "eda" : "ga"; }

struct OptimizerParams {
    std::size_t population_size = 100;
    double truncation_rate = 0.5;
    std::size_t max_iterations = 20;
    double penalty = 0.33;
    bool select_generation = false;
    std::size_t select_max_trials = 10000;
    std::uint64_t seed = 0;
    double crossover_rate = 0.9;
    double mutation_rate = 0.1;

    void validate() const {
        if (population_size < 2) throw ParameterError("population_size must be at least 2");
        if (!(truncation_rate > 0.0 && truncation_rate <= 1.0)) throw ParameterError("truncation_rate must be in (0, 1]");
        if (max_iterations < 1) throw ParameterError("max_iterations must be at least 1");
        if (!(penalty >= 0.0)) throw ParameterError("penalty must be non-negative");
        if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ParameterError("crossover_rate must be in [0, 1]");
        if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ParameterError("mutation_rate must be in [0, 1]");
        if (select_generation && select_max_trials == 0) throw ParameterError("select_max_trials must be positive");
    }
};

/// Objective and reachability fraction of one candidate.
struct Evaluation {
    double objective = 0.0;
    double theta = 0.0;
};

/// Black-box problem seen by the optimizer. `evaluate` receives the run's
/// evaluation seed so every candidate is scored against the same random
/// streams. `cheap_objective`, when set, gives the objective without a
/// reachability analysis and enables select generation.
struct OptimizationProblem {
    std::vector<double> lower, upper;
    double alpha = 1.0;
    std::function<Evaluation(const std::vector<double>&, std::uint64_t)> evaluate;
    std::function<double(const std::vector<double>&)> cheap_objective;

    std::size_t dimension() const { return lower.size(); }

    void validate() const {
        if (lower.empty() || lower.size() != upper.size()) throw ParameterError("bounds must be non-empty and matched");
        for (std::size_t i = 0; i < lower.size(); ++i) {
            if (!(lower[i] <= upper[i])) throw ParameterError("lower bound exceeds upper bound for variable " + std::to_string(i));
        }
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must be in (0, 1]");
        if (!evaluate) throw ParameterError("problem has no evaluation function");
    }
};

struct Solution {
    std::vector<double> x;
    double objective = 0.0;
    double theta = 0.0;
    double fitness = 0.0;
    bool feasible = false;
};

inline double penalty_fitness(double objective, double theta, double alpha, double penalty) {
    return objective + penalty * std::max(0.0, alpha - theta);
}

inline Solution make_solution(std::vector<double> x, const Evaluation& e, double alpha, double penalty) {
    Solution s;
    s.x = std::move(x);
    s.objective = e.objective;
    s.theta = e.theta;
    s.fitness = penalty_fitness(e.objective, e.theta, alpha, penalty);
    s.feasible = e.theta >= alpha;
    return s;
}

struct UnivariateNormalModel {
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<double> sigma_floor;
};

inline std::vector<double> default_sigma_floor(const std::vector<double>& lower, const std::vector<double>& upper) {
    std::vector<double> floor(lower.size());
    for (std::size_t i = 0; i < lower.size(); ++i) floor[i] = 1e-3 * (upper[i] - lower[i]);
    return floor;
}

inline std::vector<std::vector<double>> init_population(const std::vector<double>& lower,
                                                        const std::vector<double>& upper, std::size_t n,
                                                        std::uint64_t seed) {
    if (n == 0) throw ParameterError("population size must be positive");
    Rng rng(derive_seed(seed, 0x696e6974)); // shared by every algorithm for a given seed
    std::vector<std::vector<double>> population(n, std::vector<double>(lower.size()));
    for (auto& x : population) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(lower[i], upper[i]);
    }
    return population;
}

/// Best floor(rate * |P|) solutions by fitness; ties go to the lower
/// objective, then to the earlier index.
inline std::vector<Solution> truncation_select(const std::vector<Solution>& population, double rate) {
    if (!(rate > 0.0 && rate <= 1.0)) throw ParameterError("truncation rate must be in (0, 1]");
    const auto keep = static_cast<std::size_t>(std::floor(rate * static_cast<double>(population.size()) + 1e-9));
    if (keep < 1) throw ParameterError("truncation selects no solutions");
    std::vector<std::size_t> order(population.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& sa = population[a];
        const auto& sb = population[b];
        if (sa.fitness != sb.fitness) return sa.fitness < sb.fitness;
        return sa.objective < sb.objective;
    });
    std::vector<Solution> selected;
    selected.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) selected.push_back(population[order[k]]);
    return selected;
}

/// Per-variable mean and maximum-likelihood variance, floored at sigma_floor^2.
inline UnivariateNormalModel fit_model(const std::vector<Solution>& selected, const std::vector<double>& sigma_floor) {
    if (selected.size() < 2) throw ParameterError("fitting the model needs at least 2 solutions");
    const std::size_t d = selected.front().x.size();
    if (sigma_floor.size() != d) throw ParameterError("sigma floor length does not match the dimension");
    UnivariateNormalModel model;
    model.mean.assign(d, 0.0);
    model.variance.assign(d, 0.0);
    model.sigma_floor = sigma_floor;
    const double n = static_cast<double>(selected.size());
    for (const auto& s : selected) {
        for (std::size_t i = 0; i < d; ++i) model.mean[i] += s.x[i];
    }
    for (auto& m : model.mean) m /= n;
    for (const auto& s : selected) {
        for (std::size_t i = 0; i < d; ++i) {
            const double dev = s.x[i] - model.mean[i];
            model.variance[i] += dev * dev;
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        model.variance[i] = std::max(model.variance[i] / n, sigma_floor[i] * sigma_floor[i]);
    }
    return model;
}

/// Box-Muller draw per variable, clipped into the bounds.
inline std::vector<double> sample_model(const UnivariateNormalModel& model, const std::vector<double>& lower,
                                        const std::vector<double>& upper, Rng& rng) {
    std::vector<double> x(model.mean.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double draw = model.mean[i] + std::sqrt(model.variance[i]) * rng.normal();
        x[i] = std::clamp(draw, lower[i], upper[i]);
    }
    return x;
}

struct SelectAuditEntry {
    std::size_t iteration = 0;
    double objective = 0.0;
    double f_best = 0.0;
    bool accepted = false;
};

/// Samples `n` candidates, keeping only draws whose objective beats f_best
/// until the population is full or `max_trials` draws were spent; the rest
/// is filled by plain sampling. With f_best = +inf this is plain sampling.
inline std::vector<std::vector<double>> select_generation(
    const UnivariateNormalModel& model, const std::vector<double>& lower, const std::vector<double>& upper,
    double f_best, std::size_t n, std::size_t max_trials, const std::function<double(const std::vector<double>&)>& objective,
    Rng& rng, std::vector<SelectAuditEntry>* audit = nullptr, std::size_t iteration = 0) {
    if (!objective) throw ParameterError("select generation needs an objective that is cheap to evaluate");
    std::vector<std::vector<double>> out;
    out.reserve(n);
    if (std::isfinite(f_best)) {
        for (std::size_t trial = 0; trial < max_trials && out.size() < n; ++trial) {
            auto x = sample_model(model, lower, upper, rng);
            const double f = objective(x);
            const bool accept = f < f_best;
            if (audit) audit->push_back({iteration, f, f_best, accept});
            if (accept) out.push_back(std::move(x));
        }
    }
    while (out.size() < n) out.push_back(sample_model(model, lower, upper, rng));
    return out;
}

/// Truncation-selected parents, uniform crossover, uniform-reset mutation.
inline std::vector<std::vector<double>> ga_step(const std::vector<Solution>& population, const OptimizerParams& params,
                                                const std::vector<double>& lower, const std::vector<double>& upper,
                                                Rng& rng) {
    const auto parents = truncation_select(population, params.truncation_rate);
    const std::size_t d = lower.size();
    std::vector<std::vector<double>> children;
    children.reserve(params.population_size);
    while (children.size() < params.population_size) {
        std::vector<double> a = parents[rng.index(parents.size())].x;
        std::vector<double> b = parents[rng.index(parents.size())].x;
        if (rng.uniform() < params.crossover_rate) {
            for (std::size_t i = 0; i < d; ++i) {
                if (rng.uniform() < 0.5) std::swap(a[i], b[i]);
            }
        }
        for (auto* child : {&a, &b}) {
            for (std::size_t i = 0; i < d; ++i) {
                if (rng.uniform() < params.mutation_rate) (*child)[i] = rng.uniform(lower[i], upper[i]);
                (*child)[i] = std::clamp((*child)[i], lower[i], upper[i]);
            }
        }
        children.push_back(std::move(a));
        if (children.size() < params.population_size) children.push_back(std::move(b));
    }
    return children;
}

struct IterationLog {
    std::size_t iteration = 0;
    double best_feasible_objective = std::numeric_limits<double>::infinity();
    double best_fitness = std::numeric_limits<double>::infinity();
    double mean_theta = 0.0;
    std::vector<double> mean;  // model parameters (EDA only)
    std::vector<double> sigma;
};

struct RunState {
    Algorithm algorithm = Algorithm::Eda;
    std::vector<Solution> population;
    std::optional<UnivariateNormalModel> model;
    std::optional<Solution> best_feasible;
    double best_objective = std::numeric_limits<double>::infinity();
    std::vector<IterationLog> log;
    std::vector<SelectAuditEntry> select_audit;
    std::size_t evaluations = 0; // distinct candidates scored
};

namespace detail {

inline std::string bits_key(const std::vector<double>& x) {
    std::string key(x.size() * sizeof(double), '\0');
    std::memcpy(key.data(), x.data(), key.size());
    return key;
}

} // namespace detail

/// Scores candidates once per distinct bit pattern of x.
class EvaluationCache {
public:
    EvaluationCache(const OptimizationProblem& problem, std::uint64_t seed) : problem_(problem), seed_(seed) {}

    std::vector<Evaluation> evaluate(const std::vector<std::vector<double>>& xs) {
        std::vector<std::size_t> missing;
        std::unordered_map<std::string, std::size_t> pending;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const auto key = detail::bits_key(xs[k]);
            if (cache_.count(key) || pending.count(key)) continue;
            pending.emplace(key, missing.size());
            missing.push_back(k);
        }
        std::vector<Evaluation> fresh(missing.size());
        parallel_for(missing.size(), [&](std::size_t m) { fresh[m] = problem_.evaluate(xs[missing[m]], seed_); });
        for (std::size_t m = 0; m < missing.size(); ++m) cache_.emplace(detail::bits_key(xs[missing[m]]), fresh[m]);
        std::vector<Evaluation> out;
        out.reserve(xs.size());
        for (const auto& x : xs) out.push_back(cache_.at(detail::bits_key(x)));
        return out;
    }

    std::size_t size() const { return cache_.size(); }

private:
    const OptimizationProblem& problem_;
    std::uint64_t seed_;
    std::unordered_map<std::string, Evaluation> cache_;
};

/// init -> [evaluate -> select -> fit/vary -> generate] for max_iterations
/// generations. One log row per evaluated generation.
inline RunState run(const OptimizationProblem& problem, const OptimizerParams& params, Algorithm algorithm) {
    problem.validate();
    params.validate();
    if (params.select_generation && algorithm != Algorithm::Eda) {
        throw ParameterError("select generation applies to the EDA only");
    }
    if (params.select_generation && !problem.cheap_objective) {
        throw ParameterError("select generation needs an objective computable without reachability analysis");
    }
    const auto& lower = problem.lower;
    const auto& upper = problem.upper;
    const auto floor = default_sigma_floor(lower, upper);
    EvaluationCache cache(problem, derive_seed(params.seed, 0x6576616c));
    Rng rng(derive_seed(params.seed, algorithm == Algorithm::Eda ? 0x656461 : 0x6761));

    RunState state;
    state.algorithm = algorithm;
    auto xs = init_population(lower, upper, params.population_size, params.seed);
    for (std::size_t it = 0; it < params.max_iterations; ++it) {
        const auto scores = cache.evaluate(xs);
        state.population.clear();
        for (std::size_t k = 0; k < xs.size(); ++k) {
            state.population.push_back(make_solution(std::move(xs[k]), scores[k], problem.alpha, params.penalty));
        }
        IterationLog row;
        row.iteration = it;
        double theta_sum = 0.0;
        for (const auto& s : state.population) {
            theta_sum += s.theta;
            row.best_fitness = std::min(row.best_fitness, s.fitness);
            if (s.feasible && (!state.best_feasible || s.objective < state.best_feasible->objective)) {
                state.best_feasible = s;
                state.best_objective = s.objective;
            }
        }
        row.mean_theta = theta_sum / static_cast<double>(state.population.size());
        row.best_feasible_objective = state.best_objective;

        const bool last = it + 1 == params.max_iterations;
        if (algorithm == Algorithm::Eda) {
            state.model = fit_model(truncation_select(state.population, params.truncation_rate), floor);
            row.mean = state.model->mean;
            for (double v : state.model->variance) row.sigma.push_back(std::sqrt(v));
            if (!last) {
                if (params.select_generation) {
                    xs = select_generation(*state.model, lower, upper, state.best_objective, params.population_size,
                                           params.select_max_trials, problem.cheap_objective, rng,
                                           &state.select_audit, it + 1);
                } else {
                    xs.clear();
                    for (std::size_t k = 0; k < params.population_size; ++k) {
                        xs.push_back(sample_model(*state.model, lower, upper, rng));
                    }
                }
            }
        } else if (!last) {
            xs = ga_step(state.population, params, lower, upper, rng);
        }
        state.log.push_back(std::move(row));
    }
    state.evaluations = cache.size();
    return state;
}

// ---------------------------------------------------------------------------
// Serialization of iteration logs

namespace detail {
inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace detail

inline std::string log_to_csv(const RunState& state, std::size_t dimension) {
    std::string out = "iteration,best_feasible_objective,best_fitness,mean_theta";
    const bool model = state.algorithm == Algorithm::Eda;
    if (model) {
        for (std::size_t i = 1; i <= dimension; ++i) out += ",mu_" + std::to_string(i);
        for (std::size_t i = 1; i <= dimension; ++i) out += ",sigma_" + std::to_string(i);
    }
    out += '\n';
    for (const auto& row : state.log) {
        out += std::to_string(row.iteration) + ',' + detail::format_number(row.best_feasible_objective) + ',' +
               detail::format_number(row.best_fitness) + ',' + detail::format_number(row.mean_theta);
        if (model) {
            for (double v : row.mean) out += ',' + detail::format_number(v);
            for (double v : row.sigma) out += ',' + detail::format_number(v);
        }
        out += '\n';
    }
    return out;
}

} // namespace continuum
