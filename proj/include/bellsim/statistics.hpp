#pragma once

// Monte Carlo experiment runner and moment estimators. Every trial uses its
// own counter-based substream keyed by (seed, trial index), and the sums of
// +/-1 outcomes are accumulated as integers, so the results are identical
// for any worker count and any execution order.

#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "core.hpp"
#include "models.hpp"

namespace bellsim {

/// Sample mean of the +/-1 product with its standard error. Since AB is
/// +/-1-valued, var(AB) = 1 - E^2 exactly, and the plug-in estimate needs
/// no second pass.
struct CorrelatorEstimate {
    double mean = 0.0;
    double stderror = 0.0;
    std::uint64_t n = 0;
};

inline CorrelatorEstimate correlator_estimate_from_sum(std::int64_t sum_products,
                                                       std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("correlator estimate needs n >= 1");
    double mean = static_cast<double>(sum_products) / static_cast<double>(n);
    double var = std::max(0.0, 1.0 - mean * mean);
    return CorrelatorEstimate{mean, std::sqrt(var / static_cast<double>(n)), n};
}

struct ExperimentResult {
    double mean_a = 0.0;
    double mean_b = 0.0;
    CorrelatorEstimate correlator;
    TrialSet trials;
};

/// Run n trials of the model at (a, b). Trials partition across workers by
/// index range; all accumulation is integer, so the output is bit-identical
/// to a single-worker run.
inline ExperimentResult run_experiment(const Model& model, Angle a, Angle b,
                                       std::uint64_t n, std::uint64_t seed,
                                       bool record_hidden = false, unsigned workers = 1,
                                       std::uint64_t stream_base = 0) {
    if (n == 0) throw std::invalid_argument("run_experiment: n must be >= 1");
    if (workers == 0) workers = 1;

    ExperimentResult result;
    result.trials.resize(n);

    struct PartialSums {
        std::int64_t sum_a = 0, sum_b = 0, sum_ab = 0;
    };
    std::vector<PartialSums> partial(workers);

    auto run_range = [&](unsigned w, std::uint64_t lo, std::uint64_t hi) {
        PartialSums sums;
        for (std::uint64_t i = lo; i < hi; ++i) {
            RandomStream stream(seed, stream_base + i);
            Trial t = model.sample_trial(i, a, b, stream, record_hidden);
            sums.sum_a += t.outcome_a.value();
            sums.sum_b += t.outcome_b.value();
            sums.sum_ab += t.product();
            result.trials[i] = std::move(t);
        }
        partial[w] = sums;
    };

    if (workers == 1) {
        run_range(0, 0, n);
    } else {
        std::vector<std::thread> pool;
        std::uint64_t chunk = (n + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            std::uint64_t lo = std::min<std::uint64_t>(w * chunk, n);
            std::uint64_t hi = std::min<std::uint64_t>(lo + chunk, n);
            pool.emplace_back(run_range, w, lo, hi);
        }
        for (auto& t : pool) t.join();
    }

    PartialSums total;
    for (const auto& p : partial) {
        total.sum_a += p.sum_a;
        total.sum_b += p.sum_b;
        total.sum_ab += p.sum_ab;
    }
    result.mean_a = static_cast<double>(total.sum_a) / static_cast<double>(n);
    result.mean_b = static_cast<double>(total.sum_b) / static_cast<double>(n);
    result.correlator = correlator_estimate_from_sum(total.sum_ab, n);
    return result;
}

struct SweepPoint {
    double separation = 0.0;
    CorrelatorEstimate estimate;
    double exact = 0.0;
    double z = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
};

/// Trace the correlator against angular separation: for each delta, run at
/// (a = 0, b = delta) and attach the model's exact correlator and the
/// z-score of the estimate. Each point gets a disjoint block of substreams.
inline SweepResult sweep(const Model& model, std::span<const double> separations,
                         std::uint64_t n_per_point, std::uint64_t seed,
                         unsigned workers = 1) {
    if (separations.empty()) throw std::invalid_argument("sweep: empty separation list");
    SweepResult result;
    Angle a = Angle::from_radians(0.0);
    std::uint64_t point_index = 0;
    for (double delta : separations) {
        Angle b = Angle::from_radians(delta);
        auto run = run_experiment(model, a, b, n_per_point, seed, false, workers,
                                  point_index * (std::uint64_t{1} << 32));
        double exact = exact_correlator(model, a, b);
        double z = run.correlator.stderror > 0.0
                       ? (run.correlator.mean - exact) / run.correlator.stderror
                       : 0.0;
        result.points.push_back(SweepPoint{delta, run.correlator, exact, z});
        ++point_index;
    }
    return result;
}

}  // namespace bellsim
