#pragma once

// No-signaling verification: marginal scans across the distant setting,
// the exact lambda-inaccessibility argument, and the sequential-variant
// consistency report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "core.hpp"
#include "models.hpp"
#include "statistics.hpp"

namespace bellsim {

enum class Side { left, right };

struct ScanPoint {
    Angle scanned;
    double mean = 0.0;      // estimated marginal of the fixed side
    double stderror = 0.0;  // own-mean plug-in standard error
    double z = 0.0;         // against the pooled mean, pooled null variance
};

/// Scan of one side's outcome marginal while the other side's setting
/// varies. Under no-signaling the marginal is constant across the scan, so
/// each point is scored against the pooled mean with the pooled-variance
/// null: z_i = (m_i - pooled) / sqrt((1 - pooled^2)/n).
struct MarginalScan {
    Side fixed_side = Side::right;
    Angle fixed_setting;
    std::vector<ScanPoint> points;
    double pooled_mean = 0.0;
    double max_abs_z = 0.0;
};

inline MarginalScan nosignal_scan(const Model& model, Side fixed_side, Angle fixed_setting,
                                  std::span<const Angle> scan, std::uint64_t n,
                                  std::uint64_t seed, unsigned workers = 1) {
    if (n < 1000) throw std::invalid_argument("nosignal_scan: n must be >= 1000");
    if (scan.empty()) throw std::invalid_argument("nosignal_scan: empty scan list");

    MarginalScan result;
    result.fixed_side = fixed_side;
    result.fixed_setting = fixed_setting;

    std::uint64_t point_index = 0;
    for (Angle scanned : scan) {
        Angle a = fixed_side == Side::left ? fixed_setting : scanned;
        Angle b = fixed_side == Side::left ? scanned : fixed_setting;
        auto run = run_experiment(model, a, b, n, seed, false, workers,
                                  point_index * (std::uint64_t{1} << 32));
        double mean = fixed_side == Side::left ? run.mean_a : run.mean_b;
        double se = std::sqrt(std::max(0.0, 1.0 - mean * mean) / static_cast<double>(n));
        result.points.push_back(ScanPoint{scanned, mean, se, 0.0});
        ++point_index;
    }

    double pooled = 0.0;
    for (const auto& p : result.points) pooled += p.mean;
    pooled /= static_cast<double>(result.points.size());
    result.pooled_mean = pooled;

    double null_se =
        std::sqrt(std::max(0.0, 1.0 - pooled * pooled) / static_cast<double>(n));
    for (auto& p : result.points) {
        p.z = null_se > 0.0 ? (p.mean - pooled) / null_se
                            : (p.mean == pooled ? 0.0 : std::numeric_limits<double>::infinity());
        result.max_abs_z = std::max(result.max_abs_z, std::abs(p.z));
    }
    return result;
}

/// Exact distinguishing advantages for the inaccessibility argument: how
/// well the left setting (a0 vs a1, equal priors) can be guessed from the
/// hidden variable, versus from B's outcome alone. Both are half the total
/// variation distance of the respective laws, by the optimal-guesser bound.
struct LeakReport {
    double advantage_given_lambda = 0.0;
    double advantage_given_b_only = 0.0;
};

inline LeakReport lambda_leak(const RetroModel& model, Angle a0, Angle a1, Angle b) {
    if (model.variant() != RetroVariant::symmetric)
        throw std::invalid_argument("lambda_leak: symmetric variant required");

    const AngleDistribution law0 = model.lambda_law(a0, b);
    const AngleDistribution law1 = model.lambda_law(a1, b);

    auto weight_at = [](const AngleDistribution& law, Angle x) {
        for (const auto& atom : law)
            if (angular_distance(atom.angle, x) <= kTol) return atom.weight;
        return 0.0;
    };

    // total variation over the union support
    AngleDistribution support = law0;
    for (const auto& atom : law1)
        if (weight_at(support, atom.angle) == 0.0) support.push_back(atom);
    double tv_lambda = 0.0;
    for (const auto& atom : support)
        tv_lambda += std::abs(weight_at(law0, atom.angle) - weight_at(law1, atom.angle));
    tv_lambda /= 2.0;

    double pb0 = model.joint(a0, b).marginal_b();
    double pb1 = model.joint(a1, b).marginal_b();
    // B is +/-1-valued; TV of its two laws is |<B>_0 - <B>_1| / 2
    double tv_b = std::abs(pb0 - pb1) / 2.0;

    return LeakReport{tv_lambda / 2.0, tv_b / 2.0};
}

/// Exact checks of the asymmetric (left-measured-first) variant on a grid:
/// the lambda law never reads b, both marginals vanish, and the correlator
/// is the cosine, all within kTol.
struct SequentialReport {
    bool lambda_law_independent_of_b = true;
    double max_marginal_residual = 0.0;
    double max_correlator_residual = 0.0;
    bool pass = false;
};

inline SequentialReport sequential_consistency(const RetroModel& model) {
    if (model.variant() != RetroVariant::asymmetric_left_first)
        throw std::invalid_argument("sequential_consistency: asymmetric variant required");

    SequentialReport report;
    for (int i = 0; i < 5; ++i) {
        Angle a = Angle::from_radians(i * kPi / 10.0 + 0.03);
        AngleDistribution reference = model.lambda_law(a, Angle::from_radians(0.0));
        for (int j = 0; j < 5; ++j) {
            Angle b = Angle::from_radians(j * kPi / 10.0 + 0.11);

            AngleDistribution law = model.lambda_law(a, b);
            if (law.size() != reference.size()) report.lambda_law_independent_of_b = false;
            for (std::size_t k = 0; k < std::min(law.size(), reference.size()); ++k) {
                if (angular_distance(law[k].angle, reference[k].angle) > kTol ||
                    std::abs(law[k].weight - reference[k].weight) > kTol)
                    report.lambda_law_independent_of_b = false;
            }

            JointLaw joint = model.joint(a, b);
            report.max_marginal_residual =
                std::max({report.max_marginal_residual, std::abs(joint.marginal_a()),
                          std::abs(joint.marginal_b())});
            report.max_correlator_residual =
                std::max(report.max_correlator_residual,
                         std::abs(joint.correlator() - qm_correlator(a, b)));
        }
    }
    report.pass = report.lambda_law_independent_of_b &&
                  report.max_marginal_residual <= kTol &&
                  report.max_correlator_residual <= kTol;
    return report;
}

}  // namespace bellsim
