#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "bellsim/statistics.hpp"

using namespace bellsim;

namespace {
Angle rad(double x) { return Angle::from_radians(x); }
}  // namespace

TEST_CASE("run_experiment: degenerate settings give exact estimates") {
    QmModel qm;
    auto result = run_experiment(qm, rad(0.4), rad(0.4), 1000, 3);
    CHECK(result.correlator.mean == 1.0);
    CHECK(result.correlator.stderror == 0.0);

    auto single = run_experiment(qm, rad(0.1), rad(0.9), 1, 3);
    CHECK(std::abs(single.correlator.mean) == 1.0);
    CHECK(single.correlator.stderror == 0.0);

    CHECK_THROWS_AS(run_experiment(qm, rad(0), rad(0), 0, 3), std::invalid_argument);
}

TEST_CASE("run_experiment: retro estimate lands within 5 standard errors") {
    RetroModel retro(RetroVariant::symmetric);
    const std::uint64_t n = 1000000;
    auto result = run_experiment(retro, rad(0), rad(kPi / 8), n, 7);
    double exact = std::cos(kPi / 4);
    double se = std::sqrt((1.0 - exact * exact) / n);  // 7.07e-4
    CHECK(se == doctest::Approx(7.071e-4).epsilon(1e-3));
    CHECK(std::abs(result.correlator.mean - exact) < 5 * se);
    CHECK(result.correlator.stderror == doctest::Approx(se).epsilon(0.01));
}

TEST_CASE("stderr uses the +/-1 product identity") {
    auto est = correlator_estimate_from_sum(600 - 400, 1000);  // mean 0.2
    CHECK(est.mean == doctest::Approx(0.2));
    CHECK(est.stderror == doctest::Approx(std::sqrt((1.0 - 0.04) / 1000)).epsilon(1e-12));
}

TEST_CASE("determinism: worker count does not change anything") {
    RetroModel retro(RetroVariant::symmetric);
    auto r1 = run_experiment(retro, rad(0.2), rad(0.9), 40000, 11, true, 1);
    auto r4 = run_experiment(retro, rad(0.2), rad(0.9), 40000, 11, true, 4);
    auto r7 = run_experiment(retro, rad(0.2), rad(0.9), 40000, 11, true, 7);
    CHECK(r1.correlator.mean == r4.correlator.mean);
    CHECK(r1.correlator.mean == r7.correlator.mean);
    CHECK(r1.mean_a == r4.mean_a);
    CHECK(r1.mean_b == r4.mean_b);
    REQUIRE(r1.trials.size() == r4.trials.size());
    for (std::size_t i = 0; i < r1.trials.size(); ++i) {
        CHECK(r1.trials[i].outcome_a == r4.trials[i].outcome_a);
        CHECK(r1.trials[i].outcome_b == r4.trials[i].outcome_b);
        CHECK(std::get<Angle>(r1.trials[i].hidden).radians() ==
              std::get<Angle>(r4.trials[i].hidden).radians());
    }
}

TEST_CASE("sweep: exact column traces the cosine, z vanishes at zero separation") {
    QmModel qm;
    std::array<double, 5> grid = {0, kPi / 8, kPi / 4, 3 * kPi / 8, kPi / 2};
    auto result = sweep(qm, grid, 20000, 9);
    REQUIRE(result.points.size() == 5);
    std::array<double, 5> expected = {1.0, std::cos(kPi / 4), 0.0, -std::cos(kPi / 4),
                                      -1.0};
    for (int i = 0; i < 5; ++i)
        CHECK(result.points[i].exact == doctest::Approx(expected[i]).epsilon(1e-13));
    CHECK(result.points[0].z == 0.0);
    CHECK(result.points[0].estimate.mean == 1.0);

    CHECK_THROWS_AS(sweep(qm, std::span<const double>{}, 100, 1), std::invalid_argument);
}

TEST_CASE("sweep: points use disjoint substreams and stay within 5 sigma") {
    RetroModel retro(RetroVariant::symmetric);
    std::array<double, 5> grid = {0, kPi / 8, kPi / 4, 3 * kPi / 8, kPi / 2};
    auto result = sweep(retro, grid, 100000, 123);
    for (const auto& p : result.points) CHECK(std::abs(p.z) < 5.0);
}

TEST_CASE("marginal estimates vanish for every qm-reproducing model") {
    QmModel qm;
    BellToyModel toy;
    RetroModel retro(RetroVariant::symmetric);
    RetroModel seq(RetroVariant::asymmetric_left_first);
    const std::uint64_t n = 200000;
    double bound = 5.0 / std::sqrt(static_cast<double>(n));
    for (const Model* model : {(const Model*)&qm, (const Model*)&toy, (const Model*)&retro,
                               (const Model*)&seq}) {
        auto result = run_experiment(*model, rad(0.3), rad(1.0), n, 31);
        CHECK(std::abs(result.mean_a) < bound);
        CHECK(std::abs(result.mean_b) < bound);
    }
}

TEST_CASE("estimator sanity: empirical joint frequencies match qm_joint") {
    QmModel qm;
    const std::uint64_t n = 1000000;
    // chi-square against the exact law, 3 dof, over a grid of settings
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            Angle a = rad(i * kPi / 10.0 + 0.04);
            Angle b = rad(j * kPi / 10.0 + 0.19);
            auto law = qm_joint(a, b);
            std::array<std::uint64_t, 4> counts{};
            auto result = run_experiment(qm, a, b, n, 1000 + i * 5 + j, false, 4);
            for (const auto& t : result.trials) {
                int slot = (t.outcome_a.value() > 0 ? 0 : 2) +
                           (t.outcome_b.value() > 0 ? 0 : 1);
                counts[slot]++;
            }
            double chi2 = 0.0;
            int slot = 0;
            for (Outcome a_out : {Outcome::plus(), Outcome::minus()})
                for (Outcome b_out : {Outcome::plus(), Outcome::minus()}) {
                    double expected = law.prob(a_out, b_out) * n;
                    if (expected > 0.0) {
                        double diff = counts[slot] - expected;
                        chi2 += diff * diff / expected;
                    } else {
                        CHECK(counts[slot] == 0);
                    }
                    ++slot;
                }
            CHECK(chi2 < 16.27);  // 99.9% quantile, 3 dof
        }
}
