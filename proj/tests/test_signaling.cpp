#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "bellsim/signaling.hpp"

using namespace bellsim;

namespace {

Angle rad(double x) { return Angle::from_radians(x); }

std::vector<Angle> scan_grid(Angle base, int points) {
    std::vector<Angle> scan;
    for (int i = 0; i < points; ++i)
        scan.push_back(rad(base.radians() + i * kPi / points));
    return scan;
}

}  // namespace

TEST_CASE("nosignal scan: qm-reproducing models pass") {
    QmModel qm;
    RetroModel retro(RetroVariant::symmetric);
    const std::uint64_t n = 100000;
    for (const Model* model : {(const Model*)&qm, (const Model*)&retro}) {
        auto scan = scan_grid(rad(0), 8);
        auto result = nosignal_scan(*model, Side::right, rad(0), scan, n, 51, 4);
        CHECK(result.max_abs_z < 5.0);
        for (const auto& p : result.points) CHECK(std::abs(p.mean) <= 1.0);
    }
}

TEST_CASE("nosignal scan: the single-branch fixture fails loudly") {
    SingleBranchModel fixture;
    // fix b = 0, scan a over multiples of pi/8; at a = 0, <B> = cos(2a) = 1
    auto scan = scan_grid(rad(0), 8);
    auto result = nosignal_scan(fixture, Side::right, rad(0), scan, 100000, 9);
    CHECK(result.max_abs_z > 20.0);
    // the failing point is the one with cos(2a - 2b) = 1
    CHECK(std::abs(result.points[0].mean - 1.0) < 1e-12);
}

TEST_CASE("nosignal scan: argument validation") {
    QmModel qm;
    auto scan = scan_grid(rad(0), 4);
    CHECK_THROWS_AS(nosignal_scan(qm, Side::left, rad(0), scan, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(nosignal_scan(qm, Side::left, rad(0), {}, 10000, 1),
                    std::invalid_argument);
}

TEST_CASE("lambda leak: the four-atom laws are distinguishable, B's marginal is not") {
    RetroModel retro(RetroVariant::symmetric);

    auto report = lambda_leak(retro, rad(0), rad(kPi / 4), rad(kPi / 3));
    CHECK(report.advantage_given_lambda == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(report.advantage_given_b_only <= 1e-12);

    auto same = lambda_leak(retro, rad(0.6), rad(0.6), rad(1.5));
    CHECK(same.advantage_given_lambda == 0.0);

    CHECK_THROWS_AS(
        lambda_leak(RetroModel(RetroVariant::asymmetric_left_first), rad(0), rad(1), rad(2)),
        std::invalid_argument);
}

TEST_CASE("lambda leak: advantage by exhaustive guesser enumeration") {
    // oracle: enumerate both four-atom laws explicitly and maximize the
    // success probability over deterministic guessers atom by atom
    RetroModel retro(RetroVariant::symmetric);
    RandomStream rng(63, 0);
    for (int i = 0; i < 200; ++i) {
        Angle a0 = rng.next_angle(), a1 = rng.next_angle(), b = rng.next_angle();
        auto law0 = retro.lambda_law(a0, b);
        auto law1 = retro.lambda_law(a1, b);

        AngleDistribution support = law0;
        auto weight = [](const AngleDistribution& law, Angle x) {
            for (const auto& atom : law)
                if (angular_distance(atom.angle, x) <= kTol) return atom.weight;
            return 0.0;
        };
        for (const auto& atom : law1)
            if (weight(support, atom.angle) == 0.0) support.push_back(atom);

        double success = 0.0;  // optimal guesser picks the likelier origin per atom
        for (const auto& atom : support)
            success += 0.5 * std::max(weight(law0, atom.angle), weight(law1, atom.angle));

        auto report = lambda_leak(retro, a0, a1, b);
        CHECK(report.advantage_given_lambda ==
              doctest::Approx(success - 0.5).epsilon(1e-12));
    }
}

TEST_CASE("lambda leak: some configuration reaches advantage >= 0.2") {
    RetroModel retro(RetroVariant::symmetric);
    auto report = lambda_leak(retro, rad(0), rad(kPi / 4), rad(kPi / 3));
    CHECK(report.advantage_given_lambda >= 0.2);
}

TEST_CASE("sequential consistency: the asymmetric variant checks out exactly") {
    RetroModel seq(RetroVariant::asymmetric_left_first);
    auto report = sequential_consistency(seq);
    CHECK(report.lambda_law_independent_of_b);
    CHECK(report.max_marginal_residual <= 1e-12);
    CHECK(report.max_correlator_residual <= 1e-12);
    CHECK(report.pass);

    CHECK_THROWS_AS(sequential_consistency(RetroModel(RetroVariant::symmetric)),
                    std::invalid_argument);
}

TEST_CASE("sequential variant: perfect correlation at equal settings") {
    RetroModel seq(RetroVariant::asymmetric_left_first);
    CHECK(seq.joint(rad(0.8), rad(0.8)).correlator() == doctest::Approx(1.0));
}
