#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bellsim/inequalities.hpp"

using namespace bellsim;

namespace {

Angle rad(double x) { return Angle::from_radians(x); }

Correlator qm = [](Angle a, Angle b) { return qm_correlator(a, b); };

AngleDistribution random_atoms(RandomStream& rng) {
    std::size_t count = 1 + rng.next_index(5);
    AngleDistribution atoms;
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        double w = rng.next_double() + 0.01;
        atoms.push_back({rng.next_angle(), w});
        total += w;
    }
    for (auto& atom : atoms) atom.weight /= total;
    return atoms;
}

DeterministicLocalModel random_deterministic_model(RandomStream& rng) {
    double phase = rng.next_double() * 2 * kPi;
    int flip = rng.next_double() < 0.5 ? 1 : -1;
    Response response = [phase, flip](Angle x, Angle lam) {
        double c = std::cos(2.0 * (x.radians() - lam.radians()) - phase);
        return Outcome::from_int(c >= 0.0 ? flip : -flip);
    };
    return DeterministicLocalModel(random_atoms(rng), std::move(response));
}

LocalCausalModel random_local_causal_model(RandomStream& rng) {
    double ua = rng.next_double() * 2 - 1, pa = rng.next_double() * 2 * kPi;
    double ub = rng.next_double() * 2 - 1, pb = rng.next_double() * 2 * kPi;
    return LocalCausalModel(
        random_atoms(rng),
        [ua, pa](Angle a, Angle lam) {
            return 0.5 + 0.5 * ua * std::cos(2.0 * (a.radians() - lam.radians()) - pa);
        },
        [ub, pb](Angle b, Angle lam) {
            return 0.5 + 0.5 * ub * std::cos(2.0 * (b.radians() - lam.radians()) - pb);
        });
}

}  // namespace

TEST_CASE("bell1964: the quantum correlator violates at (0, pi/6, pi/3)") {
    auto triple = bell1964(qm, rad(0), rad(kPi / 6), rad(kPi / 3));
    CHECK(triple.lhs == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(triple.rhs == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(triple.violated);
}

TEST_CASE("bell1964: degenerate triple is not violated") {
    auto triple = bell1964(qm, rad(0.4), rad(0.4), rad(0.4));
    CHECK(triple.lhs == 0.0);
    CHECK(triple.rhs == doctest::Approx(0.0));
    CHECK_FALSE(triple.violated);
}

TEST_CASE("bell1964 soundness: deterministic local models never violate") {
    RandomStream rng(17, 0);
    for (int i = 0; i < 1000; ++i) {
        auto model = random_deterministic_model(rng);
        Correlator correlator = [&](Angle x, Angle y) {
            return exact_correlator(model, x, y);
        };
        auto triple = bell1964(correlator, rng.next_angle(), rng.next_angle(),
                               rng.next_angle());
        CHECK(triple.lhs <= triple.rhs + 1e-12);
    }
}

TEST_CASE("correlator-difference identity: exact residual vanishes") {
    RandomStream rng(29, 0);
    for (int i = 0; i < 1000; ++i) {
        auto model = random_deterministic_model(rng);
        double residual = expansion_residual(model, rng.next_angle(), rng.next_angle(),
                                       rng.next_angle());
        CHECK(residual <= 1e-12);
    }

    // two-atom polarizer-sign model at the canonical triple
    DeterministicLocalModel two_atom(
        {{rad(0.3), 0.5}, {rad(1.1), 0.5}},
        [](Angle x, Angle lam) { return polarizer_sign(x, lam); });
    CHECK(expansion_residual(two_atom, rad(0), rad(kPi / 6), rad(kPi / 3)) <= 1e-12);

    // single atom: no averaging, residual exactly zero
    DeterministicLocalModel one_atom(
        {{rad(0.7), 1.0}}, [](Angle x, Angle lam) { return polarizer_sign(x, lam); });
    CHECK(expansion_residual(one_atom, rad(0.1), rad(0.6), rad(1.3)) == 0.0);
}

TEST_CASE("chsh: quantum optimum and degenerate quadruple") {
    auto quad = chsh(qm, rad(0), rad(kPi / 4), rad(kPi / 8), rad(3 * kPi / 8));
    CHECK(quad.s == doctest::Approx(2.8284271247461903).epsilon(1e-14));

    auto degenerate = chsh(qm, rad(0.9), rad(0.9), rad(0.9), rad(0.9));
    CHECK(degenerate.s == doctest::Approx(2.0));
}

TEST_CASE("chsh soundness: random locally causal models stay below 2") {
    RandomStream rng(41, 0);
    for (int i = 0; i < 1000; ++i) {
        auto model = random_local_causal_model(rng);
        Correlator correlator = [&](Angle x, Angle y) {
            return exact_correlator(model, x, y);
        };
        auto quad = chsh(correlator, rng.next_angle(), rng.next_angle(), rng.next_angle(),
                         rng.next_angle());
        CHECK(quad.s <= 2.0 + 1e-12);
    }
}

TEST_CASE("brute-force local bounds match the known constants") {
    auto bell_bound = bell1964_local_bound();
    CHECK(bell_bound.max_margin == 0.0);

    auto chsh_bound = chsh_local_bound();
    CHECK(chsh_bound.max_s == 2.0);
}

TEST_CASE("violation search: bell1964 grid recovers the known violating structure") {
    auto result = search_bell1964(qm, 64);
    // the true maximum margin is 1/2; a 128-angle grid gets close but the
    // maximizer is not unique, so only the value is pinned down
    CHECK(result.margin >= 0.49);
    CHECK(result.margin <= 0.5 + 1e-12);
    CHECK(result.best.violated);
}

TEST_CASE("violation search: chsh grid reaches the quantum optimum") {
    auto result = search_chsh(qm, 64);
    CHECK(result.best.s >= 2.82);
    CHECK(result.best.s <= 2 * std::sqrt(2.0) + 1e-9);
}

TEST_CASE("violation search: a constant correlator finds nothing") {
    Correlator constant = [](Angle, Angle) { return 1.0; };
    auto bell = search_bell1964(constant, 8);
    CHECK(bell.margin <= 0.0);
    CHECK_FALSE(bell.best.violated);
    auto quad = search_chsh(constant, 8);
    CHECK(quad.best.s <= 2.0 + 1e-12);
}

TEST_CASE("violation search rejects too-coarse grids") {
    CHECK_THROWS_AS(search_bell1964(qm, 4), std::invalid_argument);
}

TEST_CASE("chsh with coinciding right settings degenerates to 2|E|") {
    Angle a = rad(0.2), a2 = rad(0.9), b = rad(1.3);
    auto quad = chsh(qm, a, a2, b, b);
    CHECK(quad.s == doctest::Approx(2 * std::abs(qm_correlator(a2, b))).epsilon(1e-13));
}
