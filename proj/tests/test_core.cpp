#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bellsim/core.hpp"

using namespace bellsim;

namespace {

// independent oracle: distance on the mod-pi circle by brute force over
// integer-shifted representatives
double distance_oracle(double x, double y) {
    double best = 1e300;
    for (int k = -8; k <= 8; ++k) best = std::min(best, std::abs(x - y + k * kPi));
    return best;
}

}  // namespace

TEST_CASE("canonicalize maps into [0, pi) and is periodic") {
    CHECK(Angle::from_radians(kPi).radians() == 0.0);
    CHECK(Angle::from_radians(-kPi / 4).radians() == doctest::Approx(3 * kPi / 4));
    // oracle: subtract pi once, check by re-adding it
    double reduced = Angle::from_radians(4.0).radians();
    CHECK(reduced == doctest::Approx(0.8584073464102069).epsilon(1e-15));
    CHECK(Angle::from_radians(reduced + kPi).radians() == doctest::Approx(reduced));
}

TEST_CASE("canonicalize rejects non-finite input") {
    CHECK_THROWS_AS(Angle::from_radians(std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(Angle::from_radians(INFINITY), std::invalid_argument);
}

TEST_CASE("canonicalization is exactly idempotent") {
    RandomStream rng(12345, 0);
    for (int i = 0; i < 10000; ++i) {
        double x = (rng.next_double() - 0.5) * 200.0;
        double once = Angle::from_radians(x).radians();
        CHECK(Angle::from_radians(once).radians() == once);
        CHECK(once >= 0.0);
        CHECK(once < kPi);
    }
}

TEST_CASE("angular distance: known values") {
    CHECK(angular_distance(Angle::from_radians(0), Angle::from_radians(kPi / 2)) ==
          doctest::Approx(kPi / 2));
    // wrap-around case, frozen from the brute-force oracle
    double d = angular_distance(Angle::from_radians(0.1), Angle::from_radians(3.1));
    CHECK(d == doctest::Approx(0.14159265358979312).epsilon(1e-15));
    CHECK(d == doctest::Approx(distance_oracle(0.1, 3.1)));
    CHECK(angular_distance(Angle::from_radians(1.234), Angle::from_radians(1.234)) == 0.0);
}

TEST_CASE("angular distance: symmetry and range, against the oracle") {
    RandomStream rng(99, 0);
    for (int i = 0; i < 10000; ++i) {
        Angle x = rng.next_angle();
        Angle y = rng.next_angle();
        double d = angular_distance(x, y);
        CHECK(d == angular_distance(y, x));
        CHECK(d >= 0.0);
        CHECK(d <= kPi / 2);
        CHECK(d == doctest::Approx(distance_oracle(x.radians(), y.radians())).epsilon(1e-12));
    }
}

TEST_CASE("angular distance satisfies the circle triangle inequality") {
    RandomStream rng(7, 0);
    for (int i = 0; i < 5000; ++i) {
        Angle x = rng.next_angle(), y = rng.next_angle(), z = rng.next_angle();
        CHECK(angular_distance(x, z) <=
              angular_distance(x, y) + angular_distance(y, z) + 1e-12);
    }
}

TEST_CASE("polarizer sign: boundary and symmetry") {
    Angle b = Angle::from_radians(0.8);
    CHECK(polarizer_sign(b, b) == Outcome::plus());
    CHECK(polarizer_sign(Angle::from_radians(0), Angle::from_radians(kPi / 2)) ==
          Outcome::minus());
    // distance exactly pi/4: strict comparison puts the tie on -1
    CHECK(polarizer_sign(Angle::from_radians(0), Angle::from_radians(kPi / 4)) ==
          Outcome::minus());

    RandomStream rng(3, 0);
    for (int i = 0; i < 10000; ++i) {
        Angle c = rng.next_angle(), lam = rng.next_angle();
        CHECK(polarizer_sign(c, lam) == polarizer_sign(lam, c));
    }
}

TEST_CASE("outcome: +/-1 only, square is one") {
    CHECK(Outcome::from_int(1).value() == 1);
    CHECK(Outcome::from_int(-1).value() == -1);
    CHECK_THROWS_AS(Outcome::from_int(0), std::invalid_argument);
    CHECK(Outcome::plus() * Outcome::plus() == 1);
    CHECK(Outcome::minus() * Outcome::minus() == 1);
    CHECK(Outcome::plus() * Outcome::minus() == -1);
}

TEST_CASE("random streams are pure functions of (seed, stream id)") {
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        RandomStream s1(42, trial), s2(42, trial);
        for (int i = 0; i < 16; ++i) CHECK(s1.next_u64() == s2.next_u64());
    }
    // different stream ids diverge
    RandomStream s1(42, 0), s2(42, 1);
    CHECK(s1.next_u64() != s2.next_u64());
}

TEST_CASE("random stream doubles are uniform enough on [0,1)") {
    RandomStream rng(2024, 17);
    const int n = 200000;
    int buckets[10] = {};
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        buckets[static_cast<int>(u * 10)]++;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    double chi2 = 0.0;
    for (int count : buckets) {
        double expected = n / 10.0;
        chi2 += (count - expected) * (count - expected) / expected;
    }
    CHECK(chi2 < 27.88);  // 99.9% quantile, 9 dof
}

TEST_CASE("next_index covers its range uniformly") {
    RandomStream rng(5, 5);
    int counts[4] = {};
    for (int i = 0; i < 40000; ++i) counts[rng.next_index(4)]++;
    for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
}
