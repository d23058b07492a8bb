#pragma once

// Angles modulo pi, +/-1 outcomes, trial records, and the counter-based
// random-stream contract shared by every sampler in the library.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <variant>
#include <vector>

namespace bellsim {

inline constexpr double kPi = std::numbers::pi_v<double>;

/// Absolute tolerance for equality of derived angles and probabilities.
inline constexpr double kTol = 1e-12;

/// A polarizer orientation: a double in [0, pi), canonical modulo pi.
class Angle {
public:
    constexpr Angle() = default;

    /// Reduce x into [0, pi). Any integer multiple of pi added to x gives
    /// the same representative. Rejects non-finite input.
    static Angle from_radians(double x) {
        if (!std::isfinite(x))
            throw std::invalid_argument("Angle: non-finite radians");
        double r = std::fmod(x, kPi);
        if (r < 0.0) r += kPi;
        if (r >= kPi) r = 0.0;  // fmod/rounding can land exactly on pi
        return Angle(r);
    }

    double radians() const { return value_; }

    friend bool operator==(Angle lhs, Angle rhs) { return lhs.value_ == rhs.value_; }
    friend bool operator!=(Angle lhs, Angle rhs) { return !(lhs == rhs); }

private:
    explicit constexpr Angle(double v) : value_(v) {}
    double value_ = 0.0;
};

inline Angle canonicalize(double x) { return Angle::from_radians(x); }

/// Distance on the circle of circumference pi: min(m, pi - m), m = |x - y|.
/// Always in [0, pi/2].
inline double angular_distance(Angle x, Angle y) {
    double m = std::abs(x.radians() - y.radians());
    return std::min(m, kPi - m);
}

/// A detector result, +1 or -1.
class Outcome {
public:
    static constexpr Outcome plus() { return Outcome(+1); }
    static constexpr Outcome minus() { return Outcome(-1); }
    static Outcome from_int(int v) {
        if (v != 1 && v != -1)
            throw std::invalid_argument("Outcome: value must be +1 or -1");
        return Outcome(v);
    }

    constexpr int value() const { return value_; }
    friend constexpr bool operator==(Outcome a, Outcome b) { return a.value_ == b.value_; }
    friend constexpr bool operator!=(Outcome a, Outcome b) { return a.value_ != b.value_; }
    /// Product of two outcomes, again +/-1.
    friend constexpr int operator*(Outcome a, Outcome b) { return a.value_ * b.value_; }

private:
    explicit constexpr Outcome(int v) : value_(v) {}
    int value_ = 1;
};

/// Sign function of Bell's toy model: +1 iff the hidden polarization lies
/// strictly within pi/4 of the analyzer orientation. A tie at exactly pi/4
/// maps to -1, so tests are deterministic on the boundary.
inline Outcome polarizer_sign(Angle center, Angle lam) {
    return angular_distance(center, lam) < kPi / 4 ? Outcome::plus() : Outcome::minus();
}

/// One source activation: settings, both outcomes, and (optionally) the
/// hidden variable that produced them. The hidden slot holds an Angle for
/// lambda-based models or an int for the translated integer-n model.
struct Trial {
    std::uint64_t index = 0;
    Angle a;
    Angle b;
    Outcome outcome_a = Outcome::plus();
    Outcome outcome_b = Outcome::plus();
    std::variant<std::monostate, Angle, int> hidden;

    /// True when the hidden variable was drawn after the settings were
    /// fixed, i.e. the simulation order emulates retro-causation rather
    /// than emission order.
    bool retro_sampled = false;

    int product() const { return outcome_a * outcome_b; }
    bool has_hidden() const { return !std::holds_alternative<std::monostate>(hidden); }
};

using TrialSet = std::vector<Trial>;

namespace detail {
inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Counter-based random stream. The substream for (master_seed, stream_id)
/// is a pure function of those two values, so trial i can be generated on
/// any worker, in any order, and the result is bit-identical. Each draw
/// hashes (key, counter) through two splitmix64 finalizer rounds.
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : key_(detail::splitmix64(detail::splitmix64(master_seed) ^
                                  detail::splitmix64(stream_id ^ 0xd1b54a32d192ed03ULL))) {}

    std::uint64_t next_u64() {
        std::uint64_t z = key_ ^ (0x9e3779b97f4a7c15ULL * ++counter_);
        return detail::splitmix64(detail::splitmix64(z));
    }

    /// Uniform double in [0, 1), 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform angle on [0, pi).
    Angle next_angle() { return Angle::from_radians(next_double() * kPi); }

    /// Uniform index in {0, ..., n-1}.
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Bernoulli draw: +1 with probability p_plus.
    Outcome next_outcome(double p_plus) {
        return next_double() < p_plus ? Outcome::plus() : Outcome::minus();
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace bellsim
