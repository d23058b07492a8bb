#pragma once

// Bell-1964 and CHSH expressions, brute-force local bounds over
// deterministic strategies, the algebraic identity behind the Bell-1964
// derivation, and grid search for violating settings.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "models.hpp"

namespace bellsim {

using Correlator = std::function<double(Angle, Angle)>;

/// One evaluation of |P(a,b) - P(a,c)| <= 1 - P(b,c).
struct BellTriple {
    Angle a, b, c;
    double lhs = 0.0;
    double rhs = 0.0;
    bool violated = false;
};

inline BellTriple bell1964(const Correlator& correlator, Angle a, Angle b, Angle c) {
    BellTriple t{a, b, c};
    t.lhs = std::abs(correlator(a, b) - correlator(a, c));
    t.rhs = 1.0 - correlator(b, c);
    t.violated = t.lhs > t.rhs + kTol;
    return t;
}

/// The four-setting expression |E(a,b) - E(a,b2)| + |E(a2,b) + E(a2,b2)|,
/// locally bounded by 2.
struct ChshQuad {
    Angle a, a2, b, b2;
    double s = 0.0;
};

inline ChshQuad chsh(const Correlator& correlator, Angle a, Angle a2, Angle b, Angle b2) {
    ChshQuad q{a, a2, b, b2};
    q.s = std::abs(correlator(a, b) - correlator(a, b2)) +
          std::abs(correlator(a2, b) + correlator(a2, b2));
    return q;
}

/// Checks the identity P(a,b) - P(a,c) = sum rho A(a)A(b)[1 - A(b)A(c)]
/// for a deterministic local model, computing both sides by independent
/// summation routes. Must vanish up to rounding, since A(b)^2 = 1.
inline double expansion_residual(const DeterministicLocalModel& model, Angle a, Angle b,
                           Angle c) {
    double difference = exact_correlator(model, a, b) - exact_correlator(model, a, c);
    double expanded = 0.0;
    for (const auto& atom : model.lambda_law()) {
        int aa = model.respond(a, atom.angle).value();
        int ab = model.respond(b, atom.angle).value();
        int ac = model.respond(c, atom.angle).value();
        expanded += atom.weight * aa * ab * (1 - ab * ac);
    }
    return std::abs(difference - expanded);
}

/// A deterministic shared-response assignment for the three Bell-1964
/// settings: the values A(a), A(b), A(c).
struct BellStrategy {
    Outcome at_a = Outcome::plus();
    Outcome at_b = Outcome::plus();
    Outcome at_c = Outcome::plus();
};

struct BellBound {
    double max_margin = 0.0;  // max over strategies of lhs - rhs
    BellStrategy witness;
};

/// Enumerates all 2^3 shared-response strategies (the extreme points of
/// the deterministic local family restricted to three settings) and
/// returns the maximal margin lhs - rhs. Mixtures cannot exceed it by
/// convexity. The margin is always <= 0.
inline BellBound bell1964_local_bound() {
    BellBound bound;
    bool first = true;
    for (int mask = 0; mask < 8; ++mask) {
        int va = (mask & 1) ? 1 : -1;
        int vb = (mask & 2) ? 1 : -1;
        int vc = (mask & 4) ? 1 : -1;
        double lhs = std::abs(static_cast<double>(va * vb - va * vc));
        double rhs = 1.0 - static_cast<double>(vb * vc);
        double margin = lhs - rhs;
        if (first || margin > bound.max_margin) {
            bound.max_margin = margin;
            bound.witness = BellStrategy{Outcome::from_int(va), Outcome::from_int(vb),
                                         Outcome::from_int(vc)};
            first = false;
        }
    }
    return bound;
}

/// Independent deterministic assignments for the four CHSH settings.
struct ChshStrategy {
    Outcome at_a = Outcome::plus();
    Outcome at_a2 = Outcome::plus();
    Outcome at_b = Outcome::plus();
    Outcome at_b2 = Outcome::plus();
};

struct ChshBound {
    double max_s = 0.0;
    ChshStrategy witness;
};

/// Enumerates all 2^2 * 2^2 = 16 deterministic strategies (sides are not
/// forced to share a response here) and returns the maximum S. Always 2.
inline ChshBound chsh_local_bound() {
    ChshBound bound;
    bool first = true;
    for (int mask = 0; mask < 16; ++mask) {
        int va = (mask & 1) ? 1 : -1;
        int va2 = (mask & 2) ? 1 : -1;
        int vb = (mask & 4) ? 1 : -1;
        int vb2 = (mask & 8) ? 1 : -1;
        double s = std::abs(static_cast<double>(va * vb - va * vb2)) +
                   std::abs(static_cast<double>(va2 * vb + va2 * vb2));
        if (first || s > bound.max_s) {
            bound.max_s = s;
            bound.witness = ChshStrategy{Outcome::from_int(va), Outcome::from_int(va2),
                                         Outcome::from_int(vb), Outcome::from_int(vb2)};
            first = false;
        }
    }
    return bound;
}

namespace detail {
/// Grid of `2 * resolution` angles covering [0, pi) at `resolution` points
/// per pi/2, with the correlator tabulated once up front.
struct CorrelatorTable {
    std::vector<Angle> angles;
    std::vector<std::vector<double>> e;

    CorrelatorTable(const Correlator& correlator, int resolution) {
        if (resolution < 8)
            throw std::invalid_argument("violation search: resolution must be >= 8");
        int count = 2 * resolution;
        double step = (kPi / 2.0) / resolution;
        angles.reserve(count);
        for (int k = 0; k < count; ++k) angles.push_back(Angle::from_radians(k * step));
        e.assign(count, std::vector<double>(count));
        for (int i = 0; i < count; ++i)
            for (int j = 0; j < count; ++j) e[i][j] = correlator(angles[i], angles[j]);
    }
};
}  // namespace detail

struct BellSearchResult {
    BellTriple best;
    double margin = 0.0;  // lhs - rhs at the best triple
};

/// Grid search for the Bell-1964 triple maximizing lhs - rhs. Ties resolve
/// to the lexicographically first (a, b, c), which the loop order provides.
inline BellSearchResult search_bell1964(const Correlator& correlator, int resolution) {
    detail::CorrelatorTable table(correlator, resolution);
    int count = static_cast<int>(table.angles.size());
    int best_i = 0, best_j = 0, best_k = 0;
    double best_margin = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < count; ++j)
            for (int k = 0; k < count; ++k) {
                double margin =
                    std::abs(table.e[i][j] - table.e[i][k]) - (1.0 - table.e[j][k]);
                if (margin > best_margin) {
                    best_margin = margin;
                    best_i = i;
                    best_j = j;
                    best_k = k;
                }
            }
    BellSearchResult result;
    result.best = bell1964(correlator, table.angles[best_i], table.angles[best_j],
                           table.angles[best_k]);
    result.margin = result.best.lhs - result.best.rhs;
    return result;
}

struct ChshSearchResult {
    ChshQuad best;
};

/// Grid search for the CHSH quadruple maximizing S.
inline ChshSearchResult search_chsh(const Correlator& correlator, int resolution) {
    detail::CorrelatorTable table(correlator, resolution);
    int count = static_cast<int>(table.angles.size());
    std::array<int, 4> best{0, 0, 0, 0};
    double best_s = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < count; ++i)
        for (int i2 = 0; i2 < count; ++i2)
            for (int j = 0; j < count; ++j) {
                const double eij = table.e[i][j];
                const double* row_i = table.e[i].data();
                const double* row_i2 = table.e[i2].data();
                double ei2j = row_i2[j];
                for (int j2 = 0; j2 < count; ++j2) {
                    double s = std::abs(eij - row_i[j2]) + std::abs(ei2j + row_i2[j2]);
                    if (s > best_s) {
                        best_s = s;
                        best = {i, i2, j, j2};
                    }
                }
            }
    ChshSearchResult result;
    result.best = chsh(correlator, table.angles[best[0]], table.angles[best[1]],
                       table.angles[best[2]], table.angles[best[3]]);
    return result;
}

}  // namespace bellsim
