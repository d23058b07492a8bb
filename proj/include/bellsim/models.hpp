#pragma once

// The model families of the two-photon experiment: the quantum law, the
// locally-causal families, Bell's non-local toy model, the retro-causal toy
// model, and the translation between the last two. Every model exposes both
// a trial sampler and an exact joint outcome law, so correlators can be
// checked without sampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include "core.hpp"

namespace bellsim {

/// Exact probabilities of the four outcome pairs (A, B) in {+1,-1}^2.
class JointLaw {
public:
    JointLaw(double pp, double pm, double mp, double mm) : p_{pp, pm, mp, mm} {
        double sum = 0.0;
        for (double& p : p_) {
            if (p < -kTol || p > 1.0 + kTol)
                throw std::invalid_argument("JointLaw: probability out of [0,1]");
            p = std::clamp(p, 0.0, 1.0);
            sum += p;
        }
        if (std::abs(sum - 1.0) > kTol)
            throw std::invalid_argument("JointLaw: probabilities do not sum to 1");
    }

    double prob(Outcome a, Outcome b) const { return p_[slot(a, b)]; }

    double correlator() const { return p_[0] - p_[1] - p_[2] + p_[3]; }
    double marginal_a() const { return p_[0] + p_[1] - p_[2] - p_[3]; }
    double marginal_b() const { return p_[0] - p_[1] + p_[2] - p_[3]; }

    double total_variation(const JointLaw& other) const {
        double tv = 0.0;
        for (int i = 0; i < 4; ++i) tv += std::abs(p_[i] - other.p_[i]);
        return tv / 2.0;
    }

    std::pair<Outcome, Outcome> sample(RandomStream& rng) const {
        double u = rng.next_double();
        double acc = 0.0;
        for (int i = 0; i < 3; ++i) {
            acc += p_[i];
            if (u < acc) return outcome_pair(i);
        }
        return outcome_pair(3);
    }

private:
    static int slot(Outcome a, Outcome b) {
        return (a.value() > 0 ? 0 : 2) + (b.value() > 0 ? 0 : 1);
    }
    static std::pair<Outcome, Outcome> outcome_pair(int slot) {
        return {slot < 2 ? Outcome::plus() : Outcome::minus(),
                slot % 2 == 0 ? Outcome::plus() : Outcome::minus()};
    }
    std::array<double, 4> p_;  // (+,+), (+,-), (-,+), (-,-)
};

/// The quantum correlator cos(2a - 2b). Depends only on the separation and
/// is invariant under shifting either setting by pi.
inline double qm_correlator(Angle a, Angle b) {
    return std::cos(2.0 * (a.radians() - b.radians()));
}

/// The unique four-point law with <A> = <B> = 0 and <AB> = cos(2a - 2b):
/// p(A,B) = (1 + A B cos(2a - 2b)) / 4.
inline JointLaw qm_joint(Angle a, Angle b) {
    double e = qm_correlator(a, b);
    double diag = (1.0 + e) / 4.0;
    double off = (1.0 - e) / 4.0;
    return JointLaw(diag, off, off, diag);
}

/// Malus' law for one photon: P(A=+1 | a, lambda) = cos^2(a - lambda).
inline double malus_prob(Outcome a_result, Angle a, Angle lam) {
    double c = std::cos(a.radians() - lam.radians());
    double p_plus = c * c;
    return a_result.value() > 0 ? p_plus : 1.0 - p_plus;
}

/// Conditional mean of the outcome under Malus' law: cos(2(a - lambda)).
inline double malus_mean(Angle a, Angle lam) {
    return std::cos(2.0 * (a.radians() - lam.radians()));
}

struct AngleAtom {
    Angle angle;
    double weight;
};

/// Finitely supported distribution over angles. Atoms within kTol of each
/// other are merged with summed weights.
using AngleDistribution = std::vector<AngleAtom>;

inline AngleDistribution merge_atoms(AngleDistribution atoms) {
    AngleDistribution merged;
    for (const auto& atom : atoms) {
        bool found = false;
        for (auto& m : merged) {
            if (angular_distance(m.angle, atom.angle) <= kTol) {
                m.weight += atom.weight;
                found = true;
                break;
            }
        }
        if (!found) merged.push_back(atom);
    }
    return merged;
}

inline Angle sample_atom(const AngleDistribution& atoms, RandomStream& rng) {
    double u = rng.next_double();
    double acc = 0.0;
    for (const auto& atom : atoms) {
        acc += atom.weight;
        if (u < acc) return atom.angle;
    }
    return atoms.back().angle;
}

enum class RetroVariant { symmetric, asymmetric_left_first };

/// The hidden-variable law of the retro-causal toy model.
/// symmetric: lambda in {a, a+pi/2, b, b+pi/2}, each weight 1/4;
/// asymmetric: lambda in {a, a+pi/2}, each weight 1/2, never reading b.
/// Coinciding atoms (a = b or a = b + pi/2) merge with summed weights.
inline AngleDistribution retro_lambda_law(RetroVariant variant, Angle a, Angle b) {
    AngleDistribution atoms;
    if (variant == RetroVariant::symmetric) {
        atoms = {{a, 0.25},
                 {Angle::from_radians(a.radians() + kPi / 2), 0.25},
                 {b, 0.25},
                 {Angle::from_radians(b.radians() + kPi / 2), 0.25}};
    } else {
        atoms = {{a, 0.5}, {Angle::from_radians(a.radians() + kPi / 2), 0.5}};
    }
    return merge_atoms(std::move(atoms));
}

/// The non-local toy model's shifted analyzer angle a'. Placed on the arc
/// from b toward a, at distance (pi/4)(1 - cos(2a - 2b)) from b; with
/// lambda uniform on [0, pi) the correlator of the two sign functions is
/// then 1 - (4/pi) dist(a', b) = cos(2a - 2b).
inline Angle bell_toy_aprime(Angle a, Angle b) {
    double offset = (kPi / 4.0) * (1.0 - qm_correlator(a, b));
    double delta = a.radians() - b.radians();  // both canonical, delta in (-pi, pi)
    // signed displacement of the shorter arc from b to a
    if (delta > kPi / 2) delta -= kPi;
    if (delta < -kPi / 2) delta += kPi;
    double direction = delta >= 0.0 ? 1.0 : -1.0;
    return Angle::from_radians(b.radians() + direction * offset);
}

/// Common surface of all model families: an exact joint law and a trial
/// sampler. Models are immutable after construction; sampling takes the
/// stream by value, so concurrent generation is deterministic per trial.
class Model {
public:
    virtual ~Model() = default;
    virtual std::string_view name() const = 0;
    virtual JointLaw joint(Angle a, Angle b) const = 0;
    virtual Trial sample_trial(std::uint64_t index, Angle a, Angle b, RandomStream stream,
                               bool record_hidden = false) const = 0;
};

/// Exact correlator <AB>, by atom summation or arc integration inside the
/// model's joint(); never by sampling.
inline double exact_correlator(const Model& model, Angle a, Angle b) {
    return model.joint(a, b).correlator();
}

/// The quantum statistics themselves, sampled straight from the joint law.
/// No hidden variable exists to record.
class QmModel final : public Model {
public:
    std::string_view name() const override { return "qm"; }

    JointLaw joint(Angle a, Angle b) const override { return qm_joint(a, b); }

    Trial sample_trial(std::uint64_t index, Angle a, Angle b, RandomStream stream,
                       bool /*record_hidden*/ = false) const override {
        auto [oa, ob] = joint(a, b).sample(stream);
        return Trial{index, a, b, oa, ob, {}, false};
    }
};

/// Bell's non-local toy model: lambda uniform on [0, pi); side B applies
/// the sign function at b, side A at a'(a, b). Deterministic given lambda,
/// causal, and non-local through the b-dependence of a'.
class BellToyModel final : public Model {
public:
    std::string_view name() const override { return "bell-toy"; }

    JointLaw joint(Angle a, Angle b) const override {
        // Both sign functions are indicators of arcs of length pi/2; for
        // centers at distance d the arcs overlap on measure pi/2 - d.
        double d = angular_distance(bell_toy_aprime(a, b), b);
        double agree = (kPi / 2.0 - d) / kPi;  // p(+,+) = p(-,-)
        double differ = d / kPi;
        return JointLaw(agree, differ, differ, agree);
    }

    Trial sample_trial(std::uint64_t index, Angle a, Angle b, RandomStream stream,
                       bool record_hidden = false) const override {
        Angle lam = stream.next_angle();
        Trial t{index, a, b, polarizer_sign(bell_toy_aprime(a, b), lam),
                polarizer_sign(b, lam), {}, false};
        if (record_hidden) t.hidden = lam;
        return t;
    }
};

namespace detail {
/// Joint law of a lambda mixture with Malus outcome rules on both sides.
inline JointLaw malus_mixture_joint(const AngleDistribution& atoms, Angle a, Angle b) {
    std::array<double, 4> p{};
    for (const auto& atom : atoms) {
        double pa = malus_prob(Outcome::plus(), a, atom.angle);
        double pb = malus_prob(Outcome::plus(), b, atom.angle);
        p[0] += atom.weight * pa * pb;
        p[1] += atom.weight * pa * (1.0 - pb);
        p[2] += atom.weight * (1.0 - pa) * pb;
        p[3] += atom.weight * (1.0 - pa) * (1.0 - pb);
    }
    return JointLaw(p[0], p[1], p[2], p[3]);
}

inline Trial sample_malus_trial(std::uint64_t index, Angle a, Angle b, Angle lam,
                                RandomStream& stream, bool record_hidden,
                                bool retro_sampled) {
    Outcome oa = stream.next_outcome(malus_prob(Outcome::plus(), a, lam));
    Outcome ob = stream.next_outcome(malus_prob(Outcome::plus(), b, lam));
    Trial t{index, a, b, oa, ob, {}, retro_sampled};
    if (record_hidden) t.hidden = lam;
    return t;
}
}  // namespace detail

/// The retro-causal toy model: lambda is drawn from a settings-dependent
/// atom law, then both sides apply Malus' law locally. The sampler draws
/// lambda after the settings are known; the Trial record flags that this
/// order emulates retro-causation rather than emission order.
class RetroModel final : public Model {
public:
    explicit RetroModel(RetroVariant variant) : variant_(variant) {}

    RetroVariant variant() const { return variant_; }

    std::string_view name() const override {
        return variant_ == RetroVariant::symmetric ? "retro" : "retro-seq";
    }

    AngleDistribution lambda_law(Angle a, Angle b) const {
        return retro_lambda_law(variant_, a, b);
    }

    JointLaw joint(Angle a, Angle b) const override {
        return detail::malus_mixture_joint(lambda_law(a, b), a, b);
    }

    Trial sample_trial(std::uint64_t index, Angle a, Angle b, RandomStream stream,
                       bool record_hidden = false) const override {
        Angle lam = sample_atom(lambda_law(a, b), stream);
        return detail::sample_malus_trial(index, a, b, lam, stream, record_hidden, true);
    }

private:
    RetroVariant variant_;
};

/// Exact conditional moments of one branch lambda = branch of a RetroModel.
struct BranchMoments {
    double mean_a;
    double mean_b;
    double correlator;
};

inline BranchMoments branch_statistics(const RetroModel& model, Angle branch, Angle a,
                                       Angle b) {
    const auto atoms = model.lambda_law(a, b);
    bool is_atom = std::any_of(atoms.begin(), atoms.end(), [&](const AngleAtom& atom) {
        return angular_distance(atom.angle, branch) <= kTol;
    });
    if (!is_atom)
        throw std::invalid_argument("branch_statistics: branch is not an atom of the law");
    double ma = malus_mean(a, branch);
    double mb = malus_mean(b, branch);
    // A and B are independent given lambda
    return BranchMoments{ma, mb, ma * mb};
}

/// The broken single-branch variant: lambda = a with probability 1. It
/// still reproduces the cosine correlator, but <A> = 1 and
/// <B> = cos(2a - 2b), so the marginals leak the distant setting. Kept as
/// a fixture for the no-signaling checks.
class SingleBranchModel final : public Model {
public:
    std::string_view name() const override { return "local:single-branch"; }

    JointLaw joint(Angle a, Angle b) const override {
        return detail::malus_mixture_joint({{a, 1.0}}, a, b);
    }

    Trial sample_trial(std::uint64_t index, Angle a, Angle b, RandomStream stream,
                       bool record_hidden = false) const override {
        return detail::sample_malus_trial(index, a, b, a, stream, record_hidden, true);
    }
};

/// The translated model: hidden variable is an integer n uniform on
/// {1,2,3,4}, independent of the settings; the angle
/// lambda'(n, a, b) in {a, a+pi/2, b, b+pi/2} is only formed at measurement
/// time. Its joint outcome law equals the symmetric retro model's exactly.
class NonlocalizedRetroModel final : public Model {
public:
    static Angle lambda_prime(int n, Angle a, Angle b) {
        switch (n) {
            case 1: return a;
            case 2: return Angle::from_radians(a.radians() + kPi / 2);
            case 3: return b;
            case 4: return Angle::from_radians(b.radians() + kPi / 2);
            default: throw std::invalid_argument("lambda_prime: n must be in {1,2,3,4}");
        }
    }

    std::string_view name() const override { return "retro-nonlocalized"; }

    JointLaw joint(Angle a, Angle b) const override {
        AngleDistribution atoms;
        for (int n = 1; n <= 4; ++n) atoms.push_back({lambda_prime(n, a, b), 0.25});
        return detail::malus_mixture_joint(atoms, a, b);
    }

    Trial sample_trial(std::uint64_t index, Angle a, Angle b, RandomStream stream,
                       bool record_hidden = false) const override {
        int n = static_cast<int>(stream.next_index(4)) + 1;
        Trial t = detail::sample_malus_trial(index, a, b, lambda_prime(n, a, b), stream,
                                             false, false);
        if (record_hidden) t.hidden = n;
        return t;
    }
};

/// Translation of the symmetric retro model into a locality-violating,
/// causal one: the random integer n replaces the settings-dependent lambda.
inline NonlocalizedRetroModel nonlocalize(const RetroModel& model) {
    if (model.variant() != RetroVariant::symmetric)
        throw std::invalid_argument("nonlocalize: only the symmetric variant translates");
    return NonlocalizedRetroModel{};
}

/// Conditional outcome law of one side: P(A = +1 | setting, lambda). The
/// signature admits only the local setting, so a locally causal model
/// cannot read the distant one.
using ConditionalLaw = std::function<double(Angle setting, Angle lambda)>;

/// A general locally causal model with a finite hidden-variable law:
/// rho(lambda) independent of the settings, and per-side conditional
/// outcome laws reading only the local setting.
class LocalCausalModel final : public Model {
public:
    LocalCausalModel(AngleDistribution atoms, ConditionalLaw prob_plus_a,
                     ConditionalLaw prob_plus_b, std::string name = "local")
        : atoms_(merge_atoms(std::move(atoms))),
          prob_plus_a_(std::move(prob_plus_a)),
          prob_plus_b_(std::move(prob_plus_b)),
          name_(std::move(name)) {
        double total = 0.0;
        for (const auto& atom : atoms_) {
            if (atom.weight < 0.0)
                throw std::invalid_argument("LocalCausalModel: negative weight");
            total += atom.weight;
        }
        if (std::abs(total - 1.0) > kTol)
            throw std::invalid_argument("LocalCausalModel: weights do not sum to 1");
    }

    const AngleDistribution& lambda_law() const { return atoms_; }
    double prob_plus_a(Angle a, Angle lam) const { return prob_plus_a_(a, lam); }
    double prob_plus_b(Angle b, Angle lam) const { return prob_plus_b_(b, lam); }

    std::string_view name() const override { return name_; }

    JointLaw joint(Angle a, Angle b) const override {
        std::array<double, 4> p{};
        for (const auto& atom : atoms_) {
            double pa = prob_plus_a_(a, atom.angle);
            double pb = prob_plus_b_(b, atom.angle);
            p[0] += atom.weight * pa * pb;
            p[1] += atom.weight * pa * (1.0 - pb);
            p[2] += atom.weight * (1.0 - pa) * pb;
            p[3] += atom.weight * (1.0 - pa) * (1.0 - pb);
        }
        return JointLaw(p[0], p[1], p[2], p[3]);
    }

    Trial sample_trial(std::uint64_t index, Angle a, Angle b, RandomStream stream,
                       bool record_hidden = false) const override {
        Angle lam = sample_atom(atoms_, stream);
        Outcome oa = stream.next_outcome(prob_plus_a_(a, lam));
        Outcome ob = stream.next_outcome(prob_plus_b_(b, lam));
        Trial t{index, a, b, oa, ob, {}, false};
        if (record_hidden) t.hidden = lam;
        return t;
    }

private:
    AngleDistribution atoms_;
    ConditionalLaw prob_plus_a_;
    ConditionalLaw prob_plus_b_;
    std::string name_;
};

/// Deterministic shared response A(x, lambda), forced on both sides by the
/// perfect correlations at equal settings.
using Response = std::function<Outcome(Angle setting, Angle lambda)>;

/// Deterministic local model: finite rho(lambda) plus one response function
/// used by both stations.
class DeterministicLocalModel final : public Model {
public:
    DeterministicLocalModel(AngleDistribution atoms, Response response,
                            std::string name = "local:deterministic")
        : atoms_(merge_atoms(std::move(atoms))),
          response_(std::move(response)),
          name_(std::move(name)) {
        double total = 0.0;
        for (const auto& atom : atoms_) total += atom.weight;
        if (std::abs(total - 1.0) > kTol)
            throw std::invalid_argument("DeterministicLocalModel: weights do not sum to 1");
    }

    const AngleDistribution& lambda_law() const { return atoms_; }
    Outcome respond(Angle setting, Angle lam) const { return response_(setting, lam); }

    std::string_view name() const override { return name_; }

    JointLaw joint(Angle a, Angle b) const override {
        std::array<double, 4> p{};
        for (const auto& atom : atoms_) {
            Outcome oa = response_(a, atom.angle);
            Outcome ob = response_(b, atom.angle);
            int slot = (oa.value() > 0 ? 0 : 2) + (ob.value() > 0 ? 0 : 1);
            p[slot] += atom.weight;
        }
        return JointLaw(p[0], p[1], p[2], p[3]);
    }

    Trial sample_trial(std::uint64_t index, Angle a, Angle b, RandomStream stream,
                       bool record_hidden = false) const override {
        Angle lam = sample_atom(atoms_, stream);
        Trial t{index, a, b, response_(a, lam), response_(b, lam), {}, false};
        if (record_hidden) t.hidden = lam;
        return t;
    }

private:
    AngleDistribution atoms_;
    Response response_;
    std::string name_;
};

/// Locally causal fixture with lambda uniform on [0, pi) and Malus
/// stations. The closed-form law follows from
/// integrating cos(2a-2l) cos(2b-2l) over a period: <AB> = cos(2a-2b)/2.
class UniformMalusModel final : public Model {
public:
    std::string_view name() const override { return "local:uniform-malus"; }

    JointLaw joint(Angle a, Angle b) const override {
        double e = qm_correlator(a, b) / 2.0;
        double diag = (1.0 + e) / 4.0;
        double off = (1.0 - e) / 4.0;
        return JointLaw(diag, off, off, diag);
    }

    Trial sample_trial(std::uint64_t index, Angle a, Angle b, RandomStream stream,
                       bool record_hidden = false) const override {
        Angle lam = stream.next_angle();
        return detail::sample_malus_trial(index, a, b, lam, stream, record_hidden, false);
    }
};

/// Instantiate a model by its CLI identifier. Throws on unknown ids.
inline std::unique_ptr<Model> make_model(std::string_view id) {
    if (id == "qm") return std::make_unique<QmModel>();
    if (id == "bell-toy") return std::make_unique<BellToyModel>();
    if (id == "retro") return std::make_unique<RetroModel>(RetroVariant::symmetric);
    if (id == "retro-seq")
        return std::make_unique<RetroModel>(RetroVariant::asymmetric_left_first);
    if (id == "local:uniform-malus") return std::make_unique<UniformMalusModel>();
    if (id == "local:single-branch") return std::make_unique<SingleBranchModel>();
    throw std::invalid_argument("unknown model id: " + std::string(id));
}

inline std::vector<std::string> known_model_ids() {
    return {"qm", "bell-toy", "retro", "retro-seq", "local:uniform-malus",
            "local:single-branch"};
}

}  // namespace bellsim
