// Test for Controlled Variable: paired seeded trials, control-active versus
// control-severed, with attenuation S = Var(active) / Var(severed). Includes
// the variance-accounted-for statistic used for model comparison.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "enerstat/rational.hpp"
#include "enerstat/rng.hpp"
#include "enerstat/world.hpp"

namespace enerstat {

// ---------------------------------------------------------------------------
// Variance accounted for: 1 - Var(observed - model) / Var(observed), clamped
// into [0, 1]. Exact rational arithmetic; shift-invariant in the observed
// mean by construction.

namespace detail {

inline Rational population_variance(const std::vector<std::int64_t>& xs) {
    const auto n = static_cast<std::int64_t>(xs.size());
    BigInt sum = 0, sum_sq = 0;
    for (std::int64_t x : xs) {
        sum += x;
        sum_sq += BigInt(x) * x;
    }
    // Var = (n * sum_sq - sum^2) / n^2
    return Rational(BigInt(n) * sum_sq - sum * sum, BigInt(n) * n);
}

}  // namespace detail

inline Rational vaf(const std::vector<std::int64_t>& model,
                    const std::vector<std::int64_t>& observed) {
    if (model.size() != observed.size() || observed.size() < 2)
        raise(Errc::LengthMismatch, "trajectories must have equal length >= 2");
    const Rational observed_var = detail::population_variance(observed);
    if (observed_var == 0) raise(Errc::ZeroVarianceObserved, "observed trajectory is constant");
    std::vector<std::int64_t> residual(observed.size());
    for (std::size_t i = 0; i < observed.size(); ++i) residual[i] = observed[i] - model[i];
    Rational score = Rational(1) - detail::population_variance(residual) / observed_var;
    if (score < 0) return 0;
    if (score > 1) return 1;
    return score;
}

// ---------------------------------------------------------------------------
// Disturbance signals

struct DisturbanceSpec {
    enum class Kind { Square, Noise, Constant } kind = Kind::Square;
    std::int64_t amplitude = 0;
    Step period = 20;       // square: half-period in steps
    std::string target;     // what gets pushed each step
};

// Per-step deltas added to the target. Seeded so paired runs share the exact
// same disturbance and different trials differ.
inline std::vector<std::int64_t> disturbance_signal(const DisturbanceSpec& spec, Step steps,
                                                    std::uint64_t seed) {
    std::vector<std::int64_t> signal(static_cast<std::size_t>(steps), 0);
    Rng rng(seed);
    switch (spec.kind) {
        case DisturbanceSpec::Kind::Square: {
            // seeded phase offset plus amplitude jitter per half-period
            const Step phase = spec.period > 0 ? static_cast<Step>(rng.below(
                                                     static_cast<std::uint64_t>(spec.period)))
                                               : 0;
            std::int64_t level = 0;
            for (Step t = 0; t < steps; ++t) {
                if (spec.period > 0 && (t + phase) % spec.period == 0)
                    level = ((t + phase) / spec.period) % 2 == 0
                                ? rng.range(spec.amplitude / 2, spec.amplitude)
                                : -rng.range(spec.amplitude / 2, spec.amplitude);
                signal[static_cast<std::size_t>(t)] = level;
            }
            break;
        }
        case DisturbanceSpec::Kind::Noise:
            for (auto& v : signal) v = rng.range(-spec.amplitude, spec.amplitude);
            break;
        case DisturbanceSpec::Kind::Constant:
            for (auto& v : signal) v = spec.amplitude;
            break;
    }
    return signal;
}

// ---------------------------------------------------------------------------
// The protocol

struct TcvTrial {
    std::uint64_t seed = 0;
    Rational attenuation = 0;
    std::string verdict;
};

struct TcvReport {
    std::string variable;
    Rational attenuation = 0;  // pooled S over all trials
    std::string verdict;
    int trials = 0;
    std::vector<TcvTrial> per_trial;
};

inline std::string tcv_verdict(const Rational& s, const Rational& theta) {
    if (s < theta) return "Controlled";
    if (s > Rational(1) - theta) return "NotControlled";
    return "Inconclusive";
}

// Runs paired trials: one world as configured, one with the declared
// controller loops severed (disabled in place, never deleted, so energy
// accounting stays comparable). S = Var(variable | active)/Var(variable |
// severed); pooled S sums per-seed variances, so seed order cannot matter.
inline TcvReport tcv(const std::function<World()>& factory,
                     const std::vector<LoopId>& controller_loops, const std::string& variable,
                     const DisturbanceSpec& disturbance, const Rational& theta,
                     const std::vector<std::uint64_t>& seeds, Step steps) {
    if (controller_loops.empty())
        raise(Errc::SeverUndefined, "scenario declares no controller loops to sever");

    TcvReport report;
    report.variable = variable;
    report.trials = static_cast<int>(seeds.size());

    Rational active_sum = 0, severed_sum = 0;
    for (std::uint64_t seed : seeds) {
        const std::vector<std::int64_t> signal = disturbance_signal(disturbance, steps, seed);
        if (detail::population_variance(signal) == 0)
            raise(Errc::DegenerateDisturbance, "disturbance signal has zero variance");

        auto run_one = [&](bool severed) {
            World world = factory();
            world.sink = nullptr;
            if (severed)
                for (LoopId id : controller_loops) loop_at(world, id).severed = true;
            std::vector<std::int64_t> trajectory;
            trajectory.reserve(static_cast<std::size_t>(steps));
            for (Step t = 0; t < steps; ++t) {
                inject_perturbation(world, disturbance.target,
                                    signal[static_cast<std::size_t>(t)], "tcv");
                step_world(world);
                trajectory.push_back(observe_target(world, variable));
            }
            return detail::population_variance(trajectory);
        };

        const Rational active_var = run_one(false);
        const Rational severed_var = run_one(true);
        active_sum += active_var;
        severed_sum += severed_var;

        TcvTrial trial;
        trial.seed = seed;
        if (severed_var == 0) {
            trial.attenuation = 0;
            trial.verdict = "Inconclusive";  // nothing to attenuate against
        } else {
            trial.attenuation = active_var / severed_var;
            trial.verdict = tcv_verdict(trial.attenuation, theta);
        }
        report.per_trial.push_back(std::move(trial));
    }

    if (severed_sum == 0) {
        report.attenuation = 0;
        report.verdict = "Inconclusive";
    } else {
        report.attenuation = active_sum / severed_sum;
        report.verdict = tcv_verdict(report.attenuation, theta);
    }
    return report;
}

}  // namespace enerstat
