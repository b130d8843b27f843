// Action policies over loop reconfiguration, the action-window trace, and
// hebbian-like multiplicative probability updates triggered at window
// crossings. Weights are exact rationals: probability conservation and
// replayability are equality-testable, never tolerance-testable.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "enerstat/base.hpp"
#include "enerstat/rational.hpp"
#include "enerstat/rng.hpp"

namespace enerstat {

enum class WindowClass { Stasis, Action, Cap, Fatal };

inline const char* window_name(WindowClass w) {
    switch (w) {
        case WindowClass::Stasis: return "stasis";
        case WindowClass::Action: return "action";
        case WindowClass::Cap: return "cap";
        case WindowClass::Fatal: return "fatal";
    }
    return "?";
}

enum class ActionType { NoOp, Assemble, DisassembleOldest };

struct LoopAction {
    ActionType type = ActionType::NoOp;
    KindId kind = -1;  // for Assemble / DisassembleOldest

    std::string label() const {
        switch (type) {
            case ActionType::NoOp: return "no_op";
            case ActionType::Assemble: return "assemble:" + std::to_string(kind);
            case ActionType::DisassembleOldest: return "disassemble_oldest:" + std::to_string(kind);
        }
        return "?";
    }
};

struct ActionPolicy {
    std::vector<LoopAction> actions;
    std::vector<Rational> weights;  // strictly positive; normalized on demand
    Rational eta = make_rational(1, 10);  // learning rate in (0,1)

    void validate() const {
        if (actions.size() != weights.size())
            raise(Errc::SchemaError, "policy actions/weights length mismatch");
        for (const Rational& w : weights)
            if (w <= 0) raise(Errc::SchemaError, "policy weights must be > 0");
        if (eta <= 0 || eta >= 1) raise(Errc::SchemaError, "eta must lie in (0,1)");
    }
};

struct TraceEntry {
    Step step = 0;
    std::size_t action = 0;
    Energy loop_energy = 0;  // recorded for offline analysis; unused by v1 updates
};

struct ActionTrace {
    std::vector<TraceEntry> entries;
    Step window_entered_at = 0;
};

enum class CreditOutcome { ReachedStasis, ReachedCap };

// Stasis and Fatal take no reconfiguration action; Action and Cap sample an
// action index proportional to the weights. Deterministic given rng state
// (selection granularity is 2^-64, far below any tested tolerance).
inline std::optional<std::size_t> select_action(const ActionPolicy& policy, WindowClass window,
                                                Rng& rng) {
    if (policy.actions.empty()) raise(Errc::EmptyPolicy, "policy has no actions");
    if (window == WindowClass::Stasis || window == WindowClass::Fatal) return std::nullopt;

    Rational total = 0;
    for (const Rational& w : policy.weights) total += w;
    // target = total * u where u = k / 2^64, k uniform
    const std::uint64_t k = rng.next();
    Rational target = total * Rational(BigInt(k), BigInt(1) << 64);
    Rational cumulative = 0;
    for (std::size_t i = 0; i < policy.weights.size(); ++i) {
        cumulative += policy.weights[i];
        if (target < cumulative) return i;
    }
    return policy.weights.size() - 1;  // k/2^64 < 1, so only rounding lands here
}

// Strengthens (ReachedStasis) or weakens (ReachedCap) every action taken in
// the window, compounding across repeats, then renormalizes to sum 1. An
// empty trace returns the policy untouched (not even renormalized).
inline ActionPolicy credit_update(ActionPolicy policy, const ActionTrace& trace,
                                  CreditOutcome outcome) {
    if (trace.entries.empty()) return policy;
    const Rational factor =
        outcome == CreditOutcome::ReachedStasis ? Rational(1) + policy.eta
                                                : Rational(1) - policy.eta;
    for (const TraceEntry& entry : trace.entries) {
        if (entry.action >= policy.weights.size())
            raise(Errc::SchemaError, "trace references action outside policy");
        policy.weights[entry.action] *= factor;
    }
    Rational total = 0;
    for (const Rational& w : policy.weights) total += w;
    for (Rational& w : policy.weights) w /= total;
    return policy;
}

// Selection probability of one action under the current weights.
inline Rational action_probability(const ActionPolicy& policy, std::size_t index) {
    Rational total = 0;
    for (const Rational& w : policy.weights) total += w;
    return policy.weights[index] / total;
}

}  // namespace enerstat
