#include "doctest.h"

#include <vector>

#include "enerstat/learning.hpp"

using namespace enerstat;

namespace {

ActionPolicy two_action_policy(Rational wa, Rational wb, Rational eta = make_rational(1, 10)) {
    ActionPolicy p;
    p.actions = {LoopAction{ActionType::NoOp, -1}, LoopAction{ActionType::Assemble, 0}};
    p.weights = {wa, wb};
    p.eta = eta;
    p.validate();
    return p;
}

ActionTrace trace_of(std::initializer_list<std::size_t> actions) {
    ActionTrace t;
    Step s = 0;
    for (std::size_t a : actions) t.entries.push_back({s++, a, 0});
    return t;
}

}  // namespace

TEST_CASE("select_action: window gating") {
    ActionPolicy policy = two_action_policy(1, 1);
    Rng rng(1);
    CHECK_FALSE(select_action(policy, WindowClass::Stasis, rng).has_value());
    CHECK_FALSE(select_action(policy, WindowClass::Fatal, rng).has_value());
    CHECK(select_action(policy, WindowClass::Action, rng).has_value());
    CHECK(select_action(policy, WindowClass::Cap, rng).has_value());
}

TEST_CASE("select_action: degenerate single-action policy always picks it") {
    ActionPolicy policy;
    policy.actions = {LoopAction{ActionType::NoOp, -1}};
    policy.weights = {Rational(1)};
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        auto pick = select_action(policy, WindowClass::Action, rng);
        REQUIRE(pick.has_value());
        CHECK(*pick == 0);
    }
}

TEST_CASE("select_action: empty policy") {
    ActionPolicy policy;
    Rng rng(3);
    try {
        select_action(policy, WindowClass::Action, rng);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyPolicy);
    }
}

TEST_CASE("select_action: seeded frequencies match the weights, 3:1 within 0.01") {
    ActionPolicy policy = two_action_policy(3, 1);
    Rng rng(42);
    const int draws = 100000;
    int first = 0;
    for (int i = 0; i < draws; ++i)
        if (*select_action(policy, WindowClass::Action, rng) == 0) ++first;
    double freq = static_cast<double>(first) / draws;
    CHECK(freq > 0.74);
    CHECK(freq < 0.76);
}

TEST_CASE("select_action is deterministic given rng state") {
    ActionPolicy policy = two_action_policy(2, 5);
    Rng a(77), b(77);
    for (int i = 0; i < 200; ++i)
        CHECK(*select_action(policy, WindowClass::Action, a) ==
              *select_action(policy, WindowClass::Action, b));
}

TEST_CASE("credit_update: arithmetic oracle cases") {
    SUBCASE("two stasis repeats of action A: 0.5 * 1.1^2 renormalized") {
        ActionPolicy p = two_action_policy(make_rational(1, 2), make_rational(1, 2));
        ActionPolicy out = credit_update(p, trace_of({0, 0}), CreditOutcome::ReachedStasis);
        // 0.605 / 1.105 == 121/221, 0.5 / 1.105 == 100/221
        CHECK(out.weights[0] == make_rational(121, 221));
        CHECK(out.weights[1] == make_rational(100, 221));
        CHECK(out.weights[0] + out.weights[1] == Rational(1));
    }

    SUBCASE("empty trace is the identity, bit for bit") {
        ActionPolicy p = two_action_policy(3, 1);
        ActionPolicy out = credit_update(p, ActionTrace{}, CreditOutcome::ReachedCap);
        CHECK(out.weights == p.weights);
    }

    SUBCASE("cap outcome weakens the traced action by (1 - eta)") {
        ActionPolicy p = two_action_policy(make_rational(1, 2), make_rational(1, 2));
        ActionPolicy out = credit_update(p, trace_of({1}), CreditOutcome::ReachedCap);
        // B: 0.45 / 0.95 = 9/19, A: 0.5 / 0.95 = 10/19
        CHECK(out.weights[0] == make_rational(10, 19));
        CHECK(out.weights[1] == make_rational(9, 19));
    }
}

TEST_CASE("credit_update invariants over random sequences") {
    Rng rng(9001);
    ActionPolicy policy;
    policy.actions = {LoopAction{ActionType::NoOp, -1}, LoopAction{ActionType::Assemble, 0},
                      LoopAction{ActionType::DisassembleOldest, 0}};
    policy.weights = {Rational(1), Rational(1), Rational(2)};
    policy.eta = make_rational(1, 10);

    for (int round = 0; round < 200; ++round) {
        ActionTrace trace;
        const int len = static_cast<int>(rng.below(6));
        for (int i = 0; i < len; ++i)
            trace.entries.push_back({round, rng.below(3), 0});
        CreditOutcome outcome =
            rng.below(2) == 0 ? CreditOutcome::ReachedStasis : CreditOutcome::ReachedCap;

        ActionPolicy before = policy;
        policy = credit_update(policy, trace, outcome);

        // weights stay strictly positive and sum to exactly 1 after updates
        Rational total = 0;
        for (const Rational& w : policy.weights) {
            CHECK(w > 0);
            total += w;
        }
        if (!trace.entries.empty()) CHECK(total == Rational(1));

        // purity/replayability: recomputing from the same inputs agrees exactly
        ActionPolicy replay = credit_update(before, trace, outcome);
        CHECK(replay.weights == policy.weights);

        // monotone credit, defensible form: after a stasis outcome every
        // traced action gains relative to every untraced action (and never
        // loses to it after a cap outcome the other way round)
        std::vector<bool> traced(3, false);
        for (const auto& e : trace.entries) traced[e.action] = true;
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t u = 0; u < 3; ++u) {
                if (!traced[t] || traced[u]) continue;
                Rational ratio_before = before.weights[t] / before.weights[u];
                Rational ratio_after = policy.weights[t] / policy.weights[u];
                if (outcome == CreditOutcome::ReachedStasis)
                    CHECK(ratio_after >= ratio_before);
                else
                    CHECK(ratio_after <= ratio_before);
            }
    }
}

TEST_CASE("an action credited only by stasis outcomes never loses relative probability") {
    // One entry per trace (the one-action-per-step regime): action 0 is only
    // ever traced in ReachedStasis updates.
    ActionPolicy policy = two_action_policy(make_rational(1, 3), make_rational(2, 3));
    Rng rng(313);
    Rational share = action_probability(policy, 0);
    for (int round = 0; round < 100; ++round) {
        bool pick_a = rng.below(2) == 0;
        ActionTrace t = trace_of({pick_a ? std::size_t{0} : std::size_t{1}});
        CreditOutcome outcome = pick_a ? CreditOutcome::ReachedStasis
                                       : (rng.below(2) == 0 ? CreditOutcome::ReachedStasis
                                                            : CreditOutcome::ReachedCap);
        ActionPolicy next = credit_update(policy, t, outcome);
        Rational next_share = action_probability(next, 0);
        if (pick_a) CHECK(next_share >= share);
        policy = next;
        share = next_share;
    }
}
