// Metered evaluator. Executes a program against an immutable snapshot of its
// sensable properties, bills exactly the static FED, and buffers writes for
// the engine to apply in its own phase — nothing mutates here.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "enerstat/ast.hpp"
#include "enerstat/cost.hpp"

namespace enerstat {

// A property as seen at snapshot time. `reachable` is false when the ref is
// legal for the niche but no instance currently answers to it (sensing yields
// the default, affecting is skipped).
struct SensedProp {
    std::int64_t value = 0;
    bool reachable = false;
    InstanceId owner = kEnvAccount;
};

// Read-only view of the executing structure's in-niche properties. Resolving
// a ref outside the niche must throw RefOutsideNiche (defense in depth; the
// checker already refused such programs at admission).
class PropReadView {
public:
    virtual ~PropReadView() = default;
    virtual SensedProp lookup(const PropRef& ref) const = 0;
};

// Map-backed view for tests and scripted sensing.
class MapPropView : public PropReadView {
public:
    void set(const PropRef& ref, std::int64_t value, InstanceId owner = kEnvAccount) {
        props_[ref] = SensedProp{value, true, owner};
    }

    // In-niche but currently unreachable; sensing yields `default_value`.
    void set_unreachable(const PropRef& ref, std::int64_t default_value) {
        props_[ref] = SensedProp{default_value, false, kEnvAccount};
    }

    SensedProp lookup(const PropRef& ref) const override {
        auto it = props_.find(ref);
        if (it == props_.end()) raise(Errc::RefOutsideNiche, ref.text());
        return it->second;
    }

private:
    std::map<PropRef, SensedProp> props_;
};

struct PropWrite {
    PropRef ref;
    std::int64_t value = 0;
    bool resolved = false;       // false: no reachable target at snapshot time
    InstanceId owner = kEnvAccount;
    SourceSpan span;
};

struct EffectSet {
    std::vector<PropWrite> writes;
    Energy dissipated = 0;
    bool div_zero = false;
    std::vector<PropRef> touched;  // every ref actually sensed or affected
};

namespace detail {

struct EvalState {
    const PropReadView& view;
    EffectSet effects;
    std::map<std::string, std::int64_t> locals;
};

inline std::int64_t eval_node(const AstNode& node, EvalState& state) {
    switch (node.kind) {
        case NodeKind::Literal:
            return node.literal;
        case NodeKind::ReadLocal: {
            auto it = state.locals.find(node.local);
            return it == state.locals.end() ? 0 : it->second;
        }
        case NodeKind::WriteLocal: {
            std::int64_t v = eval_node(node.children[0], state);
            state.locals[node.local] = v;
            return v;
        }
        case NodeKind::Sense: {
            SensedProp sensed = state.view.lookup(node.ref);
            state.effects.touched.push_back(node.ref);
            return sensed.value;
        }
        case NodeKind::Affect: {
            std::int64_t v = eval_node(node.children[0], state);
            SensedProp target = state.view.lookup(node.ref);
            state.effects.touched.push_back(node.ref);
            state.effects.writes.push_back(
                {node.ref, v, target.reachable, target.owner, node.span});
            return v;
        }
        case NodeKind::Add:
            return sat_add(eval_node(node.children[0], state), eval_node(node.children[1], state));
        case NodeKind::Sub:
            return sat_sub(eval_node(node.children[0], state), eval_node(node.children[1], state));
        case NodeKind::Mul:
            return sat_mul(eval_node(node.children[0], state), eval_node(node.children[1], state));
        case NodeKind::Div: {
            std::int64_t a = eval_node(node.children[0], state);
            std::int64_t b = eval_node(node.children[1], state);
            if (b == 0) {
                state.effects.div_zero = true;
                return 0;
            }
            if (a == std::numeric_limits<std::int64_t>::min() && b == -1)
                return std::numeric_limits<std::int64_t>::max();
            return a / b;  // truncates toward zero
        }
        case NodeKind::Compare: {
            std::int64_t a = eval_node(node.children[0], state);
            std::int64_t b = eval_node(node.children[1], state);
            switch (node.cmp) {
                case CompareOp::Lt: return a < b;
                case CompareOp::Le: return a <= b;
                case CompareOp::Eq: return a == b;
                case CompareOp::Ne: return a != b;
                case CompareOp::Ge: return a >= b;
                case CompareOp::Gt: return a > b;
            }
            return 0;
        }
        case NodeKind::IfElse:
            return eval_node(node.children[0], state) != 0
                       ? eval_node(node.children[1], state)
                       : eval_node(node.children[2], state);
        case NodeKind::Clamp: {
            std::int64_t x = eval_node(node.children[0], state);
            std::int64_t lo = eval_node(node.children[1], state);
            std::int64_t hi = eval_node(node.children[2], state);
            return std::min(std::max(x, lo), hi);  // lo > hi collapses to hi
        }
        case NodeKind::Seq: {
            std::int64_t last = 0;
            for (const AstNode& child : node.children) last = eval_node(child, state);
            return last;
        }
    }
    raise(Errc::UnknownNodeKind, node_kind_name(node.kind));
}

}  // namespace detail

// Deterministic, single pass, no partial execution: the full static FED must
// be affordable up front and is dissipated exactly, branches notwithstanding.
inline EffectSet execute(const AstNode& ast, const PropReadView& sensed, Energy budget,
                         const CostTable& table) {
    const StaticCosts costs = static_costs(ast, table);
    if (budget < costs.fed)
        raise(Errc::EnergyShortfall, "budget " + std::to_string(budget) + " < fed " +
                                         std::to_string(costs.fed));
    detail::EvalState state{sensed, {}, {}};
    detail::eval_node(ast, state);
    state.effects.dissipated = costs.fed;
    return std::move(state.effects);
}

}  // namespace enerstat
