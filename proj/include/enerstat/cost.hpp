// Automatic energy cost assignment: every AST node kind carries a per-step
// cost (summing to the structure's FED) and a dissipation ceiling (summing to
// its FEL). Metering is static — branch-untaken nodes still bill — so cost is
// a pure function of the tree.
#pragma once

#include <map>
#include <string>

#include "enerstat/ast.hpp"

namespace enerstat {

struct CostTable {
    std::map<NodeKind, Energy> cost;
    std::map<NodeKind, Energy> dissipation;

    // Interaction with the world (sense/affect) dominates arithmetic;
    // dissipation defaults to twice cost. All values scenario-overridable.
    static CostTable defaults() {
        CostTable t;
        t.cost = {
            {NodeKind::Literal, 1},  {NodeKind::ReadLocal, 1}, {NodeKind::WriteLocal, 1},
            {NodeKind::Sense, 5},    {NodeKind::Affect, 5},    {NodeKind::Add, 2},
            {NodeKind::Sub, 2},      {NodeKind::Mul, 4},       {NodeKind::Div, 8},
            {NodeKind::Compare, 2},  {NodeKind::IfElse, 3},    {NodeKind::Clamp, 3},
            {NodeKind::Seq, 1},
        };
        for (const auto& [kind, c] : t.cost) t.dissipation[kind] = 2 * c;
        return t;
    }

    void validate() const {
        for (const auto& [kind, c] : cost) {
            if (c < 1)
                raise(Errc::SchemaError,
                      std::string("cost[") + node_kind_name(kind) + "] must be >= 1");
            auto it = dissipation.find(kind);
            if (it == dissipation.end() || it->second < c)
                raise(Errc::SchemaError, std::string("dissipation[") + node_kind_name(kind) +
                                             "] must be >= cost");
        }
    }
};

struct StaticCosts {
    Energy fed = 0;  // free energy demand: per-step intake needed to persist
    Energy fel = 0;  // free energy limit: most the structure can dissipate
};

inline StaticCosts static_costs(const AstNode& ast, const CostTable& table) {
    StaticCosts out;
    for_each_node(ast, [&](const AstNode& node) {
        auto c = table.cost.find(node.kind);
        auto d = table.dissipation.find(node.kind);
        if (c == table.cost.end() || d == table.dissipation.end())
            raise(Errc::UnknownNodeKind, node_kind_name(node.kind));
        out.fed += c->second;
        out.fel += d->second;
    });
    return out;
}

// Node kind lookup for scenario cost-table overrides.
inline std::map<std::string, NodeKind> node_kinds_by_name() {
    std::map<std::string, NodeKind> names;
    for (NodeKind k : {NodeKind::Literal, NodeKind::ReadLocal, NodeKind::WriteLocal,
                       NodeKind::Sense, NodeKind::Affect, NodeKind::Add, NodeKind::Sub,
                       NodeKind::Mul, NodeKind::Div, NodeKind::Compare, NodeKind::IfElse,
                       NodeKind::Clamp, NodeKind::Seq})
        names[node_kind_name(k)] = k;
    return names;
}

}  // namespace enerstat
