// Causal niches: the property sets a structure is permitted to sense and
// affect. Violations are data, not errors — generation uses them for
// rejection sampling and audits report them.
#pragma once

#include <set>
#include <string>
#include <vector>

#include "enerstat/ast.hpp"

namespace enerstat {

struct Niche {
    std::set<PropRef> sensable;
    std::set<PropRef> affectable;
};

struct NicheViolation {
    SourceSpan span;
    PropRef ref;
    bool is_affect = false;

    std::string message() const {
        return std::to_string(span.line) + ":" + std::to_string(span.column) + ": " +
               (is_affect ? "affects " : "senses ") + ref.text() + " outside niche";
    }
};

inline std::vector<NicheViolation> niche_check(const AstNode& ast, const Niche& niche) {
    std::vector<NicheViolation> violations;
    for_each_node(ast, [&](const AstNode& node) {
        if (node.kind == NodeKind::Sense && !niche.sensable.count(node.ref))
            violations.push_back({node.span, node.ref, false});
        else if (node.kind == NodeKind::Affect && !niche.affectable.count(node.ref))
            violations.push_back({node.span, node.ref, true});
    });
    return violations;
}

}  // namespace enerstat
