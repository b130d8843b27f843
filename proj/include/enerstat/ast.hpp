// AST for the causal-power DSL. Straight-line expressions plus branches; no
// loops or recursion, so static cost sums are exact upper bounds on work.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enerstat/base.hpp"

namespace enerstat {

enum class NodeKind {
    Literal,
    ReadLocal,
    WriteLocal,
    Sense,
    Affect,
    Add,
    Sub,
    Mul,
    Div,
    Compare,
    IfElse,
    Clamp,
    Seq,
};

inline const char* node_kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::Literal: return "literal";
        case NodeKind::ReadLocal: return "read_local";
        case NodeKind::WriteLocal: return "write_local";
        case NodeKind::Sense: return "sense";
        case NodeKind::Affect: return "affect";
        case NodeKind::Add: return "add";
        case NodeKind::Sub: return "sub";
        case NodeKind::Mul: return "mul";
        case NodeKind::Div: return "div";
        case NodeKind::Compare: return "compare";
        case NodeKind::IfElse: return "if";
        case NodeKind::Clamp: return "clamp";
        case NodeKind::Seq: return "seq";
    }
    return "?";
}

enum class CompareOp { Lt, Le, Eq, Ne, Ge, Gt };

inline const char* compare_op_text(CompareOp op) {
    switch (op) {
        case CompareOp::Lt: return "<";
        case CompareOp::Le: return "<=";
        case CompareOp::Eq: return "==";
        case CompareOp::Ne: return "!=";
        case CompareOp::Ge: return ">=";
        case CompareOp::Gt: return ">";
    }
    return "?";
}

// Names either an environment property or a property of the kind with the
// given catalog index ("struct[j].name").
struct PropRef {
    bool env = true;
    KindId kind = -1;
    std::string name;

    static PropRef environment(std::string name) { return {true, -1, std::move(name)}; }
    static PropRef structure(KindId kind, std::string name) { return {false, kind, std::move(name)}; }

    bool operator==(const PropRef&) const = default;
    auto operator<=>(const PropRef&) const = default;

    std::string text() const {
        return env ? "env." + name : "struct[" + std::to_string(kind) + "]." + name;
    }
};

struct SourceSpan {
    int line = 0;
    int column = 0;
};

struct AstNode {
    NodeKind kind = NodeKind::Literal;
    std::int64_t literal = 0;   // Literal
    std::string local;          // ReadLocal / WriteLocal
    PropRef ref;                // Sense / Affect
    CompareOp cmp = CompareOp::Lt;
    std::vector<AstNode> children;
    SourceSpan span;

    // Structural equality; source spans are not part of identity.
    friend bool operator==(const AstNode& a, const AstNode& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case NodeKind::Literal:
                if (a.literal != b.literal) return false;
                break;
            case NodeKind::ReadLocal:
            case NodeKind::WriteLocal:
                if (a.local != b.local) return false;
                break;
            case NodeKind::Sense:
            case NodeKind::Affect:
                if (a.ref != b.ref) return false;
                break;
            case NodeKind::Compare:
                if (a.cmp != b.cmp) return false;
                break;
            default:
                break;
        }
        return a.children == b.children;
    }
};

template <typename F>
void for_each_node(const AstNode& node, F&& fn) {
    fn(node);
    for (const AstNode& child : node.children) for_each_node(child, fn);
}

inline std::size_t node_count(const AstNode& node) {
    std::size_t n = 0;
    for_each_node(node, [&](const AstNode&) { ++n; });
    return n;
}

inline int tree_depth(const AstNode& node) {
    int deepest = 0;
    for (const AstNode& child : node.children) deepest = std::max(deepest, tree_depth(child));
    return 1 + deepest;
}

}  // namespace enerstat
