// Canonical pretty-printer. parse(print(ast)) == ast for every valid tree;
// print(parse(text)) is the canonical spelling of text.
#pragma once

#include <string>

#include "enerstat/ast.hpp"

namespace enerstat {

namespace detail {

// Binding strength used for minimal parenthesisation. Matches the grammar
// levels in parser.hpp.
inline int precedence(const AstNode& node) {
    switch (node.kind) {
        case NodeKind::Seq: return 0;
        case NodeKind::WriteLocal:
        case NodeKind::IfElse: return 1;
        case NodeKind::Compare: return 2;
        case NodeKind::Add:
        case NodeKind::Sub: return 3;
        case NodeKind::Mul:
        case NodeKind::Div: return 4;
        default: return 5;
    }
}

inline void render(const AstNode& node, int min_prec, std::string& out) {
    const bool wrap = precedence(node) < min_prec;
    if (wrap) out += '(';
    switch (node.kind) {
        case NodeKind::Literal:
            out += std::to_string(node.literal);
            break;
        case NodeKind::ReadLocal:
            out += node.local;
            break;
        case NodeKind::WriteLocal:
            out += "let " + node.local + " = ";
            render(node.children[0], 1, out);
            break;
        case NodeKind::Sense:
            out += "sense(" + node.ref.text() + ")";
            break;
        case NodeKind::Affect:
            out += "affect(" + node.ref.text() + ", ";
            render(node.children[0], 1, out);
            out += ')';
            break;
        case NodeKind::Add:
        case NodeKind::Sub:
            render(node.children[0], 3, out);
            out += node.kind == NodeKind::Add ? " + " : " - ";
            render(node.children[1], 4, out);
            break;
        case NodeKind::Mul:
        case NodeKind::Div:
            render(node.children[0], 4, out);
            out += node.kind == NodeKind::Mul ? " * " : " / ";
            render(node.children[1], 5, out);
            break;
        case NodeKind::Compare:
            render(node.children[0], 3, out);
            out += ' ';
            out += compare_op_text(node.cmp);
            out += ' ';
            render(node.children[1], 3, out);
            break;
        case NodeKind::IfElse:
            out += "if ";
            render(node.children[0], 2, out);
            out += " then ";
            render(node.children[1], 2, out);
            out += " else ";
            render(node.children[2], 2, out);
            break;
        case NodeKind::Clamp:
            out += "clamp(";
            render(node.children[0], 1, out);
            out += ", ";
            render(node.children[1], 1, out);
            out += ", ";
            render(node.children[2], 1, out);
            out += ')';
            break;
        case NodeKind::Seq: {
            bool first = true;
            for (const AstNode& child : node.children) {
                if (!first) out += "; ";
                first = false;
                render(child, 1, out);
            }
            break;
        }
    }
    if (wrap) out += ')';
}

}  // namespace detail

inline std::string print(const AstNode& ast) {
    std::string out;
    detail::render(ast, 0, out);
    return out;
}

}  // namespace enerstat
