// Recursive-descent parser for .cp program text. Grammar (documented in
// docs/formats.md):
//
//   program := expr (';' expr)*
//   expr    := 'let' IDENT '=' expr
//            | 'if' expr 'then' expr 'else' expr
//            | cmp
//   cmp     := sum [('<'|'<='|'=='|'!='|'>='|'>') sum]        (non-associative)
//   sum     := term (('+'|'-') term)*
//   term    := prim (('*'|'/') prim)*
//   prim    := INT | '-' INT | IDENT
//            | 'sense' '(' propref ')'
//            | 'affect' '(' propref ',' expr ')'
//            | 'clamp' '(' expr ',' expr ',' expr ')'
//            | '(' program ')'
//   propref := 'env' '.' IDENT | 'struct' '[' INT ']' '.' IDENT
//
// '#' starts a comment to end of line. Locals must be textually let-bound
// before they are read. Nesting deeper than 64 is rejected.
#pragma once

#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "enerstat/ast.hpp"

namespace enerstat {

inline constexpr int kMaxAstDepth = 64;

class SyntaxError : public Error {
public:
    SyntaxError(SourceSpan span, const std::string& message)
        : Error(Errc::SyntaxError,
                std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + message),
          span_(span) {}

    SourceSpan span() const { return span_; }

private:
    SourceSpan span_;
};

namespace detail {

enum class Tok {
    End, Int, Ident, Let, If, Then, Else, Sense, Affect, Clamp, Env, Struct,
    Semi, Comma, Dot, Assign, LParen, RParen, LBracket, RBracket,
    Plus, Minus, Star, Slash, Lt, Le, EqEq, Ne, Ge, Gt,
};

struct Token {
    Tok tok = Tok::End;
    std::string text;
    std::int64_t value = 0;
    SourceSpan span;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_ws();
        Token t;
        t.span = {line_, col_};
        if (pos_ >= src_.size()) return t;
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) return lex_int(t);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_word(t);
        advance();
        t.text = std::string(1, c);
        switch (c) {
            case ';': t.tok = Tok::Semi; return t;
            case ',': t.tok = Tok::Comma; return t;
            case '.': t.tok = Tok::Dot; return t;
            case '(': t.tok = Tok::LParen; return t;
            case ')': t.tok = Tok::RParen; return t;
            case '[': t.tok = Tok::LBracket; return t;
            case ']': t.tok = Tok::RBracket; return t;
            case '+': t.tok = Tok::Plus; return t;
            case '-': t.tok = Tok::Minus; return t;
            case '*': t.tok = Tok::Star; return t;
            case '/': t.tok = Tok::Slash; return t;
            case '=':
                if (peek() == '=') { advance(); t.tok = Tok::EqEq; } else t.tok = Tok::Assign;
                return t;
            case '<':
                if (peek() == '=') { advance(); t.tok = Tok::Le; } else t.tok = Tok::Lt;
                return t;
            case '>':
                if (peek() == '=') { advance(); t.tok = Tok::Ge; } else t.tok = Tok::Gt;
                return t;
            case '!':
                if (peek() == '=') { advance(); t.tok = Tok::Ne; return t; }
                throw SyntaxError(t.span, "stray '!'");
        }
        throw SyntaxError(t.span, std::string("unexpected character '") + c + "'");
    }

private:
    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

    void advance() {
        if (pos_ < src_.size()) {
            if (src_[pos_] == '\n') { ++line_; col_ = 1; } else ++col_;
            ++pos_;
        }
    }

    void skip_ws() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    Token lex_int(Token t) {
        std::string digits;
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
            digits += peek();
            advance();
        }
        try {
            t.value = std::stoll(digits);
        } catch (const std::exception&) {
            throw SyntaxError(t.span, "integer literal out of range: " + digits);
        }
        t.tok = Tok::Int;
        t.text = digits;
        return t;
    }

    Token lex_word(Token t) {
        std::string word;
        while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') {
            word += peek();
            advance();
        }
        t.text = word;
        if (word == "let") t.tok = Tok::Let;
        else if (word == "if") t.tok = Tok::If;
        else if (word == "then") t.tok = Tok::Then;
        else if (word == "else") t.tok = Tok::Else;
        else if (word == "sense") t.tok = Tok::Sense;
        else if (word == "affect") t.tok = Tok::Affect;
        else if (word == "clamp") t.tok = Tok::Clamp;
        else if (word == "env") t.tok = Tok::Env;
        else if (word == "struct") t.tok = Tok::Struct;
        else t.tok = Tok::Ident;
        return t;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lexer_(src) { shift(); }

    AstNode parse_program() {
        if (current_.tok == Tok::End) throw SyntaxError(current_.span, "empty program");
        AstNode first = parse_sequence();
        expect(Tok::End, "end of input");
        return first;
    }

private:
    AstNode parse_sequence() {
        AstNode first = parse_expr();
        if (current_.tok != Tok::Semi) return first;
        AstNode seq;
        seq.kind = NodeKind::Seq;
        seq.span = first.span;
        seq.children.push_back(std::move(first));
        while (accept(Tok::Semi)) seq.children.push_back(parse_expr());
        return seq;
    }

    AstNode parse_expr() {
        DepthGuard guard(*this);
        if (current_.tok == Tok::Let) {
            AstNode node;
            node.kind = NodeKind::WriteLocal;
            node.span = current_.span;
            shift();
            if (current_.tok != Tok::Ident)
                throw SyntaxError(current_.span, "expected local name after 'let'");
            node.local = current_.text;
            shift();
            expect(Tok::Assign, "'='");
            node.children.push_back(parse_expr());
            locals_.insert(node.local);
            return node;
        }
        if (current_.tok == Tok::If) {
            AstNode node;
            node.kind = NodeKind::IfElse;
            node.span = current_.span;
            shift();
            node.children.push_back(parse_expr());
            expect(Tok::Then, "'then'");
            node.children.push_back(parse_expr());
            expect(Tok::Else, "'else'");
            node.children.push_back(parse_expr());
            return node;
        }
        return parse_compare();
    }

    AstNode parse_compare() {
        AstNode left = parse_sum();
        std::optional<CompareOp> op;
        switch (current_.tok) {
            case Tok::Lt: op = CompareOp::Lt; break;
            case Tok::Le: op = CompareOp::Le; break;
            case Tok::EqEq: op = CompareOp::Eq; break;
            case Tok::Ne: op = CompareOp::Ne; break;
            case Tok::Ge: op = CompareOp::Ge; break;
            case Tok::Gt: op = CompareOp::Gt; break;
            default: return left;
        }
        AstNode node;
        node.kind = NodeKind::Compare;
        node.cmp = *op;
        node.span = current_.span;
        shift();
        node.children.push_back(std::move(left));
        node.children.push_back(parse_sum());
        return node;
    }

    AstNode parse_sum() {
        AstNode left = parse_term();
        while (current_.tok == Tok::Plus || current_.tok == Tok::Minus) {
            AstNode node;
            node.kind = current_.tok == Tok::Plus ? NodeKind::Add : NodeKind::Sub;
            node.span = current_.span;
            shift();
            node.children.push_back(std::move(left));
            node.children.push_back(parse_term());
            left = std::move(node);
        }
        return left;
    }

    AstNode parse_term() {
        AstNode left = parse_primary();
        while (current_.tok == Tok::Star || current_.tok == Tok::Slash) {
            AstNode node;
            node.kind = current_.tok == Tok::Star ? NodeKind::Mul : NodeKind::Div;
            node.span = current_.span;
            shift();
            node.children.push_back(std::move(left));
            node.children.push_back(parse_primary());
            left = std::move(node);
        }
        return left;
    }

    AstNode parse_primary() {
        DepthGuard guard(*this);
        AstNode node;
        node.span = current_.span;
        switch (current_.tok) {
            case Tok::Int:
                node.kind = NodeKind::Literal;
                node.literal = current_.value;
                shift();
                return node;
            case Tok::Minus: {
                shift();
                if (current_.tok != Tok::Int)
                    throw SyntaxError(current_.span, "expected integer after unary '-'");
                node.kind = NodeKind::Literal;
                node.literal = -current_.value;
                shift();
                return node;
            }
            case Tok::Ident:
                if (!locals_.count(current_.text))
                    throw SyntaxError(current_.span, "unknown local '" + current_.text + "'");
                node.kind = NodeKind::ReadLocal;
                node.local = current_.text;
                shift();
                return node;
            case Tok::Sense:
                node.kind = NodeKind::Sense;
                shift();
                expect(Tok::LParen, "'('");
                node.ref = parse_propref();
                expect(Tok::RParen, "')'");
                return node;
            case Tok::Affect:
                node.kind = NodeKind::Affect;
                shift();
                expect(Tok::LParen, "'('");
                node.ref = parse_propref();
                expect(Tok::Comma, "','");
                node.children.push_back(parse_expr());
                expect(Tok::RParen, "')'");
                return node;
            case Tok::Clamp:
                node.kind = NodeKind::Clamp;
                shift();
                expect(Tok::LParen, "'('");
                node.children.push_back(parse_expr());
                expect(Tok::Comma, "','");
                node.children.push_back(parse_expr());
                expect(Tok::Comma, "','");
                node.children.push_back(parse_expr());
                expect(Tok::RParen, "')'");
                return node;
            case Tok::LParen: {
                shift();
                AstNode inner = parse_sequence();
                expect(Tok::RParen, "')'");
                return inner;
            }
            default:
                throw SyntaxError(current_.span, "expected expression, got '" +
                                                     (current_.tok == Tok::End ? "end of input"
                                                                               : current_.text) +
                                                     "'");
        }
    }

    PropRef parse_propref() {
        SourceSpan at = current_.span;
        if (accept(Tok::Env)) {
            expect(Tok::Dot, "'.'");
            if (current_.tok != Tok::Ident)
                throw SyntaxError(current_.span, "expected property name");
            PropRef ref = PropRef::environment(current_.text);
            shift();
            return ref;
        }
        if (accept(Tok::Struct)) {
            expect(Tok::LBracket, "'['");
            if (current_.tok != Tok::Int)
                throw SyntaxError(current_.span, "expected structure index");
            KindId kind = static_cast<KindId>(current_.value);
            shift();
            expect(Tok::RBracket, "']'");
            expect(Tok::Dot, "'.'");
            if (current_.tok != Tok::Ident)
                throw SyntaxError(current_.span, "expected property name");
            PropRef ref = PropRef::structure(kind, current_.text);
            shift();
            return ref;
        }
        throw SyntaxError(at, "expected 'env.<name>' or 'struct[<j>].<name>'");
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& parser) : p(parser) {
            if (++p.depth_ > kMaxAstDepth)
                throw Error(Errc::DepthLimitExceeded,
                            "nesting deeper than " + std::to_string(kMaxAstDepth));
        }
        ~DepthGuard() { --p.depth_; }
        Parser& p;
    };

    bool accept(Tok tok) {
        if (current_.tok != tok) return false;
        shift();
        return true;
    }

    void expect(Tok tok, const std::string& what) {
        if (current_.tok != tok)
            throw SyntaxError(current_.span,
                              "expected " + what + ", got '" +
                                  (current_.tok == Tok::End ? "end of input" : current_.text) +
                                  "'");
        shift();
    }

    void shift() { current_ = lexer_.next(); }

    Lexer lexer_;
    Token current_;
    std::set<std::string> locals_;
    int depth_ = 0;
};

}  // namespace detail

inline AstNode parse(std::string_view source) {
    return detail::Parser(source).parse_program();
}

}  // namespace enerstat
