#pragma once

// Recursive-descent parser for the formula text grammar:
//
//   formula := until
//   until   := or ( "U[" int "," int "]" or )?
//   or      := and ( "or" and )*
//   and     := unary ( "and" unary )*
//   unary   := "not" unary | "F[" int "," int "]" unary | "G[" int "," int "]" unary | atom
//   atom    := "true" | "(" formula ")" | "in(" num "," num "," num "," num ")" | pred
//   pred    := linear ( ">" | ">=" | "<" | "<=" ) linear
//   linear  := [sign] term ( ("+" | "-") term )*
//   term    := num [ "*" var ] | var
//
// Variables are x1..xn for a caller-supplied state dimension n. Whitespace is
// insignificant. Strict and non-strict comparisons produce the same predicate.

#include <cctype>
#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "stl2vec/error.hpp"
#include "stl2vec/stl/formula.hpp"

namespace stl2vec::stl {

namespace detail {

enum class Tok { Number, Ident, LParen, RParen, LBracket, RBracket, Comma, Plus, Minus, Star, Cmp, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    std::size_t line = 1;
    std::size_t column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token tok;
            tok.line = line_;
            tok.column = column_;
            if (pos_ >= text_.size()) {
                tok.kind = Tok::End;
                out.push_back(tok);
                return out;
            }
            const char ch = text_[pos_];
            if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
                tok.kind = Tok::Number;
                lex_number(tok);
            } else if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
                tok.kind = Tok::Ident;
                while (pos_ < text_.size() &&
                       (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                    tok.text += text_[pos_];
                    advance();
                }
            } else if (ch == '>' || ch == '<') {
                tok.kind = Tok::Cmp;
                tok.text = ch;
                advance();
                if (pos_ < text_.size() && text_[pos_] == '=') {
                    tok.text += '=';
                    advance();
                }
            } else {
                switch (ch) {
                    case '(': tok.kind = Tok::LParen; break;
                    case ')': tok.kind = Tok::RParen; break;
                    case '[': tok.kind = Tok::LBracket; break;
                    case ']': tok.kind = Tok::RBracket; break;
                    case ',': tok.kind = Tok::Comma; break;
                    case '+': tok.kind = Tok::Plus; break;
                    case '-': tok.kind = Tok::Minus; break;
                    case '*': tok.kind = Tok::Star; break;
                    default:
                        throw ParseError(std::string("unexpected character '") + ch + "'", line_, column_);
                }
                tok.text = ch;
                advance();
            }
            out.push_back(std::move(tok));
        }
    }

private:
    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) advance();
    }

    void lex_number(Token& tok) {
        const std::size_t start = pos_;
        const std::size_t line = line_;
        const std::size_t column = column_;
        auto digits = [&] {
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) advance();
        };
        digits();
        if (pos_ < text_.size() && text_[pos_] == '.') {
            advance();
            digits();
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            const std::size_t mark = pos_;
            std::size_t next = pos_ + 1;
            if (next < text_.size() && (text_[next] == '+' || text_[next] == '-')) ++next;
            if (next < text_.size() && std::isdigit(static_cast<unsigned char>(text_[next]))) {
                while (pos_ < next) advance();
                digits();
            } else {
                pos_ = mark;
            }
        }
        tok.text = std::string(text_.substr(start, pos_ - start));
        const auto res = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), tok.number);
        if (res.ec != std::errc() || res.ptr != tok.text.data() + tok.text.size()) {
            throw ParseError("malformed number '" + tok.text + "'", line, column);
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t column_ = 1;
};

class Parser {
public:
    Parser(std::vector<Token> tokens, std::size_t dim) : toks_(std::move(tokens)), dim_(dim) {}

    Formula run() {
        Formula f = parse_until();
        if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "' after formula");
        return f;
    }

private:
    struct Linear {
        Eigen::RowVectorXd c;
        double d = 0.0;
    };

    const Token& peek(std::size_t ahead = 0) const {
        const std::size_t at = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[at];
    }
    const Token& take() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    [[noreturn]] void fail(const std::string& msg, const Token* at = nullptr) const {
        const Token& t = at ? *at : peek();
        throw ParseError(msg, t.line, t.column);
    }
    void expect(Tok kind, const char* what) {
        if (peek().kind != kind) fail(std::string("expected ") + what);
        take();
    }
    bool is_keyword(const char* word, std::size_t ahead = 0) const {
        return peek(ahead).kind == Tok::Ident && peek(ahead).text == word;
    }
    bool is_temporal(const char* word) const { return is_keyword(word) && peek(1).kind == Tok::LBracket; }

    Formula parse_until() {
        Formula lhs = parse_or();
        if (is_temporal("U")) {
            take();
            const Interval i = parse_interval();
            Formula rhs = parse_or();
            return Formula::until(i, std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    Formula parse_or() {
        Formula f = parse_and();
        while (is_keyword("or")) {
            take();
            f = Formula::disjunction(std::move(f), parse_and());
        }
        return f;
    }

    Formula parse_and() {
        Formula f = parse_unary();
        while (is_keyword("and")) {
            take();
            f = Formula::conjunction(std::move(f), parse_unary());
        }
        return f;
    }

    Formula parse_unary() {
        if (is_keyword("not")) {
            take();
            return Formula::negation(parse_unary());
        }
        if (is_temporal("F")) {
            take();
            const Interval i = parse_interval();
            return Formula::eventually(i, parse_unary());
        }
        if (is_temporal("G")) {
            take();
            const Interval i = parse_interval();
            return Formula::always(i, parse_unary());
        }
        return parse_atom();
    }

    Formula parse_atom() {
        if (is_keyword("true")) {
            take();
            return Formula::top();
        }
        if (peek().kind == Tok::LParen) {
            take();
            Formula f = parse_until();
            expect(Tok::RParen, "')'");
            return f;
        }
        if (is_keyword("in") && peek(1).kind == Tok::LParen) {
            const Token& at = take();
            take();
            double v[4];
            for (int k = 0; k < 4; ++k) {
                if (k > 0) expect(Tok::Comma, "','");
                v[k] = parse_signed_number();
            }
            expect(Tok::RParen, "')'");
            if (!(v[0] < v[1]) || !(v[2] < v[3])) fail("in(...) describes an empty rectangle", &at);
            if (dim_ < 2) fail("in(...) needs a state of dimension >= 2", &at);
            return rect_region(v[0], v[1], v[2], v[3], dim_);
        }
        return parse_predicate();
    }

    Formula parse_predicate() {
        Linear lhs = parse_linear();
        if (peek().kind != Tok::Cmp) fail("expected a comparison operator");
        const std::string cmp = take().text;
        Linear rhs = parse_linear();
        LinearPredicate p;
        if (cmp[0] == '>') {
            p.c = lhs.c - rhs.c;
            p.d = lhs.d - rhs.d;
        } else {
            p.c = rhs.c - lhs.c;
            p.d = rhs.d - lhs.d;
        }
        return Formula::predicate(std::move(p));
    }

    Linear parse_linear() {
        Linear lin;
        lin.c = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(dim_));
        double sign = 1.0;
        if (peek().kind == Tok::Minus || peek().kind == Tok::Plus) sign = take().kind == Tok::Minus ? -1.0 : 1.0;
        parse_term(lin, sign);
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
            sign = take().kind == Tok::Minus ? -1.0 : 1.0;
            parse_term(lin, sign);
        }
        return lin;
    }

    void parse_term(Linear& lin, double sign) {
        if (peek().kind == Tok::Number) {
            const double k = take().number;
            if (peek().kind == Tok::Star) {
                take();
                lin.c(variable_index()) += sign * k;
            } else {
                lin.d += sign * k;
            }
            return;
        }
        if (peek().kind == Tok::Ident) {
            lin.c(variable_index()) += sign;
            return;
        }
        fail("expected a number or a variable");
    }

    Eigen::Index variable_index() {
        if (peek().kind != Tok::Ident) fail("expected a variable");
        const Token& tok = peek();
        const std::string& name = tok.text;
        bool ok = name.size() >= 2 && name[0] == 'x';
        std::size_t idx = 0;
        if (ok) {
            const auto res = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
            ok = res.ec == std::errc() && res.ptr == name.data() + name.size() && idx >= 1 && idx <= dim_;
        }
        if (!ok) fail("unknown variable name '" + name + "'");
        take();
        return static_cast<Eigen::Index>(idx - 1);
    }

    double parse_signed_number() {
        double sign = 1.0;
        if (peek().kind == Tok::Minus || peek().kind == Tok::Plus) sign = take().kind == Tok::Minus ? -1.0 : 1.0;
        if (peek().kind != Tok::Number) fail("expected a number");
        return sign * take().number;
    }

    Interval parse_interval() {
        const Token& open = peek();
        expect(Tok::LBracket, "'['");
        const std::size_t a = parse_bound();
        expect(Tok::Comma, "','");
        const std::size_t b = parse_bound();
        expect(Tok::RBracket, "']'");
        if (a > b) {
            fail("interval with a > b: [" + std::to_string(a) + "," + std::to_string(b) + "]", &open);
        }
        return Interval(a, b);
    }

    std::size_t parse_bound() {
        if (peek().kind == Tok::Minus) fail("negative interval bound");
        if (peek().kind != Tok::Number) fail("expected an integer time bound");
        const Token& tok = take();
        std::size_t value = 0;
        const auto res = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), value);
        if (res.ec != std::errc() || res.ptr != tok.text.data() + tok.text.size()) {
            fail("interval bound must be a nonnegative integer", &tok);
        }
        return value;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::size_t dim_;
};

}  // namespace detail

/// Parses formula text over states x1..x{dim}.
inline Formula parse(std::string_view text, std::size_t dim = 3) {
    return detail::Parser(detail::Lexer(text).run(), dim).run();
}

}  // namespace stl2vec::stl
