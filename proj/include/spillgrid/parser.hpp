#pragma once

// Recursive-descent formula parser.
//
// Precedence, loosest to tightest:
//   comparisons  <  &  <  + -  <  * /  <  ^  <  unary -  <  postfix #  <  atom
// '^' associates left, so -2^2 is (-2)^2 and 2^3^2 is (2^3)^2.

#include <string>
#include <string_view>
#include <vector>

#include "spillgrid/ast.hpp"
#include "spillgrid/lexer.hpp"

namespace spillgrid {

struct ParseError : FormulaError {
  std::string expected;
  ParseError(size_t off, const std::string& msg, std::string expected_hint = {})
      : FormulaError(off, msg), expected(std::move(expected_hint)) {}
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  AstPtr parse() {
    AstPtr e = comparison();
    if (peek().kind != TokenKind::End)
      throw ParseError(peek().offset, "trailing input after expression",
                       "end of formula");
    return e;
  }

 private:
  const Token& peek(size_t ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool accept(TokenKind k) {
    if (peek().kind != k) return false;
    advance();
    return true;
  }
  void expect(TokenKind k, const char* what) {
    if (!accept(k))
      throw ParseError(peek().offset, std::string("expected ") + what, what);
  }

  AstPtr comparison() {
    AstPtr lhs = concat();
    for (;;) {
      BinaryOp op;
      switch (peek().kind) {
        case TokenKind::Eq: op = BinaryOp::Eq; break;
        case TokenKind::Ne: op = BinaryOp::Ne; break;
        case TokenKind::Lt: op = BinaryOp::Lt; break;
        case TokenKind::Le: op = BinaryOp::Le; break;
        case TokenKind::Gt: op = BinaryOp::Gt; break;
        case TokenKind::Ge: op = BinaryOp::Ge; break;
        default: return lhs;
      }
      advance();
      lhs = make_ast<BinaryOpNode>(op, lhs, concat());
    }
  }

  AstPtr concat() {
    AstPtr lhs = additive();
    while (accept(TokenKind::Amp))
      lhs = make_ast<BinaryOpNode>(BinaryOp::Concat, lhs, additive());
    return lhs;
  }

  AstPtr additive() {
    AstPtr lhs = multiplicative();
    for (;;) {
      if (accept(TokenKind::Plus))
        lhs = make_ast<BinaryOpNode>(BinaryOp::Add, lhs, multiplicative());
      else if (accept(TokenKind::Minus))
        lhs = make_ast<BinaryOpNode>(BinaryOp::Sub, lhs, multiplicative());
      else
        return lhs;
    }
  }

  AstPtr multiplicative() {
    AstPtr lhs = power();
    for (;;) {
      if (accept(TokenKind::Star))
        lhs = make_ast<BinaryOpNode>(BinaryOp::Mul, lhs, power());
      else if (accept(TokenKind::Slash))
        lhs = make_ast<BinaryOpNode>(BinaryOp::Div, lhs, power());
      else
        return lhs;
    }
  }

  AstPtr power() {
    AstPtr lhs = unary();
    while (accept(TokenKind::Caret))
      lhs = make_ast<BinaryOpNode>(BinaryOp::Pow, lhs, unary());
    return lhs;
  }

  AstPtr unary() {
    if (peek().kind == TokenKind::Minus) {
      advance();
      return make_ast<UnaryOp>('-', unary());
    }
    return postfix();
  }

  AstPtr postfix() {
    AstPtr e = primary();
    if (peek().kind == TokenKind::Hash) {
      if (!std::holds_alternative<CellRef>(e->v) &&
          !std::holds_alternative<NameRef>(e->v))
        throw ParseError(peek().offset,
                         "'#' applies only to a cell reference or name");
      advance();
      return make_ast<SpillRef>(e);
    }
    return e;
  }

  AstPtr sheet_qualified(std::string sheet) {
    expect(TokenKind::Bang, "'!' after sheet name");
    if (peek().kind != TokenKind::Address)
      throw ParseError(peek().offset, "expected cell address after '!'",
                       "cell address");
    CellAddress first = advance().addr;
    first.sheet = std::move(sheet);
    return range_tail(first);
  }

  AstPtr range_tail(const CellAddress& first) {
    if (peek().kind == TokenKind::Colon &&
        peek(1).kind == TokenKind::Address) {
      advance();
      CellAddress second = advance().addr;
      return make_ast<RangeRef>(first, second);
    }
    return make_ast<CellRef>(first);
  }

  AstPtr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Number:
        advance();
        return make_ast<NumberLit>(t.number);
      case TokenKind::String:
        advance();
        return make_ast<TextLit>(t.text);
      case TokenKind::Boolean:
        advance();
        return make_ast<BoolLit>(t.flag);
      case TokenKind::LParen: {
        advance();
        AstPtr e = comparison();
        expect(TokenKind::RParen, "')'");
        return e;
      }
      case TokenKind::Address: {
        advance();
        if (peek().kind == TokenKind::Bang)
          throw ParseError(peek().offset,
                           "sheet names that look like cell addresses must be quoted");
        return range_tail(t.addr);
      }
      case TokenKind::SheetName:
        advance();
        return sheet_qualified(t.text);
      case TokenKind::Identifier: {
        advance();
        if (peek().kind == TokenKind::LParen) {
          advance();
          std::vector<AstPtr> args;
          if (peek().kind != TokenKind::RParen) {
            args.push_back(comparison());
            while (accept(TokenKind::Comma)) args.push_back(comparison());
          }
          expect(TokenKind::RParen, "')'");
          std::string fn = t.text;
          for (char& c : fn)
            if (c >= 'a' && c <= 'z') c -= 'a' - 'A';
          return make_ast<Call>(std::move(fn), std::move(args));
        }
        if (peek().kind == TokenKind::LBracket) {
          advance();
          if (peek().kind == TokenKind::Hash || peek().kind == TokenKind::At)
            throw ParseError(peek().offset,
                             "structured reference selectors are not supported",
                             "column name");
          if (peek().kind != TokenKind::Identifier)
            throw ParseError(peek().offset, "expected column name", "column name");
          std::string column = advance().text;
          expect(TokenKind::RBracket, "']'");
          return make_ast<TableColumnRef>(t.text, std::move(column));
        }
        if (peek().kind == TokenKind::Bang) return sheet_qualified(t.text);
        return make_ast<NameRef>(t.text);
      }
      default:
        throw ParseError(t.offset, "expected an expression", "expression");
    }
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

}  // namespace detail

// `text` is the formula body without the leading '='.
// Throws LexError / ParseError; never returns null.
inline AstPtr parse_formula(std::string_view text) {
  return detail::Parser(tokenize(text)).parse();
}

}  // namespace spillgrid
