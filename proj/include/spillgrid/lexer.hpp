#pragma once

// Formula tokenizer. Input is the formula body with the leading '=' already
// stripped; byte offsets in errors refer to that body.

#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spillgrid/address.hpp"

namespace spillgrid {

struct FormulaError : std::runtime_error {
  size_t offset;
  FormulaError(size_t off, const std::string& msg)
      : std::runtime_error(msg), offset(off) {}
};

struct LexError : FormulaError {
  using FormulaError::FormulaError;
};

enum class TokenKind {
  Number,
  String,     // double-quoted, "" escape
  SheetName,  // single-quoted, '' escape
  Boolean,
  Identifier,
  Address,
  Plus, Minus, Star, Slash, Caret, Amp,
  Eq, Ne, Lt, Le, Gt, Ge,
  LParen, RParen, Comma, Colon,
  LBracket, RBracket, Bang, Hash, Dollar, At,
  End,
};

struct Token {
  TokenKind kind = TokenKind::End;
  size_t offset = 0;
  std::string text;        // identifier / string / sheet-name payload
  double number = 0;       // Number
  bool flag = false;       // Boolean
  CellAddress addr;        // Address
};

namespace detail {

inline bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

// Try to match $?letters$?digits at `i`, not running into identifier text.
inline bool match_address(std::string_view s, size_t i, size_t& len,
                          CellAddress& out) {
  size_t j = i;
  bool col_abs = false, row_abs = false;
  if (j < s.size() && s[j] == '$') {
    col_abs = true;
    ++j;
  }
  size_t letters = j;
  while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
  if (j == letters || j - letters > 3) return false;
  auto col = column_index(s.substr(letters, j - letters));
  if (!col) return false;
  if (j < s.size() && s[j] == '$') {
    row_abs = true;
    ++j;
  }
  size_t digits = j;
  uint64_t row = 0;
  while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
    row = row * 10 + static_cast<uint64_t>(s[j] - '0');
    if (row > kMaxRow) return false;
    ++j;
  }
  if (j == digits || row < 1) return false;
  if (j < s.size() && ident_char(s[j])) return false;  // e.g. A1x is a name
  out = CellAddress{std::nullopt, static_cast<uint32_t>(row), *col, row_abs, col_abs};
  len = j - i;
  return true;
}

}  // namespace detail

inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  size_t i = 0;
  auto push = [&](TokenKind k, size_t off) {
    Token t;
    t.kind = k;
    t.offset = off;
    out.push_back(std::move(t));
    return &out.back();
  };
  while (i < s.size()) {
    char c = s[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++i;
      continue;
    }
    size_t start = i;
    if (c == '"') {
      std::string text;
      ++i;
      for (;;) {
        if (i >= s.size()) throw LexError(start, "unterminated string literal");
        if (s[i] == '"') {
          if (i + 1 < s.size() && s[i + 1] == '"') {
            text += '"';
            i += 2;
          } else {
            ++i;
            break;
          }
        } else {
          text += s[i++];
        }
      }
      push(TokenKind::String, start)->text = std::move(text);
      continue;
    }
    if (c == '\'') {
      std::string text;
      ++i;
      for (;;) {
        if (i >= s.size()) throw LexError(start, "unterminated sheet name");
        if (s[i] == '\'') {
          if (i + 1 < s.size() && s[i + 1] == '\'') {
            text += '\'';
            i += 2;
          } else {
            ++i;
            break;
          }
        } else {
          text += s[i++];
        }
      }
      push(TokenKind::SheetName, start)->text = std::move(text);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < s.size() &&
         std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.'))
        ++j;
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          ++k;
          while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
          j = k;
        }
      }
      auto n = parse_number(s.substr(i, j - i));
      if (!n) throw LexError(start, "malformed number");
      push(TokenKind::Number, start)->number = *n;
      i = j;
      continue;
    }
    {
      size_t len = 0;
      CellAddress addr;
      if (detail::match_address(s, i, len, addr)) {
        push(TokenKind::Address, start)->addr = addr;
        i += len;
        continue;
      }
    }
    if (detail::ident_start(c)) {
      size_t j = i;
      while (j < s.size() && detail::ident_char(s[j])) ++j;
      std::string word(s.substr(i, j - i));
      std::string folded = fold_case(word);
      if (folded == "true" || folded == "false") {
        push(TokenKind::Boolean, start)->flag = folded == "true";
      } else {
        push(TokenKind::Identifier, start)->text = std::move(word);
      }
      i = j;
      continue;
    }
    switch (c) {
      case '+': push(TokenKind::Plus, start); ++i; continue;
      case '-': push(TokenKind::Minus, start); ++i; continue;
      case '*': push(TokenKind::Star, start); ++i; continue;
      case '/': push(TokenKind::Slash, start); ++i; continue;
      case '^': push(TokenKind::Caret, start); ++i; continue;
      case '&': push(TokenKind::Amp, start); ++i; continue;
      case '(': push(TokenKind::LParen, start); ++i; continue;
      case ')': push(TokenKind::RParen, start); ++i; continue;
      case ',': push(TokenKind::Comma, start); ++i; continue;
      case ':': push(TokenKind::Colon, start); ++i; continue;
      case '[': push(TokenKind::LBracket, start); ++i; continue;
      case ']': push(TokenKind::RBracket, start); ++i; continue;
      case '!': push(TokenKind::Bang, start); ++i; continue;
      case '#': push(TokenKind::Hash, start); ++i; continue;
      case '$': push(TokenKind::Dollar, start); ++i; continue;
      case '@': push(TokenKind::At, start); ++i; continue;
      case '=':
        push(TokenKind::Eq, start);
        ++i;
        continue;
      case '<':
        if (i + 1 < s.size() && s[i + 1] == '>') {
          push(TokenKind::Ne, start);
          i += 2;
        } else if (i + 1 < s.size() && s[i + 1] == '=') {
          push(TokenKind::Le, start);
          i += 2;
        } else {
          push(TokenKind::Lt, start);
          ++i;
        }
        continue;
      case '>':
        if (i + 1 < s.size() && s[i + 1] == '=') {
          push(TokenKind::Ge, start);
          i += 2;
        } else {
          push(TokenKind::Gt, start);
          ++i;
        }
        continue;
      default:
        throw LexError(start, std::string("unrecognizable character '") + c + "'");
    }
  }
  push(TokenKind::End, s.size());
  return out;
}

}  // namespace spillgrid
