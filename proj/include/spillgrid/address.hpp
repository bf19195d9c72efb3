#pragma once

// A1-style cell addresses. Columns render as letters A..XFD; both axes are
// 1-based, with optional $ absolute flags kept from the source text.

#include <cctype>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace spillgrid {

inline constexpr uint32_t kMaxRow = 1'048'576;
inline constexpr uint32_t kMaxCol = 16'384;  // XFD

inline std::string column_letters(uint32_t col) {
  std::string out;
  while (col > 0) {
    uint32_t rem = (col - 1) % 26;
    out.insert(out.begin(), static_cast<char>('A' + rem));
    col = (col - 1) / 26;
  }
  return out;
}

inline std::optional<uint32_t> column_index(std::string_view letters) {
  if (letters.empty() || letters.size() > 3) return std::nullopt;
  uint32_t col = 0;
  for (char c : letters) {
    if (c >= 'a' && c <= 'z') c -= 'a' - 'A';
    if (c < 'A' || c > 'Z') return std::nullopt;
    col = col * 26 + static_cast<uint32_t>(c - 'A' + 1);
  }
  if (col > kMaxCol) return std::nullopt;
  return col;
}

struct CellAddress {
  std::optional<std::string> sheet;
  uint32_t row = 1;
  uint32_t col = 1;
  bool row_abs = false;
  bool col_abs = false;

  friend auto operator<=>(const CellAddress&, const CellAddress&) = default;
};

inline bool sheet_name_needs_quotes(std::string_view name) {
  if (name.empty()) return true;
  if (!(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_'))
    return true;
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
      return true;
  return false;
}

inline std::string format_address(const CellAddress& a, bool with_sheet = true) {
  std::string out;
  if (with_sheet && a.sheet) {
    if (sheet_name_needs_quotes(*a.sheet)) {
      out += '\'';
      for (char c : *a.sheet) {
        out += c;
        if (c == '\'') out += '\'';
      }
      out += '\'';
    } else {
      out += *a.sheet;
    }
    out += '!';
  }
  if (a.col_abs) out += '$';
  out += column_letters(a.col);
  if (a.row_abs) out += '$';
  out += std::to_string(a.row);
  return out;
}

// Bare A1 form with optional $ flags; no sheet prefix.
inline std::optional<CellAddress> parse_plain_address(std::string_view s) {
  CellAddress a;
  size_t i = 0;
  if (i < s.size() && s[i] == '$') {
    a.col_abs = true;
    ++i;
  }
  size_t letters = i;
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
  auto col = column_index(s.substr(letters, i - letters));
  if (!col) return std::nullopt;
  if (i < s.size() && s[i] == '$') {
    a.row_abs = true;
    ++i;
  }
  size_t digits = i;
  uint64_t row = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
    row = row * 10 + static_cast<uint64_t>(s[i] - '0');
    if (row > kMaxRow) return std::nullopt;
    ++i;
  }
  if (i == digits || i != s.size() || row < 1) return std::nullopt;
  a.col = *col;
  a.row = static_cast<uint32_t>(row);
  return a;
}

}  // namespace spillgrid
