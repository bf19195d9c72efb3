#pragma once

// In-memory workbook: sheets of sparse cells, defined names, and tables.
// Cells distinguish user content (literal/formula) from derived calc state
// (computed value, spill extent, coverage), which recalculation rebuilds.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spillgrid/ast.hpp"
#include "spillgrid/date.hpp"
#include "spillgrid/parser.hpp"
#include "spillgrid/value.hpp"

namespace spillgrid {

struct GridPos {
  int sheet = 0;
  uint32_t row = 1;
  uint32_t col = 1;
  friend auto operator<=>(const GridPos&, const GridPos&) = default;
};

struct Extent {
  uint32_t rows = 1, cols = 1;
  friend bool operator==(const Extent&, const Extent&) = default;
};

struct Rect {
  int sheet = 0;
  uint32_t row1 = 1, col1 = 1, row2 = 1, col2 = 1;  // inclusive

  bool contains(const GridPos& p) const {
    return p.sheet == sheet && p.row >= row1 && p.row <= row2 &&
           p.col >= col1 && p.col <= col2;
  }
  bool intersects(const Rect& o) const {
    return sheet == o.sheet && row1 <= o.row2 && o.row1 <= row2 &&
           col1 <= o.col2 && o.col1 <= col2;
  }
  friend auto operator<=>(const Rect&, const Rect&) = default;
};

inline Rect extent_rect(const GridPos& anchor, const Extent& e) {
  return Rect{anchor.sheet, anchor.row, anchor.col,
              anchor.row + e.rows - 1, anchor.col + e.cols - 1};
}

struct LiteralContent {
  Scalar value;
  bool date_format = false;  // render as YYYY-MM-DD in value dumps
};

struct FormulaContent {
  AstPtr ast;
};

using CellContent = std::variant<std::monostate, LiteralContent, FormulaContent>;

struct Cell {
  CellContent content;

  // Derived by recalculation.
  std::optional<Value> computed;
  std::optional<Extent> spill_extent;    // formula cells only; 1x1 for scalars
  std::optional<GridPos> covered_by;     // spill-covered cells only
  std::optional<Extent> wanted_extent;   // shape a blocked anchor tried to spill
  bool spill_blocked = false;            // anchor's own spill failed; #SPILL!
                                         // values can also arrive by propagation

  bool is_empty() const { return std::holds_alternative<std::monostate>(content); }
  bool is_literal() const { return std::holds_alternative<LiteralContent>(content); }
  bool is_formula() const { return std::holds_alternative<FormulaContent>(content); }
  const LiteralContent& literal() const { return std::get<LiteralContent>(content); }
  const FormulaContent& formula() const { return std::get<FormulaContent>(content); }
};

inline uint64_t cell_key(uint32_t row, uint32_t col) {
  return (static_cast<uint64_t>(row) << 32) | col;
}

struct Sheet {
  std::string name;
  std::map<uint64_t, Cell> cells;  // key sorts row-major

  const Cell* find(uint32_t row, uint32_t col) const {
    auto it = cells.find(cell_key(row, col));
    return it == cells.end() ? nullptr : &it->second;
  }
  Cell& at(uint32_t row, uint32_t col) { return cells[cell_key(row, col)]; }
};

struct NameDef {
  std::string name;
  std::variant<GridPos, AstPtr> binding;  // cell binding or formula binding
  std::optional<Value> cached;            // formula bindings: last computed value

  bool is_cell_binding() const { return std::holds_alternative<GridPos>(binding); }
  const GridPos& cell() const { return std::get<GridPos>(binding); }
  const AstPtr& formula() const { return std::get<AstPtr>(binding); }
};

struct Table {
  std::string name;
  int sheet = 0;
  uint32_t header_row = 1;
  uint32_t first_col = 1;
  std::vector<std::string> headers;
  uint32_t loaded_rows = 0;  // data rows present at load time
};

class Workbook {
 public:
  std::vector<Sheet> sheets;
  std::vector<NameDef> names;
  std::vector<Table> tables;
  bool calculated = false;

  int find_sheet(std::string_view name) const {
    std::string folded = fold_case(name);
    for (size_t i = 0; i < sheets.size(); ++i)
      if (fold_case(sheets[i].name) == folded) return static_cast<int>(i);
    return -1;
  }

  const NameDef* find_name(std::string_view name) const {
    std::string folded = fold_case(name);
    for (const auto& n : names)
      if (fold_case(n.name) == folded) return &n;
    return nullptr;
  }

  const Table* find_table(std::string_view name) const {
    std::string folded = fold_case(name);
    for (const auto& t : tables)
      if (fold_case(t.name) == folded) return &t;
    return nullptr;
  }

  const Cell* find_cell(const GridPos& p) const {
    if (p.sheet < 0 || p.sheet >= static_cast<int>(sheets.size())) return nullptr;
    return sheets[p.sheet].find(p.row, p.col);
  }

  Cell& cell(const GridPos& p) { return sheets[p.sheet].at(p.row, p.col); }

  // Data rows: contiguous run below the header where at least one cell in
  // the table's column span holds content. Growing or clearing rows resizes
  // the table between recalculations.
  uint32_t table_data_rows(const Table& t) const {
    if (t.sheet < 0 || t.sheet >= static_cast<int>(sheets.size())) return 0;
    const Sheet& sh = sheets[t.sheet];
    uint32_t rows = 0;
    for (uint32_t r = t.header_row + 1; r <= kMaxRow; ++r) {
      bool any = false;
      for (uint32_t c = 0; c < t.headers.size(); ++c) {
        const Cell* cell = sh.find(r, t.first_col + c);
        if (cell && !cell->is_empty()) {
          any = true;
          break;
        }
      }
      if (!any) break;
      ++rows;
    }
    return rows;
  }

  Rect table_column_rect(const Table& t, uint32_t col_index) const {
    uint32_t rows = table_data_rows(t);
    uint32_t first = t.header_row + 1;
    uint32_t last = rows == 0 ? first : t.header_row + rows;
    return Rect{t.sheet, first, t.first_col + col_index, last, t.first_col + col_index};
  }

  int table_column_index(const Table& t, std::string_view column) const {
    std::string folded = fold_case(column);
    for (size_t i = 0; i < t.headers.size(); ++i)
      if (fold_case(t.headers[i]) == folded) return static_cast<int>(i);
    return -1;
  }
};

// Shared literal syntax for workbook files and cell edits: number, ISO date,
// TRUE/FALSE, quoted string, else bare text.
inline LiteralContent parse_literal_text(std::string_view text) {
  if (auto serial = parse_iso_date(text))
    return LiteralContent{Scalar(static_cast<double>(*serial)), true};
  if (auto n = parse_number(text)) return LiteralContent{Scalar(*n), false};
  std::string folded = fold_case(text);
  if (folded == "true") return LiteralContent{Scalar(true), false};
  if (folded == "false") return LiteralContent{Scalar(false), false};
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    std::string s;
    for (size_t i = 1; i + 1 < text.size(); ++i) {
      if (text[i] == '"' && i + 1 < text.size() - 1 && text[i + 1] == '"') ++i;
      s += text[i];
    }
    return LiteralContent{Scalar(std::move(s)), false};
  }
  return LiteralContent{Scalar(std::string(text)), false};
}

// Raw cell input: "" clears, "=..." is a formula (parse errors store the raw
// text as a literal and return a diagnostic), anything else a literal.
inline std::optional<std::string> set_cell_content(Workbook& wb, const GridPos& pos,
                                                   std::string_view raw) {
  Cell& cell = wb.cell(pos);
  cell.computed.reset();
  cell.spill_extent.reset();
  cell.wanted_extent.reset();
  cell.spill_blocked = false;
  if (raw.empty()) {
    cell.content = std::monostate{};
    return std::nullopt;
  }
  if (raw.front() == '=') {
    try {
      cell.content = FormulaContent{parse_formula(raw.substr(1))};
      return std::nullopt;
    } catch (const FormulaError& e) {
      cell.content = LiteralContent{Scalar(std::string(raw)), false};
      return "parse error at offset " + std::to_string(e.offset) + ": " + e.what();
    }
  }
  cell.content = parse_literal_text(raw);
  return std::nullopt;
}

}  // namespace spillgrid
