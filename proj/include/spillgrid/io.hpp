#pragma once

// Workbook files and dumps.
//
// Workbook grammar, one statement per line ('#' lines are comments):
//   sheet <Name>
//   cell <A1> value <literal>
//   cell <A1> formula =<text>
//   name <ident> ref <Sheet>!<A1>
//   name <ident> formula =<text>
//   table <Name> at <Sheet>!<A1> from <csv-path>
//
// Dumps are TSV with LF endings, rendered bit-deterministically.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spillgrid/engine.hpp"
#include "spillgrid/workbook.hpp"

namespace spillgrid {

struct LoadError : std::runtime_error {
  int line;  // 1-based; 0 when not line-specific
  LoadError(int line_no, const std::string& msg)
      : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg
                                       : msg),
        line(line_no) {}
};

enum class ColumnType { Number, DateSerial, Boolean, Text };

struct TableData {
  std::vector<std::string> headers;
  std::vector<ColumnType> types;
  std::vector<std::vector<Scalar>> columns;  // column-major, uniform length

  size_t row_count() const { return columns.empty() ? 0 : columns[0].size(); }
};

namespace io_detail {

inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < text.size()) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
        } else {
          quoted = false;
          ++i;
        }
      } else {
        field += c;
        ++i;
      }
      continue;
    }
    if (c == '"' && !field_started && field.empty()) {
      quoted = true;
      field_started = true;
      ++i;
      continue;
    }
    if (c == ',') {
      end_field();
      ++i;
      continue;
    }
    if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_row();
      i += 2;
      continue;
    }
    if (c == '\n') {
      end_row();
      ++i;
      continue;
    }
    field += c;
    field_started = true;
    ++i;
  }
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

inline bool is_bool_text(const std::string& s) {
  std::string f = fold_case(s);
  return f == "true" || f == "false";
}

}  // namespace io_detail

// First row is the header. Column types: all-numeric -> number, all ISO
// dates -> date serial, all TRUE/FALSE -> boolean, anything else (or any
// empty cell) -> text.
inline TableData ingest_csv_text(std::string_view text) {
  auto rows = io_detail::parse_csv(text);
  if (rows.empty()) throw LoadError(1, "CSV has no header row");
  TableData out;
  const auto& header = rows[0];
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty())
      throw LoadError(1, "empty header cell in column " + std::to_string(c + 1));
    for (size_t k = 0; k < c; ++k)
      if (fold_case(header[k]) == fold_case(header[c]))
        throw LoadError(1, "duplicate header " + header[c]);
    out.headers.push_back(header[c]);
  }
  size_t cols = header.size();
  for (size_t r = 1; r < rows.size(); ++r)
    if (rows[r].size() != cols)
      throw LoadError(static_cast<int>(r + 1),
                      "ragged row: expected " + std::to_string(cols) + " fields, got " +
                          std::to_string(rows[r].size()));
  out.types.resize(cols, ColumnType::Text);
  out.columns.resize(cols);
  for (size_t c = 0; c < cols; ++c) {
    bool any_empty = false, all_num = true, all_date = true, all_bool = true;
    for (size_t r = 1; r < rows.size(); ++r) {
      const std::string& cell = rows[r][c];
      if (cell.empty()) {
        any_empty = true;
        break;
      }
      if (!parse_number(cell)) all_num = false;
      if (!parse_iso_date(cell)) all_date = false;
      if (!io_detail::is_bool_text(cell)) all_bool = false;
    }
    ColumnType t = ColumnType::Text;
    if (!any_empty && rows.size() > 1) {
      if (all_num)
        t = ColumnType::Number;
      else if (all_date)
        t = ColumnType::DateSerial;
      else if (all_bool)
        t = ColumnType::Boolean;
    }
    out.types[c] = t;
    for (size_t r = 1; r < rows.size(); ++r) {
      const std::string& cell = rows[r][c];
      switch (t) {
        case ColumnType::Number:
          out.columns[c].push_back(Scalar(*parse_number(cell)));
          break;
        case ColumnType::DateSerial:
          out.columns[c].push_back(Scalar(static_cast<double>(*parse_iso_date(cell))));
          break;
        case ColumnType::Boolean:
          out.columns[c].push_back(Scalar(fold_case(cell) == "true"));
          break;
        case ColumnType::Text:
          out.columns[c].push_back(Scalar(cell));
          break;
      }
    }
  }
  return out;
}

inline TableData ingest_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(0, "cannot open CSV file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ingest_csv_text(buf.str());
}

namespace io_detail {

inline std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// First whitespace-delimited word; rest (trimmed) goes to `rest`.
inline std::string take_word(std::string_view s, std::string& rest) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) {
    rest.clear();
    return {};
  }
  size_t e = s.find_first_of(" \t", b);
  std::string word(s.substr(b, e == std::string_view::npos ? e : e - b));
  rest = e == std::string_view::npos ? std::string() : trim(s.substr(e));
  return word;
}

inline bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
      return false;
  std::string f = fold_case(s);
  if (f == "true" || f == "false") return false;
  if (parse_plain_address(s)) return false;  // names may not shadow addresses
  return true;
}

// `<Sheet>!<A1>` with optional single-quoted sheet.
inline std::pair<std::string, CellAddress> parse_sheet_ref(const std::string& text,
                                                           int line) {
  std::string sheet;
  size_t i = 0;
  if (!text.empty() && text[0] == '\'') {
    i = 1;
    for (;;) {
      if (i >= text.size()) throw LoadError(line, "unterminated quoted sheet name");
      if (text[i] == '\'') {
        if (i + 1 < text.size() && text[i + 1] == '\'') {
          sheet += '\'';
          i += 2;
        } else {
          ++i;
          break;
        }
      } else {
        sheet += text[i++];
      }
    }
  } else {
    size_t bang = text.find('!');
    if (bang == std::string::npos)
      throw LoadError(line, "expected <Sheet>!<A1> reference: " + text);
    sheet = text.substr(0, bang);
    i = bang;
  }
  if (i >= text.size() || text[i] != '!')
    throw LoadError(line, "expected '!' in reference: " + text);
  auto addr = parse_plain_address(std::string_view(text).substr(i + 1));
  if (!addr) throw LoadError(line, "bad cell address in reference: " + text);
  CellAddress a = *addr;
  return {sheet, a};
}

struct PendingTable {
  std::string name;
  std::string sheet;
  CellAddress anchor;
  std::string csv_path;
  int line = 0;
};

}  // namespace io_detail

inline Workbook load_workbook_text(std::string_view text,
                                   const std::filesystem::path& base_dir) {
  using io_detail::take_word;
  using io_detail::trim;
  Workbook wb;
  std::vector<io_detail::PendingTable> pending;
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) lines.push_back(std::move(cur));
  }
  // Sheets are registered up front so names and tables may reference sheets
  // declared anywhere in the file.
  for (size_t li = 0; li < lines.size(); ++li) {
    int line = static_cast<int>(li + 1);
    std::string body = trim(lines[li]);
    if (body.empty() || body[0] == '#') continue;
    std::string rest;
    if (take_word(body, rest) != "sheet") continue;
    if (rest.empty()) throw LoadError(line, "sheet statement needs a name");
    if (wb.find_sheet(rest) >= 0) throw LoadError(line, "duplicate sheet " + rest);
    wb.sheets.push_back(Sheet{rest, {}});
  }
  int current_sheet = -1;
  for (size_t li = 0; li < lines.size(); ++li) {
    int line = static_cast<int>(li + 1);
    std::string body = trim(lines[li]);
    if (body.empty() || body[0] == '#') continue;
    std::string rest;
    std::string kind = take_word(body, rest);
    if (kind == "sheet") {
      current_sheet = wb.find_sheet(rest);
    } else if (kind == "cell") {
      if (current_sheet < 0)
        throw LoadError(line, "cell statement before any sheet statement");
      std::string after_addr;
      std::string addr_text = take_word(rest, after_addr);
      auto addr = parse_plain_address(addr_text);
      if (!addr) throw LoadError(line, "bad cell address " + addr_text);
      std::string payload;
      std::string what = take_word(after_addr, payload);
      GridPos pos{current_sheet, addr->row, addr->col};
      Cell& cell = wb.cell(pos);
      if (!cell.is_empty())
        throw LoadError(line, "duplicate cell statement for " + addr_text);
      if (what == "value") {
        cell.content = parse_literal_text(payload);
      } else if (what == "formula") {
        if (payload.empty() || payload[0] != '=')
          throw LoadError(line, "formula must start with '='");
        try {
          cell.content = FormulaContent{parse_formula(std::string_view(payload).substr(1))};
        } catch (const FormulaError& e) {
          throw LoadError(line, std::string("formula error at offset ") +
                                    std::to_string(e.offset) + ": " + e.what());
        }
      } else {
        throw LoadError(line, "expected 'value' or 'formula', got '" + what + "'");
      }
    } else if (kind == "name") {
      std::string after_ident;
      std::string ident = take_word(rest, after_ident);
      if (!io_detail::valid_identifier(ident))
        throw LoadError(line, "bad name identifier " + ident);
      if (wb.find_name(ident)) throw LoadError(line, "duplicate name " + ident);
      std::string payload;
      std::string what = take_word(after_ident, payload);
      if (what == "ref") {
        auto [sheet, addr] = io_detail::parse_sheet_ref(payload, line);
        int s = wb.find_sheet(sheet);
        if (s < 0) throw LoadError(line, "unknown sheet " + sheet);
        wb.names.push_back(NameDef{ident, GridPos{s, addr.row, addr.col}, std::nullopt});
      } else if (what == "formula") {
        if (payload.empty() || payload[0] != '=')
          throw LoadError(line, "formula must start with '='");
        try {
          wb.names.push_back(NameDef{
              ident, parse_formula(std::string_view(payload).substr(1)), std::nullopt});
        } catch (const FormulaError& e) {
          throw LoadError(line, std::string("formula error at offset ") +
                                    std::to_string(e.offset) + ": " + e.what());
        }
      } else {
        throw LoadError(line, "expected 'ref' or 'formula', got '" + what + "'");
      }
    } else if (kind == "table") {
      std::string after_name;
      std::string tname = take_word(rest, after_name);
      if (!io_detail::valid_identifier(tname))
        throw LoadError(line, "bad table name " + tname);
      std::string after_at;
      std::string at_word = take_word(after_name, after_at);
      if (at_word != "at") throw LoadError(line, "expected 'at' in table statement");
      std::string after_ref;
      std::string ref_text = take_word(after_at, after_ref);
      std::string path_part;
      std::string from_word = take_word(after_ref, path_part);
      if (from_word != "from")
        throw LoadError(line, "expected 'from' in table statement");
      if (path_part.empty()) throw LoadError(line, "table statement needs a CSV path");
      io_detail::PendingTable t;
      t.name = tname;
      auto [sheet, addr] = io_detail::parse_sheet_ref(ref_text, line);
      t.sheet = sheet;
      t.anchor = addr;
      t.csv_path = path_part;
      t.line = line;
      pending.push_back(std::move(t));
    } else {
      throw LoadError(line, "unknown statement kind '" + kind + "'");
    }
  }
  // Materialize tables last so overlap is checked against every cell statement.
  for (const auto& t : pending) {
    int s = wb.find_sheet(t.sheet);
    if (s < 0) throw LoadError(t.line, "unknown sheet " + t.sheet);
    for (const auto& other : wb.tables)
      if (fold_case(other.name) == fold_case(t.name))
        throw LoadError(t.line, "duplicate table " + t.name);
    std::filesystem::path csv = t.csv_path;
    if (csv.is_relative()) csv = base_dir / csv;
    TableData data;
    try {
      data = ingest_csv(csv.string());
    } catch (const LoadError& e) {
      throw LoadError(t.line, "table " + t.name + ": " + e.what());
    }
    uint32_t rows = static_cast<uint32_t>(data.row_count());
    uint32_t cols = static_cast<uint32_t>(data.headers.size());
    if (t.anchor.row + rows > kMaxRow || t.anchor.col + cols - 1 > kMaxCol)
      throw LoadError(t.line, "table " + t.name + " exceeds grid bounds");
    for (uint32_t r = 0; r <= rows; ++r)
      for (uint32_t c = 0; c < cols; ++c) {
        const Cell* existing =
            wb.sheets[s].find(t.anchor.row + r, t.anchor.col + c);
        if (existing && !existing->is_empty())
          throw LoadError(t.line, "table " + t.name + " overlaps cell " +
                                      format_address(CellAddress{
                                          std::nullopt, t.anchor.row + r,
                                          t.anchor.col + c, false, false}));
      }
    for (uint32_t c = 0; c < cols; ++c) {
      wb.cell(GridPos{s, t.anchor.row, t.anchor.col + c}).content =
          LiteralContent{Scalar(data.headers[c]), false};
      for (uint32_t r = 0; r < rows; ++r)
        wb.cell(GridPos{s, t.anchor.row + 1 + r, t.anchor.col + c}).content =
            LiteralContent{data.columns[c][r],
                           data.types[c] == ColumnType::DateSerial};
    }
    wb.tables.push_back(
        Table{t.name, s, t.anchor.row, t.anchor.col, data.headers, rows});
  }
  return wb;
}

inline Workbook load_workbook(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(0, "cannot open workbook file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_workbook_text(buf.str(), std::filesystem::path(path).parent_path());
}

namespace io_detail {

inline std::string render_display(const Scalar& s, bool date_format) {
  if (s.is_number() && date_format)
    return format_iso_date(static_cast<int64_t>(s.number()));
  if (s.is_error()) {
    return error_code(s.error().kind);
  }
  return to_text(s);
}

}  // namespace io_detail

// Tab-separated grid over the sheet's used range (literals, anchors and
// spill extents). Requires a recalculated workbook.
inline std::string dump_values(const Workbook& wb, std::string_view sheet_name) {
  int s = wb.find_sheet(sheet_name);
  if (s < 0) throw LoadError(0, "unknown sheet " + std::string(sheet_name));
  const Sheet& sheet = wb.sheets[s];
  if (sheet.cells.empty()) return {};
  uint32_t r1 = kMaxRow, c1 = kMaxCol, r2 = 0, c2 = 0;
  for (const auto& [key, cell] : sheet.cells) {
    uint32_t r = static_cast<uint32_t>(key >> 32);
    uint32_t c = static_cast<uint32_t>(key & 0xffffffffu);
    r1 = std::min(r1, r);
    c1 = std::min(c1, c);
    r2 = std::max(r2, r);
    c2 = std::max(c2, c);
  }
  std::string out;
  for (uint32_t r = r1; r <= r2; ++r) {
    for (uint32_t c = c1; c <= c2; ++c) {
      if (c > c1) out += '\t';
      GridPos pos{s, r, c};
      auto v = displayed_scalar(wb, pos);
      if (!v) continue;
      const Cell* cell = wb.find_cell(pos);
      bool date = cell && cell->is_literal() && cell->literal().date_format;
      out += io_detail::render_display(*v, date);
    }
    out += '\n';
  }
  return out;
}

// One line per formula cell: <addr>\t<RxC>\t=<canonical formula>.
inline std::string dump_formula_map(const Workbook& wb, std::string_view sheet_name) {
  int s = wb.find_sheet(sheet_name);
  if (s < 0) throw LoadError(0, "unknown sheet " + std::string(sheet_name));
  std::string out;
  for (const auto& [key, cell] : wb.sheets[s].cells) {
    if (!cell.is_formula()) continue;
    uint32_t r = static_cast<uint32_t>(key >> 32);
    uint32_t c = static_cast<uint32_t>(key & 0xffffffffu);
    Extent e = cell.spill_extent.value_or(Extent{1, 1});
    out += format_address(CellAddress{std::nullopt, r, c, false, false});
    out += '\t';
    out += std::to_string(e.rows) + "x" + std::to_string(e.cols);
    out += "\t=";
    out += render_formula(cell.formula().ast);
    out += '\n';
  }
  return out;
}

// One line per anchor: <sheet>!<addr> <rows>x<cols> <ok|SPILL:detail>.
inline std::string dump_spill_map(const Workbook& wb) {
  std::string out;
  for (size_t s = 0; s < wb.sheets.size(); ++s) {
    for (const auto& [key, cell] : wb.sheets[s].cells) {
      if (!cell.is_formula()) continue;
      uint32_t r = static_cast<uint32_t>(key >> 32);
      uint32_t c = static_cast<uint32_t>(key & 0xffffffffu);
      Extent e = cell.spill_extent.value_or(Extent{1, 1});
      out += pos_label(wb, GridPos{static_cast<int>(s), r, c});
      out += ' ';
      out += std::to_string(e.rows) + "x" + std::to_string(e.cols);
      out += ' ';
      if (cell.spill_blocked) {
        std::string detail;
        if (cell.computed && cell.computed->is_scalar() &&
            cell.computed->scalar().is_error())
          detail = cell.computed->scalar().error().detail;
        for (char& ch : detail)
          if (ch == ' ') ch = '-';
        out += "SPILL:" + detail;
      } else {
        out += "ok";
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace spillgrid
