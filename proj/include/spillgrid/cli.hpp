#pragma once

// Command implementations behind the spillgrid CLI. Dumps go to `out`,
// diagnostics to `err`. Exit codes: 0 success, 1 lint found error cells,
// 2 load/usage failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "spillgrid/engine.hpp"
#include "spillgrid/io.hpp"

namespace spillgrid {

namespace cli_detail {

inline std::optional<GridPos> parse_cell_ref(const Workbook& wb,
                                             const std::string& text) {
  std::string sheet;
  std::string addr_part = text;
  if (!text.empty() && text[0] == '\'') {
    size_t i = 1;
    for (;;) {
      if (i >= text.size()) return std::nullopt;
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
    if (i >= text.size() || text[i] != '!') return std::nullopt;
    addr_part = text.substr(i + 1);
  } else if (size_t bang = text.find('!'); bang != std::string::npos) {
    sheet = text.substr(0, bang);
    addr_part = text.substr(bang + 1);
    if (sheet.empty()) return std::nullopt;
  }
  auto addr = parse_plain_address(addr_part);
  if (!addr) return std::nullopt;
  int s = sheet.empty() ? (wb.sheets.empty() ? -1 : 0) : wb.find_sheet(sheet);
  if (s < 0) return std::nullopt;
  return GridPos{s, addr->row, addr->col};
}

inline std::string format_rect(const Workbook& wb, const Rect& r) {
  CellAddress first{wb.sheets[r.sheet].name, r.row1, r.col1, false, false};
  std::string out = format_address(first);
  if (r.row1 != r.row2 || r.col1 != r.col2) {
    out += ':';
    out += format_address(CellAddress{std::nullopt, r.row2, r.col2, false, false});
  }
  return out;
}

}  // namespace cli_detail

inline int cmd_eval(const std::string& path, const std::string& dump_kind,
                    const std::optional<std::string>& sheet,
                    const std::optional<std::string>& out_path, std::ostream& out,
                    std::ostream& err) {
  try {
    Workbook wb = load_workbook(path);
    recalculate_full(wb);
    std::string dump;
    if (dump_kind == "spills") {
      dump = dump_spill_map(wb);
    } else {
      std::string target;
      if (sheet)
        target = *sheet;
      else if (!wb.sheets.empty())
        target = wb.sheets[0].name;
      if (!target.empty()) {
        dump = dump_kind == "formulas" ? dump_formula_map(wb, target)
                                       : dump_values(wb, target);
      }
    }
    if (out_path) {
      std::ofstream f(*out_path, std::ios::binary);
      if (!f) {
        err << "error: cannot write " << *out_path << "\n";
        return 2;
      }
      f << dump;
    } else {
      out << dump;
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

inline int cmd_trace(const std::string& path, const std::string& cellref,
                     std::ostream& out, std::ostream& err) {
  try {
    Workbook wb = load_workbook(path);
    recalculate_full(wb);
    auto pos = cli_detail::parse_cell_ref(wb, cellref);
    if (!pos) {
      err << "error: bad cell reference '" << cellref << "'\n";
      return 2;
    }
    TraceResult t = trace(wb, *pos);
    out << "precedents:\n";
    for (const Rect& r : t.precedents) out << cli_detail::format_rect(wb, r) << "\n";
    out << "dependents:\n";
    for (const GridPos& p : t.dependents) out << pos_label(wb, p) << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

inline int cmd_lint(const std::string& path, std::ostream& out, std::ostream& err) {
  try {
    Workbook wb = load_workbook(path);
    recalculate_full(wb);
    std::map<ErrorKind, int> census;
    int total = 0;
    for (size_t s = 0; s < wb.sheets.size(); ++s) {
      for (const auto& [key, cell] : wb.sheets[s].cells) {
        GridPos pos{static_cast<int>(s), static_cast<uint32_t>(key >> 32),
                    static_cast<uint32_t>(key & 0xffffffffu)};
        auto v = displayed_scalar(wb, pos);
        if (!v || !v->is_error()) continue;
        ++census[v->error().kind];
        ++total;
        out << pos_label(wb, pos) << ' ' << error_code(v->error().kind);
        if (!v->error().detail.empty()) out << ' ' << v->error().detail;
        out << "\n";
      }
    }
    for (const auto& [kind, count] : census)
      out << error_code(kind) << ' ' << count << "\n";
    out << total << " errors\n";
    return total == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace spillgrid
