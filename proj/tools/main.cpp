// spillgrid CLI: evaluate workbooks, dump values/formulas/spills, trace
// dependencies and lint error cells.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "spillgrid/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"spillgrid: dynamic-array spreadsheet calculation engine"};
  app.require_subcommand(1);

  std::string workbook;
  std::string dump_kind = "values";
  std::string sheet;
  std::string out_path;
  std::string cellref;

  CLI::App* eval = app.add_subcommand("eval", "load, recalculate and dump a workbook");
  eval->add_option("workbook", workbook, "workbook file")->required();
  eval->add_option("--dump", dump_kind, "values|formulas|spills")
      ->check(CLI::IsMember({"values", "formulas", "spills"}));
  eval->add_option("--sheet", sheet, "sheet to dump (default: first)");
  eval->add_option("--out", out_path, "write dump to a file instead of stdout");

  CLI::App* trace = app.add_subcommand("trace", "print precedents and dependents");
  trace->add_option("workbook", workbook, "workbook file")->required();
  trace->add_option("cellref", cellref, "Sheet!A1 or A1")->required();

  CLI::App* lint = app.add_subcommand("lint", "report cells holding error values");
  lint->add_option("workbook", workbook, "workbook file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, std::cout, std::cerr);
    return code == 0 ? 0 : 2;
  }

  if (eval->parsed()) {
    return spillgrid::cmd_eval(
        workbook, dump_kind,
        sheet.empty() ? std::nullopt : std::optional<std::string>(sheet),
        out_path.empty() ? std::nullopt : std::optional<std::string>(out_path),
        std::cout, std::cerr);
  }
  if (trace->parsed()) return spillgrid::cmd_trace(workbook, cellref, std::cout, std::cerr);
  return spillgrid::cmd_lint(workbook, std::cout, std::cerr);
}
