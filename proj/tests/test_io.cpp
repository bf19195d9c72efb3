#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "spillgrid/io.hpp"
#include "support/sales_data.hpp"

using namespace spillgrid;

namespace {

const std::filesystem::path kFixtures = SPILLGRID_FIXTURE_DIR;

std::string fixture(const char* name) { return (kFixtures / name).string(); }

Workbook load_fixture(const char* name) { return load_workbook(fixture(name)); }

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

size_t count_formula_cells(const Workbook& wb) {
  size_t n = 0;
  for (const auto& sheet : wb.sheets)
    for (const auto& [key, cell] : sheet.cells)
      if (cell.is_formula()) ++n;
  return n;
}

}  // namespace

TEST_CASE("the crosstab fixture loads with four formula nodes") {
  Workbook wb = load_fixture("crosstab.sg");
  CHECK(count_formula_cells(wb) == 4);
  CHECK(wb.names.size() == 3);
  REQUIRE(wb.tables.size() == 1);
  CHECK(wb.tables[0].headers.size() == 6);
  CHECK(wb.table_data_rows(wb.tables[0]) == 12);
}

TEST_CASE("an empty file is a valid empty workbook") {
  Workbook wb = load_fixture("empty.sg");
  CHECK(wb.sheets.empty());
  CHECK(wb.names.empty());
  recalculate_full(wb);
}

TEST_CASE("load-time diagnostics carry line numbers") {
  auto load = [](const char* text) { return load_workbook_text(text, kFixtures); };
  SECTION("duplicate names abort") {
    try {
      load("sheet S\nname demand ref S!A1\nname demand ref S!B1\n");
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(e.line == 3);
    }
  }
  SECTION("duplicate sheets abort") {
    CHECK_THROWS_AS(load("sheet S\nsheet s\n"), LoadError);
  }
  SECTION("unknown statement kinds are rejected") {
    CHECK_THROWS_AS(load("chart A1\n"), LoadError);
  }
  SECTION("cell statements need a sheet") {
    CHECK_THROWS_AS(load("cell A1 value 1\n"), LoadError);
  }
  SECTION("formula syntax errors abort with the line") {
    try {
      load("sheet S\ncell A1 formula =1+\n");
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(e.line == 2);
    }
  }
  SECTION("duplicate cell statements abort") {
    CHECK_THROWS_AS(load("sheet S\ncell A1 value 1\ncell A1 value 2\n"), LoadError);
  }
  SECTION("names referencing unknown sheets abort") {
    CHECK_THROWS_AS(load("sheet S\nname x ref Other!A1\n"), LoadError);
  }
  SECTION("bad name identifiers abort") {
    CHECK_THROWS_AS(load("sheet S\nname A1 ref S!A1\n"), LoadError);
    CHECK_THROWS_AS(load("sheet S\nname TRUE ref S!A1\n"), LoadError);
  }
}

TEST_CASE("tables must not overlap cell statements") {
  std::string text = "sheet Data\ncell B3 value in the way\n";
  text += "table Sales at Data!A1 from sales12.csv\n";
  try {
    load_workbook_text(text, kFixtures);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("overlap") != std::string::npos);
  }
}

TEST_CASE("names may be declared before their sheet") {
  Workbook wb = load_workbook_text("name x ref S!A1\nsheet S\ncell A1 value 9\n",
                                   kFixtures);
  recalculate_full(wb);
  CHECK(evaluate_expression(wb, 0, "x").scalar().number() == 9);
}

TEST_CASE("CSV type inference follows the column rules") {
  TableData t = ingest_csv_text(
      "num,date,flag,text,mixed,holey\n"
      "1,2014-01-02,TRUE,west,5,1\n"
      "2.5,2015-12-31,false,007,x,\n"
      "-3e2,1999-01-01,True,last,9,3\n");
  REQUIRE(t.headers.size() == 6);
  CHECK(t.types[0] == ColumnType::Number);
  CHECK(t.types[1] == ColumnType::DateSerial);
  CHECK(t.types[2] == ColumnType::Boolean);
  CHECK(t.types[3] == ColumnType::Text);
  CHECK(t.types[4] == ColumnType::Text);   // mixed digits and text
  CHECK(t.types[5] == ColumnType::Text);   // empty cell forces text
  CHECK(t.columns[0][2].number() == -300.0);
  CHECK(t.columns[1][0].number() == static_cast<double>(*parse_iso_date("2014-01-02")));
  CHECK(t.columns[2][1].boolean() == false);
  CHECK(t.columns[3][1].text() == "007");
  CHECK(t.columns[5][1].text() == "");
}

TEST_CASE("only ISO dates are inferred as dates") {
  TableData t = ingest_csv_text("date\n25/12/2013\n01/01/2014\n");
  CHECK(t.types[0] == ColumnType::Text);
  CHECK(t.columns[0][0].text() == "25/12/2013");
}

TEST_CASE("a header with zero data rows is a valid empty table") {
  TableData t = ingest_csv_text("a,b\n");
  CHECK(t.headers.size() == 2);
  CHECK(t.row_count() == 0);
}

TEST_CASE("CSV quoting, escapes and CRLF endings") {
  TableData t = ingest_csv_text("a,b\r\n\"1,5\",\"say \"\"hi\"\"\"\r\nplain,two\r\n");
  REQUIRE(t.row_count() == 2);
  CHECK(t.columns[0][0].text() == "1,5");
  CHECK(t.columns[1][0].text() == "say \"hi\"");
  CHECK(t.columns[0][1].text() == "plain");
}

TEST_CASE("CSV structural errors abort") {
  CHECK_THROWS_AS(ingest_csv_text("a,b\n1\n"), LoadError);       // ragged
  CHECK_THROWS_AS(ingest_csv_text("a,\n1,2\n"), LoadError);      // empty header
  CHECK_THROWS_AS(ingest_csv_text("a,A\n1,2\n"), LoadError);     // dup header
  CHECK_THROWS_AS(ingest_csv_text(""), LoadError);               // no header
  try {
    ingest_csv_text("a,b\n1,2\n3\n");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(e.line == 3);
  }
}

TEST_CASE("ingested numbers survive re-serialization exactly") {
  TableData t = ingest_csv_text("x\n0.1\n-3.25e-7\n1396\n9007199254740993\n");
  REQUIRE(t.types[0] == ColumnType::Number);
  for (const Scalar& s : t.columns[0]) {
    auto round_tripped = parse_number(format_number(s.number()));
    REQUIRE(round_tripped);
    CHECK(*round_tripped == s.number());
  }
}

TEST_CASE("value dumps show the spilled amount column") {
  Workbook wb = load_fixture("crosstab.sg");
  recalculate_full(wb);
  std::string dump = dump_values(wb, "Data");
  auto lines = split_lines(dump);
  REQUIRE(lines.size() == 13);  // header row + 12 data rows
  auto row2 = split_tabs(lines[1]);
  REQUIRE(row2.size() >= 8);
  CHECK(row2[1] == "2013-12-25");  // date column renders ISO
  CHECK(row2[7] == "712");
  CHECK(split_tabs(lines[2])[7] == "471");
  CHECK(split_tabs(lines[3])[7] == "570");
  CHECK(split_tabs(lines[4])[7] == "1396");
  // crosstab headers land in the dump too
  auto row3 = split_tabs(lines[2]);
  CHECK(row3[9] == "east");
}

TEST_CASE("value dumps print #SPILL! at blocked anchors") {
  Workbook wb = load_fixture("blocked.sg");
  recalculate_full(wb);
  std::string dump = dump_values(wb, "Data");
  auto lines = split_lines(dump);
  CHECK(split_tabs(lines[1])[7] == "#SPILL!");
  CHECK(split_tabs(lines[4])[7] == "do not lose me");
  std::string spills = dump_spill_map(wb);
  CHECK(spills == "Data!H2 1x1 SPILL:H5\n");
}

TEST_CASE("unknown sheets are diagnosed") {
  Workbook wb = load_fixture("crosstab.sg");
  recalculate_full(wb);
  CHECK_THROWS_AS(dump_values(wb, "Nope"), LoadError);
  CHECK_THROWS_AS(dump_formula_map(wb, "Nope"), LoadError);
}

TEST_CASE("formula map lists one line per formula cell") {
  Workbook wb = load_fixture("crosstab.sg");
  recalculate_full(wb);
  std::string map = dump_formula_map(wb, "Data");
  auto lines = split_lines(map);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "H2\t12x1\t=Sales[units]*Sales[price]");
  CHECK(lines[1] == "K2\t1x5\t=TRANSPOSE(UNIQUE(Sales[goods]))");
  CHECK(lines[2] == "J3\t5x1\t=SORT(UNIQUE(Sales[region]))");
  CHECK(lines[3] == "K3\t5x5\t=SUMIFS(amount#,Sales[region],region#,Sales[goods],goods#)");
}

TEST_CASE("all-literal sheets have an empty formula map") {
  Workbook wb = load_workbook_text("sheet S\ncell A1 value 5\n", kFixtures);
  recalculate_full(wb);
  CHECK(dump_formula_map(wb, "S").empty());
  CHECK(dump_spill_map(wb).empty());
}

TEST_CASE("spill map lists anchors in grid order") {
  Workbook wb = load_fixture("crosstab.sg");
  recalculate_full(wb);
  std::string map = dump_spill_map(wb);
  auto lines = split_lines(map);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "Data!H2 12x1 ok");
  CHECK(lines[1] == "Data!K2 1x5 ok");
  CHECK(lines[2] == "Data!J3 5x1 ok");
  CHECK(lines[3] == "Data!K3 5x5 ok");
}

TEST_CASE("loading the same file twice dumps byte-identically") {
  Workbook a = load_fixture("crosstab.sg");
  Workbook b = load_fixture("crosstab.sg");
  recalculate_full(a);
  recalculate_full(b);
  CHECK(dump_values(a, "Data") == dump_values(b, "Data"));
  CHECK(dump_formula_map(a, "Data") == dump_formula_map(b, "Data"));
  CHECK(dump_spill_map(a) == dump_spill_map(b));
  // dumping is read-only: repeated dumps are identical
  CHECK(dump_values(a, "Data") == dump_values(a, "Data"));
}

TEST_CASE("appending a table row updates the whole pipeline") {
  Workbook wb = load_fixture("crosstab.sg");
  recalculate_full(wb);
  // row 14 sits directly below the loaded table data
  apply_edit(wb, GridPos{0, 14, 1}, "13");
  apply_edit(wb, GridPos{0, 14, 2}, "2014-01-04");
  apply_edit(wb, GridPos{0, 14, 3}, "west");
  apply_edit(wb, GridPos{0, 14, 4}, "tablets");
  apply_edit(wb, GridPos{0, 14, 5}, "3");
  apply_edit(wb, GridPos{0, 14, 6}, "100");
  CHECK(wb.table_data_rows(wb.tables[0]) == 13);
  const Cell* amount = wb.find_cell(GridPos{0, 2, 8});
  REQUIRE(amount);
  CHECK(*amount->spill_extent == Extent{13, 1});
  CHECK(amount->computed->at(12, 0).number() == 300.0);
  // brute-force oracle over the 13 rows: west/tablets now 570 + 995 + 300
  double expected = testsupport::oracle_sumifs("west", "tablets") + 300.0;
  Value v = evaluate_expression(
      wb, 0, "SUMIFS(amount#,Sales[region],\"west\",Sales[goods],\"tablets\")");
  CHECK(v.scalar().number() == expected);
  // the incremental state matches a from-scratch recalculation
  Workbook fresh = wb;
  recalculate_full(fresh);
  CHECK(dump_values(wb, "Data") == dump_values(fresh, "Data"));
  CHECK(dump_spill_map(wb) == dump_spill_map(fresh));
}

TEST_CASE("literal date cells render as dates only while they hold dates") {
  Workbook wb = load_workbook_text("sheet S\ncell A1 value 2015-04-01\n", kFixtures);
  recalculate_full(wb);
  CHECK(dump_values(wb, "S") == "2015-04-01\n");
  apply_edit(wb, GridPos{0, 1, 1}, "42095");
  CHECK(dump_values(wb, "S") == "42095\n");
}
