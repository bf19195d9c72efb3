#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "spillgrid/engine.hpp"
#include "spillgrid/io.hpp"

using namespace spillgrid;

namespace {

// Random workbooks over a 20x20 play area. Formula shapes are driven by
// content (ranges, literal SEQUENCE dims) or by spill references, and the
// mix deliberately includes blockers, overlaps, errors and feedback loops.
struct Generator {
  std::mt19937 rng;

  explicit Generator(uint32_t seed) : rng(seed) {}

  int roll(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  std::string addr() {
    return column_letters(static_cast<uint32_t>(roll(1, 20))) + std::to_string(roll(1, 20));
  }

  std::string range() {
    auto a = parse_plain_address(addr());
    auto b = parse_plain_address(addr());
    CellAddress lo{std::nullopt, std::min(a->row, b->row), std::min(a->col, b->col)};
    CellAddress hi{std::nullopt, std::max(a->row, b->row), std::max(a->col, b->col)};
    return format_address(lo) + ":" + format_address(hi);
  }

  std::string content() {
    switch (roll(0, 14)) {
      case 0: return "";
      case 1: return std::to_string(roll(-50, 50));
      case 2: return roll(0, 1) ? "pear" : "Plum";
      case 3: return roll(0, 1) ? "TRUE" : "FALSE";
      case 4: return "=SEQUENCE(" + std::to_string(roll(1, 6)) + ")";
      case 5: return "=SEQUENCE(1," + std::to_string(roll(1, 6)) + ")";
      case 6:
        return "=SEQUENCE(" + std::to_string(roll(1, 4)) + "," +
               std::to_string(roll(1, 4)) + "," + std::to_string(roll(-5, 5)) + ")";
      case 7: return "=TRANSPOSE(SEQUENCE(" + std::to_string(roll(1, 5)) + "))";
      case 8: return "=" + addr() + "*2+1";
      case 9: return "=SUM(" + range() + ")";
      case 10: return "=SUM(" + addr() + "#)";
      case 11: return "=" + addr() + "#+10";
      case 12: return "=IF(" + addr() + ">5,1,0)";
      case 13: return "=" + addr() + "&\"x\"";
      default: return "=SORT(UNIQUE(" + range() + "))";
    }
  }

  Workbook workbook(int cells) {
    Workbook wb;
    wb.sheets.push_back(Sheet{"S", {}});
    for (int i = 0; i < cells; ++i) {
      auto a = parse_plain_address(addr());
      set_cell_content(wb, GridPos{0, a->row, a->col}, content());
    }
    return wb;
  }
};

struct SpillCheck {
  size_t placed_anchors = 0;
};

// Spill rectangles are pairwise disjoint, cover only content-free cells, and
// contain no formula cell other than their own anchor.
SpillCheck check_spill_invariants(const Workbook& wb) {
  SpillCheck stats;
  for (size_t s = 0; s < wb.sheets.size(); ++s) {
    std::set<uint64_t> claimed;
    for (const auto& [key, cell] : wb.sheets[s].cells) {
      if (!cell.is_formula() || !cell.spill_extent) continue;
      Extent e = *cell.spill_extent;
      if (e.rows == 1 && e.cols == 1) continue;
      ++stats.placed_anchors;
      GridPos anchor{static_cast<int>(s), static_cast<uint32_t>(key >> 32),
                     static_cast<uint32_t>(key & 0xffffffffu)};
      for (uint32_t i = 0; i < e.rows; ++i)
        for (uint32_t j = 0; j < e.cols; ++j) {
          GridPos p{anchor.sheet, anchor.row + i, anchor.col + j};
          if (p == anchor) continue;
          INFO("anchor " << pos_label(wb, anchor) << " covers " << pos_label(wb, p));
          CHECK(claimed.insert(cell_key(p.row, p.col)).second);  // disjoint
          const Cell* covered = wb.find_cell(p);
          REQUIRE(covered);
          CHECK(covered->is_empty());  // never a literal or formula
          REQUIRE(covered->covered_by.has_value());
          CHECK(*covered->covered_by == anchor);
        }
    }
  }
  return stats;
}

std::string all_dumps(const Workbook& wb) {
  std::string out = dump_spill_map(wb);
  for (const auto& sheet : wb.sheets) {
    out += dump_values(wb, sheet.name);
    out += '\x1d';
    out += dump_formula_map(wb, sheet.name);
  }
  return out;
}

}  // namespace

TEST_CASE("spill rectangles stay disjoint over 500 random workbooks") {
  size_t total_placed = 0;
  for (uint32_t seed = 0; seed < 500; ++seed) {
    Generator gen(1000 + seed);
    Workbook wb = gen.workbook(25);
    recalculate_full(wb);
    total_placed += check_spill_invariants(wb).placed_anchors;
  }
  CHECK(total_placed > 500);  // the generator does exercise spilling
}

TEST_CASE("incremental edits match a from-scratch recalculation") {
  for (uint32_t seed = 0; seed < 8; ++seed) {
    Generator gen(7000 + seed);
    Workbook wb = gen.workbook(18);
    recalculate_full(wb);
    for (int edit = 0; edit < 200; ++edit) {
      auto a = parse_plain_address(gen.addr());
      apply_edit(wb, GridPos{0, a->row, a->col}, gen.content());
      if (edit % 20 == 19) {
        Workbook fresh = wb;
        recalculate_full(fresh);
        REQUIRE(all_dumps(wb) == all_dumps(fresh));
      }
    }
    Workbook fresh = wb;
    recalculate_full(fresh);
    REQUIRE(all_dumps(wb) == all_dumps(fresh));
    check_spill_invariants(wb);
  }
}

TEST_CASE("ISFORMULA is TRUE exactly at formula cells over random workbooks") {
  for (uint32_t seed = 0; seed < 25; ++seed) {
    Generator gen(3000 + seed);
    Workbook wb = gen.workbook(20);
    recalculate_full(wb);
    Value grid = evaluate_expression(wb, 0, "ISFORMULA(A1:T20)");
    REQUIRE(grid.rows() == 20);
    REQUIRE(grid.cols() == 20);
    for (uint32_t r = 1; r <= 20; ++r)
      for (uint32_t c = 1; c <= 20; ++c) {
        const Cell* cell = wb.find_cell(GridPos{0, r, c});
        bool is_formula = cell && cell->is_formula();
        CHECK(grid.at(r - 1, c - 1).boolean() == is_formula);
      }
  }
}

TEST_CASE("clearing a cell blocks a healthy anchor only for explainable reasons") {
  // Clearing content frees space, but it also changes values: arrays can
  // resize, and a newly freed higher-priority anchor can claim cells out
  // from under a lower-priority one. Any other conversion of a healthy
  // anchor into #SPILL! would be a dirty-propagation bug.
  size_t clears = 0, conversions = 0;
  for (uint32_t seed = 0; seed < 120; ++seed) {
    Generator gen(5000 + seed);
    Workbook wb = gen.workbook(22);
    recalculate_full(wb);
    std::vector<GridPos> literals;
    std::map<GridPos, Extent> extents_before;
    std::set<GridPos> healthy;
    for (const auto& [key, cell] : wb.sheets[0].cells) {
      GridPos p{0, static_cast<uint32_t>(key >> 32),
                static_cast<uint32_t>(key & 0xffffffffu)};
      if (cell.is_literal()) literals.push_back(p);
      if (cell.is_formula()) {
        extents_before[p] = cell.spill_extent.value_or(Extent{1, 1});
        if (!cell.spill_blocked) healthy.insert(p);
      }
    }
    for (size_t i = 0; i < literals.size() && i < 3; ++i) {
      Workbook probe = wb;
      apply_edit(probe, literals[i], "");
      ++clears;
      // cells claimed by anchors whose extents changed across the clear
      std::set<uint64_t> reclaimed;
      for (const auto& [key, cell] : probe.sheets[0].cells) {
        if (!cell.is_formula() || !cell.spill_extent) continue;
        GridPos p{0, static_cast<uint32_t>(key >> 32),
                  static_cast<uint32_t>(key & 0xffffffffu)};
        auto before = extents_before.find(p);
        if (before != extents_before.end() && before->second == *cell.spill_extent)
          continue;
        for (uint32_t r = 0; r < cell.spill_extent->rows; ++r)
          for (uint32_t k = 0; k < cell.spill_extent->cols; ++k)
            reclaimed.insert(cell_key(p.row + r, p.col + k));
      }
      for (const GridPos& p : healthy) {
        const Cell* c = probe.find_cell(p);
        REQUIRE(c);
        REQUIRE(c->is_formula());
        if (!c->spill_blocked) continue;
        ++conversions;
        INFO("seed " << seed << ": " << pos_label(probe, p)
                     << " became blocked after clearing "
                     << pos_label(probe, literals[i]));
        REQUIRE(c->wanted_extent.has_value());
        bool value_resize = !(*c->wanted_extent == extents_before.at(p));
        bool cascade = false;
        for (uint32_t r = 0; r < c->wanted_extent->rows && !cascade; ++r)
          for (uint32_t k = 0; k < c->wanted_extent->cols; ++k)
            if (reclaimed.count(cell_key(p.row + r, p.col + k))) {
              cascade = true;
              break;
            }
        REQUIRE((value_resize || cascade));
      }
    }
  }
  CHECK(clears > 100);
  // unblocking stays monotone in the overwhelmingly common case
  CHECK(conversions * 10 < clears);
}

TEST_CASE("unstable books settle identically for edits and full recalcs") {
  Workbook wb;
  wb.sheets.push_back(Sheet{"S", {}});
  set_cell_content(wb, GridPos{0, 5, 2}, "=TRANSPOSE(SEQUENCE(2))");
  set_cell_content(wb, GridPos{0, 1, 3}, "=SEQUENCE(IF(COLUMNS(B5#)=2,5,1))");
  recalculate_full(wb);
  apply_edit(wb, GridPos{0, 20, 20}, "7");
  apply_edit(wb, GridPos{0, 5, 4}, "wall");  // lands beside the oscillator
  Workbook fresh = wb;
  recalculate_full(fresh);
  CHECK(all_dumps(wb) == all_dumps(fresh));
}
