#pragma once

// Calculation engine. Evaluation order comes from a dependency graph over
// formula cells and formula-bound names (static reference edges plus dynamic
// edges from observed spill extents). Each round evaluates dirty nodes in
// topological order, then places every spill in (sheet, row, col) priority
// order; rounds repeat until no spill extent changes. Cycles evaluate to
// #CIRC!, anchors that never stabilize to #SPILL! "unstable spill".

#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "spillgrid/functions.hpp"
#include "spillgrid/workbook.hpp"

namespace spillgrid {

struct PlacementRecord {
  Extent extent{1, 1};
  bool blocked = false;
  std::string blocker;  // first blocking address, or "out of bounds"
  Extent wanted{1, 1};  // candidate shape when blocked

  friend bool operator==(const PlacementRecord& a, const PlacementRecord& b) {
    return a.extent == b.extent && a.blocked == b.blocked && a.blocker == b.blocker;
  }
};

using PlacementState = std::map<GridPos, PlacementRecord>;

struct CalcReport {
  int rounds = 0;
  size_t evaluated = 0;    // formula/name evaluations summed over rounds
  size_t dirty_nodes = 0;  // nodes re-evaluated by an edit (0 for literals-only edits)
  bool fell_back_to_full = false;  // edit was finished by a from-scratch pass
  std::vector<std::vector<GridPos>> cycles;
  std::map<ErrorKind, int> error_census;
  std::vector<std::string> plan;  // final round's evaluation order, labelled
  std::optional<std::string> parse_diagnostic;
};

struct TraceResult {
  std::vector<Rect> precedents;
  std::vector<GridPos> dependents;
};

inline std::string pos_label(const Workbook& wb, const GridPos& p) {
  CellAddress a{std::nullopt, p.row, p.col, false, false};
  std::string out;
  if (p.sheet >= 0 && p.sheet < static_cast<int>(wb.sheets.size())) {
    a.sheet = wb.sheets[p.sheet].name;
    return format_address(a);
  }
  return format_address(a);
}

namespace engine_detail {

struct Node {
  bool is_name = false;
  int name_index = -1;  // into Workbook::names
  GridPos pos;          // cell nodes
  AstPtr ast;
  int home_sheet = 0;  // sheet for bare references

  // Deterministic plan order: names first (by identifier), then grid order.
  std::string sort_key(const Workbook& wb) const {
    if (is_name) return "0:" + fold_case(wb.names[name_index].name);
    char buf[40];
    std::snprintf(buf, sizeof buf, "1:%08d:%08u:%08u", pos.sheet, pos.row, pos.col);
    return buf;
  }
};

class Calculator {
 public:
  explicit Calculator(Workbook& wb) : wb_(wb) {}

  CalcReport run_full() {
    collect_nodes();
    seed_from_scratch();
    evaluate_loop();
    if (!converged_) mark_unstable();
    commit();
    return std::move(report_);
  }

  CalcReport run_edit(const GridPos& pos, std::string_view raw) {
    // An edit can remove a formula outright; its old footprint (extent or
    // wanted rectangle) still dirties whoever read or coveted those cells.
    std::optional<Rect> old_footprint;
    if (const Cell* c = wb_.find_cell(pos); c && c->is_formula()) {
      Extent e = c->spill_extent.value_or(Extent{1, 1});
      if (c->wanted_extent) {
        e.rows = std::max(e.rows, c->wanted_extent->rows);
        e.cols = std::max(e.cols, c->wanted_extent->cols);
      }
      old_footprint = extent_rect(pos, clamp(pos, e));
    }
    CalcReport edit_report;
    apply_content(pos, raw, edit_report);
    if (!wb_.calculated) {
      CalcReport r = Calculator(wb_).run_full();
      r.parse_diagnostic = edit_report.parse_diagnostic;
      return r;
    }
    collect_nodes();
    seed_from_committed();
    seed_edit_dirty(pos, old_footprint);
    report_.parse_diagnostic = edit_report.parse_diagnostic;
    evaluate_loop();
    if (!converged_ || needs_canonical_fallback()) {
      // Books that oscillate, or whose spill geometry admits feedback loops
      // with more than one stable outcome, fall back to the from-scratch
      // trajectory so that the final state is a function of content alone.
      CalcReport r = Calculator(wb_).run_full();
      r.parse_diagnostic = edit_report.parse_diagnostic;
      r.fell_back_to_full = true;
      return r;
    }
    commit();
    return std::move(report_);
  }

  // Post-recalculation expression evaluation against committed state.
  Value query(int home_sheet, const AstPtr& ast) {
    collect_nodes();
    seed_from_committed();
    for (size_t i = 0; i < nodes_.size(); ++i)
      in_cycle_.push_back(values_[i].is_scalar() && values_[i].scalar().is_error() &&
                          values_[i].scalar().error().kind == ErrorKind::Circ);
    return eval(ast, home_sheet);
  }

 private:
  // ---- node collection -----------------------------------------------

  void collect_nodes() {
    for (size_t i = 0; i < wb_.names.size(); ++i) {
      if (wb_.names[i].is_cell_binding()) continue;
      Node n;
      n.is_name = true;
      n.name_index = static_cast<int>(i);
      n.ast = wb_.names[i].formula();
      n.home_sheet = 0;
      name_node_[fold_case(wb_.names[i].name)] = static_cast<int>(nodes_.size());
      nodes_.push_back(std::move(n));
    }
    for (size_t s = 0; s < wb_.sheets.size(); ++s) {
      for (const auto& [key, cell] : wb_.sheets[s].cells) {
        if (!cell.is_formula()) continue;
        Node n;
        n.pos = GridPos{static_cast<int>(s), static_cast<uint32_t>(key >> 32),
                        static_cast<uint32_t>(key & 0xffffffffu)};
        n.ast = cell.formula().ast;
        n.home_sheet = static_cast<int>(s);
        cell_node_[n.pos] = static_cast<int>(nodes_.size());
        nodes_.push_back(std::move(n));
      }
    }
    size_t n = nodes_.size();
    values_.assign(n, Value());
    dirty_.assign(n, 0);
    refs_.resize(n);
    for (size_t i = 0; i < n; ++i) refs_[i] = extract_references(nodes_[i].ast);
  }

  void seed_from_scratch() {
    std::fill(dirty_.begin(), dirty_.end(), 1);
    placement_.clear();
  }

  void seed_from_committed() {
    for (size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (n.is_name) {
        if (wb_.names[n.name_index].cached)
          values_[i] = *wb_.names[n.name_index].cached;
        else
          dirty_[i] = 1;
        continue;
      }
      const Cell* c = wb_.find_cell(n.pos);
      PlacementRecord rec;
      if (c && c->computed) {
        values_[i] = *c->computed;
        rec.blocked = c->spill_blocked;
        rec.extent = c->spill_extent.value_or(Extent{1, 1});
        if (rec.blocked) {
          rec.blocker = c->computed->is_scalar() && c->computed->scalar().is_error()
                            ? c->computed->scalar().error().detail
                            : std::string();
          rec.wanted = c->wanted_extent.value_or(Extent{1, 1});
        } else {
          rec.wanted = rec.extent;
        }
      } else {
        dirty_[i] = 1;
      }
      placement_[n.pos] = rec;
    }
  }

  // ---- content editing -------------------------------------------------

  void apply_content(const GridPos& pos, std::string_view raw, CalcReport& report) {
    report.parse_diagnostic = set_cell_content(wb_, pos, raw);
  }

  void seed_edit_dirty(const GridPos& pos, const std::optional<Rect>& old_footprint) {
    auto it = cell_node_.find(pos);
    if (it != cell_node_.end()) dirty_[it->second] = 1;
    compute_regions();
    auto touches = [&](const Rect& r) {
      return r.contains(pos) || (old_footprint && r.intersects(*old_footprint));
    };
    for (size_t i = 0; i < nodes_.size(); ++i)
      for (const Rect& r : regions_[i])
        if (touches(r)) dirty_[i] = 1;
    for (const auto& [anchor, rec] : placement_) {
      bool hit = touches(extent_rect(anchor, rec.extent)) ||
                 (rec.blocked &&
                  touches(extent_rect(anchor, clamp(anchor, rec.wanted))));
      if (hit) {
        auto a = cell_node_.find(anchor);
        if (a != cell_node_.end()) dirty_[a->second] = 1;
      }
    }
  }

  static Extent clamp(const GridPos& anchor, const Extent& e) {
    Extent out = e;
    if (anchor.row + out.rows - 1 > kMaxRow) out.rows = kMaxRow - anchor.row + 1;
    if (anchor.col + out.cols - 1 > kMaxCol) out.cols = kMaxCol - anchor.col + 1;
    return out;
  }

  // ---- dependency regions and edges -------------------------------------

  int resolve_sheet(const std::optional<std::string>& sheet, int home) const {
    if (!sheet) return home;
    return wb_.find_sheet(*sheet);
  }

  std::optional<GridPos> spill_anchor(const SpillTarget& t, int home) const {
    if (const auto* addr = std::get_if<CellAddress>(&t)) {
      int s = resolve_sheet(addr->sheet, home);
      if (s < 0) return std::nullopt;
      return GridPos{s, addr->row, addr->col};
    }
    const NameDef* def = wb_.find_name(std::get<std::string>(t));
    if (def && def->is_cell_binding()) return def->cell();
    return std::nullopt;
  }

  void compute_regions() {
    regions_.assign(nodes_.size(), {});
    name_deps_.assign(nodes_.size(), {});
    spill_deps_.assign(nodes_.size(), {});
    for (size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      const ReferenceSet& rs = refs_[i];
      auto& rects = regions_[i];
      for (const CellAddress& a : rs.cells) {
        int s = resolve_sheet(a.sheet, n.home_sheet);
        if (s >= 0) rects.push_back(Rect{s, a.row, a.col, a.row, a.col});
      }
      for (const auto& [a, b] : rs.ranges) {
        int s = resolve_sheet(a.sheet, n.home_sheet);
        if (s < 0) continue;
        rects.push_back(Rect{s, std::min(a.row, b.row), std::min(a.col, b.col),
                             std::max(a.row, b.row), std::max(a.col, b.col)});
      }
      for (const std::string& name : rs.names) {
        const NameDef* def = wb_.find_name(name);
        if (!def) continue;
        if (def->is_cell_binding()) {
          const GridPos& p = def->cell();
          rects.push_back(Rect{p.sheet, p.row, p.col, p.row, p.col});
        } else {
          auto it = name_node_.find(fold_case(name));
          if (it != name_node_.end()) name_deps_[i].push_back(it->second);
        }
      }
      for (const SpillTarget& t : rs.spill_targets)
        if (auto anchor = spill_anchor(t, n.home_sheet)) spill_deps_[i].push_back(*anchor);
      for (const auto& [table, column] : rs.table_columns) {
        const Table* tb = wb_.find_table(table);
        if (!tb) continue;
        int ci = wb_.table_column_index(*tb, column);
        if (ci < 0) continue;
        Rect r = wb_.table_column_rect(*tb, static_cast<uint32_t>(ci));
        if (r.row2 < kMaxRow) ++r.row2;  // sentinel row: appends grow the table
        rects.push_back(r);
      }
    }
  }

  void build_edges() {
    out_edges_.assign(nodes_.size(), {});
    auto add_edge = [&](int from, int to) { out_edges_[from].push_back(to); };
    for (size_t to = 0; to < nodes_.size(); ++to) {
      for (int name : name_deps_[to]) add_edge(name, static_cast<int>(to));
      for (const GridPos& anchor : spill_deps_[to]) {
        auto it = cell_node_.find(anchor);
        if (it != cell_node_.end()) add_edge(it->second, static_cast<int>(to));
      }
      for (const auto& [anchor, node] : cell_node_) {
        Rect r{anchor.sheet, anchor.row, anchor.col, anchor.row, anchor.col};
        auto rec = placement_.find(anchor);
        if (rec != placement_.end() && !rec->second.blocked)
          r = extent_rect(anchor, rec->second.extent);
        for (const Rect& region : regions_[to]) {
          if (region.intersects(r)) {
            add_edge(node, static_cast<int>(to));
            break;
          }
        }
      }
    }
  }

  // Strongly connected components, Tarjan, iterative.
  static std::vector<std::vector<int>> scc_components(
      const std::vector<std::vector<int>>& edges) {
    size_t n = edges.size();
    std::vector<int> index(n, -1), low(n, 0);
    std::vector<char> on_stack(n, 0);
    std::vector<int> stack;
    int next_index = 0;
    std::vector<std::vector<int>> components;

    struct Frame {
      int v;
      size_t edge;
    };
    for (size_t root = 0; root < n; ++root) {
      if (index[root] != -1) continue;
      std::vector<Frame> frames{{static_cast<int>(root), 0}};
      while (!frames.empty()) {
        Frame& f = frames.back();
        int v = f.v;
        if (f.edge == 0) {
          index[v] = low[v] = next_index++;
          stack.push_back(v);
          on_stack[v] = 1;
        }
        bool descended = false;
        while (f.edge < edges[v].size()) {
          int w = edges[v][f.edge++];
          if (index[w] == -1) {
            frames.push_back({w, 0});
            descended = true;
            break;
          }
          if (on_stack[w]) low[v] = std::min(low[v], index[w]);
        }
        if (descended) continue;
        if (low[v] == index[v]) {
          std::vector<int> component;
          for (;;) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            component.push_back(w);
            if (w == v) break;
          }
          components.push_back(std::move(component));
        }
        frames.pop_back();
        if (!frames.empty()) {
          int parent = frames.back().v;
          low[parent] = std::min(low[parent], low[v]);
        }
      }
    }
    return components;
  }

  // Components of size > 1 (or with a self-loop), as canonical sorted sets.
  static std::set<std::vector<int>> cyclic_components(
      const std::vector<std::vector<int>>& edges) {
    std::set<std::vector<int>> out;
    for (auto& component : scc_components(edges)) {
      bool cyclic = component.size() > 1;
      if (!cyclic) {
        int v = component[0];
        for (int w : edges[v])
          if (w == v) cyclic = true;
      }
      if (!cyclic) continue;
      std::vector<int> members = component;
      std::sort(members.begin(), members.end());
      out.insert(std::move(members));
    }
    return out;
  }

  void find_cycles() {
    size_t n = nodes_.size();
    in_cycle_.assign(n, 0);
    report_.cycles.clear();
    for (const auto& component : cyclic_components(out_edges_)) {
      std::vector<GridPos> members;
      for (int v : component) {
        in_cycle_[v] = 1;
        if (!nodes_[v].is_name) members.push_back(nodes_[v].pos);
      }
      std::sort(members.begin(), members.end());
      report_.cycles.push_back(std::move(members));
    }
    std::sort(report_.cycles.begin(), report_.cycles.end());
  }

  // The incremental trajectory starts from the committed placement, a full
  // recalculation from an empty one. When spill geometry lets dynamic edges
  // create or reshape cycles, the fixed point may depend on the trajectory,
  // so only the from-scratch result counts. Compare the cyclic structure of
  // a content-only graph against an everything-that-could-touch graph; any
  // difference means dynamic feedback is in play. Values pinned by the
  // engine itself (#CIRC! from a dynamic cycle, "unstable spill") mask the
  // shapes an anchor could take, so their presence forces the fallback too.
  bool needs_canonical_fallback() {
    for (const auto& [anchor, rec] : placement_)
      if (rec.blocked && rec.blocker == "unstable spill") return true;
    size_t n = nodes_.size();
    std::vector<std::vector<int>> static_edges(n), potential_edges(n);
    for (size_t to = 0; to < n; ++to) {
      for (int name : name_deps_[to]) {
        static_edges[name].push_back(static_cast<int>(to));
        potential_edges[name].push_back(static_cast<int>(to));
      }
      for (const GridPos& anchor : spill_deps_[to]) {
        auto it = cell_node_.find(anchor);
        if (it == cell_node_.end()) continue;
        static_edges[it->second].push_back(static_cast<int>(to));
        potential_edges[it->second].push_back(static_cast<int>(to));
      }
      for (const auto& [anchor, node] : cell_node_) {
        Rect anchor_rect{anchor.sheet, anchor.row, anchor.col, anchor.row, anchor.col};
        Rect reach = anchor_rect;
        auto rec = placement_.find(anchor);
        if (rec != placement_.end()) {
          Extent e{std::max(rec->second.extent.rows, rec->second.wanted.rows),
                   std::max(rec->second.extent.cols, rec->second.wanted.cols)};
          reach = extent_rect(anchor, clamp(anchor, e));
        }
        for (const Rect& region : regions_[to]) {
          if (region.intersects(anchor_rect)) {
            static_edges[node].push_back(static_cast<int>(to));
            break;
          }
        }
        for (const Rect& region : regions_[to]) {
          if (region.intersects(reach)) {
            potential_edges[node].push_back(static_cast<int>(to));
            break;
          }
        }
      }
    }
    // Occupancy interactions: an earlier anchor's spill can take cells a
    // later anchor needs.
    for (const auto& [a, na] : cell_node_) {
      auto ra = placement_.find(a);
      if (ra == placement_.end()) continue;
      Extent ea{std::max(ra->second.extent.rows, ra->second.wanted.rows),
                std::max(ra->second.extent.cols, ra->second.wanted.cols)};
      if (ea.rows == 1 && ea.cols == 1) continue;
      Rect rect_a = extent_rect(a, clamp(a, ea));
      for (const auto& [b, nb] : cell_node_) {
        if (!(a < b)) continue;
        auto rb = placement_.find(b);
        if (rb == placement_.end()) continue;
        Extent eb{std::max(rb->second.extent.rows, rb->second.wanted.rows),
                  std::max(rb->second.extent.cols, rb->second.wanted.cols)};
        Rect rect_b = extent_rect(b, clamp(b, eb));
        if (rect_a.intersects(rect_b)) potential_edges[na].push_back(nb);
      }
    }
    auto static_cycles = cyclic_components(static_edges);
    std::vector<char> in_static_cycle(n, 0);
    for (const auto& component : static_cycles)
      for (int v : component) in_static_cycle[v] = 1;
    for (size_t v = 0; v < n; ++v)
      if (in_cycle_[v] && !in_static_cycle[v]) return true;  // dynamically cycled
    return static_cycles != cyclic_components(potential_edges);
  }

  std::vector<int> plan_order() {
    size_t n = nodes_.size();
    std::vector<int> indeg(n, 0);
    for (size_t v = 0; v < n; ++v) {
      if (in_cycle_[v]) continue;
      for (int w : out_edges_[v])
        if (!in_cycle_[w]) ++indeg[w];
    }
    auto cmp = [&](int a, int b) {
      return nodes_[a].sort_key(wb_) < nodes_[b].sort_key(wb_);
    };
    std::set<int, decltype(cmp)> ready(cmp);
    for (size_t v = 0; v < n; ++v)
      if (!in_cycle_[v] && indeg[v] == 0) ready.insert(static_cast<int>(v));
    std::vector<int> order;
    order.reserve(n);
    while (!ready.empty()) {
      int v = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(v);
      for (int w : out_edges_[v]) {
        if (in_cycle_[w]) continue;
        if (--indeg[w] == 0) ready.insert(w);
      }
    }
    return order;
  }

  // ---- evaluation --------------------------------------------------------

  Value node_value(int node) const { return values_[node]; }

  std::optional<int> node_at(const GridPos& pos) const {
    auto it = cell_node_.find(pos);
    if (it == cell_node_.end()) return std::nullopt;
    return it->second;
  }

  Scalar resolve_cell_scalar(const GridPos& pos) const {
    const Cell* c = wb_.find_cell(pos);
    if (c && c->is_literal()) return c->literal().value;
    if (c && c->is_formula()) {
      auto rec = placement_.find(pos);
      if (rec != placement_.end() && rec->second.blocked)
        return error_scalar(ErrorKind::Spill, rec->second.blocker);
      auto node = node_at(pos);
      if (node) {
        const Value& v = values_[*node];
        return v.cells()[0];
      }
      return Scalar(0.0);
    }
    // Spill-covered cells yield the covered element of the anchor's array.
    for (const auto& [anchor, rec] : placement_) {
      if (rec.blocked || (rec.extent.rows == 1 && rec.extent.cols == 1)) continue;
      if (anchor == pos || !extent_rect(anchor, rec.extent).contains(pos)) continue;
      auto node = node_at(anchor);
      if (!node) break;
      const Value& v = values_[*node];
      uint32_t r = pos.row - anchor.row, cidx = pos.col - anchor.col;
      if (r < v.rows() && cidx < v.cols()) return v.at(r, cidx);
      break;
    }
    return Scalar(0.0);  // empty cells are zero in value context
  }

  Value resolve_range(const Rect& r) const {
    uint32_t rows = r.row2 - r.row1 + 1, cols = r.col2 - r.col1 + 1;
    if (size_t(rows) * cols > kMaxArrayCells)
      return Value::error(ErrorKind::Num, "range too large");
    Value out(rows, cols);
    for (uint32_t i = 0; i < rows; ++i)
      for (uint32_t j = 0; j < cols; ++j)
        out.at(i, j) = resolve_cell_scalar(GridPos{r.sheet, r.row1 + i, r.col1 + j});
    return out;
  }

  Value resolve_spill(const AstPtr& target, int home) {
    const NameRef* name = std::get_if<NameRef>(&target->v);
    if (name) {
      const NameDef* def = wb_.find_name(name->name);
      if (!def)
        return Value::error(ErrorKind::Name, "unknown name " + name->name);
      if (!def->is_cell_binding())
        return Value::error(ErrorKind::Ref, name->name + " has no grid anchor");
    }
    ReferenceSet rs;
    collect_references(make_ast<SpillRef>(target), rs);
    auto anchor = spill_anchor(*rs.spill_targets.begin(), home);
    if (!anchor) return Value::error(ErrorKind::Ref, "unresolved spill target");
    const Cell* c = wb_.find_cell(*anchor);
    if (!c || !c->is_formula())
      return Value::error(ErrorKind::Ref, "spill reference to a non-formula cell");
    auto rec = placement_.find(*anchor);
    if (rec != placement_.end() && rec->second.blocked)
      return Value::error(ErrorKind::Ref, "spill reference to a blocked anchor");
    auto node = node_at(*anchor);
    if (!node) return Value::error(ErrorKind::Ref, "unresolved spill target");
    return values_[*node];
  }

  Value resolve_name(const std::string& name) {
    const NameDef* def = wb_.find_name(name);
    if (!def) return Value::error(ErrorKind::Name, "unknown name " + name);
    if (def->is_cell_binding()) return Value(resolve_cell_scalar(def->cell()));
    auto it = name_node_.find(fold_case(name));
    if (it == name_node_.end())
      return Value::error(ErrorKind::Name, "unknown name " + name);
    return values_[it->second];
  }

  Value resolve_table_column(const TableColumnRef& t) const {
    const Table* tb = wb_.find_table(t.table);
    if (!tb) return Value::error(ErrorKind::Name, "unknown table " + t.table);
    int ci = wb_.table_column_index(*tb, t.column);
    if (ci < 0)
      return Value::error(ErrorKind::Name,
                          "unknown column " + t.table + "[" + t.column + "]");
    if (wb_.table_data_rows(*tb) == 0)
      return Value::error(ErrorKind::Ref, "table has no data rows");
    return resolve_range(wb_.table_column_rect(*tb, static_cast<uint32_t>(ci)));
  }

  std::optional<Rect> reference_rect(const AstPtr& ast, int home) {
    if (const auto* c = std::get_if<CellRef>(&ast->v)) {
      int s = resolve_sheet(c->addr.sheet, home);
      if (s < 0) return std::nullopt;
      return Rect{s, c->addr.row, c->addr.col, c->addr.row, c->addr.col};
    }
    if (const auto* r = std::get_if<RangeRef>(&ast->v)) {
      int s = resolve_sheet(r->first.sheet, home);
      if (s < 0) return std::nullopt;
      return Rect{s, std::min(r->first.row, r->second.row),
                  std::min(r->first.col, r->second.col),
                  std::max(r->first.row, r->second.row),
                  std::max(r->first.col, r->second.col)};
    }
    if (const auto* n = std::get_if<NameRef>(&ast->v)) {
      const NameDef* def = wb_.find_name(n->name);
      if (!def || !def->is_cell_binding()) return std::nullopt;
      const GridPos& p = def->cell();
      return Rect{p.sheet, p.row, p.col, p.row, p.col};
    }
    if (const auto* sp = std::get_if<SpillRef>(&ast->v)) {
      ReferenceSet rs;
      collect_references(ast, rs);
      if (rs.spill_targets.empty()) return std::nullopt;
      auto anchor = spill_anchor(*rs.spill_targets.begin(), home);
      if (!anchor) return std::nullopt;
      (void)sp;
      auto rec = placement_.find(*anchor);
      Extent e =
          rec != placement_.end() && !rec->second.blocked ? rec->second.extent : Extent{1, 1};
      return extent_rect(*anchor, e);
    }
    return std::nullopt;
  }

  Value eval_isformula(const Call& call, int home) {
    if (call.args.size() != 1)
      return Value::error(ErrorKind::Value, "ISFORMULA: wrong argument count");
    auto rect = reference_rect(call.args[0], home);
    if (!rect)
      return Value::error(ErrorKind::Value, "ISFORMULA argument must be a reference");
    uint32_t rows = rect->row2 - rect->row1 + 1, cols = rect->col2 - rect->col1 + 1;
    if (size_t(rows) * cols > kMaxArrayCells)
      return Value::error(ErrorKind::Num, "range too large");
    Value out(rows, cols);
    for (uint32_t i = 0; i < rows; ++i)
      for (uint32_t j = 0; j < cols; ++j) {
        const Cell* c =
            wb_.find_cell(GridPos{rect->sheet, rect->row1 + i, rect->col1 + j});
        out.at(i, j) = Scalar(c != nullptr && c->is_formula());
      }
    return out;
  }

  Value eval(const AstPtr& ast, int home) {
    return std::visit(
        [&](const auto& x) -> Value {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, NumberLit>) {
            return Value(Scalar(x.value));
          } else if constexpr (std::is_same_v<T, TextLit>) {
            return Value(Scalar(x.value));
          } else if constexpr (std::is_same_v<T, BoolLit>) {
            return Value(Scalar(x.value));
          } else if constexpr (std::is_same_v<T, CellRef>) {
            int s = resolve_sheet(x.addr.sheet, home);
            if (s < 0)
              return Value::error(ErrorKind::Ref, "unknown sheet " +
                                                      x.addr.sheet.value_or(""));
            return Value(resolve_cell_scalar(GridPos{s, x.addr.row, x.addr.col}));
          } else if constexpr (std::is_same_v<T, RangeRef>) {
            auto rect = reference_rect(ast, home);
            if (!rect)
              return Value::error(ErrorKind::Ref, "unknown sheet in range");
            return resolve_range(*rect);
          } else if constexpr (std::is_same_v<T, NameRef>) {
            return resolve_name(x.name);
          } else if constexpr (std::is_same_v<T, SpillRef>) {
            return resolve_spill(x.target, home);
          } else if constexpr (std::is_same_v<T, TableColumnRef>) {
            return resolve_table_column(x);
          } else if constexpr (std::is_same_v<T, UnaryOp>) {
            return elementwise_negate(eval(x.operand, home));
          } else if constexpr (std::is_same_v<T, BinaryOpNode>) {
            return elementwise_binary(x.op, eval(x.lhs, home), eval(x.rhs, home));
          } else {  // Call
            if (x.function == "ISFORMULA") return eval_isformula(x, home);
            if (auto agg = agg_op_from_name(x.function); agg && x.args.size() == 1) {
              if (const auto* inner = std::get_if<Call>(&x.args[0]->v)) {
                bool by_col = inner->function == "BYCOLUMN";
                if ((by_col || inner->function == "BYROW") && inner->args.size() == 1)
                  return aggregate_sliced(*agg, eval(inner->args[0], home), by_col);
              }
            }
            std::vector<Value> args;
            args.reserve(x.args.size());
            for (const auto& a : x.args) args.push_back(eval(a, home));
            return dispatch(x.function, args);
          }
        },
        ast->v);
  }

  // ---- spill placement ---------------------------------------------------

  bool content_blocks(const GridPos& pos) const {
    const Cell* c = wb_.find_cell(pos);
    return c && !c->is_empty();
  }

  PlacementState place_all() {
    PlacementState out;
    std::set<GridPos> claimed;
    for (const auto& [anchor, node] : cell_node_) {
      // Blocked anchors keep their committed record until something inside
      // their wanted rectangle changes (which marks them dirty).
      if (!dirty_[node]) {
        auto prev = placement_.find(anchor);
        if (prev != placement_.end() && prev->second.blocked) {
          out[anchor] = prev->second;
          continue;
        }
      }
      const Value& v = values_[node];
      PlacementRecord rec;
      rec.wanted = Extent{v.rows(), v.cols()};
      if (v.is_scalar()) {
        out[anchor] = rec;
        continue;
      }
      if (anchor.row + v.rows() - 1 > kMaxRow || anchor.col + v.cols() - 1 > kMaxCol) {
        rec.blocked = true;
        rec.blocker = "out of bounds";
        out[anchor] = rec;
        continue;
      }
      std::optional<GridPos> blocker;
      for (uint32_t i = 0; i < v.rows() && !blocker; ++i)
        for (uint32_t j = 0; j < v.cols(); ++j) {
          GridPos p{anchor.sheet, anchor.row + i, anchor.col + j};
          if (p == anchor) continue;
          if (content_blocks(p) || claimed.count(p)) {
            blocker = p;
            break;
          }
        }
      if (blocker) {
        rec.blocked = true;
        rec.blocker = format_address(
            CellAddress{std::nullopt, blocker->row, blocker->col, false, false});
      } else {
        rec.extent = Extent{v.rows(), v.cols()};
        for (uint32_t i = 0; i < v.rows(); ++i)
          for (uint32_t j = 0; j < v.cols(); ++j) {
            GridPos p{anchor.sheet, anchor.row + i, anchor.col + j};
            if (!(p == anchor)) claimed.insert(p);
          }
      }
      out[anchor] = rec;
    }
    return out;
  }

  // ---- the fixed-point loop ------------------------------------------------

  void evaluate_loop() {
    int limit = static_cast<int>(nodes_.size()) + 1;
    converged_ = false;
    for (int round = 1; round <= limit; ++round) {
      report_.rounds = round;
      compute_regions();
      build_edges();
      find_cycles();
      for (size_t v = 0; v < nodes_.size(); ++v) {
        if (!in_cycle_[v]) continue;
        Value circ = Value::error(ErrorKind::Circ, "circular reference");
        if (!(values_[v] == circ)) {
          values_[v] = circ;
          mark_dependents_dirty(static_cast<int>(v));
        }
        dirty_[v] = 0;
      }
      // Nodes that left a cycle need re-evaluation.
      for (size_t v = 0; v < nodes_.size(); ++v)
        if (!in_cycle_[v] && values_[v].is_scalar() && values_[v].scalar().is_error() &&
            values_[v].scalar().error().kind == ErrorKind::Circ)
          dirty_[v] = 1;
      std::vector<int> order = plan_order();
      // Close dirtiness forward over edges.
      for (int v : order)
        if (dirty_[v]) {
          for (int w : out_edges_[v])
            if (!in_cycle_[w]) dirty_[w] = 1;
        }
      report_.plan.clear();
      for (int v : order)
        report_.plan.push_back(nodes_[v].is_name
                                   ? "name:" + wb_.names[nodes_[v].name_index].name
                                   : pos_label(wb_, nodes_[v].pos));
      for (int v : order) {
        if (!dirty_[v]) continue;
        values_[v] = eval(nodes_[v].ast, nodes_[v].home_sheet);
        ++report_.evaluated;
        evaluated_nodes_.insert(v);
      }
      PlacementState next = place_all();  // consults dirty_ for blocked anchors
      std::fill(dirty_.begin(), dirty_.end(), 0);
      std::vector<GridPos> changed;
      for (const auto& [anchor, rec] : next) {
        auto prev = placement_.find(anchor);
        if (prev == placement_.end() || !(prev->second == rec)) changed.push_back(anchor);
      }
      for (const auto& [anchor, rec] : placement_)
        if (!next.count(anchor)) changed.push_back(anchor);
      if (changed.empty()) {
        placement_ = std::move(next);
        converged_ = true;
        break;
      }
      // Extent changes re-dirty consumers and blocked anchors that might fit now.
      for (const GridPos& anchor : changed) {
        Rect region{anchor.sheet, anchor.row, anchor.col, anchor.row, anchor.col};
        auto grow = [&](const PlacementState& st) {
          auto it = st.find(anchor);
          if (it == st.end()) return;
          Rect r = extent_rect(anchor, clamp(anchor, it->second.blocked
                                                         ? it->second.wanted
                                                         : it->second.extent));
          region.row2 = std::max(region.row2, r.row2);
          region.col2 = std::max(region.col2, r.col2);
        };
        grow(placement_);
        grow(next);
        for (size_t v = 0; v < nodes_.size(); ++v) {
          for (const Rect& r : regions_[v])
            if (r.intersects(region)) {
              dirty_[v] = 1;
              break;
            }
          for (const GridPos& dep : spill_deps_[v])
            if (dep == anchor) dirty_[v] = 1;
        }
        for (const auto& [other, rec] : next) {
          if (!rec.blocked) continue;
          if (extent_rect(other, clamp(other, rec.wanted)).intersects(region)) {
            auto it = cell_node_.find(other);
            if (it != cell_node_.end()) dirty_[it->second] = 1;
          }
        }
        auto self = cell_node_.find(anchor);
        if (self != cell_node_.end()) dirty_[self->second] = 1;
      }
      last_changed_ = std::move(changed);
      placement_ = std::move(next);
    }
  }

  void mark_dependents_dirty(int v) {
    for (int w : out_edges_[v])
      if (!in_cycle_[w]) dirty_[w] = 1;
  }

  void mark_unstable() {
    for (const GridPos& anchor : last_changed_) {
      auto it = placement_.find(anchor);
      if (it == placement_.end()) continue;
      it->second.blocked = true;
      it->second.blocker = "unstable spill";
      it->second.extent = Extent{1, 1};
    }
  }

  // ---- committing results --------------------------------------------------

  void commit() {
    for (Sheet& sheet : wb_.sheets) {
      for (auto it = sheet.cells.begin(); it != sheet.cells.end();) {
        Cell& c = it->second;
        c.covered_by.reset();
        if (!c.is_formula()) {
          c.computed.reset();
          c.spill_extent.reset();
          c.wanted_extent.reset();
          c.spill_blocked = false;
        }
        if (c.is_empty()) {
          it = sheet.cells.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (const auto& [pos, node] : cell_node_) {
      Cell& c = wb_.cell(pos);
      const PlacementRecord& rec = placement_.at(pos);
      c.spill_blocked = rec.blocked;
      if (rec.blocked) {
        c.computed = Value::error(ErrorKind::Spill, rec.blocker);
        c.spill_extent = Extent{1, 1};
        c.wanted_extent = rec.wanted;
      } else {
        c.computed = values_[node];
        c.spill_extent = rec.extent;
        c.wanted_extent.reset();
        for (uint32_t i = 0; i < rec.extent.rows; ++i)
          for (uint32_t j = 0; j < rec.extent.cols; ++j) {
            GridPos p{pos.sheet, pos.row + i, pos.col + j};
            if (p == pos) continue;
            wb_.cell(p).covered_by = pos;
          }
      }
    }
    for (auto& [key, node] : name_node_)
      wb_.names[nodes_[node].name_index].cached = values_[node];
    wb_.calculated = true;
    report_.dirty_nodes = evaluated_nodes_.size();
    census();
  }

  void census() {
    report_.error_census.clear();
    for (size_t s = 0; s < wb_.sheets.size(); ++s) {
      for (const auto& [key, cell] : wb_.sheets[s].cells) {
        GridPos pos{static_cast<int>(s), static_cast<uint32_t>(key >> 32),
                    static_cast<uint32_t>(key & 0xffffffffu)};
        std::optional<Scalar> v = displayed_scalar(wb_, pos);
        if (v && v->is_error()) ++report_.error_census[v->error().kind];
      }
    }
  }

 public:
  // The scalar a cell shows after recalculation: literals as-is, anchors the
  // top-left of their array (or #SPILL!), covered cells their element.
  static std::optional<Scalar> displayed_scalar(const Workbook& wb, const GridPos& pos) {
    const Cell* c = wb.find_cell(pos);
    if (!c) return std::nullopt;
    if (c->is_literal()) return c->literal().value;
    if (c->is_formula()) {
      if (!c->computed) return std::nullopt;
      return c->computed->cells()[0];
    }
    if (c->covered_by) {
      const Cell* anchor = wb.find_cell(*c->covered_by);
      if (anchor && anchor->computed) {
        uint32_t r = pos.row - c->covered_by->row;
        uint32_t k = pos.col - c->covered_by->col;
        if (r < anchor->computed->rows() && k < anchor->computed->cols())
          return anchor->computed->at(r, k);
      }
    }
    return std::nullopt;
  }

 private:
  Workbook& wb_;
  std::vector<Node> nodes_;
  std::map<GridPos, int> cell_node_;
  std::map<std::string, int> name_node_;
  std::vector<ReferenceSet> refs_;
  std::vector<std::vector<Rect>> regions_;
  std::vector<std::vector<int>> name_deps_;
  std::vector<std::vector<GridPos>> spill_deps_;
  std::vector<std::vector<int>> out_edges_;
  std::vector<Value> values_;
  std::vector<char> dirty_;
  std::vector<char> in_cycle_;
  PlacementState placement_;
  std::vector<GridPos> last_changed_;
  std::set<int> evaluated_nodes_;
  bool converged_ = false;
  CalcReport report_;
};

}  // namespace engine_detail

inline CalcReport recalculate_full(Workbook& wb) {
  return engine_detail::Calculator(wb).run_full();
}

inline CalcReport apply_edit(Workbook& wb, const GridPos& pos, std::string_view raw) {
  return engine_detail::Calculator(wb).run_edit(pos, raw);
}

// Evaluate an expression against an already-recalculated workbook.
inline Value evaluate_expression(Workbook& wb, int home_sheet, const AstPtr& ast) {
  return engine_detail::Calculator(wb).query(home_sheet, ast);
}

inline Value evaluate_expression(Workbook& wb, int home_sheet, std::string_view formula) {
  return evaluate_expression(wb, home_sheet, parse_formula(formula));
}

inline std::optional<Scalar> displayed_scalar(const Workbook& wb, const GridPos& pos) {
  return engine_detail::Calculator::displayed_scalar(wb, pos);
}

namespace engine_detail {

// Trace rectangles: resolved references at array granularity, with
// formula-bound names expanded transitively.
inline void trace_rects(const Workbook& wb, int home, const AstPtr& ast,
                        std::set<std::string>& visiting, std::set<Rect>& out) {
  ReferenceSet rs = extract_references(ast);
  auto sheet_of = [&](const std::optional<std::string>& s) {
    return s ? wb.find_sheet(*s) : home;
  };
  for (const CellAddress& a : rs.cells) {
    int s = sheet_of(a.sheet);
    if (s >= 0) out.insert(Rect{s, a.row, a.col, a.row, a.col});
  }
  for (const auto& [a, b] : rs.ranges) {
    int s = sheet_of(a.sheet);
    if (s >= 0)
      out.insert(Rect{s, std::min(a.row, b.row), std::min(a.col, b.col),
                      std::max(a.row, b.row), std::max(a.col, b.col)});
  }
  for (const std::string& name : rs.names) {
    const NameDef* def = wb.find_name(name);
    if (!def) continue;
    if (def->is_cell_binding()) {
      const GridPos& p = def->cell();
      out.insert(Rect{p.sheet, p.row, p.col, p.row, p.col});
    } else if (visiting.insert(fold_case(name)).second) {
      trace_rects(wb, home, def->formula(), visiting, out);
    }
  }
  for (const SpillTarget& t : rs.spill_targets) {
    std::optional<GridPos> anchor;
    if (const auto* addr = std::get_if<CellAddress>(&t)) {
      int s = sheet_of(addr->sheet);
      if (s >= 0) anchor = GridPos{s, addr->row, addr->col};
    } else {
      const NameDef* def = wb.find_name(std::get<std::string>(t));
      if (def && def->is_cell_binding()) anchor = def->cell();
    }
    if (!anchor) continue;
    const Cell* c = wb.find_cell(*anchor);
    Extent e = c && c->spill_extent ? *c->spill_extent : Extent{1, 1};
    out.insert(extent_rect(*anchor, e));
  }
  for (const auto& [table, column] : rs.table_columns) {
    const Table* tb = wb.find_table(table);
    if (!tb) continue;
    int ci = wb.table_column_index(*tb, column);
    if (ci < 0 || wb.table_data_rows(*tb) == 0) continue;
    out.insert(wb.table_column_rect(*tb, static_cast<uint32_t>(ci)));
  }
}

}  // namespace engine_detail

inline TraceResult trace(const Workbook& wb, const GridPos& pos) {
  TraceResult result;
  std::set<Rect> precedents;
  const Cell* c = wb.find_cell(pos);
  if (c && c->is_formula()) {
    std::set<std::string> visiting;
    engine_detail::trace_rects(wb, pos.sheet, c->formula().ast, visiting, precedents);
  }
  result.precedents.assign(precedents.begin(), precedents.end());
  std::set<GridPos> dependents;
  for (size_t s = 0; s < wb.sheets.size(); ++s) {
    for (const auto& [key, cell] : wb.sheets[s].cells) {
      if (!cell.is_formula()) continue;
      GridPos anchor{static_cast<int>(s), static_cast<uint32_t>(key >> 32),
                     static_cast<uint32_t>(key & 0xffffffffu)};
      std::set<Rect> rects;
      std::set<std::string> visiting;
      engine_detail::trace_rects(wb, anchor.sheet, cell.formula().ast, visiting, rects);
      for (const Rect& r : rects)
        if (r.contains(pos)) {
          dependents.insert(anchor);
          break;
        }
    }
  }
  result.dependents.assign(dependents.begin(), dependents.end());
  return result;
}

}  // namespace spillgrid
