#pragma once

// Formula expression trees, structural equality, canonical rendering and the
// syntactic reference inventory used to build the dependency graph.

#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "spillgrid/address.hpp"
#include "spillgrid/value.hpp"

namespace spillgrid {

struct AstNode;
using AstPtr = std::shared_ptr<const AstNode>;

struct NumberLit {
  double value = 0;
};
struct TextLit {
  std::string value;
};
struct BoolLit {
  bool value = false;
};
struct CellRef {
  CellAddress addr;
};
struct RangeRef {
  CellAddress first, second;  // sheet qualifier, if any, lives on `first`
};
struct NameRef {
  std::string name;
};
struct SpillRef {
  AstPtr target;  // CellRef or NameRef only
};
struct TableColumnRef {
  std::string table, column;
};
struct UnaryOp {
  char op = '-';
  AstPtr operand;
};
struct BinaryOpNode {
  BinaryOp op = BinaryOp::Add;
  AstPtr lhs, rhs;
};
struct Call {
  std::string function;  // canonical uppercase
  std::vector<AstPtr> args;
};

struct AstNode {
  std::variant<NumberLit, TextLit, BoolLit, CellRef, RangeRef, NameRef,
               SpillRef, TableColumnRef, UnaryOp, BinaryOpNode, Call>
      v;
};

template <class T, class... Args>
AstPtr make_ast(Args&&... args) {
  return std::make_shared<AstNode>(AstNode{T{std::forward<Args>(args)...}});
}

inline bool ast_equal(const AstPtr& a, const AstPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->v.index() != b->v.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const T& y = std::get<T>(b->v);
        if constexpr (std::is_same_v<T, NumberLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, TextLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, BoolLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, CellRef>) {
          return x.addr == y.addr;
        } else if constexpr (std::is_same_v<T, RangeRef>) {
          return x.first == y.first && x.second == y.second;
        } else if constexpr (std::is_same_v<T, NameRef>) {
          return x.name == y.name;
        } else if constexpr (std::is_same_v<T, SpillRef>) {
          return ast_equal(x.target, y.target);
        } else if constexpr (std::is_same_v<T, TableColumnRef>) {
          return x.table == y.table && x.column == y.column;
        } else if constexpr (std::is_same_v<T, UnaryOp>) {
          return x.op == y.op && ast_equal(x.operand, y.operand);
        } else if constexpr (std::is_same_v<T, BinaryOpNode>) {
          return x.op == y.op && ast_equal(x.lhs, y.lhs) && ast_equal(x.rhs, y.rhs);
        } else {
          return x.function == y.function && x.args.size() == y.args.size() &&
                 [&] {
                   for (size_t i = 0; i < x.args.size(); ++i)
                     if (!ast_equal(x.args[i], y.args[i])) return false;
                   return true;
                 }();
        }
      },
      a->v);
}

// Spill targets are either a direct anchor address or a defined name.
using SpillTarget = std::variant<CellAddress, std::string>;

struct ReferenceSet {
  std::set<CellAddress> cells;
  std::set<std::pair<CellAddress, CellAddress>> ranges;
  std::set<std::string> names;  // unresolved identifiers, as written
  std::set<SpillTarget> spill_targets;
  std::set<std::pair<std::string, std::string>> table_columns;

  friend bool operator==(const ReferenceSet&, const ReferenceSet&) = default;
};

inline void collect_references(const AstPtr& ast, ReferenceSet& out) {
  if (!ast) return;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, CellRef>) {
          out.cells.insert(x.addr);
        } else if constexpr (std::is_same_v<T, RangeRef>) {
          out.ranges.emplace(x.first, x.second);
        } else if constexpr (std::is_same_v<T, NameRef>) {
          out.names.insert(x.name);
        } else if constexpr (std::is_same_v<T, SpillRef>) {
          if (const auto* c = std::get_if<CellRef>(&x.target->v))
            out.spill_targets.insert(c->addr);
          else if (const auto* n = std::get_if<NameRef>(&x.target->v))
            out.spill_targets.insert(n->name);
        } else if constexpr (std::is_same_v<T, TableColumnRef>) {
          out.table_columns.emplace(x.table, x.column);
        } else if constexpr (std::is_same_v<T, UnaryOp>) {
          collect_references(x.operand, out);
        } else if constexpr (std::is_same_v<T, BinaryOpNode>) {
          collect_references(x.lhs, out);
          collect_references(x.rhs, out);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& a : x.args) collect_references(a, out);
        }
      },
      ast->v);
}

inline ReferenceSet extract_references(const AstPtr& ast) {
  ReferenceSet out;
  collect_references(ast, out);
  return out;
}

namespace detail {

// Rendering precedence; larger binds tighter.
inline int op_level(BinaryOp op) {
  if (is_comparison(op)) return 1;
  if (op == BinaryOp::Concat) return 2;
  if (op == BinaryOp::Add || op == BinaryOp::Sub) return 3;
  if (op == BinaryOp::Mul || op == BinaryOp::Div) return 4;
  return 5;  // Pow
}
inline constexpr int kUnaryLevel = 6;
inline constexpr int kPostfixLevel = 7;
inline constexpr int kAtomLevel = 8;

inline int node_level(const AstNode& n) {
  if (const auto* b = std::get_if<BinaryOpNode>(&n.v)) return op_level(b->op);
  if (std::holds_alternative<UnaryOp>(n.v)) return kUnaryLevel;
  if (std::holds_alternative<SpillRef>(n.v)) return kPostfixLevel;
  return kAtomLevel;
}

inline void render(const AstPtr& ast, std::string& out, int min_level) {
  const AstNode& n = *ast;
  int level = node_level(n);
  bool parens = level < min_level;
  if (parens) out += '(';
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          out += format_number(x.value);
        } else if constexpr (std::is_same_v<T, TextLit>) {
          out += '"';
          for (char c : x.value) {
            out += c;
            if (c == '"') out += '"';
          }
          out += '"';
        } else if constexpr (std::is_same_v<T, BoolLit>) {
          out += x.value ? "TRUE" : "FALSE";
        } else if constexpr (std::is_same_v<T, CellRef>) {
          out += format_address(x.addr);
        } else if constexpr (std::is_same_v<T, RangeRef>) {
          out += format_address(x.first);
          out += ':';
          out += format_address(x.second, false);
        } else if constexpr (std::is_same_v<T, NameRef>) {
          out += x.name;
        } else if constexpr (std::is_same_v<T, SpillRef>) {
          render(x.target, out, kAtomLevel);
          out += '#';
        } else if constexpr (std::is_same_v<T, TableColumnRef>) {
          out += x.table;
          out += '[';
          out += x.column;
          out += ']';
        } else if constexpr (std::is_same_v<T, UnaryOp>) {
          out += x.op;
          render(x.operand, out, kUnaryLevel);
        } else if constexpr (std::is_same_v<T, BinaryOpNode>) {
          int lvl = op_level(x.op);
          render(x.lhs, out, lvl);
          out += binary_op_symbol(x.op);
          render(x.rhs, out, lvl + 1);  // left-associative throughout
        } else if constexpr (std::is_same_v<T, Call>) {
          out += x.function;
          out += '(';
          for (size_t i = 0; i < x.args.size(); ++i) {
            if (i) out += ',';
            render(x.args[i], out, 0);
          }
          out += ')';
        }
      },
      n.v);
  if (parens) out += ')';
}

}  // namespace detail

// Canonical text: uppercase functions, no spaces, minimal parentheses.
inline std::string render_formula(const AstPtr& ast) {
  std::string out;
  detail::render(ast, out, 0);
  return out;
}

}  // namespace spillgrid
