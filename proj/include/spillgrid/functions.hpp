#pragma once

// Builtin function library. Dispatch applies per-parameter argument modes:
// ScalarLift parameters receiving arrays broadcast the whole call elementwise
// over those parameters jointly; Array parameters consume values whole.
// Reference parameters (ISFORMULA) are resolved by the evaluator, never here.

#include <algorithm>
#include <cstdlib>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "spillgrid/date.hpp"
#include "spillgrid/value.hpp"

namespace spillgrid {

enum class ParamMode { ScalarLift, Array, Reference };

struct FunctionSignature {
  const char* name;
  int min_args;
  int max_args;  // -1 = unbounded
  std::vector<ParamMode> modes;
  int repeat_group = 0;  // trailing group of `modes` repeats for extra args
  Value (*impl)(std::span<const Value>) = nullptr;
};

enum class AggOp { Sum, Product, Min, Max, And, Or };

inline std::optional<AggOp> agg_op_from_name(std::string_view name) {
  if (name == "SUM") return AggOp::Sum;
  if (name == "PRODUCT") return AggOp::Product;
  if (name == "MIN") return AggOp::Min;
  if (name == "MAX") return AggOp::Max;
  if (name == "AND") return AggOp::And;
  if (name == "OR") return AggOp::Or;
  return std::nullopt;
}

namespace detail {

// Numeric view used by aggregation and criteria matching.
inline std::optional<double> numeric_view(const Scalar& s) {
  if (s.is_number()) return s.number();
  if (s.is_boolean()) return s.boolean() ? 1.0 : 0.0;
  if (s.is_text())
    if (auto n = parse_number(s.text())) return n;
  return std::nullopt;
}

struct Fold {
  AggOp op;
  double num = 0;
  bool logic = false;
  bool any = false;
  std::optional<ErrorValue> err;

  explicit Fold(AggOp o) : op(o) {
    if (o == AggOp::Product) num = 1;
    logic = o == AggOp::And;
  }

  // Numbers feed every aggregator; text and booleans are skipped inside
  // arrays except for AND/OR, where booleans count. Errors propagate.
  void feed(const Scalar& s) {
    if (err) return;
    if (s.is_error()) {
      err = s.error();
      return;
    }
    if (op == AggOp::And || op == AggOp::Or) {
      bool b;
      if (s.is_boolean())
        b = s.boolean();
      else if (s.is_number())
        b = s.number() != 0;
      else
        return;  // text skipped
      logic = op == AggOp::And ? (logic && b) : (logic || b);
      any = true;
      return;
    }
    if (!s.is_number()) return;
    double v = s.number();
    switch (op) {
      case AggOp::Sum: num += v; break;
      case AggOp::Product: num *= v; break;
      case AggOp::Min: num = any ? std::min(num, v) : v; break;
      case AggOp::Max: num = any ? std::max(num, v) : v; break;
      default: break;
    }
    any = true;
  }

  Scalar result() const {
    if (err) return Scalar(*err);
    if (op == AggOp::And || op == AggOp::Or) {
      if (!any) return error_scalar(ErrorKind::Value, "no logical values");
      return Scalar(logic);
    }
    if (!any) return Scalar(0.0);
    return Scalar(num);
  }
};

}  // namespace detail

inline Value aggregate_whole(AggOp op, std::span<const Value> args) {
  detail::Fold fold(op);
  for (const Value& v : args)
    for (const Scalar& s : v.cells()) fold.feed(s);
  return Value(fold.result());
}

// Per-column (1 x c row of results) or per-row (r x 1 column) aggregation.
inline Value aggregate_sliced(AggOp op, const Value& v, bool by_column) {
  uint32_t slices = by_column ? v.cols() : v.rows();
  Value out(by_column ? 1 : slices, by_column ? slices : 1);
  for (uint32_t k = 0; k < slices; ++k) {
    detail::Fold fold(op);
    uint32_t n = by_column ? v.rows() : v.cols();
    for (uint32_t i = 0; i < n; ++i)
      fold.feed(by_column ? v.at(i, k) : v.at(k, i));
    out.cells()[k] = fold.result();
  }
  return out;
}

inline bool criteria_match(const Scalar& cell, const Scalar& criterion) {
  if (cell.is_error()) return false;
  auto cn = detail::numeric_view(cell);
  auto kn = detail::numeric_view(criterion);
  if (cn && kn) return *cn == *kn;
  return fold_case(to_text(cell)) == fold_case(to_text(criterion));
}

namespace builtins {

inline Value error_if_scalar_error(const Value& v) {
  return v;  // placeholder for grep-ability; scalar errors handled per impl
}

inline std::optional<ErrorValue> first_error(const Value& v) {
  if (v.is_scalar() && v.scalar().is_error()) return v.scalar().error();
  return std::nullopt;
}

inline Value fn_if(std::span<const Value> a) {
  const Scalar& cond = a[0].scalar();
  if (cond.is_error()) return Value(cond);
  bool b;
  if (cond.is_boolean())
    b = cond.boolean();
  else if (cond.is_number())
    b = cond.number() != 0;
  else
    return Value::error(ErrorKind::Value, "IF condition is not logical");
  if (b) return a[1];
  return a.size() > 2 ? a[2] : Value(Scalar(false));
}

inline Value fn_sign(std::span<const Value> a) {
  Scalar n = coerce_to_number(a[0].scalar());
  if (n.is_error()) return Value(n);
  double v = n.number();
  return Value(Scalar(v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0));
}

inline Value fn_rows(std::span<const Value> a) {
  if (auto e = first_error(a[0])) return Value(Scalar(*e));
  return Value(Scalar(static_cast<double>(a[0].rows())));
}

inline Value fn_columns(std::span<const Value> a) {
  if (auto e = first_error(a[0])) return Value(Scalar(*e));
  return Value(Scalar(static_cast<double>(a[0].cols())));
}

// Truncation toward zero for every numeric argument, per host convention.
inline std::optional<double> int_arg(const Value& v, ErrorValue& err) {
  Scalar n = coerce_to_number(v.scalar());
  if (n.is_error()) {
    err = n.error();
    return std::nullopt;
  }
  return std::trunc(n.number());
}

inline Value fn_sequence(std::span<const Value> a) {
  ErrorValue err;
  auto rows = int_arg(a[0], err);
  if (!rows) return Value(Scalar(err));
  double cols = 1, start = 1, step = 1;
  if (a.size() > 1) {
    auto v = int_arg(a[1], err);
    if (!v) return Value(Scalar(err));
    cols = *v;
  }
  if (a.size() > 2) {
    Scalar n = coerce_to_number(a[2].scalar());
    if (n.is_error()) return Value(n);
    start = n.number();
  }
  if (a.size() > 3) {
    Scalar n = coerce_to_number(a[3].scalar());
    if (n.is_error()) return Value(n);
    step = n.number();
  }
  if (*rows < 1 || cols < 1)
    return Value::error(ErrorKind::Value, "SEQUENCE dimensions must be >= 1");
  if (*rows * cols > static_cast<double>(kMaxArrayCells))
    return Value::error(ErrorKind::Num, "SEQUENCE too large");
  uint32_t r = static_cast<uint32_t>(*rows), c = static_cast<uint32_t>(cols);
  Value out(r, c);
  for (uint32_t i = 0; i < r; ++i)
    for (uint32_t j = 0; j < c; ++j)
      out.at(i, j) = Scalar(start + (double(i) * c + j) * step);
  return out;
}

inline Value fn_unique(std::span<const Value> a) {
  const Value& v = a[0];
  std::unordered_set<std::string> seen;
  std::vector<uint32_t> keep;
  for (uint32_t i = 0; i < v.rows(); ++i) {
    std::string key;
    for (uint32_t j = 0; j < v.cols(); ++j) {
      key += scalar_key(v.at(i, j));
      key += '\x1f';
    }
    if (seen.insert(key).second) keep.push_back(i);
  }
  Value out(static_cast<uint32_t>(keep.size()), v.cols());
  for (uint32_t i = 0; i < keep.size(); ++i)
    for (uint32_t j = 0; j < v.cols(); ++j) out.at(i, j) = v.at(keep[i], j);
  return out;
}

inline Value fn_sort(std::span<const Value> a) {
  const Value& v = a[0];
  double idx = 1, order = 1;
  ErrorValue err;
  if (a.size() > 1) {
    auto n = int_arg(a[1], err);
    if (!n) return Value(Scalar(err));
    idx = *n;
  }
  if (a.size() > 2) {
    auto n = int_arg(a[2], err);
    if (!n) return Value(Scalar(err));
    order = *n;
  }
  if (idx < 1 || idx > v.cols() || (order != 1 && order != -1))
    return Value::error(ErrorKind::Value, "bad SORT arguments");
  uint32_t c = static_cast<uint32_t>(idx) - 1;
  bool ascending = order == 1;
  std::vector<uint32_t> rows(v.rows());
  for (uint32_t i = 0; i < v.rows(); ++i) rows[i] = i;
  std::stable_sort(rows.begin(), rows.end(), [&](uint32_t x, uint32_t y) {
    const Scalar& kx = v.at(x, c);
    const Scalar& ky = v.at(y, c);
    if (kx.is_error() != ky.is_error()) return !kx.is_error();  // errors last
    if (kx.is_error()) return false;
    int cmp = compare_scalars(kx, ky);
    return ascending ? cmp < 0 : cmp > 0;
  });
  Value out(v.rows(), v.cols());
  for (uint32_t i = 0; i < v.rows(); ++i)
    for (uint32_t j = 0; j < v.cols(); ++j) out.at(i, j) = v.at(rows[i], j);
  return out;
}

inline Value fn_transpose(std::span<const Value> a) {
  const Value& v = a[0];
  Value out(v.cols(), v.rows());
  for (uint32_t i = 0; i < v.rows(); ++i)
    for (uint32_t j = 0; j < v.cols(); ++j) out.at(j, i) = v.at(i, j);
  return out;
}

inline Value fn_sumifs(std::span<const Value> a) {
  if (a.size() % 2 == 0)
    return Value::error(ErrorKind::Value, "SUMIFS needs range/criteria pairs");
  const Value& sum_range = a[0];
  size_t n = sum_range.size();
  for (size_t k = 1; k < a.size(); k += 2)
    if (a[k].size() != n)
      return Value::error(ErrorKind::Value, "criteria range size mismatch");
  double total = 0;
  for (size_t i = 0; i < n; ++i) {
    bool match = true;
    for (size_t k = 1; k < a.size() && match; k += 2) {
      const Scalar& crit = a[k + 1].scalar();
      if (crit.is_error()) return Value(crit);
      match = criteria_match(a[k].cells()[i], crit);
    }
    if (!match) continue;
    const Scalar& cell = sum_range.cells()[i];
    if (cell.is_error()) return Value(cell);
    if (cell.is_number()) total += cell.number();
  }
  return Value(Scalar(total));
}

inline Value fn_mmult(std::span<const Value> args) {
  const Value& a = args[0];
  const Value& b = args[1];
  for (const Value* m : {&a, &b})
    for (const Scalar& s : m->cells()) {
      if (s.is_error()) return Value(s);
      if (!s.is_number())
        return Value::error(ErrorKind::Value, "MMULT operands must be numeric");
    }
  if (a.cols() != b.rows())
    return Value::error(ErrorKind::Value, "MMULT inner dimensions differ");
  if (size_t(a.rows()) * b.cols() > kMaxArrayCells)
    return Value::error(ErrorKind::Num, "MMULT result too large");
  Value out(a.rows(), b.cols());
  for (uint32_t i = 0; i < a.rows(); ++i)
    for (uint32_t j = 0; j < b.cols(); ++j) {
      double acc = 0;
      for (uint32_t k = 0; k < a.cols(); ++k)
        acc += a.at(i, k).number() * b.at(k, j).number();
      out.at(i, j) = Scalar(acc);
    }
  return out;
}

inline Value fn_eomonth(std::span<const Value> a) {
  Scalar start = coerce_to_number(a[0].scalar());
  if (start.is_error()) return Value(start);
  ErrorValue err;
  auto months = int_arg(a[1], err);
  if (!months) return Value(Scalar(err));
  double serial = std::trunc(start.number());
  if (serial < 0 || serial > 1e8 || std::abs(*months) > 1.2e5)
    return Value::error(ErrorKind::Num, "EOMONTH out of range");
  CivilDate d = civil_from_serial(static_cast<int64_t>(serial));
  int64_t total = int64_t(d.year) * 12 + (int64_t(d.month) - 1) +
                  static_cast<int64_t>(*months);
  int32_t y = static_cast<int32_t>(total >= 0 ? total / 12 : (total - 11) / 12);
  uint32_t m = static_cast<uint32_t>(total - int64_t(y) * 12) + 1;
  int64_t out = serial_from_civil(y, m, days_in_month(y, m));
  if (out < 0) return Value::error(ErrorKind::Num, "EOMONTH before epoch");
  return Value(Scalar(static_cast<double>(out)));
}

inline Value fn_small_large(std::span<const Value> a, bool smallest) {
  std::vector<double> nums;
  for (const Scalar& s : a[0].cells()) {
    if (s.is_error()) return Value(s);
    if (s.is_number()) nums.push_back(s.number());
  }
  ErrorValue err;
  auto k = int_arg(a[1], err);
  if (!k) return Value(Scalar(err));
  if (*k < 1 || *k > static_cast<double>(nums.size()))
    return Value::error(ErrorKind::Num, "k out of range");
  size_t n = static_cast<size_t>(*k) - 1;
  std::sort(nums.begin(), nums.end());
  return Value(Scalar(smallest ? nums[n] : nums[nums.size() - 1 - n]));
}

inline Value fn_aggregator(AggOp op, std::span<const Value> a) {
  return aggregate_whole(op, a);
}

// Outside an aggregator the slice views collapse to the plain array.
inline Value fn_identity(std::span<const Value> a) { return a[0]; }

inline Value fn_reference_only(std::span<const Value>) {
  return Value::error(ErrorKind::Value, "argument must be a reference");
}

}  // namespace builtins

inline const std::vector<FunctionSignature>& builtin_functions() {
  using M = ParamMode;
  static const std::vector<FunctionSignature> table = {
      {"SUM", 1, -1, {M::Array}, 1,
       +[](std::span<const Value> a) { return builtins::fn_aggregator(AggOp::Sum, a); }},
      {"PRODUCT", 1, -1, {M::Array}, 1,
       +[](std::span<const Value> a) { return builtins::fn_aggregator(AggOp::Product, a); }},
      {"MIN", 1, -1, {M::Array}, 1,
       +[](std::span<const Value> a) { return builtins::fn_aggregator(AggOp::Min, a); }},
      {"MAX", 1, -1, {M::Array}, 1,
       +[](std::span<const Value> a) { return builtins::fn_aggregator(AggOp::Max, a); }},
      {"AND", 1, -1, {M::Array}, 1,
       +[](std::span<const Value> a) { return builtins::fn_aggregator(AggOp::And, a); }},
      {"OR", 1, -1, {M::Array}, 1,
       +[](std::span<const Value> a) { return builtins::fn_aggregator(AggOp::Or, a); }},
      {"SMALL", 2, 2, {M::Array, M::ScalarLift}, 0,
       +[](std::span<const Value> a) { return builtins::fn_small_large(a, true); }},
      {"LARGE", 2, 2, {M::Array, M::ScalarLift}, 0,
       +[](std::span<const Value> a) { return builtins::fn_small_large(a, false); }},
      {"IF", 2, 3, {M::ScalarLift, M::ScalarLift, M::ScalarLift}, 0, builtins::fn_if},
      {"SIGN", 1, 1, {M::ScalarLift}, 0, builtins::fn_sign},
      {"ROWS", 1, 1, {M::Array}, 0, builtins::fn_rows},
      {"COLUMNS", 1, 1, {M::Array}, 0, builtins::fn_columns},
      {"SEQUENCE", 1, 4,
       {M::ScalarLift, M::ScalarLift, M::ScalarLift, M::ScalarLift}, 0,
       builtins::fn_sequence},
      {"UNIQUE", 1, 1, {M::Array}, 0, builtins::fn_unique},
      {"SORT", 1, 3, {M::Array, M::ScalarLift, M::ScalarLift}, 0, builtins::fn_sort},
      {"TRANSPOSE", 1, 1, {M::Array}, 0, builtins::fn_transpose},
      {"SUMIFS", 3, -1, {M::Array, M::Array, M::ScalarLift}, 2, builtins::fn_sumifs},
      {"MMULT", 2, 2, {M::Array, M::Array}, 0, builtins::fn_mmult},
      {"EOMONTH", 2, 2, {M::ScalarLift, M::ScalarLift}, 0, builtins::fn_eomonth},
      {"BYCOLUMN", 1, 1, {M::Array}, 0, builtins::fn_identity},
      {"BYROW", 1, 1, {M::Array}, 0, builtins::fn_identity},
      {"ISFORMULA", 1, 1, {M::Reference}, 0, builtins::fn_reference_only},
  };
  return table;
}

inline const FunctionSignature* find_function(std::string_view name) {
  std::string up = fold_case(name);
  for (char& c : up)
    if (c >= 'a' && c <= 'z') c -= 'a' - 'A';
  for (const auto& f : builtin_functions())
    if (up == f.name) return &f;
  return nullptr;
}

namespace detail {

inline ParamMode param_mode(const FunctionSignature& sig, size_t i) {
  if (i < sig.modes.size()) return sig.modes[i];
  if (sig.repeat_group > 0) {
    size_t base = sig.modes.size() - sig.repeat_group;
    return sig.modes[base + (i - base) % sig.repeat_group];
  }
  return ParamMode::Array;
}

}  // namespace detail

// Evaluate a registered function over already-evaluated arguments, applying
// scalar lifting. Unknown names give #NAME?, arity violations #VALUE!.
inline Value dispatch(std::string_view name, std::span<const Value> args) {
  const FunctionSignature* sig = find_function(name);
  if (!sig)
    return Value::error(ErrorKind::Name, "unknown function " + std::string(name));
  if (static_cast<int>(args.size()) < sig->min_args ||
      (sig->max_args >= 0 && static_cast<int>(args.size()) > sig->max_args))
    return Value::error(ErrorKind::Value,
                        std::string(sig->name) + ": wrong argument count");
  Shape shape{1, 1};
  bool lifted = false;
  for (size_t i = 0; i < args.size(); ++i) {
    if (detail::param_mode(*sig, i) == ParamMode::ScalarLift &&
        !args[i].is_scalar()) {
      lifted = true;
      shape = broadcast_shape(shape.rows, shape.cols, args[i].rows(), args[i].cols());
    }
  }
  if (!lifted) return sig->impl(args);
  if (size_t(shape.rows) * shape.cols > kMaxArrayCells)
    return Value::error(ErrorKind::Num, "lifted result too large");
  std::vector<Value> cell_args(args.begin(), args.end());
  Value out(shape.rows, shape.cols);
  for (uint32_t i = 0; i < shape.rows; ++i) {
    for (uint32_t j = 0; j < shape.cols; ++j) {
      bool missing = false;
      for (size_t k = 0; k < args.size(); ++k) {
        if (detail::param_mode(*sig, k) != ParamMode::ScalarLift ||
            args[k].is_scalar())
          continue;
        const Scalar* s = broadcast_cell(args[k], i, j);
        if (!s) {
          missing = true;
          break;
        }
        cell_args[k] = Value(*s);
      }
      if (missing) {
        out.at(i, j) = error_scalar(ErrorKind::NA);
        continue;
      }
      Value r = sig->impl(cell_args);
      out.at(i, j) = r.is_scalar()
                         ? r.scalar()
                         : error_scalar(ErrorKind::Calc, "nested array");
    }
  }
  return out;
}

}  // namespace spillgrid
