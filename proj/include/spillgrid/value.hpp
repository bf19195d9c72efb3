#pragma once

// Scalar/array value model: the error lattice, elementwise broadcasting and
// the coercion rules shared by every evaluator in the engine.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace spillgrid {

enum class ErrorKind { Spill, Name, Ref, Value, NA, Div0, Num, Calc, Circ };

inline constexpr const char* error_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Spill: return "#SPILL!";
    case ErrorKind::Name: return "#NAME?";
    case ErrorKind::Ref: return "#REF!";
    case ErrorKind::Value: return "#VALUE!";
    case ErrorKind::NA: return "#N/A";
    case ErrorKind::Div0: return "#DIV/0!";
    case ErrorKind::Num: return "#NUM!";
    case ErrorKind::Calc: return "#CALC!";
    case ErrorKind::Circ: return "#CIRC!";
  }
  return "#VALUE!";
}

struct ErrorValue {
  ErrorKind kind = ErrorKind::Value;
  std::string detail;  // diagnostic only, never compared

  friend bool operator==(const ErrorValue& a, const ErrorValue& b) {
    return a.kind == b.kind;
  }
};

inline std::string fold_case(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
  return out;
}

// Shortest decimal text that round-trips back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Strict full-string parse; rejects non-finite spellings like "inf".
inline std::optional<double> parse_number(std::string_view s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return std::nullopt;
  size_t e = s.find_last_not_of(" \t");
  s = s.substr(b, e - b + 1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  if (!std::isfinite(out)) return std::nullopt;
  return out;
}

class Scalar {
 public:
  Scalar() : v_(0.0) {}
  Scalar(double n) {
    if (std::isfinite(n)) {
      if (n == 0.0) n = 0.0;  // normalize -0
      v_ = n;
    } else {
      v_ = ErrorValue{ErrorKind::Num, "non-finite"};
    }
  }
  Scalar(int n) : Scalar(static_cast<double>(n)) {}
  Scalar(bool b) : v_(b) {}
  Scalar(std::string s) : v_(std::move(s)) {}
  Scalar(std::string_view s) : v_(std::string(s)) {}
  Scalar(const char* s) : v_(std::string(s)) {}
  Scalar(ErrorValue e) : v_(std::move(e)) {}

  bool is_number() const { return std::holds_alternative<double>(v_); }
  bool is_text() const { return std::holds_alternative<std::string>(v_); }
  bool is_boolean() const { return std::holds_alternative<bool>(v_); }
  bool is_error() const { return std::holds_alternative<ErrorValue>(v_); }

  double number() const { return std::get<double>(v_); }
  const std::string& text() const { return std::get<std::string>(v_); }
  bool boolean() const { return std::get<bool>(v_); }
  const ErrorValue& error() const { return std::get<ErrorValue>(v_); }

  // number < text < boolean < error
  int type_rank() const { return static_cast<int>(v_.index()); }

  friend bool operator==(const Scalar& a, const Scalar& b) { return a.v_ == b.v_; }

 private:
  std::variant<double, std::string, bool, ErrorValue> v_;
};

inline Scalar error_scalar(ErrorKind k, std::string detail = {}) {
  return Scalar(ErrorValue{k, std::move(detail)});
}

// Text for concatenation and plain rendering (no date formatting here).
inline std::string to_text(const Scalar& s) {
  if (s.is_number()) return format_number(s.number());
  if (s.is_text()) return s.text();
  if (s.is_boolean()) return s.boolean() ? "TRUE" : "FALSE";
  return error_code(s.error().kind);
}

// Number if the scalar coerces; #VALUE! otherwise. Errors pass through.
inline Scalar coerce_to_number(const Scalar& s) {
  if (s.is_number() || s.is_error()) return s;
  if (s.is_boolean()) return Scalar(s.boolean() ? 1.0 : 0.0);
  if (auto n = parse_number(s.text())) return Scalar(*n);
  return error_scalar(ErrorKind::Value, "not a number: " + s.text());
}

// Case-insensitive equality; types never compare equal across ranks.
inline bool scalar_equal_ci(const Scalar& a, const Scalar& b) {
  if (a.type_rank() != b.type_rank()) return false;
  if (a.is_number()) return a.number() == b.number();
  if (a.is_text()) return fold_case(a.text()) == fold_case(b.text());
  if (a.is_boolean()) return a.boolean() == b.boolean();
  return a.error() == b.error();
}

// Canonical key for hashing under the same equivalence as scalar_equal_ci.
inline std::string scalar_key(const Scalar& s) {
  if (s.is_number()) return "n:" + format_number(s.number());
  if (s.is_text()) return "t:" + fold_case(s.text());
  if (s.is_boolean()) return s.boolean() ? "b:1" : "b:0";
  return std::string("e:") + error_code(s.error().kind);
}

// Total order over non-error scalars: numbers < text (case-folded) < booleans.
inline int compare_scalars(const Scalar& a, const Scalar& b) {
  if (a.type_rank() != b.type_rank()) return a.type_rank() < b.type_rank() ? -1 : 1;
  if (a.is_number()) {
    if (a.number() < b.number()) return -1;
    return a.number() == b.number() ? 0 : 1;
  }
  if (a.is_text()) {
    int c = fold_case(a.text()).compare(fold_case(b.text()));
    return c < 0 ? -1 : c == 0 ? 0 : 1;
  }
  if (a.is_boolean()) return int(a.boolean()) - int(b.boolean());
  return 0;
}

// Hard cap on array sizes produced by any operation.
inline constexpr size_t kMaxArrayCells = 1'000'000;

class Value {
 public:
  Value() : cells_(1) {}
  Value(Scalar s) { cells_.push_back(std::move(s)); }
  Value(double n) : Value(Scalar(n)) {}
  Value(uint32_t rows, uint32_t cols)
      : rows_(rows), cols_(cols), cells_(size_t(rows) * cols) {}
  Value(uint32_t rows, uint32_t cols, std::vector<Scalar> cells)
      : rows_(rows), cols_(cols), cells_(std::move(cells)) {}

  static Value error(ErrorKind k, std::string detail = {}) {
    return Value(error_scalar(k, std::move(detail)));
  }

  uint32_t rows() const { return rows_; }
  uint32_t cols() const { return cols_; }
  size_t size() const { return cells_.size(); }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
  bool is_error() const { return is_scalar() && cells_[0].is_error(); }

  const Scalar& scalar() const { return cells_[0]; }
  Scalar& at(uint32_t r, uint32_t c) { return cells_[size_t(r) * cols_ + c]; }
  const Scalar& at(uint32_t r, uint32_t c) const { return cells_[size_t(r) * cols_ + c]; }

  const std::vector<Scalar>& cells() const { return cells_; }
  std::vector<Scalar>& cells() { return cells_; }

  friend bool operator==(const Value& a, const Value& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.cells_ == b.cells_;
  }

 private:
  uint32_t rows_ = 1, cols_ = 1;
  std::vector<Scalar> cells_;
};

struct Shape {
  uint32_t rows = 1, cols = 1;
  friend bool operator==(const Shape&, const Shape&) = default;
};

// Result dims are the max of the operand dims; mismatched cells are later
// filled with #N/A by the elementwise loop.
inline Shape broadcast_shape(uint32_t ar, uint32_t ac, uint32_t br, uint32_t bc) {
  return Shape{std::max(ar, br), std::max(ac, bc)};
}

// nullptr means the operand does not cover (i, j) under broadcast indexing.
inline const Scalar* broadcast_cell(const Value& v, uint32_t i, uint32_t j) {
  uint32_t r = v.rows() == 1 ? 0 : i;
  uint32_t c = v.cols() == 1 ? 0 : j;
  if (r >= v.rows() || c >= v.cols()) return nullptr;
  return &v.at(r, c);
}

enum class BinaryOp { Add, Sub, Mul, Div, Pow, Concat, Eq, Ne, Lt, Le, Gt, Ge };

inline constexpr const char* binary_op_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
    case BinaryOp::Concat: return "&";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "<>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
  }
  return "?";
}

inline bool is_comparison(BinaryOp op) {
  return op == BinaryOp::Eq || op == BinaryOp::Ne || op == BinaryOp::Lt ||
         op == BinaryOp::Le || op == BinaryOp::Gt || op == BinaryOp::Ge;
}

namespace detail {

inline Scalar arith(BinaryOp op, double x, double y) {
  switch (op) {
    case BinaryOp::Add: return Scalar(x + y);
    case BinaryOp::Sub: return Scalar(x - y);
    case BinaryOp::Mul: return Scalar(x * y);
    case BinaryOp::Div:
      if (y == 0.0) return error_scalar(ErrorKind::Div0);
      return Scalar(x / y);
    case BinaryOp::Pow:
      if (x == 0.0 && y == 0.0) return error_scalar(ErrorKind::Num, "0^0");
      if (x == 0.0 && y < 0.0) return error_scalar(ErrorKind::Div0);
      return Scalar(std::pow(x, y));  // NaN/Inf collapse to #NUM!
    default: return error_scalar(ErrorKind::Value);
  }
}

}  // namespace detail

// Error propagation: the left operand wins when both are errors.
inline Scalar apply_binary(BinaryOp op, const Scalar& a, const Scalar& b) {
  if (a.is_error()) return a;
  if (b.is_error()) return b;
  if (is_comparison(op)) {
    int c = compare_scalars(a, b);
    bool eq_types = a.type_rank() == b.type_rank();
    switch (op) {
      case BinaryOp::Eq: return Scalar(eq_types && c == 0);
      case BinaryOp::Ne: return Scalar(!(eq_types && c == 0));
      case BinaryOp::Lt: return Scalar(c < 0);
      case BinaryOp::Le: return Scalar(c <= 0);
      case BinaryOp::Gt: return Scalar(c > 0);
      default: return Scalar(c >= 0);
    }
  }
  if (op == BinaryOp::Concat) return Scalar(to_text(a) + to_text(b));
  Scalar x = coerce_to_number(a);
  if (x.is_error()) return x;
  Scalar y = coerce_to_number(b);
  if (y.is_error()) return y;
  return detail::arith(op, x.number(), y.number());
}

inline Value elementwise_binary(BinaryOp op, const Value& a, const Value& b) {
  if (a.is_scalar() && b.is_scalar())
    return Value(apply_binary(op, a.scalar(), b.scalar()));
  Shape s = broadcast_shape(a.rows(), a.cols(), b.rows(), b.cols());
  if (size_t(s.rows) * s.cols > kMaxArrayCells)
    return Value::error(ErrorKind::Num, "array too large");
  Value out(s.rows, s.cols);
  for (uint32_t i = 0; i < s.rows; ++i) {
    for (uint32_t j = 0; j < s.cols; ++j) {
      const Scalar* pa = broadcast_cell(a, i, j);
      const Scalar* pb = broadcast_cell(b, i, j);
      out.at(i, j) = (pa && pb) ? apply_binary(op, *pa, *pb)
                                : error_scalar(ErrorKind::NA);
    }
  }
  return out;
}

inline Value elementwise_negate(const Value& v) {
  Value out(v.rows(), v.cols());
  for (size_t i = 0; i < v.size(); ++i) {
    Scalar n = coerce_to_number(v.cells()[i]);
    out.cells()[i] = n.is_error() ? n : Scalar(-n.number());
  }
  return out;
}

}  // namespace spillgrid
