#pragma once

// Reverse-mode automatic differentiation with support for nested (higher
// order) derivatives.
//
// A Tape is an append-only record of primitive operations. Var is a scalar that
// lives on a tape. Differentiating with create_graph = true records the
// backward pass itself on the same tape, so the resulting derivatives are again
// Vars and can be differentiated further. This is how the Laplacian of a
// network output is made differentiable in the network parameters.
//
// A tape is confined to one thread. Vars without a tape are constants.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace nnn::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT: implicit constants are the point

  double value() const noexcept { return value_; }
  bool is_constant() const noexcept { return tape_ == nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::uint32_t index() const noexcept { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
  double value_ = 0.0;
};

enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  AddConst,
  MulConst,
  ConstDiv,  // c / a
  PowConst,  // a ^ c
  Exp,
  Log,
  Sin,
  Cos,
  Tanh,
  Sigmoid,
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(double value);
  std::vector<Var> variables(std::span<const double> values);

  /// Derivatives of y with respect to each entry of wrt. With create_graph the
  /// returned Vars are recorded on this tape and remain differentiable;
  /// otherwise they are constants. Throws NonFiniteDerivative on NaN/Inf.
  std::vector<Var> gradient(const Var& y, std::span<const Var> wrt, bool create_graph = false);

  /// Same as gradient() without recording, returning plain values.
  std::vector<double> gradient_values(const Var& y, std::span<const Var> wrt);

  std::size_t size() const noexcept { return ops_.size(); }
  /// Number of create_graph backward passes currently being recorded.
  int nesting_depth() const noexcept { return depth_; }
  /// Deepest nesting reached so far.
  int max_nesting_depth() const noexcept { return max_depth_; }

  void clear();

  // Recording entry points used by the operator overloads.
  Var unary(Op op, const Var& a, double value, double c = 0.0);
  Var binary(Op op, const Var& a, const Var& b, double value);

 private:
  struct Node {
    Op op;
    std::uint32_t a;
    std::uint32_t b;
    double c;
  };

  Var var_at(std::uint32_t i) { return Var(this, i, values_[i]); }

  std::vector<Node> ops_;
  std::vector<double> values_;
  int depth_ = 0;
  int max_depth_ = 0;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

Var exp(const Var& a);
Var log(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var pow(const Var& a, double exponent);
Var sqrt(const Var& a);
Var cosh(const Var& a);

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

/// Flat parameter storage plus the per-block shape manifest.
struct ParameterVector {
  struct Block {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return rows * cols; }
  };

  std::vector<double> values;
  std::vector<Block> manifest;

  void add_block(std::string name, std::size_t rows, std::size_t cols);
  std::size_t manifest_size() const;
  const Block& block(const std::string& name) const;
  std::span<double> view(const Block& b) { return {values.data() + b.offset, b.size()}; }
  std::span<const double> view(const Block& b) const { return {values.data() + b.offset, b.size()}; }

  /// Same manifest, all values zero.
  ParameterVector zeros_like() const;
  bool same_shape(const ParameterVector& other) const;
};

using ScalarFieldVar = std::function<Var(std::span<const Var>)>;

/// Gradient of f at x.
std::vector<double> grad_input(const ScalarFieldVar& f, std::span<const double> x);

/// Input gradient inside an enclosing tape: x lives on tape and the result
/// stays differentiable.
std::vector<Var> grad_input(Tape& tape, const ScalarFieldVar& f, std::span<const Var> x);

/// d^2 f / dx_i dx_j computed as a gradient of a gradient.
double second_derivative(const ScalarFieldVar& f, std::span<const double> x, std::size_t i, std::size_t j);

/// d loss / d theta, where params are the tape leaves bound to shape.
ParameterVector grad_params(const Var& loss, std::span<const Var> params, const ParameterVector& shape);

}  // namespace nnn::ad
