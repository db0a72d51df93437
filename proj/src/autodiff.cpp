#include "nnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nnn/errors.hpp"

namespace nnn::ad {

namespace {

Tape* common_tape(const Var& a, const Var& b) {
  if (a.tape() && b.tape() && a.tape() != b.tape()) {
    throw std::logic_error("operands recorded on different tapes");
  }
  return a.tape() ? a.tape() : b.tape();
}

void check_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteDerivative("derivative evaluated to a non-finite value");
  }
}

}  // namespace

Var Tape::variable(double value) {
  ops_.push_back({Op::Leaf, 0, 0, 0.0});
  values_.push_back(value);
  return Var(this, static_cast<std::uint32_t>(ops_.size() - 1), value);
}

std::vector<Var> Tape::variables(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(variable(v));
  return out;
}

Var Tape::unary(Op op, const Var& a, double value, double c) {
  ops_.push_back({op, a.index(), 0, c});
  values_.push_back(value);
  return Var(this, static_cast<std::uint32_t>(ops_.size() - 1), value);
}

Var Tape::binary(Op op, const Var& a, const Var& b, double value) {
  ops_.push_back({op, a.index(), b.index(), 0.0});
  values_.push_back(value);
  return Var(this, static_cast<std::uint32_t>(ops_.size() - 1), value);
}

void Tape::clear() {
  ops_.clear();
  values_.clear();
  depth_ = 0;
  max_depth_ = 0;
}

std::vector<double> Tape::gradient_values(const Var& y, std::span<const Var> wrt) {
  std::vector<double> out(wrt.size(), 0.0);
  if (y.tape() != this) {
    return out;  // constant output
  }
  const std::uint32_t top = y.index();
  std::vector<double> adj(static_cast<std::size_t>(top) + 1, 0.0);
  adj[top] = 1.0;
  for (std::uint32_t i = top + 1; i-- > 0;) {
    const double g = adj[i];
    if (g == 0.0) continue;
    const Node n = ops_[i];
    const double y_val = values_[i];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        adj[n.a] += g;
        adj[n.b] += g;
        break;
      case Op::Sub:
        adj[n.a] += g;
        adj[n.b] -= g;
        break;
      case Op::Mul:
        adj[n.a] += g * values_[n.b];
        adj[n.b] += g * values_[n.a];
        break;
      case Op::Div:
        adj[n.a] += g / values_[n.b];
        adj[n.b] -= g * y_val / values_[n.b];
        break;
      case Op::Neg:
        adj[n.a] -= g;
        break;
      case Op::AddConst:
        adj[n.a] += g;
        break;
      case Op::MulConst:
        adj[n.a] += g * n.c;
        break;
      case Op::ConstDiv:
        adj[n.a] -= g * y_val / values_[n.a];
        break;
      case Op::PowConst:
        adj[n.a] += g * n.c * std::pow(values_[n.a], n.c - 1.0);
        break;
      case Op::Exp:
        adj[n.a] += g * y_val;
        break;
      case Op::Log:
        adj[n.a] += g / values_[n.a];
        break;
      case Op::Sin:
        adj[n.a] += g * std::cos(values_[n.a]);
        break;
      case Op::Cos:
        adj[n.a] -= g * std::sin(values_[n.a]);
        break;
      case Op::Tanh:
        adj[n.a] += g * (1.0 - y_val * y_val);
        break;
      case Op::Sigmoid:
        adj[n.a] += g * y_val * (1.0 - y_val);
        break;
    }
  }
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    if (wrt[k].tape() == this && wrt[k].index() <= top) out[k] = adj[wrt[k].index()];
  }
  check_finite(out);
  return out;
}

std::vector<Var> Tape::gradient(const Var& y, std::span<const Var> wrt, bool create_graph) {
  if (!create_graph) {
    const auto vals = gradient_values(y, wrt);
    return {vals.begin(), vals.end()};
  }
  std::vector<Var> out(wrt.size(), Var(0.0));
  if (y.tape() != this) return out;

  struct DepthGuard {
    Tape& t;
    explicit DepthGuard(Tape& tape) : t(tape) {
      ++t.depth_;
      if (t.depth_ > t.max_depth_) t.max_depth_ = t.depth_;
    }
    ~DepthGuard() { --t.depth_; }
  } guard(*this);

  const std::uint32_t top = y.index();
  std::vector<Var> adj(static_cast<std::size_t>(top) + 1, Var(0.0));
  std::vector<char> has(static_cast<std::size_t>(top) + 1, 0);
  auto accumulate = [&](std::uint32_t k, const Var& contribution) {
    if (has[k]) {
      adj[k] = adj[k] + contribution;
    } else {
      adj[k] = contribution;
      has[k] = 1;
    }
  };
  adj[top] = Var(1.0);
  has[top] = 1;

  // Nodes appended while recording the backward pass have indices above top
  // and are never visited here.
  for (std::uint32_t i = top + 1; i-- > 0;) {
    if (!has[i]) continue;
    const Var g = adj[i];
    const Node n = ops_[i];
    if (n.op == Op::Leaf) continue;
    const Var self = var_at(i);
    const Var a = var_at(n.a);
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::Sub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::Mul: {
        const Var b = var_at(n.b);
        accumulate(n.a, g * b);
        accumulate(n.b, g * a);
        break;
      }
      case Op::Div: {
        const Var b = var_at(n.b);
        accumulate(n.a, g / b);
        accumulate(n.b, -(g * self) / b);
        break;
      }
      case Op::Neg:
        accumulate(n.a, -g);
        break;
      case Op::AddConst:
        accumulate(n.a, g);
        break;
      case Op::MulConst:
        accumulate(n.a, g * n.c);
        break;
      case Op::ConstDiv:
        accumulate(n.a, -(g * self) / a);
        break;
      case Op::PowConst:
        accumulate(n.a, g * (n.c * pow(a, n.c - 1.0)));
        break;
      case Op::Exp:
        accumulate(n.a, g * self);
        break;
      case Op::Log:
        accumulate(n.a, g / a);
        break;
      case Op::Sin:
        accumulate(n.a, g * cos(a));
        break;
      case Op::Cos:
        accumulate(n.a, -(g * sin(a)));
        break;
      case Op::Tanh:
        accumulate(n.a, g * (1.0 - self * self));
        break;
      case Op::Sigmoid:
        accumulate(n.a, g * (self * (1.0 - self)));
        break;
    }
  }
  std::vector<double> vals(wrt.size(), 0.0);
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    if (wrt[k].tape() == this && wrt[k].index() <= top && has[wrt[k].index()]) {
      out[k] = adj[wrt[k].index()];
    }
    vals[k] = out[k].value();
  }
  check_finite(vals);
  return out;
}

Var operator+(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() + b.value();
  if (!t) return Var(v);
  if (a.is_constant()) return t->unary(Op::AddConst, b, v, a.value());
  if (b.is_constant()) return t->unary(Op::AddConst, a, v, b.value());
  return t->binary(Op::Add, a, b, v);
}

Var operator-(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() - b.value();
  if (!t) return Var(v);
  if (b.is_constant()) return t->unary(Op::AddConst, a, v, -b.value());
  if (a.is_constant()) return -b + a.value();
  return t->binary(Op::Sub, a, b, v);
}

Var operator*(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() * b.value();
  if (!t) return Var(v);
  if (a.is_constant()) return t->unary(Op::MulConst, b, v, a.value());
  if (b.is_constant()) return t->unary(Op::MulConst, a, v, b.value());
  return t->binary(Op::Mul, a, b, v);
}

Var operator/(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() / b.value();
  if (!t) return Var(v);
  if (b.is_constant()) return t->unary(Op::MulConst, a, v, 1.0 / b.value());
  if (a.is_constant()) return t->unary(Op::ConstDiv, b, v, a.value());
  return t->binary(Op::Div, a, b, v);
}

Var operator-(const Var& a) {
  if (a.is_constant()) return Var(-a.value());
  return a.tape()->unary(Op::Neg, a, -a.value());
}

Var exp(const Var& a) {
  const double v = std::exp(a.value());
  return a.is_constant() ? Var(v) : a.tape()->unary(Op::Exp, a, v);
}

Var log(const Var& a) {
  const double v = std::log(a.value());
  return a.is_constant() ? Var(v) : a.tape()->unary(Op::Log, a, v);
}

Var sin(const Var& a) {
  const double v = std::sin(a.value());
  return a.is_constant() ? Var(v) : a.tape()->unary(Op::Sin, a, v);
}

Var cos(const Var& a) {
  const double v = std::cos(a.value());
  return a.is_constant() ? Var(v) : a.tape()->unary(Op::Cos, a, v);
}

Var tanh(const Var& a) {
  const double v = std::tanh(a.value());
  return a.is_constant() ? Var(v) : a.tape()->unary(Op::Tanh, a, v);
}

Var sigmoid(const Var& a) {
  const double v = sigmoid(a.value());
  return a.is_constant() ? Var(v) : a.tape()->unary(Op::Sigmoid, a, v);
}

Var pow(const Var& a, double exponent) {
  if (exponent == 0.0) return Var(1.0);
  if (exponent == 1.0) return a;
  const double v = std::pow(a.value(), exponent);
  return a.is_constant() ? Var(v) : a.tape()->unary(Op::PowConst, a, v, exponent);
}

Var sqrt(const Var& a) { return pow(a, 0.5); }

Var cosh(const Var& a) { return 0.5 * (exp(a) + exp(-a)); }

void ParameterVector::add_block(std::string name, std::size_t rows, std::size_t cols) {
  Block b{std::move(name), rows, cols, values.size()};
  values.resize(values.size() + b.size(), 0.0);
  manifest.push_back(std::move(b));
}

std::size_t ParameterVector::manifest_size() const {
  std::size_t total = 0;
  for (const auto& b : manifest) total += b.size();
  return total;
}

const ParameterVector::Block& ParameterVector::block(const std::string& name) const {
  for (const auto& b : manifest) {
    if (b.name == name) return b;
  }
  throw std::out_of_range("no parameter block named " + name);
}

ParameterVector ParameterVector::zeros_like() const {
  ParameterVector out = *this;
  std::fill(out.values.begin(), out.values.end(), 0.0);
  return out;
}

bool ParameterVector::same_shape(const ParameterVector& other) const {
  if (manifest.size() != other.manifest.size() || values.size() != other.values.size()) return false;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& a = manifest[i];
    const auto& b = other.manifest[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols || a.offset != b.offset) return false;
  }
  return true;
}

std::vector<double> grad_input(const ScalarFieldVar& f, std::span<const double> x) {
  Tape tape;
  const auto xs = tape.variables(x);
  const Var y = f(xs);
  return tape.gradient_values(y, xs);
}

std::vector<Var> grad_input(Tape& tape, const ScalarFieldVar& f, std::span<const Var> x) {
  const Var y = f(x);
  return tape.gradient(y, x, /*create_graph=*/true);
}

double second_derivative(const ScalarFieldVar& f, std::span<const double> x, std::size_t i, std::size_t j) {
  if (i >= x.size() || j >= x.size()) throw std::out_of_range("derivative index out of range");
  Tape tape;
  const auto xs = tape.variables(x);
  const auto g = grad_input(tape, f, xs);
  const Var gi = g[i];
  const Var xj = xs[j];
  return tape.gradient_values(gi, std::span<const Var>(&xj, 1))[0];
}

ParameterVector grad_params(const Var& loss, std::span<const Var> params, const ParameterVector& shape) {
  if (params.size() != shape.values.size()) {
    throw std::invalid_argument("parameter count does not match the shape manifest");
  }
  ParameterVector out = shape.zeros_like();
  if (loss.tape() == nullptr) return out;
  out.values = loss.tape()->gradient_values(loss, params);
  return out;
}

}  // namespace nnn::ad
