#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

// Scalar reverse-mode differentiation on an explicit tape. Every operation
// appends one node holding the local partial derivatives with respect to its
// parents; a single reverse sweep then yields the adjoint of every recorded
// node. Vars constructed from plain doubles are constants: they participate
// in arithmetic but record nothing and never receive gradient.

namespace occ::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // implicit: constants
  double value() const { return value_; }
  int index() const { return index_; }
  bool is_constant() const { return index_ < 0; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(double value, int index, Tape* tape)
      : value_(value), index_(index), tape_(tape) {}
  double value_ = 0.0;
  int index_ = -1;
  Tape* tape_ = nullptr;
};

class Tape {
 public:
  // New differentiable leaf. grads[v.index()] after gradients() is the
  // adjoint of this leaf.
  Var variable(double value) {
    nodes_.push_back(Node{0.0, 0.0, -1, -1});
    return Var(value, static_cast<int>(nodes_.size()) - 1, this);
  }

  std::size_t node_count() const { return nodes_.size(); }

  // Drops all nodes but keeps the allocation; invalidates outstanding Vars.
  void reset() { nodes_.clear(); }

  // Adjoint of every node with respect to `output`. Leaves the output does
  // not depend on get exact zero. A constant output yields all zeros.
  std::vector<double> gradients(const Var& output) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    if (output.is_constant()) return adj;
    assert(output.tape() == this);
    adj[static_cast<std::size_t>(output.index())] = 1.0;
    for (int i = output.index(); i >= 0; --i) {
      const double a = adj[static_cast<std::size_t>(i)];
      if (a == 0.0) continue;
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.lhs >= 0) adj[static_cast<std::size_t>(n.lhs)] += n.dlhs * a;
      if (n.rhs >= 0) adj[static_cast<std::size_t>(n.rhs)] += n.drhs * a;
    }
    return adj;
  }

  Var record(double value, const Var& a, double da) {
    nodes_.push_back(Node{da, 0.0, a.index(), -1});
    return Var(value, static_cast<int>(nodes_.size()) - 1, this);
  }

  Var record(double value, const Var& a, double da, const Var& b, double db) {
    nodes_.push_back(Node{da, db, a.index(), b.index()});
    return Var(value, static_cast<int>(nodes_.size()) - 1, this);
  }

 private:
  struct Node {
    double dlhs;
    double drhs;
    int lhs;
    int rhs;
  };
  std::vector<Node> nodes_;
};

namespace detail {
inline Tape* tape_of(const Var& a, const Var& b) {
  assert(!a.tape() || !b.tape() || a.tape() == b.tape());
  return a.tape() ? a.tape() : b.tape();
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (!t) return Var(a.value() + b.value());
  return t->record(a.value() + b.value(), a, 1.0, b, 1.0);
}

inline Var operator-(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (!t) return Var(a.value() - b.value());
  return t->record(a.value() - b.value(), a, 1.0, b, -1.0);
}

inline Var operator-(const Var& a) {
  if (a.is_constant()) return Var(-a.value());
  return a.tape()->record(-a.value(), a, -1.0);
}

inline Var operator*(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (!t) return Var(a.value() * b.value());
  return t->record(a.value() * b.value(), a, b.value(), b, a.value());
}

inline Var operator/(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  const double bv = b.value();
  if (!t) return Var(a.value() / bv);
  return t->record(a.value() / bv, a, 1.0 / bv, b, -a.value() / (bv * bv));
}

inline Var log(const Var& a) {
  if (a.is_constant()) return Var(std::log(a.value()));
  return a.tape()->record(std::log(a.value()), a, 1.0 / a.value());
}

inline Var exp(const Var& a) {
  const double e = std::exp(a.value());
  if (a.is_constant()) return Var(e);
  return a.tape()->record(e, a, e);
}

inline Var sqrt(const Var& a) {
  const double r = std::sqrt(a.value());
  if (a.is_constant()) return Var(r);
  return a.tape()->record(r, a, 0.5 / r);
}

inline Var pow(const Var& a, double p) {
  const double v = std::pow(a.value(), p);
  if (a.is_constant()) return Var(v);
  // d/dx x^p at x=0 is taken as 0 for p>1 (the one case the losses hit).
  const double d =
      a.value() == 0.0 ? 0.0 : p * std::pow(a.value(), p - 1.0);
  return a.tape()->record(v, a, d);
}

inline Var sigmoid(const Var& a) {
  const double x = a.value();
  const double s =
      x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  if (a.is_constant()) return Var(s);
  return a.tape()->record(s, a, s * (1.0 - s));
}

// Pass-through inside [lo, hi]; a constant (zero-gradient) endpoint outside.
inline Var clamp_value(const Var& a, double lo, double hi) {
  if (a.value() < lo) return Var(lo);
  if (a.value() > hi) return Var(hi);
  return a;
}

inline double value_of(const Var& v) { return v.value(); }

}  // namespace occ::ad

namespace occ {

inline double value_of(double x) { return x; }

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

inline double clamp_value(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace occ
