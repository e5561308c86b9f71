#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "relicd/numerics.hpp"

namespace relicd {

// Minimal reverse-mode tape over the closed set of vector operations the
// diagnosis objectives need. Nodes hold dense vectors; binary elementwise ops
// broadcast an operand of length 1. Leaves that read parameters (row, param,
// matvec) route their adjoints into the store's grad buffers on backward().
class Tape {
 public:
  struct Var {
    std::uint32_t id = 0;
  };

  // exp() clamps its input to [-kExpClamp, kExpClamp]; log() floors its input
  // at kLogFloor. Gradients are zero where a clamp is active.
  static constexpr double kExpClamp = 30.0;
  static constexpr double kLogFloor = 1e-12;

  explicit Tape(ParameterStore& store) : store_(&store) {}

  void clear();

  Var constant(std::span<const double> v);
  Var constant(double v);
  Var row(ParamId p, std::size_t r);
  Var param(ParamId p);
  // W x, with W stored out x in.
  Var matvec(ParamId w, Var x);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // s * a + shift
  Var scale(Var a, double s, double shift = 0.0);

  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var square(Var a);
  Var relu(Var a);
  Var sum(Var a);
  Var pick(Var a, std::size_t index);

  std::span<const double> value(Var v) const;
  double scalar(Var v) const { return values_[nodes_[v.id].offset]; }
  std::size_t size(Var v) const { return nodes_[v.id].len; }
  std::size_t node_count() const { return nodes_.size(); }

  // Seeds d(out)/d(out) = 1 for a length-1 node and accumulates parameter
  // gradients into the store.
  void backward(Var out);

 private:
  enum class Op : std::uint8_t {
    Const, Row, Param, MatVec, Add, Sub, Mul, Scale,
    Sigmoid, Exp, Log, Sqrt, Square, Relu, Sum, Pick
  };

  struct Node {
    Op op;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::size_t offset = 0;
    std::size_t len = 0;
    std::size_t param = 0;
    std::size_t index = 0;
    double s = 0.0;
  };

  Var push(Op op, std::size_t len, std::uint32_t a = 0, std::uint32_t b = 0);
  Var unary(Op op, Var a);
  Var binary(Op op, Var a, Var b);

  ParameterStore* store_;
  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
};

}  // namespace relicd
