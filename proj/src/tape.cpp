#include "relicd/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relicd {

void Tape::clear() {
  nodes_.clear();
  values_.clear();
}

Tape::Var Tape::push(Op op, std::size_t len, std::uint32_t a, std::uint32_t b) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.offset = values_.size();
  n.len = len;
  values_.resize(values_.size() + len);
  nodes_.push_back(n);
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::span<const double> Tape::value(Var v) const {
  const auto& n = nodes_[v.id];
  return {values_.data() + n.offset, n.len};
}

Tape::Var Tape::constant(std::span<const double> v) {
  Var out = push(Op::Const, v.size());
  std::copy(v.begin(), v.end(), values_.begin() + nodes_[out.id].offset);
  return out;
}

Tape::Var Tape::constant(double v) {
  Var out = push(Op::Const, 1);
  values_[nodes_[out.id].offset] = v;
  return out;
}

Tape::Var Tape::row(ParamId p, std::size_t r) {
  const Matrix& m = (*store_)[p].value;
  if (r >= m.rows) throw std::out_of_range("Tape::row: row index out of range for " + (*store_)[p].name);
  Var out = push(Op::Row, m.cols);
  nodes_[out.id].param = static_cast<std::size_t>(p);
  nodes_[out.id].index = r;
  auto src = m.row(r);
  std::copy(src.begin(), src.end(), values_.begin() + nodes_[out.id].offset);
  return out;
}

Tape::Var Tape::param(ParamId p) {
  const Matrix& m = (*store_)[p].value;
  Var out = push(Op::Param, m.size());
  nodes_[out.id].param = static_cast<std::size_t>(p);
  std::copy(m.data.begin(), m.data.end(), values_.begin() + nodes_[out.id].offset);
  return out;
}

Tape::Var Tape::matvec(ParamId w, Var x) {
  const Matrix& m = (*store_)[w].value;
  if (m.cols != nodes_[x.id].len) throw std::invalid_argument("Tape::matvec: shape mismatch for " + (*store_)[w].name);
  Var out = push(Op::MatVec, m.rows, x.id);
  nodes_[out.id].param = static_cast<std::size_t>(w);
  const double* xv = values_.data() + nodes_[x.id].offset;
  double* y = values_.data() + nodes_[out.id].offset;
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* wr = m.data.data() + i * m.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) acc += wr[j] * xv[j];
    y[i] = acc;
  }
  return out;
}

Tape::Var Tape::binary(Op op, Var a, Var b) {
  const std::size_t la = nodes_[a.id].len;
  const std::size_t lb = nodes_[b.id].len;
  if (la != lb && la != 1 && lb != 1) throw std::invalid_argument("Tape: operand length mismatch");
  const std::size_t len = std::max(la, lb);
  Var out = push(op, len, a.id, b.id);
  const double* av = values_.data() + nodes_[a.id].offset;
  const double* bv = values_.data() + nodes_[b.id].offset;
  double* y = values_.data() + nodes_[out.id].offset;
  for (std::size_t i = 0; i < len; ++i) {
    const double x1 = av[la == 1 ? 0 : i];
    const double x2 = bv[lb == 1 ? 0 : i];
    switch (op) {
      case Op::Add: y[i] = x1 + x2; break;
      case Op::Sub: y[i] = x1 - x2; break;
      case Op::Mul: y[i] = x1 * x2; break;
      default: throw std::logic_error("Tape::binary: not a binary op");
    }
  }
  return out;
}

Tape::Var Tape::add(Var a, Var b) { return binary(Op::Add, a, b); }
Tape::Var Tape::sub(Var a, Var b) { return binary(Op::Sub, a, b); }
Tape::Var Tape::mul(Var a, Var b) { return binary(Op::Mul, a, b); }

Tape::Var Tape::scale(Var a, double s, double shift) {
  Var out = push(Op::Scale, nodes_[a.id].len, a.id);
  nodes_[out.id].s = s;
  const double* x = values_.data() + nodes_[a.id].offset;
  double* y = values_.data() + nodes_[out.id].offset;
  for (std::size_t i = 0; i < nodes_[out.id].len; ++i) y[i] = s * x[i] + shift;
  return out;
}

Tape::Var Tape::unary(Op op, Var a) {
  const std::size_t len = op == Op::Sum || op == Op::Pick ? 1 : nodes_[a.id].len;
  Var out = push(op, len, a.id);
  const double* x = values_.data() + nodes_[a.id].offset;
  double* y = values_.data() + nodes_[out.id].offset;
  const std::size_t n = nodes_[a.id].len;
  switch (op) {
    case Op::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) y[i] = stable_sigmoid(x[i]);
      break;
    case Op::Exp:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(std::clamp(x[i], -kExpClamp, kExpClamp));
      break;
    case Op::Log:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::log(std::max(x[i], kLogFloor));
      break;
    case Op::Sqrt:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::sqrt(x[i]);
      break;
    case Op::Square:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * x[i];
      break;
    case Op::Relu:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case Op::Sum: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += x[i];
      y[0] = acc;
      break;
    }
    default:
      throw std::logic_error("Tape::unary: not a unary op");
  }
  return out;
}

Tape::Var Tape::sigmoid(Var a) { return unary(Op::Sigmoid, a); }
Tape::Var Tape::exp(Var a) { return unary(Op::Exp, a); }
Tape::Var Tape::log(Var a) { return unary(Op::Log, a); }
Tape::Var Tape::sqrt(Var a) { return unary(Op::Sqrt, a); }
Tape::Var Tape::square(Var a) { return unary(Op::Square, a); }
Tape::Var Tape::relu(Var a) { return unary(Op::Relu, a); }
Tape::Var Tape::sum(Var a) { return unary(Op::Sum, a); }

Tape::Var Tape::pick(Var a, std::size_t index) {
  if (index >= nodes_[a.id].len) throw std::out_of_range("Tape::pick: index out of range");
  Var out = push(Op::Pick, 1, a.id);
  nodes_[out.id].index = index;
  values_[nodes_[out.id].offset] = values_[nodes_[a.id].offset + index];
  return out;
}

void Tape::backward(Var out) {
  if (nodes_[out.id].len != 1) throw std::invalid_argument("Tape::backward: output must be a scalar");
  adjoints_.assign(values_.size(), 0.0);
  adjoints_[nodes_[out.id].offset] = 1.0;

  for (std::size_t k = out.id + 1; k-- > 0;) {
    const Node& n = nodes_[k];
    const double* g = adjoints_.data() + n.offset;
    const double* y = values_.data() + n.offset;
    const Node& na = nodes_[n.a];
    double* ga = adjoints_.data() + na.offset;
    const double* xa = values_.data() + na.offset;

    switch (n.op) {
      case Op::Const:
        break;
      case Op::Row: {
        auto dst = (*store_)[static_cast<ParamId>(n.param)].grad.row(n.index);
        for (std::size_t i = 0; i < n.len; ++i) dst[i] += g[i];
        break;
      }
      case Op::Param: {
        auto& dst = (*store_)[static_cast<ParamId>(n.param)].grad.data;
        for (std::size_t i = 0; i < n.len; ++i) dst[i] += g[i];
        break;
      }
      case Op::MatVec: {
        auto& p = (*store_)[static_cast<ParamId>(n.param)];
        const std::size_t cols = p.value.cols;
        for (std::size_t i = 0; i < n.len; ++i) {
          if (g[i] == 0.0) continue;
          double* gw = p.grad.data.data() + i * cols;
          const double* w = p.value.data.data() + i * cols;
          for (std::size_t j = 0; j < cols; ++j) {
            gw[j] += g[i] * xa[j];
            ga[j] += g[i] * w[j];
          }
        }
        break;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul: {
        const Node& nb = nodes_[n.b];
        double* gb = adjoints_.data() + nb.offset;
        const double* xb = values_.data() + nb.offset;
        const bool a1 = na.len == 1 && n.len > 1;
        const bool b1 = nb.len == 1 && n.len > 1;
        for (std::size_t i = 0; i < n.len; ++i) {
          const std::size_t ia = a1 ? 0 : i;
          const std::size_t ib = b1 ? 0 : i;
          switch (n.op) {
            case Op::Add:
              ga[ia] += g[i];
              gb[ib] += g[i];
              break;
            case Op::Sub:
              ga[ia] += g[i];
              gb[ib] -= g[i];
              break;
            default:
              ga[ia] += g[i] * xb[ib];
              gb[ib] += g[i] * xa[ia];
              break;
          }
        }
        break;
      }
      case Op::Scale:
        for (std::size_t i = 0; i < n.len; ++i) ga[i] += n.s * g[i];
        break;
      case Op::Sigmoid:
        for (std::size_t i = 0; i < n.len; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      case Op::Exp:
        for (std::size_t i = 0; i < n.len; ++i) {
          if (xa[i] >= -kExpClamp && xa[i] <= kExpClamp) ga[i] += g[i] * y[i];
        }
        break;
      case Op::Log:
        for (std::size_t i = 0; i < n.len; ++i) {
          if (xa[i] > kLogFloor) ga[i] += g[i] / xa[i];
        }
        break;
      case Op::Sqrt:
        for (std::size_t i = 0; i < n.len; ++i) {
          if (y[i] > 0.0) ga[i] += g[i] * 0.5 / y[i];
        }
        break;
      case Op::Square:
        for (std::size_t i = 0; i < n.len; ++i) ga[i] += 2.0 * xa[i] * g[i];
        break;
      case Op::Relu:
        for (std::size_t i = 0; i < n.len; ++i) {
          if (xa[i] > 0.0) ga[i] += g[i];
        }
        break;
      case Op::Sum:
        for (std::size_t i = 0; i < na.len; ++i) ga[i] += g[0];
        break;
      case Op::Pick:
        ga[n.index] += g[0];
        break;
    }
  }
}

}  // namespace relicd
