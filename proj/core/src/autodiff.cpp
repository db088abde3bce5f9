#include "sesim/autodiff.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace sesim {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid())
    throw ContractError(std::string(op) + ": invalid Var");
  if (a.tape != b.tape)
    throw ContractError(std::string(op) + ": operands live on different tapes");
  return *a.tape;
}

Tape& tape_of(Var a, const char* op) {
  if (!a.valid()) throw ContractError(std::string(op) + ": invalid Var");
  return *a.tape;
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this || v.id < 0 || std::size_t(v.id) >= nodes_.size())
    throw ContractError("Var does not belong to this tape");
  return nodes_[std::size_t(v.id)];
}

Tape::Node& Tape::node(Var v) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(v));
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  return emit(std::move(value), requires_grad, nullptr);
}

Var Tape::emit(Matrix value, bool requires_grad, BackwardFn back) {
  nodes_.push_back(Node{std::move(value), Matrix{}, std::move(back), requires_grad});
  return Var{this, int(nodes_.size()) - 1};
}

void Tape::set_backward(Var v, BackwardFn back) { node(v).back = std::move(back); }

Matrix& Tape::grad_buffer(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad = Matrix(n.value.rows, n.value.cols);
  return n.grad;
}

const Matrix& Tape::grad(Var v) { return grad_buffer(v); }

void Tape::backward(Var loss) {
  Node& target = node(loss);
  if (target.value.rows != 1 || target.value.cols != 1)
    throw ContractError("backward: target must be a 1x1 node");
  // Leaves keep accumulating across calls; interior buffers are scratch and
  // must start clean or stale values would be propagated twice.
  for (std::size_t i = 0; i <= std::size_t(loss.id); ++i) {
    Node& n = nodes_[i];
    if (n.back && !n.grad.empty()) n.grad.data.assign(n.grad.size(), 0.0);
  }
  grad_buffer(loss)(0, 0) += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[std::size_t(i)];
    if (!n.back || n.grad.empty()) continue;  // not an op, or never reached
    n.back(*this, n.grad);
  }
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad = Matrix{};
}

// ---- operations ----

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  Matrix out = matmul(t.value(a), t.value(b));
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, b](Tape& t, const Matrix& g) {
      if (t.requires_grad(a)) gemm_acc(t.grad_buffer(a), g, false, t.value(b), true);
      if (t.requires_grad(b)) gemm_acc(t.grad_buffer(b), t.value(a), true, g, false);
    });
  return v;
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (!av.same_shape(bv)) throw ShapeError("add: shape mismatch");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, b](Tape& t, const Matrix& g) {
      if (t.requires_grad(a)) {
        Matrix& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (t.requires_grad(b)) {
        Matrix& gb = t.grad_buffer(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i];
      }
    });
  return v;
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (!av.same_shape(bv)) throw ShapeError("sub: shape mismatch");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= bv.data[i];
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, b](Tape& t, const Matrix& g) {
      if (t.requires_grad(a)) {
        Matrix& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (t.requires_grad(b)) {
        Matrix& gb = t.grad_buffer(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
      }
    });
  return v;
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (!av.same_shape(bv)) throw ShapeError("mul: shape mismatch");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, b](Tape& t, const Matrix& g) {
      if (t.requires_grad(a)) {
        Matrix& ga = t.grad_buffer(a);
        const Matrix& bv = t.value(b);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * bv.data[i];
      }
      if (t.requires_grad(b)) {
        Matrix& gb = t.grad_buffer(b);
        const Matrix& av = t.value(a);
        for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * av.data[i];
      }
    });
  return v;
}

Var add_rowvec(Var a, Var vrow) {
  Tape& t = same_tape(a, vrow, "add_rowvec");
  const Matrix& av = t.value(a);
  const Matrix& vv = t.value(vrow);
  if (vv.rows != 1 || vv.cols != av.cols)
    throw ShapeError("add_rowvec: vector must be 1 x cols(a)");
  Matrix out = av;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) += vv(0, j);
  const bool rg = t.requires_grad(a) || t.requires_grad(vrow);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, vrow](Tape& t, const Matrix& g) {
      if (t.requires_grad(a)) {
        Matrix& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (t.requires_grad(vrow)) {
        Matrix& gv = t.grad_buffer(vrow);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) gv(0, j) += g(i, j);
      }
    });
  return v;
}

Var scale(Var a, double c) {
  Tape& t = tape_of(a, "scale");
  Matrix out = t.value(a);
  for (double& x : out.data) x *= c;
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, c](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += c * g.data[i];
    });
  return v;
}

Var leaky_relu(Var a, double negative_slope) {
  Tape& t = tape_of(a, "leaky_relu");
  Matrix out = t.value(a);
  for (double& x : out.data)
    if (x < 0.0) x *= negative_slope;
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, negative_slope](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_buffer(a);
      const Matrix& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.data[i] += g.data[i] * (av.data[i] > 0.0 ? 1.0 : negative_slope);
    });
  return v;
}

Var exp(Var a) {
  Tape& t = tape_of(a, "exp");
  Matrix out = t.value(a);
  for (double& x : out.data) x = std::exp(x);
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, v](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_buffer(a);
      const Matrix& y = t.value(v);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * y.data[i];
    });
  return v;
}

Var ln(Var a) {
  Tape& t = tape_of(a, "ln");
  Matrix out = t.value(a);
  for (double& x : out.data) {
    if (x <= 0.0) throw DomainError("ln: non-positive input");
    x = std::log(x);
  }
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_buffer(a);
      const Matrix& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / av.data[i];
    });
  return v;
}

Var square(Var a) {
  Tape& t = tape_of(a, "square");
  Matrix out = t.value(a);
  for (double& x : out.data) x *= x;
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_buffer(a);
      const Matrix& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.data[i] += 2.0 * g.data[i] * av.data[i];
    });
  return v;
}

Var clamp(Var a, double lo, double hi) {
  if (lo > hi) throw ParameterError("clamp: lo > hi");
  Tape& t = tape_of(a, "clamp");
  Matrix out = t.value(a);
  for (double& x : out.data) x = std::min(std::max(x, lo), hi);
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, lo, hi](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_buffer(a);
      const Matrix& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (av.data[i] >= lo && av.data[i] <= hi) ga.data[i] += g.data[i];
    });
  return v;
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a, "softmax_rows");
  const Matrix& av = t.value(a);
  Matrix out(av.rows, av.cols);
  for (int i = 0; i < av.rows; ++i) {
    double mx = av(i, 0);
    for (int j = 1; j < av.cols; ++j) mx = std::max(mx, av(i, j));
    double denom = 0.0;
    for (int j = 0; j < av.cols; ++j) {
      out(i, j) = std::exp(av(i, j) - mx);
      denom += out(i, j);
    }
    for (int j = 0; j < av.cols; ++j) out(i, j) /= denom;
  }
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, v](Tape& t, const Matrix& g) {
      // per row: dx = y .* (g - <g, y>)
      Matrix& ga = t.grad_buffer(a);
      const Matrix& y = t.value(v);
      for (int i = 0; i < y.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < y.cols; ++j) dot += g(i, j) * y(i, j);
        for (int j = 0; j < y.cols; ++j)
          ga(i, j) += y(i, j) * (g(i, j) - dot);
      }
    });
  return v;
}

Var dropout(Var a, double rate, bool training, RngStream* rng) {
  if (rate < 0.0 || rate >= 1.0) throw ParameterError("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return a;  // identity, no rng consumed
  if (rng == nullptr) throw ContractError("dropout: training with rate > 0 needs an rng");
  Tape& t = tape_of(a, "dropout");
  const Matrix& av = t.value(a);
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(av.rows, av.cols);
  for (double& m : mask.data) m = (rng->uniform() < rate) ? 0.0 : keep_scale;
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= mask.data[i];
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, mask = std::move(mask)](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * mask.data[i];
    });
  return v;
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b, "concat_cols");
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.rows != bv.rows) throw ShapeError("concat_cols: row count mismatch");
  Matrix out(av.rows, av.cols + bv.cols);
  for (int i = 0; i < av.rows; ++i) {
    for (int j = 0; j < av.cols; ++j) out(i, j) = av(i, j);
    for (int j = 0; j < bv.cols; ++j) out(i, av.cols + j) = bv(i, j);
  }
  // Read the split point before emit(): pushing the new node may reallocate
  // the tape's node storage and invalidate av/bv.
  const int asplit = av.cols;
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg) {
    t.set_backward(v, [a, b, asplit](Tape& t, const Matrix& g) {
      if (t.requires_grad(a)) {
        Matrix& ga = t.grad_buffer(a);
        for (int i = 0; i < ga.rows; ++i)
          for (int j = 0; j < asplit; ++j) ga(i, j) += g(i, j);
      }
      if (t.requires_grad(b)) {
        Matrix& gb = t.grad_buffer(b);
        for (int i = 0; i < gb.rows; ++i)
          for (int j = 0; j < gb.cols; ++j) gb(i, j) += g(i, asplit + j);
      }
    });
  }
  return v;
}

Var column(Var a, int j) {
  Tape& t = tape_of(a, "column");
  const Matrix& av = t.value(a);
  if (j < 0 || j >= av.cols) throw IndexError("column: index out of range");
  Matrix out(av.rows, 1);
  for (int i = 0; i < av.rows; ++i) out(i, 0) = av(i, j);
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a, j](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_buffer(a);
      for (int i = 0; i < g.rows; ++i) ga(i, j) += g(i, 0);
    });
  return v;
}

Var row_sum(Var a) {
  Tape& t = tape_of(a, "row_sum");
  const Matrix& av = t.value(a);
  Matrix out(av.rows, 1);
  for (int i = 0; i < av.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < av.cols; ++j) s += av(i, j);
    out(i, 0) = s;
  }
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_buffer(a);
      for (int i = 0; i < ga.rows; ++i)
        for (int j = 0; j < ga.cols; ++j) ga(i, j) += g(i, 0);
    });
  return v;
}

Var sum(Var a) {
  Tape& t = tape_of(a, "sum");
  const Matrix& av = t.value(a);
  double s = 0.0;
  for (double x : av.data) s += x;
  Matrix out(1, 1);
  out(0, 0) = s;
  const bool rg = t.requires_grad(a);
  Var v = t.emit(std::move(out), rg, nullptr);
  if (rg)
    t.set_backward(v, [a](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_buffer(a);
      for (double& x : ga.data) x += g(0, 0);
    });
  return v;
}

Var mean(Var a) {
  Tape& t = tape_of(a, "mean");
  const std::size_t n = t.value(a).size();
  if (n == 0) throw ShapeError("mean: empty matrix");
  return scale(sum(a), 1.0 / double(n));
}

double scalar(Var a) {
  Tape& t = tape_of(a, "scalar");
  const Matrix& v = t.value(a);
  if (v.rows != 1 || v.cols != 1) throw ContractError("scalar: node is not 1x1");
  return v(0, 0);
}

}  // namespace sesim
