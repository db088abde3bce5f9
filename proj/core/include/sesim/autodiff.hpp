#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "sesim/matrix.hpp"
#include "sesim/rng.hpp"

namespace sesim {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid for the lifetime of
/// the tape that produced it.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
/// order, so walking ids backwards from the loss is a topological order of
/// the graph and one sweep computes every gradient.
///
/// Gradients accumulate across backward() calls on *leaves* until
/// zero_grad(); internal node buffers are reset at the start of each sweep
/// so stale intermediate values are never re-propagated.
///
/// A tape is not thread-safe, but independent tapes share no state and may
/// be used from different threads.
class Tape {
 public:
  /// Backward closure: receives the node's accumulated output gradient and
  /// scatters it into the parents' buffers.
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

  /// New input node. requires_grad marks it as a trainable leaf.
  Var leaf(Matrix value, bool requires_grad = false);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  const Matrix& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient of the last backward() target w.r.t. this node. Zeros if the
  /// node was never reached.
  const Matrix& grad(Var v);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. loss must be
  /// a 1x1 node owned by this tape.
  void backward(Var loss);

  /// Clears every gradient buffer, including leaves.
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }

  // --- op-construction interface (used by the free functions below) ---
  Var emit(Matrix value, bool requires_grad, BackwardFn back);
  /// Attach the backward closure after emit(), for ops whose closure wants a
  /// handle to the output node itself (softmax, exp, dropout, ...).
  void set_backward(Var v, BackwardFn back);
  /// Gradient buffer of v, allocated as zeros on first touch.
  Matrix& grad_buffer(Var v);

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until touched
    BackwardFn back;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
};

// ---- operations ----
// Each returns a new node on the operands' tape. Mixing tapes, or shape
// mismatches, throw ContractError / ShapeError. Results require gradients
// iff any operand does.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
/// a (n x m) + v (1 x m), v broadcast over rows.
Var add_rowvec(Var a, Var v);
Var scale(Var a, double c);
Var leaky_relu(Var a, double negative_slope);
Var exp(Var a);
/// Natural log. Throws DomainError if any entry is <= 0.
Var ln(Var a);
Var square(Var a);
/// Clamp values into [lo, hi]. Gradient is zero where the input was clamped.
Var clamp(Var a, double lo, double hi);
/// Row-wise softmax, stabilised by per-row max subtraction.
Var softmax_rows(Var a);
/// Inverted dropout: keep with probability 1-rate and scale kept entries by
/// 1/(1-rate), so eval needs no rescaling. Identity (and no rng consumed)
/// when !training or rate == 0.
Var dropout(Var a, double rate, bool training, RngStream* rng);
Var concat_cols(Var a, Var b);
/// Column j as an n x 1 node.
Var column(Var a, int j);
/// Per-row sums as n x 1.
Var row_sum(Var a);
Var sum(Var a);   // 1 x 1
Var mean(Var a);  // 1 x 1

/// Value of a 1x1 node.
double scalar(Var a);

}  // namespace sesim
