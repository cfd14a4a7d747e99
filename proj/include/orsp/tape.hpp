#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace orsp {

using Matrix = Eigen::MatrixXd;

class ParamStore;

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense 64-bit matrices. Forward ops append nodes;
/// backward replays the tape in reverse creation order (which is always a
/// topological order). A non-recording tape evaluates values only and
/// skips closure construction.
class Tape {
 public:
  /// Backward rule: receives the output adjoint and the node's own forward
  /// value, and accumulates into input adjoints via accum_adjoint.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out,
                                        const Matrix& own_value)>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Leaf that never receives gradients.
  Var constant(Matrix value);

  /// Leaf tied to a named tensor in `store`; its adjoint is accumulated
  /// into the grad slot of whichever store backward() is given.
  Var param(const ParamStore& store, const std::string& name);

  /// Escape hatch for ops with externally supplied backward rules.
  Var custom(Matrix value, const std::vector<Var>& inputs, BackwardFn backward);

  const Matrix& value(Var v) const { return nodes_[check(v)].value; }

  /// Adjoint of a node after backward(); empty for unreached nodes.
  const Matrix& adjoint(Var v) const;

  /// Runs the reverse sweep from a scalar loss and adds every parameter
  /// leaf's adjoint into its gradient accumulator in the bound store.
  /// Unreachable parameters receive zero (a no-op add).
  void backward(Var loss, ParamStore& store);

  void accum_adjoint(Var v, const Matrix& g);
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }

 private:
  friend Var make_node(Tape&, Matrix, const std::vector<Var>&, BackwardFn);

  struct Node {
    Matrix value;
    Matrix adjoint;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_adjoint = false;
  };

  int check(Var v) const {
    if (!v.valid() || v.id >= size()) throw std::out_of_range("invalid Var");
    return v.id;
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, std::string>> param_leaves_;
  bool recording_;
};

// ---- primitive ops -------------------------------------------------------

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);          // same shape
Var add_rowvec(Tape& t, Var a, Var b);   // b broadcast over rows of a
Var sub(Tape& t, Var a, Var b);
Var cmul(Tape& t, Var a, Var b);         // Hadamard product
Var scale(Tape& t, Var a, double s);
Var one_minus(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var tanh_op(Tape& t, Var a);
Var abs_op(Tape& t, Var a);              // d|x|/dx with sign(0) = 0
Var square(Tape& t, Var a);
Var concat_cols(Tape& t, Var a, Var b);
Var vstack(Tape& t, const std::vector<Var>& rows);
Var slice_cols(Tape& t, Var a, int col0, int ncols);
Var slice_rows(Tape& t, Var a, int row0, int nrows);
Var sum(Tape& t, Var a);                 // [1,1]
Var mean(Tape& t, Var a);                // [1,1]

/// Mean cross-entropy of row-wise softmax against integer targets.
/// Stable log-sum-exp; never takes log of a vanishing probability.
Var softmax_ce_mean(Tape& t, Var logits, const std::vector<int>& targets);

/// Mean binary focal loss over all entries of `probs` against 0/1 targets.
/// p_t = p for target 1 else 1-p; alpha_t = alpha for target 1 else
/// 1-alpha; each entry contributes -alpha_t * (1-p_t)^gamma * ln(p_t),
/// with p clamped by kProbClamp first.
Var focal_mean(Tape& t, Var probs, const Matrix& targets01, double alpha,
               double gamma);

// ---- composite building blocks -------------------------------------------

/// y = x * w + b, with b broadcast across rows.
Var affine(Tape& t, Var x, Var w, Var b);

struct GruVars {
  Var w_z, w_r, w_h;  // [d_in + d_h, d_h]
  Var b_z, b_r, b_h;  // [1, d_h]
};

/// Standard GRU update:
///   z = sigmoid([x,h] W_z + b_z), r = sigmoid([x,h] W_r + b_r),
///   c = tanh([x, r.h] W_h + b_h), h' = (1-z).h + z.c
Var gru_cell(Tape& t, Var x, Var h_prev, const GruVars& g);

/// affine -> tanh -> affine.
Var mlp2(Tape& t, Var x, Var w1, Var b1, Var w2, Var b2);

/// Scalar focal loss, the same formula focal_mean applies elementwise.
double focal_scalar(double p, int target, double alpha, double gamma);

}  // namespace orsp
