#include "orsp/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "orsp/param_store.hpp"

namespace orsp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

double clamp_prob(double p) {
  return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

}  // namespace

Var make_node(Tape& t, Matrix value, const std::vector<Var>& inputs,
              Tape::BackwardFn backward) {
  Tape::Node node;
  node.value = std::move(value);
  bool needs_grad = false;
  for (Var in : inputs) needs_grad = needs_grad || t.requires_grad(in);
  node.requires_grad = needs_grad;
  if (t.recording() && needs_grad) node.backward = std::move(backward);
  t.nodes_.push_back(std::move(node));
  return Var{static_cast<int>(t.nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{size() - 1};
}

Var Tape::param(const ParamStore& store, const std::string& name) {
  Node node;
  node.value = store.value(name);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  Var v{size() - 1};
  if (recording_) param_leaves_.emplace_back(v.id, name);
  return v;
}

Var Tape::custom(Matrix value, const std::vector<Var>& inputs,
                 BackwardFn backward) {
  return make_node(*this, std::move(value), inputs, std::move(backward));
}

void Tape::accum_adjoint(Var v, const Matrix& g) {
  Node& n = nodes_[check(v)];
  if (!n.requires_grad) return;
  if (!n.has_adjoint) {
    n.adjoint = g;
    n.has_adjoint = true;
  } else {
    n.adjoint += g;
  }
}

const Matrix& Tape::adjoint(Var v) const {
  const Node& n = nodes_[check(v)];
  static const Matrix kEmpty;
  return n.has_adjoint ? n.adjoint : kEmpty;
}

void Tape::backward(Var loss, ParamStore& store) {
  require(recording_, "backward on a non-recording tape");
  const Matrix& l = value(loss);
  require(l.rows() == 1 && l.cols() == 1,
          "backward requires a scalar loss, got " + dims(l));
  accum_adjoint(loss, Matrix::Ones(1, 1));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.has_adjoint && n.backward) n.backward(*this, n.adjoint, n.value);
  }
  for (const auto& [id, name] : param_leaves_) {
    const Node& n = nodes_[id];
    if (n.has_adjoint) store.grad(name) += n.adjoint;
  }
}

// ---- primitive ops -------------------------------------------------------

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.cols() == B.rows(),
          "matmul shape mismatch: " + dims(A) + " * " + dims(B));
  return make_node(t, A * B, {a, b},
                   [a, b](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, g * t.value(b).transpose());
                     t.accum_adjoint(b, t.value(a).transpose() * g);
                   });
}

Var add(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(),
          "add shape mismatch: " + dims(A) + " vs " + dims(B));
  return make_node(t, A + B, {a, b},
                   [a, b](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, g);
                     t.accum_adjoint(b, g);
                   });
}

Var add_rowvec(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(B.rows() == 1 && B.cols() == A.cols(),
          "add_rowvec expects [1," + std::to_string(A.cols()) + "], got " +
              dims(B));
  Matrix out = A;
  out.rowwise() += B.row(0);
  return make_node(t, std::move(out), {a, b},
                   [a, b](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, g);
                     t.accum_adjoint(b, g.colwise().sum());
                   });
}

Var sub(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(),
          "sub shape mismatch: " + dims(A) + " vs " + dims(B));
  return make_node(t, A - B, {a, b},
                   [a, b](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, g);
                     t.accum_adjoint(b, -g);
                   });
}

Var cmul(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(),
          "cmul shape mismatch: " + dims(A) + " vs " + dims(B));
  return make_node(t, A.cwiseProduct(B), {a, b},
                   [a, b](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, g.cwiseProduct(t.value(b)));
                     t.accum_adjoint(b, g.cwiseProduct(t.value(a)));
                   });
}

Var scale(Tape& t, Var a, double s) {
  return make_node(t, t.value(a) * s, {a},
                   [a, s](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, g * s);
                   });
}

Var one_minus(Tape& t, Var a) {
  const Matrix& A = t.value(a);
  Matrix out = Matrix::Ones(A.rows(), A.cols()) - A;
  return make_node(t, std::move(out), {a},
                   [a](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, -g);
                   });
}

Var sigmoid(Tape& t, Var a) {
  Matrix y = t.value(a).unaryExpr([](double x) {
    // branch on sign keeps the exp() argument nonpositive
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  });
  return make_node(t, std::move(y), {a},
                   [a](Tape& t, const Matrix& g, const Matrix& y) {
                     Matrix dy = y.cwiseProduct(
                         Matrix::Ones(y.rows(), y.cols()) - y);
                     t.accum_adjoint(a, g.cwiseProduct(dy));
                   });
}

Var tanh_op(Tape& t, Var a) {
  Matrix y = t.value(a).array().tanh();
  return make_node(t, std::move(y), {a},
                   [a](Tape& t, const Matrix& g, const Matrix& y) {
                     Matrix dy =
                         Matrix::Ones(y.rows(), y.cols()) - y.cwiseProduct(y);
                     t.accum_adjoint(a, g.cwiseProduct(dy));
                   });
}

Var abs_op(Tape& t, Var a) {
  return make_node(t, t.value(a).cwiseAbs(), {a},
                   [a](Tape& t, const Matrix& g, const Matrix&) {
                     Matrix sign = t.value(a).unaryExpr([](double v) {
                       return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                     });
                     t.accum_adjoint(a, g.cwiseProduct(sign));
                   });
}

Var square(Tape& t, Var a) {
  const Matrix& A = t.value(a);
  return make_node(t, A.cwiseProduct(A), {a},
                   [a](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, 2.0 * g.cwiseProduct(t.value(a)));
                   });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.rows() == B.rows(),
          "concat_cols row mismatch: " + dims(A) + " vs " + dims(B));
  Matrix out(A.rows(), A.cols() + B.cols());
  out << A, B;
  const int ca = static_cast<int>(A.cols());
  const int cb = static_cast<int>(B.cols());
  return make_node(t, std::move(out), {a, b},
                   [a, b, ca, cb](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, g.leftCols(ca));
                     t.accum_adjoint(b, g.rightCols(cb));
                   });
}

Var vstack(Tape& t, const std::vector<Var>& rows) {
  require(!rows.empty(), "vstack of zero blocks");
  Eigen::Index total = 0;
  const Eigen::Index cols = t.value(rows[0]).cols();
  for (Var v : rows) {
    require(t.value(v).cols() == cols, "vstack column mismatch");
    total += t.value(v).rows();
  }
  Matrix out(total, cols);
  Eigen::Index r = 0;
  std::vector<std::pair<Var, std::pair<Eigen::Index, Eigen::Index>>> spans;
  spans.reserve(rows.size());
  for (Var v : rows) {
    const Matrix& m = t.value(v);
    out.middleRows(r, m.rows()) = m;
    spans.push_back({v, {r, m.rows()}});
    r += m.rows();
  }
  return make_node(t, std::move(out), rows,
                   [spans](Tape& t, const Matrix& g, const Matrix&) {
                     for (const auto& [v, span] : spans)
                       t.accum_adjoint(v, g.middleRows(span.first, span.second));
                   });
}

Var slice_cols(Tape& t, Var a, int col0, int ncols) {
  const Matrix& A = t.value(a);
  require(col0 >= 0 && ncols >= 0 && col0 + ncols <= A.cols(),
          "slice_cols out of range on " + dims(A));
  const Eigen::Index rows = A.rows(), allcols = A.cols();
  return make_node(
      t, A.middleCols(col0, ncols), {a},
      [a, col0, ncols, rows, allcols](Tape& t, const Matrix& g, const Matrix&) {
        Matrix full = Matrix::Zero(rows, allcols);
        full.middleCols(col0, ncols) = g;
        t.accum_adjoint(a, full);
      });
}

Var slice_rows(Tape& t, Var a, int row0, int nrows) {
  const Matrix& A = t.value(a);
  require(row0 >= 0 && nrows >= 0 && row0 + nrows <= A.rows(),
          "slice_rows out of range on " + dims(A));
  const Eigen::Index allrows = A.rows(), cols = A.cols();
  return make_node(
      t, A.middleRows(row0, nrows), {a},
      [a, row0, nrows, allrows, cols](Tape& t, const Matrix& g, const Matrix&) {
        Matrix full = Matrix::Zero(allrows, cols);
        full.middleRows(row0, nrows) = g;
        t.accum_adjoint(a, full);
      });
}

Var sum(Tape& t, Var a) {
  const Matrix& A = t.value(a);
  Matrix out(1, 1);
  out(0, 0) = A.sum();
  const Eigen::Index r = A.rows(), c = A.cols();
  return make_node(t, std::move(out), {a},
                   [a, r, c](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, Matrix::Constant(r, c, g(0, 0)));
                   });
}

Var mean(Tape& t, Var a) {
  const Matrix& A = t.value(a);
  require(A.size() > 0, "mean of empty matrix");
  Matrix out(1, 1);
  out(0, 0) = A.mean();
  const Eigen::Index r = A.rows(), c = A.cols();
  const double inv = 1.0 / static_cast<double>(A.size());
  return make_node(t, std::move(out), {a},
                   [a, r, c, inv](Tape& t, const Matrix& g, const Matrix&) {
                     t.accum_adjoint(a, Matrix::Constant(r, c, g(0, 0) * inv));
                   });
}

Var softmax_ce_mean(Tape& t, Var logits, const std::vector<int>& targets) {
  const Matrix& L = t.value(logits);
  require(static_cast<Eigen::Index>(targets.size()) == L.rows(),
          "softmax_ce_mean: one target per logits row");
  for (int tgt : targets)
    require(tgt >= 0 && tgt < L.cols(), "target id out of vocabulary range");

  const Eigen::Index n = L.rows();
  Matrix probs(L.rows(), L.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = L.row(i).maxCoeff();
    Eigen::RowVectorXd shifted = (L.row(i).array() - mx).exp().matrix();
    const double z = shifted.sum();
    probs.row(i) = shifted / z;
    total += std::log(z) + mx - L(i, targets[i]);
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(n);

  std::vector<int> tg = targets;
  return make_node(t, std::move(out), {logits},
                   [logits, probs, tg, n](Tape& t, const Matrix& g,
                                          const Matrix&) {
                     Matrix grad = probs;
                     for (Eigen::Index i = 0; i < n; ++i) grad(i, tg[i]) -= 1.0;
                     grad *= g(0, 0) / static_cast<double>(n);
                     t.accum_adjoint(logits, grad);
                   });
}

Var focal_mean(Tape& t, Var probs, const Matrix& targets01, double alpha,
               double gamma) {
  const Matrix& P = t.value(probs);
  require(P.rows() == targets01.rows() && P.cols() == targets01.cols(),
          "focal_mean shape mismatch: " + dims(P) + " vs " + dims(targets01));
  require(P.size() > 0, "focal_mean of empty matrix");

  const double inv_n = 1.0 / static_cast<double>(P.size());
  double total = 0.0;
  for (Eigen::Index j = 0; j < P.cols(); ++j)
    for (Eigen::Index i = 0; i < P.rows(); ++i)
      total += focal_scalar(P(i, j), targets01(i, j) > 0.5 ? 1 : 0, alpha, gamma);
  Matrix out(1, 1);
  out(0, 0) = total * inv_n;

  Matrix targets = targets01;
  return make_node(
      t, std::move(out), {probs},
      [probs, targets, alpha, gamma, inv_n](Tape& t, const Matrix& g,
                                            const Matrix&) {
        const Matrix& P = t.value(probs);
        Matrix grad(P.rows(), P.cols());
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
          for (Eigen::Index i = 0; i < P.rows(); ++i) {
            const double p = P(i, j);
            if (p < kProbClamp || p > 1.0 - kProbClamp) {
              grad(i, j) = 0.0;  // clamped region is flat
              continue;
            }
            const bool pos = targets(i, j) > 0.5;
            const double pt = pos ? p : 1.0 - p;
            const double at = pos ? alpha : 1.0 - alpha;
            // d/dp_t of -at*(1-pt)^gamma*ln(pt)
            double d = -at * std::pow(1.0 - pt, gamma) / pt;
            if (gamma != 0.0)
              d += at * gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt);
            grad(i, j) = d * (pos ? 1.0 : -1.0);
          }
        }
        t.accum_adjoint(probs, g(0, 0) * inv_n * grad);
      });
}

double focal_scalar(double p, int target, double alpha, double gamma) {
  const double pc = clamp_prob(p);
  const double pt = target == 1 ? pc : 1.0 - pc;
  const double at = target == 1 ? alpha : 1.0 - alpha;
  return -at * std::pow(1.0 - pt, gamma) * std::log(pt);
}

// ---- composites ------------------------------------------------------------

Var affine(Tape& t, Var x, Var w, Var b) {
  return add_rowvec(t, matmul(t, x, w), b);
}

Var gru_cell(Tape& t, Var x, Var h_prev, const GruVars& g) {
  Var xh = concat_cols(t, x, h_prev);
  Var z = sigmoid(t, affine(t, xh, g.w_z, g.b_z));
  Var r = sigmoid(t, affine(t, xh, g.w_r, g.b_r));
  Var xrh = concat_cols(t, x, cmul(t, r, h_prev));
  Var cand = tanh_op(t, affine(t, xrh, g.w_h, g.b_h));
  return add(t, cmul(t, one_minus(t, z), h_prev), cmul(t, z, cand));
}

Var mlp2(Tape& t, Var x, Var w1, Var b1, Var w2, Var b2) {
  return affine(t, tanh_op(t, affine(t, x, w1, b1)), w2, b2);
}

}  // namespace orsp
