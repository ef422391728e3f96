#pragma once

// A small reverse-mode tape over dense matrices. Each node holds a matrix
// value; backward() propagates the adjoint of a 1x1 output to every leaf.
// This drives the per-sample certificate losses, where the operands are a
// handful of matrices no larger than 15x15.

#include <vector>

#include <Eigen/Dense>

namespace rccm {

using Eigen::MatrixXd;

class Tape {
 public:
  using Var = int;

  Var leaf(MatrixXd value);      // differentiable input
  Var constant(MatrixXd value);  // no adjoint is propagated into constants
  Var scalar_constant(double v) { return constant(MatrixXd::Constant(1, 1, v)); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a) { return scale(a, -1.0); }
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var scale(Var a, double c);
  /// s * a with s a 1x1 node.
  Var scale_by(Var a, Var s);
  /// a + a^T
  Var sym(Var a);
  Var cwise_mul(Var a, Var b);
  Var tanh(Var a);
  Var sum(const std::vector<Var>& terms);
  /// 1x1 entry (i, j) of a.
  Var element(Var a, Eigen::Index i, Eigen::Index j);
  Var block(Var a, Eigen::Index i, Eigen::Index j, Eigen::Index rows, Eigen::Index cols);
  Var hcat(const std::vector<Var>& parts);
  Var vcat(const std::vector<Var>& parts);
  /// Row-major reshape of an (rows*cols) x 1 vector.
  Var reshape_rows(Var a, Eigen::Index rows, Eigen::Index cols);
  Var inverse(Var a);
  /// mean_k max(0, -p_k^T A p_k) over the unit columns p_k of `directions`.
  Var lpd(Var a, const MatrixXd& directions);
  /// Frobenius norm; the subgradient at zero is taken as zero.
  Var frobenius(Var a);
  Var relu(Var a);
  Var softplus(Var a);

  const MatrixXd& value(Var v) const { return nodes_[v].value; }
  double scalar(Var v) const { return nodes_[v].value(0, 0); }
  const MatrixXd& grad(Var v) const { return nodes_[v].grad; }

  /// Seeds d(out)/d(out) = 1 and fills grad() of every node on a path to `out`.
  void backward(Var out);
  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf, Constant, Add, Sub, MatMul, Transpose, Scale, ScaleBy, Sym, CwiseMul, Tanh, Sum, Block,
    HCat, VCat, Reshape, Inverse, Lpd, Frobenius, Relu, Softplus
  };
  struct Node {
    explicit Node(Op o) : op(o) {}
    Op op;
    bool active = false;  // depends on a leaf
    int a = -1;
    int b = -1;
    std::vector<int> args;
    double c = 0.0;
    Eigen::Index i0 = 0, j0 = 0;
    MatrixXd value;
    MatrixXd aux;
    MatrixXd grad;
  };

  Var push(Node node);
  bool active(Var v) const { return nodes_[v].active; }

  std::vector<Node> nodes_;
};

}  // namespace rccm
