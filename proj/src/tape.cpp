#include "rccm/tape.hpp"

#include <cmath>
#include <algorithm>
#include <stdexcept>

namespace rccm {

Tape::Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size() - 1);
}

Tape::Var Tape::leaf(MatrixXd value) {
  Node n(Op::Leaf);
  n.active = true;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::Var Tape::constant(MatrixXd value) {
  Node n(Op::Constant);
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw std::invalid_argument("Tape::add: shape mismatch");
  Node n(Op::Add);
  n.a = a;
  n.b = b;
  n.active = active(a) || active(b);
  n.value = value(a) + value(b);
  return push(std::move(n));
}

Tape::Var Tape::sub(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw std::invalid_argument("Tape::sub: shape mismatch");
  Node n(Op::Sub);
  n.a = a;
  n.b = b;
  n.active = active(a) || active(b);
  n.value = value(a) - value(b);
  return push(std::move(n));
}

Tape::Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) throw std::invalid_argument("Tape::matmul: shape mismatch");
  Node n(Op::MatMul);
  n.a = a;
  n.b = b;
  n.active = active(a) || active(b);
  n.value = value(a) * value(b);
  return push(std::move(n));
}

Tape::Var Tape::transpose(Var a) {
  Node n(Op::Transpose);
  n.a = a;
  n.active = active(a);
  n.value = value(a).transpose();
  return push(std::move(n));
}

Tape::Var Tape::scale(Var a, double c) {
  Node n(Op::Scale);
  n.a = a;
  n.c = c;
  n.active = active(a);
  n.value = c * value(a);
  return push(std::move(n));
}

Tape::Var Tape::scale_by(Var a, Var s) {
  if (value(s).size() != 1) throw std::invalid_argument("Tape::scale_by: scale must be 1x1");
  Node n(Op::ScaleBy);
  n.a = a;
  n.b = s;
  n.active = active(a) || active(s);
  n.value = value(s)(0, 0) * value(a);
  return push(std::move(n));
}

Tape::Var Tape::sym(Var a) {
  if (value(a).rows() != value(a).cols()) throw std::invalid_argument("Tape::sym: matrix must be square");
  Node n(Op::Sym);
  n.a = a;
  n.active = active(a);
  n.value = value(a) + value(a).transpose();
  return push(std::move(n));
}

Tape::Var Tape::cwise_mul(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw std::invalid_argument("Tape::cwise_mul: shape mismatch");
  Node n(Op::CwiseMul);
  n.a = a;
  n.b = b;
  n.active = active(a) || active(b);
  n.value = value(a).cwiseProduct(value(b));
  return push(std::move(n));
}

Tape::Var Tape::tanh(Var a) {
  Node n(Op::Tanh);
  n.a = a;
  n.active = active(a);
  n.value = value(a).array().tanh();
  return push(std::move(n));
}

Tape::Var Tape::sum(const std::vector<Var>& terms) {
  if (terms.empty()) throw std::invalid_argument("Tape::sum: no terms");
  Node n(Op::Sum);
  n.args = terms;
  n.value = value(terms.front());
  n.active = active(terms.front());
  for (std::size_t k = 1; k < terms.size(); ++k) {
    if (value(terms[k]).rows() != n.value.rows() || value(terms[k]).cols() != n.value.cols())
      throw std::invalid_argument("Tape::sum: shape mismatch");
    n.value += value(terms[k]);
    n.active = n.active || active(terms[k]);
  }
  return push(std::move(n));
}

Tape::Var Tape::element(Var a, Eigen::Index i, Eigen::Index j) { return block(a, i, j, 1, 1); }

Tape::Var Tape::block(Var a, Eigen::Index i, Eigen::Index j, Eigen::Index rows, Eigen::Index cols) {
  const MatrixXd& v = value(a);
  if (i < 0 || j < 0 || i + rows > v.rows() || j + cols > v.cols()) throw std::out_of_range("Tape::block");
  Node n(Op::Block);
  n.a = a;
  n.i0 = i;
  n.j0 = j;
  n.active = active(a);
  n.value = v.block(i, j, rows, cols);
  return push(std::move(n));
}

Tape::Var Tape::hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("Tape::hcat: no parts");
  Eigen::Index rows = value(parts.front()).rows(), cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw std::invalid_argument("Tape::hcat: row mismatch");
    cols += value(p).cols();
  }
  Node n(Op::HCat);
  n.args = parts;
  n.value.resize(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    n.value.middleCols(c, value(p).cols()) = value(p);
    c += value(p).cols();
    n.active = n.active || active(p);
  }
  return push(std::move(n));
}

Tape::Var Tape::vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("Tape::vcat: no parts");
  Eigen::Index cols = value(parts.front()).cols(), rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw std::invalid_argument("Tape::vcat: column mismatch");
    rows += value(p).rows();
  }
  Node n(Op::VCat);
  n.args = parts;
  n.value.resize(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    n.value.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
    n.active = n.active || active(p);
  }
  return push(std::move(n));
}

Tape::Var Tape::reshape_rows(Var a, Eigen::Index rows, Eigen::Index cols) {
  const MatrixXd& v = value(a);
  if (v.cols() != 1 || v.rows() != rows * cols) throw std::invalid_argument("Tape::reshape_rows: size mismatch");
  Node n(Op::Reshape);
  n.a = a;
  n.active = active(a);
  n.value.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) n.value(i, j) = v(i * cols + j, 0);
  return push(std::move(n));
}

Tape::Var Tape::inverse(Var a) {
  const MatrixXd& v = value(a);
  if (v.rows() != v.cols()) throw std::invalid_argument("Tape::inverse: matrix must be square");
  Node n(Op::Inverse);
  n.a = a;
  n.active = active(a);
  n.value = v.partialPivLu().inverse();
  return push(std::move(n));
}

Tape::Var Tape::lpd(Var a, const MatrixXd& directions) {
  const MatrixXd& v = value(a);
  if (directions.rows() != v.rows() || v.rows() != v.cols() || directions.cols() == 0)
    throw std::invalid_argument("Tape::lpd: direction dimension mismatch");
  Node n(Op::Lpd);
  n.a = a;
  n.active = active(a);
  // aux keeps only the directions whose hinge is active.
  const MatrixXd AP = v * directions;
  double total = 0.0;
  std::vector<Eigen::Index> hot;
  for (Eigen::Index k = 0; k < directions.cols(); ++k) {
    const double q = -directions.col(k).dot(AP.col(k));
    if (std::isnan(q)) {
      total = q;
    } else if (q > 0.0) {
      total += q;
      hot.push_back(k);
    }
  }
  n.aux.resize(v.rows(), static_cast<Eigen::Index>(hot.size()));
  for (std::size_t k = 0; k < hot.size(); ++k) n.aux.col(static_cast<Eigen::Index>(k)) = directions.col(hot[k]);
  n.c = 1.0 / static_cast<double>(directions.cols());
  n.value = MatrixXd::Constant(1, 1, total * n.c);
  return push(std::move(n));
}

Tape::Var Tape::frobenius(Var a) {
  Node n(Op::Frobenius);
  n.a = a;
  n.active = active(a);
  n.value = MatrixXd::Constant(1, 1, value(a).norm());
  return push(std::move(n));
}

Tape::Var Tape::relu(Var a) {
  Node n(Op::Relu);
  n.a = a;
  n.active = active(a);
  n.value = value(a).unaryExpr([](double x) { return std::isnan(x) ? x : std::max(x, 0.0); });
  return push(std::move(n));
}

Tape::Var Tape::softplus(Var a) {
  Node n(Op::Softplus);
  n.a = a;
  n.active = active(a);
  // log(1 + e^x) without overflow.
  n.value = value(a).unaryExpr([](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); });
  return push(std::move(n));
}

void Tape::backward(Var out) {
  if (value(out).size() != 1) throw std::invalid_argument("Tape::backward: output must be 1x1");
  for (auto& n : nodes_)
    if (n.active) n.grad = MatrixXd::Zero(n.value.rows(), n.value.cols());
  if (!active(out)) return;
  nodes_[out].grad(0, 0) = 1.0;

  for (Var id = out; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.active) continue;
    const MatrixXd& g = n.grad;
    if (g.isZero(0.0) && n.op != Op::Leaf) continue;
    auto acc = [&](int target) -> MatrixXd* { return (target >= 0 && nodes_[target].active) ? &nodes_[target].grad : nullptr; };
    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Add:
        if (auto* ga = acc(n.a)) *ga += g;
        if (auto* gb = acc(n.b)) *gb += g;
        break;
      case Op::Sub:
        if (auto* ga = acc(n.a)) *ga += g;
        if (auto* gb = acc(n.b)) *gb -= g;
        break;
      case Op::MatMul:
        if (auto* ga = acc(n.a)) ga->noalias() += g * value(n.b).transpose();
        if (auto* gb = acc(n.b)) gb->noalias() += value(n.a).transpose() * g;
        break;
      case Op::Transpose:
        if (auto* ga = acc(n.a)) *ga += g.transpose();
        break;
      case Op::Scale:
        if (auto* ga = acc(n.a)) *ga += n.c * g;
        break;
      case Op::ScaleBy:
        if (auto* ga = acc(n.a)) *ga += value(n.b)(0, 0) * g;
        if (auto* gb = acc(n.b)) (*gb)(0, 0) += g.cwiseProduct(value(n.a)).sum();
        break;
      case Op::Sym:
        if (auto* ga = acc(n.a)) *ga += g + g.transpose();
        break;
      case Op::CwiseMul:
        if (auto* ga = acc(n.a)) *ga += g.cwiseProduct(value(n.b));
        if (auto* gb = acc(n.b)) *gb += g.cwiseProduct(value(n.a));
        break;
      case Op::Tanh:
        if (auto* ga = acc(n.a)) *ga += (g.array() * (1.0 - n.value.array().square())).matrix();
        break;
      case Op::Sum:
        for (int t : n.args)
          if (auto* gt = acc(t)) *gt += g;
        break;
      case Op::Block:
        if (auto* ga = acc(n.a)) ga->block(n.i0, n.j0, g.rows(), g.cols()) += g;
        break;
      case Op::HCat: {
        Eigen::Index c = 0;
        for (int t : n.args) {
          const Eigen::Index w = value(t).cols();
          if (auto* gt = acc(t)) *gt += g.middleCols(c, w);
          c += w;
        }
        break;
      }
      case Op::VCat: {
        Eigen::Index r = 0;
        for (int t : n.args) {
          const Eigen::Index h = value(t).rows();
          if (auto* gt = acc(t)) *gt += g.middleRows(r, h);
          r += h;
        }
        break;
      }
      case Op::Reshape:
        if (auto* ga = acc(n.a))
          for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cols(); ++j) (*ga)(i * g.cols() + j, 0) += g(i, j);
        break;
      case Op::Inverse:
        if (auto* ga = acc(n.a)) ga->noalias() -= n.value.transpose() * g * n.value.transpose();
        break;
      case Op::Lpd:
        if (auto* ga = acc(n.a)) ga->noalias() -= (g(0, 0) * n.c) * n.aux * n.aux.transpose();
        break;
      case Op::Frobenius:
        if (auto* ga = acc(n.a)) {
          const double norm = n.value(0, 0);
          if (norm > 0.0) *ga += (g(0, 0) / norm) * value(n.a);
        }
        break;
      case Op::Relu:
        if (auto* ga = acc(n.a)) *ga += (value(n.a).array() > 0.0).cast<double>().matrix().cwiseProduct(g);
        break;
      case Op::Softplus:
        if (auto* ga = acc(n.a))
          *ga += value(n.a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); }).cwiseProduct(g);
        break;
    }
  }
}

}  // namespace rccm
