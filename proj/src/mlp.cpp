#include "rccm/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rccm {

MlpGradient& MlpGradient::operator+=(const MlpGradient& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights += other.layers[l].weights;
    layers[l].bias += other.layers[l].bias;
  }
  return *this;
}

MlpGradient& MlpGradient::operator*=(double s) {
  for (auto& layer : layers) {
    layer.weights *= s;
    layer.bias *= s;
  }
  return *this;
}

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output widths");
  for (int w : widths_)
    if (w <= 0) throw std::invalid_argument("Mlp widths must be positive");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
    layers_.push_back({MatrixXd::Zero(widths_[l + 1], widths_[l]), VectorXd::Zero(widths_[l + 1])});
}

Mlp Mlp::glorot(std::vector<int> widths, Rng& rng) {
  Mlp net(std::move(widths));
  for (auto& layer : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) layer.weights(i, j) = rng.uniform(-limit, limit);
  }
  return net;
}

Eigen::Index Mlp::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

void Mlp::copy_parameters_to(double* out) const {
  for (const auto& layer : layers_) {
    out = std::copy(layer.weights.data(), layer.weights.data() + layer.weights.size(), out);
    out = std::copy(layer.bias.data(), layer.bias.data() + layer.bias.size(), out);
  }
}

void Mlp::copy_parameters_from(const double* in) {
  for (auto& layer : layers_) {
    std::copy(in, in + layer.weights.size(), layer.weights.data());
    in += layer.weights.size();
    std::copy(in, in + layer.bias.size(), layer.bias.data());
    in += layer.bias.size();
  }
}

void Mlp::copy_gradient_to(const MlpGradient& g, double* out) const {
  for (const auto& layer : g.layers) {
    out = std::copy(layer.weights.data(), layer.weights.data() + layer.weights.size(), out);
    out = std::copy(layer.bias.data(), layer.bias.data() + layer.bias.size(), out);
  }
}

MlpGradient Mlp::zero_gradient() const {
  MlpGradient g;
  for (const auto& layer : layers_)
    g.layers.push_back({MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()), VectorXd::Zero(layer.bias.size())});
  return g;
}

void Mlp::check_input(Eigen::Index rows) const {
  if (layers_.empty()) throw std::invalid_argument("Mlp has no layers");
  if (rows != input_dim())
    throw std::invalid_argument("Mlp input length " + std::to_string(rows) + " != " + std::to_string(input_dim()));
}

VectorXd Mlp::forward(const VectorXd& input) const {
  check_input(input.size());
  VectorXd h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    VectorXd a = layers_[l].weights * h + layers_[l].bias;
    h = (l + 1 < layers_.size()) ? VectorXd(a.array().tanh()) : a;
  }
  return h;
}

DualVector Mlp::directional(const DualVector& input) const {
  check_input(input.value.size());
  if (input.tangent.size() != input.value.size()) throw std::invalid_argument("DualVector lengths differ");
  VectorXd h = input.value;
  VectorXd dh = input.tangent;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    VectorXd a = layers_[l].weights * h + layers_[l].bias;
    VectorXd da = layers_[l].weights * dh;
    if (l + 1 < layers_.size()) {
      h = a.array().tanh();
      dh = (1.0 - h.array().square()) * da.array();
    } else {
      h = std::move(a);
      dh = std::move(da);
    }
  }
  return {h, dh};
}

MlpGradient Mlp::param_gradient(const VectorXd& input, const VectorXd& cotangent) const {
  if (cotangent.size() != output_dim()) throw std::invalid_argument("cotangent length mismatch");
  const DualBatch pass = forward_dual(input, MatrixXd(input.size(), 0), 0);
  MlpGradient g = zero_gradient();
  backward_dual(pass, cotangent, MatrixXd(output_dim(), 0), g);
  return g;
}

DualBatch Mlp::forward_dual(const MatrixXd& values, const MatrixXd& tangents, Eigen::Index T) const {
  check_input(values.rows());
  const Eigen::Index B = values.cols();
  if (tangents.rows() != values.rows() || tangents.cols() != B * T)
    throw std::invalid_argument("forward_dual: tangent block has the wrong shape");

  DualBatch pass;
  pass.batch = B;
  pass.tangents = T;
  MatrixXd h = values;
  MatrixXd dh = tangents;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    pass.inputs.push_back(h);
    pass.input_tangents.push_back(dh);
    MatrixXd a = layer.weights * h;
    a.colwise() += layer.bias;
    MatrixXd da = layer.weights * dh;
    if (l + 1 < layers_.size()) {
      h = a.array().tanh();
      const MatrixXd slope = 1.0 - h.array().square();
      dh.resize(da.rows(), da.cols());
      for (Eigen::Index b = 0; b < B; ++b)
        dh.middleCols(b * T, T) = da.middleCols(b * T, T).array().colwise() * slope.col(b).array();
      pass.pre_tangents.push_back(std::move(da));
    } else {
      h = std::move(a);
      dh = std::move(da);
    }
  }
  pass.output = std::move(h);
  pass.output_tangents = std::move(dh);
  return pass;
}

void Mlp::backward_dual(const DualBatch& pass, const MatrixXd& adj_values, const MatrixXd& adj_tangents,
                        MlpGradient& grad) const {
  const Eigen::Index B = pass.batch;
  const Eigen::Index T = pass.tangents;
  if (adj_values.rows() != output_dim() || adj_values.cols() != B || adj_tangents.cols() != B * T)
    throw std::invalid_argument("backward_dual: adjoint shape mismatch");

  MatrixXd g = adj_values;    // adjoint of layer output values
  MatrixXd gd = adj_tangents; // adjoint of layer output tangents
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& layer = layers_[li];
    const bool hidden = li + 1 < layers_.size();
    if (hidden) {
      // Output of this layer is the input of the next one.
      const MatrixXd& out = pass.inputs[li + 1];
      const MatrixXd& da = pass.pre_tangents[li];
      const MatrixXd slope = 1.0 - out.array().square();
      MatrixXd adj_slope(slope.rows(), B);
      for (Eigen::Index b = 0; b < B; ++b) {
        adj_slope.col(b) = (da.middleCols(b * T, T).array() * gd.middleCols(b * T, T).array()).rowwise().sum();
        gd.middleCols(b * T, T) = gd.middleCols(b * T, T).array().colwise() * slope.col(b).array();
      }
      // slope = 1 - out^2 and out = tanh(a).
      g = (slope.array() * (g.array() - 2.0 * out.array() * adj_slope.array())).matrix();
    }
    auto& gl = grad.layers[li];
    gl.weights.noalias() += g * pass.inputs[li].transpose();
    if (T > 0) gl.weights.noalias() += gd * pass.input_tangents[li].transpose();
    gl.bias += g.rowwise().sum();
    if (li > 0) {
      g = layer.weights.transpose() * g;
      gd = layer.weights.transpose() * gd;
    }
  }
}

}  // namespace rccm
