#pragma once

// Multilayer perceptrons with tanh hidden layers and exact derivatives.
//
// Besides plain evaluation, a network can be pushed forward on a batch of
// inputs together with any number of tangent directions per input
// ("dual batch"). The reverse pass of a dual batch returns parameter
// gradients of a loss that depends on both the values and the tangents.

#include <vector>

#include <Eigen/Dense>

#include "rccm/rng.hpp"

namespace rccm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct DenseLayer {
  MatrixXd weights;  // out x in
  VectorXd bias;     // out
};

struct DualVector {
  VectorXd value;
  VectorXd tangent;
};

/// Same shapes as the layers of an Mlp.
struct MlpGradient {
  std::vector<DenseLayer> layers;

  MlpGradient& operator+=(const MlpGradient& other);
  MlpGradient& operator*=(double s);
};

/// Cached activations of a dual-batch forward pass.
struct DualBatch {
  Eigen::Index batch = 0;
  Eigen::Index tangents = 0;               // tangent columns per sample
  std::vector<MatrixXd> inputs;            // layer inputs, value columns
  std::vector<MatrixXd> input_tangents;    // layer inputs, tangent columns
  std::vector<MatrixXd> pre_tangents;      // W * input_tangents (hidden layers)
  MatrixXd output;                         // out x batch
  MatrixXd output_tangents;                // out x (batch * tangents), sample-major
};

class Mlp {
 public:
  Mlp() = default;
  /// All-zero parameters for the given widths (input, hidden..., output).
  explicit Mlp(std::vector<int> widths);

  /// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
  static Mlp glorot(std::vector<int> widths, Rng& rng);

  const std::vector<int>& widths() const { return widths_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::Index parameter_count() const;
  void copy_parameters_to(double* out) const;
  void copy_parameters_from(const double* in);
  void copy_gradient_to(const MlpGradient& g, double* out) const;
  MlpGradient zero_gradient() const;

  VectorXd forward(const VectorXd& input) const;

  /// Value and J(input.value) * input.tangent.
  DualVector directional(const DualVector& input) const;

  /// Gradient of <cotangent, forward(input)> w.r.t. every weight and bias.
  MlpGradient param_gradient(const VectorXd& input, const VectorXd& cotangent) const;

  /// Forward pass on `values` (in x B) with `tangents` (in x B*T); tangent
  /// column b*T + t belongs to sample b.
  DualBatch forward_dual(const MatrixXd& values, const MatrixXd& tangents, Eigen::Index tangents_per_sample) const;

  /// Accumulates into `grad` the parameter gradient of a loss whose adjoints
  /// w.r.t. the outputs of `pass` are `adj_values` and `adj_tangents`.
  void backward_dual(const DualBatch& pass, const MatrixXd& adj_values, const MatrixXd& adj_tangents,
                     MlpGradient& grad) const;

 private:
  void check_input(Eigen::Index rows) const;

  std::vector<int> widths_;
  std::vector<DenseLayer> layers_;
};

}  // namespace rccm
