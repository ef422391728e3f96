#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rccm/mlp.hpp"
#include "rccm/rng.hpp"
#include "rccm/system.hpp"

namespace rccm {

struct CertificateHyper {
  double m_lower = 0.1;      // lower metric bound
  double m_upper = 10.0;     // upper metric bound; W >= I / m_upper by construction
  double lambda = 0.5;       // contraction rate
  double alpha_floor = 0.7;  // gain below which alpha is no longer pushed down
};

struct CertificateShape {
  std::vector<int> hidden{128, 128};
  int controller_width = 45;  // inner width of K1 (m x h) and K2 (h x q)
  double alpha0 = 2.0;
  double mu0 = 1.0;
};

double softplus(double x);
double inverse_softplus(double y);

/// Learned dual metric W(x) = Theta(x)^T Theta(x) + I / m_upper and controller
/// k(x, x*) = K1(x, x*) tanh(K2(x, x*) eps(x, x*)), with alpha = softplus(theta_alpha)
/// and mu = softplus(theta_mu).
///
/// Network outputs are flat entry vectors reshaped row by row: Theta is q x q,
/// K1 is m x h and K2 is h x q. The controller networks see [x; x*].
struct NeuralCertificate {
  Mlp theta_w;
  Mlp theta_k1;
  Mlp theta_k2;
  double theta_alpha = 0.0;
  double theta_mu = 0.0;
  CertificateHyper hyper;

  /// Glorot-initialized networks sized for `model`.
  static NeuralCertificate initialize(const ControlAffineModel& model, const CertificateShape& shape, Rng& rng);
  /// All-zero networks: W = I / m_upper and k = 0.
  static NeuralCertificate zero(const ControlAffineModel& model, const CertificateShape& shape);

  int state_dim() const { return theta_w.input_dim(); }
  int tangent_dim() const;
  int input_dim() const;
  int controller_width() const;

  double alpha() const { return softplus(theta_alpha); }
  double mu() const { return softplus(theta_mu); }

  /// Throws std::invalid_argument if the network shapes do not fit together
  /// or do not match `model` (when given).
  void validate(const ControlAffineModel* model = nullptr) const;

  Eigen::Index parameter_count() const;
  /// Flat order: theta_w, theta_k1, theta_k2, theta_alpha, theta_mu.
  VectorXd parameters() const;
  void set_parameters(const VectorXd& flat);
};

MatrixXd eval_dual_metric(const NeuralCertificate& cert, const VectorXd& x);

/// Directional derivative of W along the ambient vector d.
MatrixXd eval_dual_metric_directional(const NeuralCertificate& cert, const VectorXd& x, const VectorXd& d);

/// M = W^{-1} through a Cholesky solve.
MatrixXd eval_metric(const NeuralCertificate& cert, const VectorXd& x);

/// k_nn(x, x*) only.
VectorXd eval_feedback(const NeuralCertificate& cert, const ControlAffineModel& model, const VectorXd& x,
                       const VectorXd& x_star);

/// u = k_nn(x, x*) + u*.
VectorXd eval_controller(const NeuralCertificate& cert, const ControlAffineModel& model, const VectorXd& x,
                         const VectorXd& x_star, const VectorXd& u_star);

ControlInput eval_controller(const NeuralCertificate& cert, const QuadrotorModel& model, const LieState& x,
                             const LieState& x_star, const ControlInput& u_star);

/// Ambient Jacobian dk_nn/dx (m x n) with x* held fixed.
MatrixXd controller_jacobian(const NeuralCertificate& cert, const ControlAffineModel& model, const VectorXd& x,
                             const VectorXd& x_star);

}  // namespace rccm
