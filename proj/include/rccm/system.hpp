#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rccm/manifold.hpp"

namespace rccm {

/// Mass-normalized collective thrust and body rates.
struct ControlInput {
  double thrust_over_m = 0.0;
  Vec3 omega_B = Vec3::Zero();

  Eigen::Vector4d to_vector() const { return {thrust_over_m, omega_B.x(), omega_B.y(), omega_B.z()}; }
  static ControlInput from_vector(const Eigen::Ref<const VectorXd>& u) {
    return {u(0), Vec3(u(1), u(2), u(3))};
  }
};

/// Mass-normalized force disturbance and body-rate disturbance.
struct Disturbance {
  Vec3 f_d_over_m = Vec3::Zero();
  Vec3 omega_d = Vec3::Zero();

  Eigen::Matrix<double, 6, 1> to_vector() const {
    Eigen::Matrix<double, 6, 1> w;
    w << f_d_over_m, omega_d;
    return w;
  }
  static Disturbance from_vector(const Eigen::Ref<const VectorXd>& w) {
    return {w.segment<3>(0), w.segment<3>(3)};
  }
};

/// Control-affine system  x' = f(x) + B(x) u + B_w(x) w,  z = g(x, u)
/// on a manifold embedded in R^n with an intrinsic tangent basis S(x).
///
/// All vector fields must be tangent to the manifold. Certificate assembly
/// relies on this to express directional derivatives in the basis S.
class ControlAffineModel {
 public:
  virtual ~ControlAffineModel() = default;

  virtual int state_dim() const = 0;        // n
  virtual int tangent_dim() const = 0;      // q
  virtual int input_dim() const = 0;        // m
  virtual int disturbance_dim() const = 0;  // p
  virtual int output_dim() const = 0;       // l

  virtual VectorXd drift(const VectorXd& x) const = 0;
  virtual MatrixXd input_matrix(const VectorXd& x) const = 0;
  virtual MatrixXd disturbance_matrix(const VectorXd& x) const = 0;

  /// Ambient Jacobians of f, of each column b_i and of each column b_{w,j}.
  virtual MatrixXd drift_jacobian(const VectorXd& x) const = 0;
  virtual std::vector<MatrixXd> input_jacobians(const VectorXd& x) const = 0;
  virtual std::vector<MatrixXd> disturbance_jacobians(const VectorXd& x) const = 0;

  virtual VectorXd output(const VectorXd& x, const VectorXd& u) const = 0;
  /// (C, D) = (dg/dx, dg/du).
  virtual std::pair<MatrixXd, MatrixXd> output_jacobians(const VectorXd& x, const VectorXd& u) const = 0;

  virtual MatrixXd tangent_basis(const VectorXd& x) const = 0;
  virtual MatrixXd projection(const VectorXd& x) const = 0;
  /// Directional derivative of P_S(x) along the ambient vector d.
  virtual MatrixXd projection_directional(const VectorXd& x, const VectorXd& d) const = 0;

  virtual MatrixXd e_factor(const VectorXd& x) const = 0;
  virtual MatrixXd e_w_factor(const VectorXd& x) const = 0;
  virtual MatrixXd e_perp(const VectorXd& x) const = 0;

  /// Controller error eps(x, x*) in R^q and its Jacobian w.r.t. x (q x n).
  virtual VectorXd error(const VectorXd& x, const VectorXd& x_star) const = 0;
  virtual MatrixXd error_jacobian(const VectorXd& x, const VectorXd& x_star) const = 0;

  /// A(x,u,w) = df/dx + sum_i u_i db_i/dx + sum_j w_j db_wj/dx.
  MatrixXd ambient_A(const VectorXd& x, const VectorXd& u, const VectorXd& w) const;

  /// f + B u + B_w w.
  VectorXd vector_field(const VectorXd& x, const VectorXd& u, const VectorXd& w) const;
};

struct QuadrotorParams {
  double mass = 1.0;
  Vec3 gravity{0.0, 0.0, -9.81};
  Mat3 Q = Mat3::Identity();
  Eigen::Vector4d R_w_diag{0.1, 0.5, 0.5, 0.5};
};

/// Rate-controlled quadrotor on R^6 x SO(3): n = 15, q = 9, m = 4, p = 6, l = 7.
class QuadrotorModel final : public ControlAffineModel {
 public:
  explicit QuadrotorModel(QuadrotorParams params = {}) : params_(std::move(params)) {}

  const QuadrotorParams& params() const { return params_; }

  // Typed surface.
  Vec15 drift(const LieState& x) const;
  Eigen::Matrix<double, 15, 4> input_matrix(const LieState& x) const;
  Eigen::Matrix<double, 15, 6> disturbance_matrix(const LieState& x) const;
  Eigen::Matrix<double, 9, 4> e_factor(const LieState& x) const;
  Eigen::Matrix<double, 9, 6> e_w_factor(const LieState& x) const;
  Eigen::Matrix<double, 9, 5> e_perp(const LieState& x) const;
  Eigen::Matrix<double, 7, 1> output(const LieState& x, const ControlInput& u) const;
  Vec15 vector_field(const LieState& x, const ControlInput& u, const Disturbance& w) const;
  using ControlAffineModel::vector_field;

  /// Max of ||R^T R - I||_F and, over f, b_i, b_wj, ||d/dt (R^T R)||_F
  /// along the field's rotation block.
  double transversality_residual(const LieState& x) const;

  // Generic surface.
  int state_dim() const override { return 15; }
  int tangent_dim() const override { return 9; }
  int input_dim() const override { return 4; }
  int disturbance_dim() const override { return 6; }
  int output_dim() const override { return 7; }

  VectorXd drift(const VectorXd& x) const override;
  MatrixXd input_matrix(const VectorXd& x) const override;
  MatrixXd disturbance_matrix(const VectorXd& x) const override;
  MatrixXd drift_jacobian(const VectorXd& x) const override;
  std::vector<MatrixXd> input_jacobians(const VectorXd& x) const override;
  std::vector<MatrixXd> disturbance_jacobians(const VectorXd& x) const override;
  VectorXd output(const VectorXd& x, const VectorXd& u) const override;
  std::pair<MatrixXd, MatrixXd> output_jacobians(const VectorXd& x, const VectorXd& u) const override;
  MatrixXd tangent_basis(const VectorXd& x) const override;
  MatrixXd projection(const VectorXd& x) const override;
  MatrixXd projection_directional(const VectorXd& x, const VectorXd& d) const override;
  MatrixXd e_factor(const VectorXd& x) const override;
  MatrixXd e_w_factor(const VectorXd& x) const override;
  MatrixXd e_perp(const VectorXd& x) const override;
  VectorXd error(const VectorXd& x, const VectorXd& x_star) const override;
  MatrixXd error_jacobian(const VectorXd& x, const VectorXd& x_star) const override;

 private:
  QuadrotorParams params_;
};

/// Scalar linear system x' = a x + u + w, z = x on R (n = q = m = p = l = 1).
/// Used as a hand-checkable reference for certificate assembly.
class ScalarLinearModel final : public ControlAffineModel {
 public:
  explicit ScalarLinearModel(double a = -1.0) : a_(a) {}

  int state_dim() const override { return 1; }
  int tangent_dim() const override { return 1; }
  int input_dim() const override { return 1; }
  int disturbance_dim() const override { return 1; }
  int output_dim() const override { return 1; }

  VectorXd drift(const VectorXd& x) const override { return a_ * x; }
  MatrixXd input_matrix(const VectorXd&) const override { return MatrixXd::Ones(1, 1); }
  MatrixXd disturbance_matrix(const VectorXd&) const override { return MatrixXd::Ones(1, 1); }
  MatrixXd drift_jacobian(const VectorXd&) const override { return MatrixXd::Constant(1, 1, a_); }
  std::vector<MatrixXd> input_jacobians(const VectorXd&) const override { return {MatrixXd::Zero(1, 1)}; }
  std::vector<MatrixXd> disturbance_jacobians(const VectorXd&) const override { return {MatrixXd::Zero(1, 1)}; }
  VectorXd output(const VectorXd& x, const VectorXd&) const override { return x; }
  std::pair<MatrixXd, MatrixXd> output_jacobians(const VectorXd&, const VectorXd&) const override {
    return {MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 1)};
  }
  MatrixXd tangent_basis(const VectorXd&) const override { return MatrixXd::Ones(1, 1); }
  MatrixXd projection(const VectorXd&) const override { return MatrixXd::Ones(1, 1); }
  MatrixXd projection_directional(const VectorXd&, const VectorXd&) const override { return MatrixXd::Zero(1, 1); }
  MatrixXd e_factor(const VectorXd&) const override { return MatrixXd::Ones(1, 1); }
  MatrixXd e_w_factor(const VectorXd&) const override { return MatrixXd::Ones(1, 1); }
  MatrixXd e_perp(const VectorXd&) const override { return MatrixXd::Zero(1, 0); }
  VectorXd error(const VectorXd& x, const VectorXd& x_star) const override { return x - x_star; }
  MatrixXd error_jacobian(const VectorXd&, const VectorXd&) const override { return MatrixXd::Ones(1, 1); }

 private:
  double a_;
};

}  // namespace rccm
