#pragma once

// Lie-group primitives for the state space R^6 x SO(3) embedded in R^15.

#include <Eigen/Dense>

#include "rccm/rng.hpp"

namespace rccm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Vec15 = Eigen::Matrix<double, 15, 1>;
using Mat15x9 = Eigen::Matrix<double, 15, 9>;
using Mat9x3 = Eigen::Matrix<double, 9, 3>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kAmbientDim = 15;
inline constexpr int kTangentDim = 9;

/// Quadrotor state: position, velocity and body-to-inertial rotation.
/// The ambient layout is [p; v; vec_cm(R)].
struct LieState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 R = Mat3::Identity();

  Vec15 flatten() const;
  static LieState unflatten(const Eigen::Ref<const VectorXd>& x);

  /// Orthogonality and determinant within `tol`.
  bool on_manifold(double tol = 1e-9) const;
};

/// Skew-symmetric matrix with hat(a) * b == a.cross(b).
Mat3 hat(const Vec3& phi);

/// Inverse of hat. Throws std::invalid_argument("not skew-symmetric") when
/// ||S + S^T||_F exceeds 1e-8.
Vec3 vee(const Mat3& S);

/// Column-major stacking, so that vec_cm(G X) == kron(I, G) vec_cm(X).
VectorXd vec_cm(const MatrixXd& M);
MatrixXd unvec_cm(const Eigen::Ref<const VectorXd>& v, Eigen::Index rows, Eigen::Index cols);

/// Columns vec_cm(hat(e_i)).
Mat9x3 so3_basis_evec();

/// S_r(R) = [vec(R e1^) vec(R e2^) vec(R e3^)].
Mat9x3 rotation_tangent_basis(const Mat3& R);

/// S(x) = blkdiag(I6, S_r(R)).
Mat15x9 tangent_basis(const LieState& x);

/// P_S = S (S^T S)^{-1} = S blkdiag(I6, I3/2).
Mat15x9 projection(const LieState& x);

/// Geometric tracking error [p - p*; v - v*; (R*^T R - R^T R*)^v / 2].
Vec9 error_function(const LieState& x, const LieState& x_star);

/// Rotation for ZYX Euler angles: Rz(yaw) Ry(pitch) Rx(roll).
Mat3 euler_zyx(double roll, double pitch, double yaw);

/// Rodrigues' formula for exp(hat(phi)).
Mat3 rotation_exp(const Vec3& phi);

struct EulerBox {
  double roll = 1.0;
  double pitch = 1.0;
  double yaw = 3.141592653589793;
};

/// Euler angles uniform in [-box, box], converted with euler_zyx.
Mat3 sample_rotation(Rng& rng, const EulerBox& box = {});

/// Modified Gram-Schmidt on the columns followed by a determinant sign fix.
/// Throws std::invalid_argument if ||M^T M - I||_F >= 0.5 and
/// std::domain_error("degenerate rotation") on a vanishing column.
Mat3 retract_rotation(const Mat3& M);

}  // namespace rccm
