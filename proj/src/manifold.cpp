#include "rccm/manifold.hpp"

#include <cmath>
#include <stdexcept>

namespace rccm {

Vec15 LieState::flatten() const {
  Vec15 x;
  x.segment<3>(0) = p;
  x.segment<3>(3) = v;
  x.segment<9>(6) = Eigen::Map<const Vec9>(R.data());  // Eigen storage is column-major
  return x;
}

LieState LieState::unflatten(const Eigen::Ref<const VectorXd>& x) {
  if (x.size() != kAmbientDim) throw std::invalid_argument("LieState expects 15 ambient coordinates");
  LieState s;
  s.p = x.segment<3>(0);
  s.v = x.segment<3>(3);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) s.R(i, j) = x(6 + i + 3 * j);
  return s;
}

bool LieState::on_manifold(double tol) const {
  return (R.transpose() * R - Mat3::Identity()).norm() <= tol && std::abs(R.determinant() - 1.0) <= tol &&
         p.allFinite() && v.allFinite();
}

Mat3 hat(const Vec3& a) {
  Mat3 S;
  S << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
      -a.y(), a.x(), 0.0;
  return S;
}

Vec3 vee(const Mat3& S) {
  if ((S + S.transpose()).norm() > 1e-8) throw std::invalid_argument("not skew-symmetric");
  return {S(2, 1), S(0, 2), S(1, 0)};
}

VectorXd vec_cm(const MatrixXd& M) {
  return Eigen::Map<const VectorXd>(M.data(), M.size());
}

MatrixXd unvec_cm(const Eigen::Ref<const VectorXd>& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw std::invalid_argument("unvec_cm: size mismatch");
  MatrixXd M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) M.col(j) = v.segment(j * rows, rows);
  return M;
}

Mat9x3 so3_basis_evec() { return rotation_tangent_basis(Mat3::Identity()); }

Mat9x3 rotation_tangent_basis(const Mat3& R) {
  Mat9x3 Sr;
  for (int i = 0; i < 3; ++i) {
    const Mat3 col = R * hat(Vec3::Unit(i));
    Sr.col(i) = Eigen::Map<const Vec9>(col.data());
  }
  return Sr;
}

Mat15x9 tangent_basis(const LieState& x) {
  Mat15x9 S = Mat15x9::Zero();
  S.topLeftCorner<6, 6>().setIdentity();
  S.bottomRightCorner<9, 3>() = rotation_tangent_basis(x.R);
  return S;
}

Mat15x9 projection(const LieState& x) {
  Mat15x9 P = tangent_basis(x);
  P.bottomRightCorner<9, 3>() *= 0.5;
  return P;
}

Vec9 error_function(const LieState& x, const LieState& x_star) {
  Vec9 e;
  e.segment<3>(0) = x.p - x_star.p;
  e.segment<3>(3) = x.v - x_star.v;
  const Mat3 A = x_star.R.transpose() * x.R;
  const Mat3 skew = 0.5 * (A - A.transpose());
  e.segment<3>(6) = Vec3(skew(2, 1), skew(0, 2), skew(1, 0));
  return e;
}

Mat3 euler_zyx(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

Mat3 rotation_exp(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = hat(phi);
  if (theta < 1e-8) return Mat3::Identity() + K + 0.5 * K * K;
  return Mat3::Identity() + std::sin(theta) / theta * K + (1.0 - std::cos(theta)) / (theta * theta) * K * K;
}

Mat3 sample_rotation(Rng& rng, const EulerBox& box) {
  const double roll = rng.uniform(-box.roll, box.roll);
  const double pitch = rng.uniform(-box.pitch, box.pitch);
  const double yaw = rng.uniform(-box.yaw, box.yaw);
  return euler_zyx(roll, pitch, yaw);
}

Mat3 retract_rotation(const Mat3& M) {
  if (!M.allFinite() || (M.transpose() * M - Mat3::Identity()).norm() >= 0.5)
    throw std::invalid_argument("retract_rotation: input too far from SO(3)");
  Mat3 Q = M;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < j; ++k) Q.col(j) -= Q.col(k).dot(Q.col(j)) * Q.col(k);
    const double n = Q.col(j).norm();
    if (n < 1e-6) throw std::domain_error("degenerate rotation");
    Q.col(j) /= n;
  }
  if (Q.determinant() < 0.0) Q.col(2) *= -1.0;
  return Q;
}

}  // namespace rccm
