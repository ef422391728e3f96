#include "rccm/system.hpp"

#include <algorithm>
#include <stdexcept>

namespace rccm {

MatrixXd ControlAffineModel::ambient_A(const VectorXd& x, const VectorXd& u, const VectorXd& w) const {
  MatrixXd A = drift_jacobian(x);
  const auto Jb = input_jacobians(x);
  const auto Jw = disturbance_jacobians(x);
  for (int i = 0; i < input_dim(); ++i) A += u(i) * Jb[i];
  for (int j = 0; j < disturbance_dim(); ++j) A += w(j) * Jw[j];
  return A;
}

VectorXd ControlAffineModel::vector_field(const VectorXd& x, const VectorXd& u, const VectorXd& w) const {
  return drift(x) + input_matrix(x) * u + disturbance_matrix(x) * w;
}

namespace {

constexpr int kRot = 6;  // offset of vec(R) in the ambient state

LieState as_state(const VectorXd& x) { return LieState::unflatten(x); }

// Jacobian of vec(R) -> vec(R G), i.e. kron(G^T, I3).
Eigen::Matrix<double, 9, 9> right_mult_jacobian(const Mat3& G) {
  Eigen::Matrix<double, 9, 9> J = Eigen::Matrix<double, 9, 9>::Zero();
  for (int j = 0; j < 3; ++j)
    for (int l = 0; l < 3; ++l)
      if (G(l, j) != 0.0) J.block<3, 3>(3 * j, 3 * l) = G(l, j) * Mat3::Identity();
  return J;
}

}  // namespace

Vec15 QuadrotorModel::drift(const LieState& x) const {
  Vec15 f = Vec15::Zero();
  f.segment<3>(0) = x.v;
  f.segment<3>(3) = params_.gravity;
  return f;
}

Eigen::Matrix<double, 15, 4> QuadrotorModel::input_matrix(const LieState& x) const {
  Eigen::Matrix<double, 15, 4> B = Eigen::Matrix<double, 15, 4>::Zero();
  B.block<3, 1>(3, 0) = x.R.col(2);
  B.block<9, 3>(kRot, 1) = rotation_tangent_basis(x.R);
  return B;
}

Eigen::Matrix<double, 15, 6> QuadrotorModel::disturbance_matrix(const LieState& x) const {
  Eigen::Matrix<double, 15, 6> Bw = Eigen::Matrix<double, 15, 6>::Zero();
  Bw.block<3, 3>(3, 0).setIdentity();
  Bw.block<9, 3>(kRot, 3) = rotation_tangent_basis(x.R);
  return Bw;
}

Eigen::Matrix<double, 9, 4> QuadrotorModel::e_factor(const LieState& x) const {
  Eigen::Matrix<double, 9, 4> E = Eigen::Matrix<double, 9, 4>::Zero();
  E.block<3, 1>(3, 0) = x.R.col(2);
  E.block<3, 3>(6, 1).setIdentity();
  return E;
}

Eigen::Matrix<double, 9, 6> QuadrotorModel::e_w_factor(const LieState&) const {
  Eigen::Matrix<double, 9, 6> Ew = Eigen::Matrix<double, 9, 6>::Zero();
  Ew.bottomRows<6>().setIdentity();
  return Ew;
}

Eigen::Matrix<double, 9, 5> QuadrotorModel::e_perp(const LieState& x) const {
  Eigen::Matrix<double, 9, 5> Ep = Eigen::Matrix<double, 9, 5>::Zero();
  Ep.block<3, 3>(0, 0).setIdentity();
  Ep.block<3, 1>(3, 3) = x.R.col(0);
  Ep.block<3, 1>(3, 4) = x.R.col(1);
  return Ep;
}

Eigen::Matrix<double, 7, 1> QuadrotorModel::output(const LieState& x, const ControlInput& u) const {
  Eigen::Matrix<double, 7, 1> z;
  z.head<3>() = params_.Q * x.p;
  z.tail<4>() = params_.R_w_diag.cwiseProduct(u.to_vector());
  return z;
}

Vec15 QuadrotorModel::vector_field(const LieState& x, const ControlInput& u, const Disturbance& w) const {
  return drift(x) + input_matrix(x) * u.to_vector() + disturbance_matrix(x) * w.to_vector();
}

double QuadrotorModel::transversality_residual(const LieState& x) const {
  const Mat3& R = x.R;
  double worst = (R.transpose() * R - Mat3::Identity()).norm();
  auto check = [&](const Eigen::Ref<const VectorXd>& field) {
    const Mat3 dR = unvec_cm(field.segment(kRot, 9), 3, 3);
    worst = std::max(worst, (dR.transpose() * R + R.transpose() * dR).norm());
  };
  check(drift(x));
  const auto B = input_matrix(x);
  for (int i = 0; i < 4; ++i) check(B.col(i));
  const auto Bw = disturbance_matrix(x);
  for (int j = 0; j < 6; ++j) check(Bw.col(j));
  return worst;
}

VectorXd QuadrotorModel::drift(const VectorXd& x) const { return drift(as_state(x)); }
MatrixXd QuadrotorModel::input_matrix(const VectorXd& x) const { return input_matrix(as_state(x)); }
MatrixXd QuadrotorModel::disturbance_matrix(const VectorXd& x) const { return disturbance_matrix(as_state(x)); }

MatrixXd QuadrotorModel::drift_jacobian(const VectorXd&) const {
  MatrixXd J = MatrixXd::Zero(15, 15);
  J.block<3, 3>(0, 3).setIdentity();
  return J;
}

std::vector<MatrixXd> QuadrotorModel::input_jacobians(const VectorXd&) const {
  std::vector<MatrixXd> J(4, MatrixXd::Zero(15, 15));
  // b_1 = [0; R e3; 0]: R e3 occupies vec(R)[6..8].
  J[0].block<3, 3>(3, kRot + 6).setIdentity();
  for (int k = 0; k < 3; ++k) J[k + 1].block<9, 9>(kRot, kRot) = right_mult_jacobian(hat(Vec3::Unit(k)));
  return J;
}

std::vector<MatrixXd> QuadrotorModel::disturbance_jacobians(const VectorXd&) const {
  std::vector<MatrixXd> J(6, MatrixXd::Zero(15, 15));
  for (int k = 0; k < 3; ++k) J[k + 3].block<9, 9>(kRot, kRot) = right_mult_jacobian(hat(Vec3::Unit(k)));
  return J;
}

VectorXd QuadrotorModel::output(const VectorXd& x, const VectorXd& u) const {
  return output(as_state(x), ControlInput::from_vector(u));
}

std::pair<MatrixXd, MatrixXd> QuadrotorModel::output_jacobians(const VectorXd&, const VectorXd&) const {
  MatrixXd C = MatrixXd::Zero(7, 15);
  MatrixXd D = MatrixXd::Zero(7, 4);
  C.block<3, 3>(0, 0) = params_.Q;
  D.block<4, 4>(3, 0) = params_.R_w_diag.asDiagonal();
  return {C, D};
}

MatrixXd QuadrotorModel::tangent_basis(const VectorXd& x) const { return rccm::tangent_basis(as_state(x)); }
MatrixXd QuadrotorModel::projection(const VectorXd& x) const { return rccm::projection(as_state(x)); }

MatrixXd QuadrotorModel::projection_directional(const VectorXd& x, const VectorXd& d) const {
  if (x.size() != 15 || d.size() != 15) throw std::invalid_argument("projection_directional: expected 15-vectors");
  MatrixXd dP = MatrixXd::Zero(15, 9);
  const Mat3 dR = unvec_cm(d.segment(kRot, 9), 3, 3);
  dP.block<9, 3>(kRot, 6) = 0.5 * rotation_tangent_basis(dR);
  return dP;
}

MatrixXd QuadrotorModel::e_factor(const VectorXd& x) const { return e_factor(as_state(x)); }
MatrixXd QuadrotorModel::e_w_factor(const VectorXd& x) const { return e_w_factor(as_state(x)); }
MatrixXd QuadrotorModel::e_perp(const VectorXd& x) const { return e_perp(as_state(x)); }

VectorXd QuadrotorModel::error(const VectorXd& x, const VectorXd& x_star) const {
  return error_function(as_state(x), as_state(x_star));
}

MatrixXd QuadrotorModel::error_jacobian(const VectorXd&, const VectorXd& x_star) const {
  const Mat3 Rs = unvec_cm(x_star.segment(kRot, 9), 3, 3);
  MatrixXd J = MatrixXd::Zero(9, 15);
  J.block<6, 6>(0, 0).setIdentity();
  for (int l = 0; l < 3; ++l) {
    for (int i = 0; i < 3; ++i) {
      Mat3 E = Mat3::Zero();
      E(i, l) = 1.0;
      const Mat3 A = 0.5 * (Rs.transpose() * E - E.transpose() * Rs);
      J.block<3, 1>(6, kRot + i + 3 * l) = Vec3(A(2, 1), A(0, 2), A(1, 0));
    }
  }
  return J;
}

}  // namespace rccm
