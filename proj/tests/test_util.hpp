#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "rccm/manifold.hpp"
#include "rccm/neural_certificate.hpp"
#include "rccm/rng.hpp"

namespace rccm::testing {

inline LieState random_state(Rng& rng, double box = 3.0) {
  LieState s;
  for (int i = 0; i < 3; ++i) {
    s.p(i) = rng.uniform(-box, box);
    s.v(i) = rng.uniform(-box, box);
  }
  s.R = sample_rotation(rng);
  return s;
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-scale, scale);
  return v;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

/// Central difference of a matrix-valued function of one scalar.
inline Eigen::MatrixXd central_diff(const std::function<Eigen::MatrixXd(double)>& f, double h) {
  return (f(h) - f(-h)) / (2.0 * h);
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

/// Constant certificate for the scalar model: W = M = 1, k = 0, alpha = mu = 1.
inline NeuralCertificate scalar_hand_certificate(const ControlAffineModel& model) {
  NeuralCertificate c = NeuralCertificate::zero(model, {{4}, 2, 1.0, 1.0});
  c.hyper.alpha_floor = 1.0;
  c.theta_w.layers().back().bias(0) = std::sqrt(1.0 - 1.0 / c.hyper.m_upper);
  return c;
}

}  // namespace rccm::testing
