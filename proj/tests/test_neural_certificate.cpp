#include <doctest.h>

#include <cmath>

#include "rccm/neural_certificate.hpp"
#include "test_util.hpp"

using namespace rccm;
using rccm::testing::random_state;
using rccm::testing::random_vector;
using rccm::testing::rel_err;

namespace {

NeuralCertificate small_cert(const ControlAffineModel& model, Rng& rng, double bias_scale = 0.2) {
  CertificateShape shape;
  shape.hidden = {16, 16};
  shape.controller_width = 6;
  NeuralCertificate c = NeuralCertificate::initialize(model, shape, rng);
  for (Mlp* net : {&c.theta_w, &c.theta_k1, &c.theta_k2})
    for (DenseLayer& L : net->layers()) L.bias = random_vector(rng, L.bias.size(), bias_scale);
  return c;
}

MatrixXd reshape_rows(const VectorXd& v, Eigen::Index r, Eigen::Index c) {
  MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = v(i * c + j);
  return M;
}

}  // namespace

TEST_SUITE("neural_certificate") {
  TEST_CASE("softplus and its inverse") {
    CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
    for (double y : {1e-6, 0.3, 1.0, 2.0, 50.0}) CHECK(softplus(inverse_softplus(y)) == doctest::Approx(y).epsilon(1e-12));
    CHECK_THROWS_AS(inverse_softplus(0.0), std::domain_error);
  }

  TEST_CASE("default shapes and initial scalars") {
    const QuadrotorModel model;
    Rng rng(1);
    const NeuralCertificate c = NeuralCertificate::initialize(model, CertificateShape{}, rng);
    CHECK(c.theta_w.widths() == std::vector<int>{15, 128, 128, 81});
    CHECK(c.theta_k1.widths() == std::vector<int>{30, 128, 128, 180});
    CHECK(c.theta_k2.widths() == std::vector<int>{30, 128, 128, 405});
    CHECK(c.controller_width() == 45);
    CHECK(c.input_dim() == 4);
    CHECK(c.alpha() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(c.mu() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.hyper.m_lower == 0.1);
    CHECK(c.hyper.m_upper == 10.0);
    CHECK(c.hyper.lambda == 0.5);
    CHECK(c.hyper.alpha_floor == 0.7);
    CHECK_NOTHROW(c.validate(&model));
    const ScalarLinearModel scalar;
    CHECK_THROWS_AS(c.validate(&scalar), std::invalid_argument);
  }

  TEST_CASE("parameter vector round trip") {
    const QuadrotorModel model;
    Rng rng(2);
    NeuralCertificate c = small_cert(model, rng);
    const VectorXd p = c.parameters();
    CHECK(p.size() == c.parameter_count());
    CHECK(p(p.size() - 2) == c.theta_alpha);
    NeuralCertificate d = NeuralCertificate::zero(model, {{16, 16}, 6, 2.0, 1.0});
    d.set_parameters(p);
    CHECK(d.parameters() == p);
  }

  TEST_CASE("dual metric floor and metric inverse") {
    const QuadrotorModel model;
    Rng rng(3);
    const NeuralCertificate z = NeuralCertificate::zero(model, {});
    const VectorXd x0 = random_state(rng).flatten();
    CHECK((eval_dual_metric(z, x0) - 0.1 * MatrixXd::Identity(9, 9)).norm() < 1e-15);
    CHECK((eval_metric(z, x0) - 10.0 * MatrixXd::Identity(9, 9)).norm() < 1e-12);

    const NeuralCertificate c = small_cert(model, rng);
    for (int k = 0; k < 30; ++k) {
      const VectorXd x = random_state(rng).flatten();
      const MatrixXd W = eval_dual_metric(c, x);
      CHECK((W - W.transpose()).norm() == 0.0);
      const MatrixXd shifted = W - 0.1 * MatrixXd::Identity(9, 9) + 1e-12 * MatrixXd::Identity(9, 9);
      CHECK(shifted.llt().info() == Eigen::Success);
      CHECK((eval_metric(c, x) * W - MatrixXd::Identity(9, 9)).norm() < 1e-10);
    }
  }

  TEST_CASE("metric directional derivative") {
    const QuadrotorModel model;
    Rng rng(4);
    const NeuralCertificate c = small_cert(model, rng);
    for (int k = 0; k < 50; ++k) {
      const VectorXd x = random_state(rng).flatten(), d = random_vector(rng, 15);
      const double h = 1e-5;
      const MatrixXd fd = (eval_dual_metric(c, x + h * d) - eval_dual_metric(c, x - h * d)) / (2 * h);
      const MatrixXd dW = eval_dual_metric_directional(c, x, d);
      CHECK(rel_err(dW, fd) < 1e-5);
      // dM = -M dW M against differences of M directly.
      const MatrixXd M = eval_metric(c, x);
      const MatrixXd fdM = (eval_metric(c, x + h * d) - eval_metric(c, x - h * d)) / (2 * h);
      CHECK(rel_err(-M * dW * M, fdM) < 1e-5);
    }
  }

  TEST_CASE("controller vanishes on the diagonal") {
    const QuadrotorModel model;
    Rng rng(5);
    const NeuralCertificate c = small_cert(model, rng);
    for (int k = 0; k < 50; ++k) {
      const LieState x = random_state(rng);
      const ControlInput us{rng.uniform(4, 16), random_vector(rng, 3)};
      const ControlInput u = eval_controller(c, model, x, x, us);
      CHECK(u.thrust_over_m == us.thrust_over_m);
      CHECK(u.omega_B == us.omega_B);
    }
  }

  TEST_CASE("feedback is bounded by the K1 operator norm") {
    const QuadrotorModel model;
    Rng rng(6);
    const NeuralCertificate c = small_cert(model, rng, 1.0);
    const int h = c.controller_width();
    for (int k = 0; k < 50; ++k) {
      const VectorXd x = random_state(rng).flatten(), xs = random_state(rng).flatten();
      VectorXd in(30);
      in << x, xs;
      const MatrixXd K1 = reshape_rows(c.theta_k1.forward(in), 4, h);
      const double bound = K1.jacobiSvd().singularValues()(0) * std::sqrt(static_cast<double>(h));
      CHECK(eval_feedback(c, model, x, xs).norm() <= bound + 1e-12);
    }
  }

  TEST_CASE("controller Jacobian") {
    const QuadrotorModel model;
    Rng rng(7);
    const NeuralCertificate c = small_cert(model, rng);
    for (int k = 0; k < 50; ++k) {
      const VectorXd x = random_state(rng).flatten(), xs = random_state(rng).flatten();
      const MatrixXd K = controller_jacobian(c, model, x, xs);
      CHECK(K.rows() == 4);
      CHECK(K.cols() == 15);
      MatrixXd fd(4, 15);
      for (int j = 0; j < 15; ++j) {
        const double hh = 1e-5;
        VectorXd xp = x, xm = x;
        xp(j) += hh;
        xm(j) -= hh;
        fd.col(j) = (eval_feedback(c, model, xp, xs) - eval_feedback(c, model, xm, xs)) / (2 * hh);
      }
      CHECK(rel_err(K, fd) < 1e-5);
    }
    // On the diagonal the tanh slope is one.
    const VectorXd x = random_state(rng).flatten();
    VectorXd in(30);
    in << x, x;
    const int h = c.controller_width();
    const MatrixXd K1 = reshape_rows(c.theta_k1.forward(in), 4, h);
    const MatrixXd K2 = reshape_rows(c.theta_k2.forward(in), h, 9);
    const MatrixXd expected = K1 * K2 * model.error_jacobian(x, x);
    CHECK((controller_jacobian(c, model, x, x) - expected).norm() < 1e-12);
  }

  TEST_CASE("controller is locally Lipschitz") {
    const QuadrotorModel model;
    Rng rng(8);
    const NeuralCertificate c = small_cert(model, rng);
    const VectorXd x = random_state(rng).flatten(), xs = random_state(rng).flatten();
    const VectorXd d = random_vector(rng, 15);
    const VectorXd u0 = eval_feedback(c, model, x, xs);
    const VectorXd u1 = eval_feedback(c, model, x + 1e-6 * d, xs);
    const MatrixXd K = controller_jacobian(c, model, x, xs);
    CHECK((u1 - u0).norm() <= 1e-6 * (K.norm() * d.norm() + 1.0));
  }
}
