#include <doctest.h>

#include <cmath>
#include <complex>

#include "rccm/certificate.hpp"
#include "rccm/training.hpp"
#include "test_util.hpp"

using namespace rccm;
using rccm::testing::random_matrix;
using rccm::testing::random_state;
using rccm::testing::random_vector;
using rccm::testing::rel_err;
using rccm::testing::scalar_hand_certificate;

namespace {

NeuralCertificate small_cert(const ControlAffineModel& model, Rng& rng) {
  NeuralCertificate c = NeuralCertificate::initialize(model, {{16, 16}, 6, 1.5, 0.8}, rng);
  for (Mlp* net : {&c.theta_w, &c.theta_k1, &c.theta_k2})
    for (DenseLayer& L : net->layers()) L.bias = random_vector(rng, L.bias.size(), 0.2);
  return c;
}

TrainSample random_sample(Rng& rng) {
  SamplingBox box;
  box.position = 3.0;
  box.velocity = 3.0;
  return sample_training_set(1, box, rng).front();
}

TrainSample scalar_sample(double x, double x_star, double u_star, double w) {
  return {VectorXd::Constant(1, x), VectorXd::Constant(1, x_star), VectorXd::Constant(1, u_star),
          VectorXd::Constant(1, w)};
}

bool is_symmetric(const MatrixXd& A) { return (A - A.transpose()).cwiseAbs().maxCoeff() == 0.0; }

// Real roots of the characteristic polynomial of a symmetric 3x3 matrix by the
// trigonometric formula, ascending.
Eigen::Vector3d cubic_eigenvalues(const Eigen::Matrix3d& A) {
  const double c2 = -A.trace();
  const double c1 = A(0, 0) * A(1, 1) + A(0, 0) * A(2, 2) + A(1, 1) * A(2, 2) - A(0, 1) * A(1, 0) -
                    A(0, 2) * A(2, 0) - A(1, 2) * A(2, 1);
  const double c0 = -A.determinant();
  const double p = c1 - c2 * c2 / 3.0;
  const double q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
  const double r = 2.0 * std::sqrt(-p / 3.0);
  const double arg = std::clamp(3.0 * q / (p * r), -1.0, 1.0);
  const double phi = std::acos(arg) / 3.0;
  Eigen::Vector3d roots;
  for (int k = 0; k < 3; ++k) roots(k) = r * std::cos(phi - 2.0 * M_PI * k / 3.0) - c2 / 3.0;
  std::sort(roots.data(), roots.data() + 3);
  return roots;
}

}  // namespace

TEST_SUITE("certificate") {
  TEST_CASE("scalar system by hand") {
    const ScalarLinearModel model;
    const NeuralCertificate cert = scalar_hand_certificate(model);
    CHECK(std::abs(cert.alpha() - 1.0) < 1e-12);
    CHECK(std::abs(cert.mu() - 1.0) < 1e-12);
    Rng rng(1);
    for (int k = 0; k < 10; ++k) {
      const TrainSample s = scalar_sample(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-2, 2), rng.uniform(-1, 1));
      CHECK(std::abs(eval_dual_metric(cert, s.x)(0, 0) - 1.0) < 1e-15);
      CHECK(std::abs(assemble_A_script(model, cert, s)(0, 0) + 1.0) < 1e-12);
      Eigen::Matrix2d R1_expected;
      R1_expected << -1, 1, 1, -1;
      CHECK((assemble_R1(model, cert, s) - R1_expected).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(assemble_R2(model, cert, s).cwiseAbs().maxCoeff() < 1e-12);
      const Eigen::Vector2d eig = symmetric_eigenvalues(assemble_R1(model, cert, s));
      CHECK(std::abs(eig(0) + 2.0) < 1e-12);
      CHECK(std::abs(eig(1)) < 1e-12);
      const SampleLoss L = sample_loss(model, cert, s, sample_directions(rng, 1, 1, 0, 8), LossMode::rccm);
      CHECK(L.total == 0.0);
    }
    std::vector<TrainSample> samples;
    for (int k = 0; k < 20; ++k) samples.push_back(scalar_sample(rng.uniform(-3, 3), 0.0, 0.0, rng.uniform(-1, 1)));
    const VerifyReport rep = verify(model, cert, samples);
    CHECK(rep.violations_R1 == 0);
    CHECK(rep.violations_R2 == 0);
    CHECK(rep.violations_C1 == 0);
    CHECK(rep.n_check == 20);
  }

  TEST_CASE("lpd penalty") {
    Rng rng(2);
    const LpdDirections d = sample_directions(rng, 3, 0, 0, 16);
    for (Eigen::Index k = 0; k < d.ccm.cols(); ++k) CHECK(std::abs(d.ccm.col(k).norm() - 1.0) < 1e-14);
    CHECK(lpd_penalty(MatrixXd::Identity(3, 3), d.ccm) == 0.0);
    CHECK(std::abs(lpd_penalty(-MatrixXd::Identity(3, 3), d.ccm) - 1.0) < 1e-14);
    CHECK(lpd_penalty(Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix(), MatrixXd::Identity(2, 2)) == 0.5);
    for (int k = 0; k < 50; ++k) {
      const MatrixXd G = random_matrix(rng, 3, 3);
      CHECK(lpd_penalty(G * G.transpose(), d.ccm) == 0.0);
    }
    MatrixXd indef = MatrixXd::Identity(3, 3);
    indef(2, 2) = -1;
    CHECK(lpd_penalty(indef, MatrixXd(Eigen::Vector3d::UnitZ())) > 0.0);
  }

  TEST_CASE("shapes and symmetry") {
    const QuadrotorModel model;
    Rng rng(3);
    const NeuralCertificate cert = small_cert(model, rng);
    for (int k = 0; k < 10; ++k) {
      const TrainSample s = random_sample(rng);
      const MatrixXd R1 = assemble_R1(model, cert, s), R2 = assemble_R2(model, cert, s);
      const CConditions C = assemble_C_conditions(model, cert, s);
      CHECK(R1.rows() == 15);
      CHECK(R1.cols() == 15);
      CHECK(R2.rows() == 15);
      CHECK(C.C1.rows() == 5);
      CHECK(C.C2.size() == 4);
      CHECK(C.C3.size() == 6);
      CHECK(is_symmetric(R1));
      CHECK(is_symmetric(R2));
      CHECK(is_symmetric(C.C1));
      for (const MatrixXd& c : C.C2) CHECK(is_symmetric(c));
      for (const MatrixXd& c : C.C3) CHECK(is_symmetric(c));
      CHECK(R2.topRightCorner(9, 6).isZero(0.0));
      CHECK(R2.bottomLeftCorner(6, 9).isZero(0.0));
      CHECK((R2.bottomRightCorner(6, 6) - (cert.alpha() - cert.mu()) * MatrixXd::Identity(6, 6)).norm() < 1e-14);
    }
  }

  TEST_CASE("closed-loop matrix against a direct assembly") {
    const QuadrotorModel model;
    Rng rng(4);
    const NeuralCertificate cert = small_cert(model, rng);
    for (int k = 0; k < 20; ++k) {
      const TrainSample s = random_sample(rng);
      const ClosedLoopFields cl = closed_loop_fields(model, cert, s);
      const VectorXd f = model.vector_field(s.x, cl.u, s.w);
      CHECK((cl.x_dot - f).norm() < 1e-12);
      CHECK((cl.K - controller_jacobian(cert, model, s.x, s.x_star)).norm() < 1e-12);
      const MatrixXd S = model.tangent_basis(s.x), P = model.projection(s.x);
      const MatrixXd Pdot = model.projection_directional(s.x, cl.x_dot);
      const MatrixXd direct = (Pdot.transpose() + P.transpose() * cl.A + model.e_factor(s.x) * cl.K) * S;
      CHECK(rel_err(assemble_A_script(model, cert, s), direct) < 1e-10);

      // Pdot against differences of P_S along the flow.
      const double h = 1e-6;
      const MatrixXd fd = (model.projection(VectorXd(s.x + h * cl.x_dot)) -
                           model.projection(VectorXd(s.x - h * cl.x_dot))) / (2 * h);
      CHECK(rel_err(Pdot, fd) < 1e-5);
    }
  }

  TEST_CASE("metric rates along the flow") {
    const QuadrotorModel model;
    Rng rng(5);
    const NeuralCertificate cert = small_cert(model, rng);
    Rng drng(6);
    const LpdDirections dirs = sample_directions(drng, 9, 6, 5, 8);
    for (int k = 0; k < 20; ++k) {
      const TrainSample s = random_sample(rng);
      const CertificateResiduals r = evaluate_residuals(model, cert, s, dirs);
      const ClosedLoopFields cl = closed_loop_fields(model, cert, s);
      CHECK(rel_err(r.Wdot, eval_dual_metric_directional(cert, s.x, cl.x_dot)) < 1e-10);
      const double h = 1e-6;
      const MatrixXd fdM = (eval_metric(cert, VectorXd(s.x + h * cl.x_dot)) -
                            eval_metric(cert, VectorXd(s.x - h * cl.x_dot))) / (2 * h);
      CHECK(rel_err(r.Mdot, fdM) < 1e-6);
      CHECK((r.M * r.W - MatrixXd::Identity(9, 9)).norm() < 1e-10);
      CHECK((r.CCM - (r.Mdot + r.M * r.A_script + r.A_script.transpose() * r.M + 2 * cert.hyper.lambda * r.M)).norm() <
            1e-9 * std::max(1.0, r.CCM.norm()));
    }
  }

  TEST_CASE("velocity disturbance fields leave the projection untouched") {
    const QuadrotorModel model;
    Rng rng(7);
    for (int k = 0; k < 10; ++k) {
      const TrainSample s = random_sample(rng);
      const SampleGeometry g = prepare_sample(model, s);
      const MatrixXd P = model.projection(s.x);
      const std::vector<MatrixXd> Jw = model.disturbance_jacobians(s.x);
      for (int j = 0; j < 3; ++j) {
        CHECK(model.projection_directional(s.x, model.disturbance_matrix(s.x).col(j)).isZero(0.0));
        CHECK(rel_err(g.S_bw[j], P.transpose() * Jw[j] * g.S) < 1e-14);
      }
    }
  }

  TEST_CASE("C1 with a constant metric") {
    // Level attitude and zero velocity: the drift carries only gravity and P_S
    // does not move along it.
    const QuadrotorModel model;
    const NeuralCertificate cert = NeuralCertificate::zero(model, {{8}, 2, 1.0, 1.0});
    Rng rng(8);
    TrainSample s = random_sample(rng);
    LieState x = LieState::unflatten(s.x);
    x.v.setZero();
    x.R.setIdentity();
    s.x = x.flatten();
    CHECK(model.projection_directional(s.x, model.drift(s.x)).isZero(0.0));
    const MatrixXd S = model.tangent_basis(s.x), P = model.projection(s.x);
    const MatrixXd Sf = P.transpose() * model.drift_jacobian(s.x) * S;
    const MatrixXd W = 0.1 * MatrixXd::Identity(9, 9);
    const MatrixXd Ep = model.e_perp(s.x);
    const MatrixXd expected = Ep.transpose() * (Sf * W + W * Sf.transpose() + 2 * cert.hyper.lambda * W) * Ep;
    const CConditions C = assemble_C_conditions(model, cert, s);
    CHECK((C.C1 - expected).norm() < 1e-12);
    // Without the drift coupling only the rate term remains, which is positive.
    const MatrixXd rate_only = Ep.transpose() * (2 * cert.hyper.lambda * W) * Ep;
    CHECK(symmetric_eigenvalues(rate_only).minCoeff() > 0.0);
  }

  TEST_CASE("loss terms at simple certificates") {
    const QuadrotorModel model;
    Rng rng(9);
    const LpdDirections dirs = sample_directions(rng, 9, 6, 5, 16);
    NeuralCertificate z = NeuralCertificate::zero(model, {{8}, 2, 0.5, 0.4});
    const TrainSample s = random_sample(rng);
    const SampleLoss L = sample_loss(model, z, s, dirs, LossMode::rccm);
    CHECK(L.terms.lpd_bound == 0.0);
    CHECK(L.terms.relu_alpha == 0.0);
    CHECK(L.total == doctest::Approx(L.terms.total()));
    z.theta_alpha = inverse_softplus(1.2);
    const SampleLoss L2 = sample_loss(model, z, s, dirs, LossMode::rccm);
    CHECK(L2.terms.relu_alpha == doctest::Approx(0.5));
    const SampleLoss Lc = sample_loss(model, z, s, dirs, LossMode::ccm);
    CHECK(Lc.terms.lpd_R2 == 0.0);
    CHECK(Lc.terms.frob_C3 == 0.0);
    CHECK(Lc.terms.relu_alpha == 0.0);
  }

  TEST_CASE("untrained certificate fails verification") {
    const QuadrotorModel model;
    const NeuralCertificate z = NeuralCertificate::zero(model, {{8}, 2, 2.0, 1.0});
    Rng rng(10);
    std::vector<TrainSample> samples;
    for (int k = 0; k < 20; ++k) samples.push_back(random_sample(rng));
    const VerifyReport rep = verify(model, z, samples);
    CHECK(rep.violations_R1 + rep.violations_R2 + rep.violations_C1 > 0);
    CHECK(rep.alpha == doctest::Approx(2.0));
    CHECK(rep.mu == doctest::Approx(1.0));
    CHECK(rep.worst_fraction() > 0.0);
  }

  TEST_CASE("symmetric eigenvalues against the characteristic polynomial") {
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
      const MatrixXd G = random_matrix(rng, 3, 3);
      const Eigen::Matrix3d A = 0.5 * (G + G.transpose());
      const VectorXd e = symmetric_eigenvalues(A);
      CHECK((e - VectorXd(cubic_eigenvalues(A))).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("tangent dynamics of two nearby closed-loop trajectories") {
    const QuadrotorModel model;
    Rng rng(12);
    const NeuralCertificate cert = small_cert(model, rng);
    const double h = 1e-5, tau = 1e-5;
    for (int k = 0; k < 10; ++k) {
      const TrainSample s = random_sample(rng);
      const CertificateResiduals r = evaluate_residuals(model, cert, s, sample_directions(rng, 9, 6, 5, 4));
      const VectorXd eta = random_vector(rng, 9);
      const LieState a = LieState::unflatten(s.x);
      LieState b = a;
      b.p += h * eta.segment<3>(0);
      b.v += h * eta.segment<3>(3);
      b.R = a.R * rotation_exp(h * Vec3(eta.tail<3>()));
      auto field = [&](const VectorXd& x) {
        return VectorXd(model.vector_field(x, eval_controller(cert, model, x, s.x_star, s.u_star), s.w));
      };
      auto heun = [&](const VectorXd& x, double t) {
        const VectorXd k1 = field(x);
        return VectorXd(x + 0.5 * t * (k1 + field(VectorXd(x + t * k1))));
      };
      // Tangent coordinates of the gap and the metric length after flowing for t.
      auto gap = [&](double t) {
        const VectorXd xa = heun(a.flatten(), t), xb = heun(b.flatten(), t);
        const VectorXd g = model.projection(xa).transpose() * (xb - xa) / h;
        return std::pair{g, g.dot(eval_metric(cert, xa) * g)};
      };
      const auto [g_up, len_up] = gap(tau);
      const auto [g_dn, len_dn] = gap(-tau);
      CHECK(rel_err((g_up - g_dn) / (2 * tau), r.A_script * eta) < 1e-4);
      const double rate = eta.dot((r.CCM - 2.0 * cert.hyper.lambda * r.M) * eta);
      INFO("rate " << rate << " length " << len_up);
      CHECK(std::abs((len_up - len_dn) / (2 * tau) - rate) < 1e-4 * std::max({1.0, std::abs(rate), len_up}));
    }
  }
}
