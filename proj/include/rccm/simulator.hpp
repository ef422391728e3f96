#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rccm/neural_certificate.hpp"
#include "rccm/planner.hpp"
#include "rccm/system.hpp"

namespace rccm {

enum class SimCase { rccm, ccm, geometric, rccm_ude };

SimCase parse_sim_case(const std::string& s);
std::string to_string(SimCase c);

/// f_d(t) = (0.8 + 0.2 sin(0.2 pi t)) [0.6, 0.7, 0.3] (N),
/// omega_d(t) = (0.5 + 0.5 sin(2 pi t)) [0.1, 0.1, 0.2].
/// Returned mass-normalized for the given mass.
Disturbance disturbance_true(double t, double mass = 1.0);

/// sqrt(max|f_d/m|^2 + max|omega_d|^2) over time, taking each peak separately;
/// 1.0 for unit mass. The joint signal stays just below it.
double disturbance_bound(double mass = 1.0);

struct GeometricGains {
  Mat3 K_p = 0.5 * Mat3::Identity();
  Mat3 K_v = Mat3::Identity();
  Mat3 K_R = 2.4 * Mat3::Identity();
};

/// Throws std::domain_error("free-fall singularity") if |a_des| <= 0.1.
ControlInput geometric_controller(const LieState& x, const NominalPoint& nominal, const GeometricGains& gains = {});

/// Translational disturbance estimator in auxiliary-state form:
/// f_d_hat = xi + lambda_d m v.
struct UdeState {
  Vec3 xi = Vec3::Zero();

  Vec3 f_d_hat(const LieState& x, double lambda_d, double mass) const { return xi + lambda_d * mass * x.v; }
  /// xi such that f_d_hat = 0 at x.
  static UdeState zero_estimate(const LieState& x, double lambda_d, double mass) {
    return {-lambda_d * mass * x.v};
  }
};

/// xi' = -lambda_d (xi + lambda_d m v) - lambda_d (m g + R e3 f_t).
Vec3 ude_rhs(const Vec3& xi, const LieState& x, const ControlInput& u, double lambda_d, const QuadrotorParams& params);

struct PlantWithEstimator {
  LieState x;
  UdeState ude;
};

/// One RK4 step of the plant and the estimator together, with u and w held
/// fixed over the step, then retract_rotation on R.
PlantWithEstimator ude_step(const QuadrotorModel& model, const LieState& x, const UdeState& ude, const ControlInput& u,
                            const Disturbance& w, double dt, double lambda_d);

/// Classical RK4 on the ambient state with constant u and w, then
/// retract_rotation on R.
LieState rk4_step(const QuadrotorModel& model, const LieState& x, const ControlInput& u, const Disturbance& w,
                  double dt);

struct InitialOffset {
  Vec3 dp{0.5, -0.5, 0.3};
  Vec3 dv = Vec3::Zero();
  Vec3 dR{0.2, 0.0, 0.0};  // R(0) = R*(0) exp(hat(dR))
};

struct SimConfig {
  double dt = 0.002;
  double duration = 20.0;
  SimCase sim_case = SimCase::rccm;
  InitialOffset offset;
  bool disturbance = true;
  double lambda_d = 0.5;
  GeometricGains gains;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TraceRecord {
  double t = 0.0;
  LieState x, x_star;
  ControlInput u, u_star;
  Disturbance w, w_star;
  Vec3 f_d_hat = Vec3::Zero();
  Vec3 f_d_true = Vec3::Zero();  // N
  Eigen::Matrix<double, 7, 1> z, z_star;
  double dev = 0.0;
};

struct SimTrace {
  SimCase sim_case = SimCase::rccm;
  std::vector<TraceRecord> records;
};

/// Raised when the control input turns non-finite.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Closed loop on the spiral reference. `cert` is required for the learned
/// cases and ignored for the geometric one. The control law and the nominal
/// are re-evaluated at every RK4 stage; the estimator state is integrated with
/// the plant. The rccm_ude case re-plans the nominal from the current estimate.
SimTrace run_case(const QuadrotorModel& model, const NeuralCertificate* cert, const SimConfig& config,
                  const FlatGenerator& reference = spiral_reference);

struct TubeSummary {
  double max_dev = 0.0;
  double post_transient_max = 0.0;
  double post_transient_mean = 0.0;
  double bound = 0.0;
  double inside_fraction = 0.0;
  double transient = 0.0;
  std::size_t samples = 0;
};

/// Deviation statistics against the tube radius alpha * w_bar; the
/// post-transient window is t > transient.
TubeSummary tube_metrics(const std::vector<double>& t, const std::vector<double>& dev, double alpha, double w_bar,
                         double transient = 5.0);
TubeSummary tube_metrics(const SimTrace& trace, double alpha, double w_bar, double transient = 5.0);

}  // namespace rccm
