#pragma once

#include <functional>
#include <vector>

#include "rccm/system.hpp"

namespace rccm {

/// Flat outputs at one instant: position with three derivatives, yaw and yaw rate.
struct FlatOutput {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Vec3 j = Vec3::Zero();
  double psi = 0.0;
  double psi_dot = 0.0;
};

using FlatGenerator = std::function<FlatOutput(double)>;

/// p*(t) = [0.5 t, 3 cos 1.5t, 3 sin 1.5t], psi* = 0.
FlatOutput spiral_reference(double t);

/// Constant position, zero yaw.
FlatOutput hover_reference(const Vec3& p);

struct NominalPoint {
  double t = 0.0;
  LieState x_star;
  ControlInput u_star;
  Disturbance w_star;
  double psi = 0.0;
};

/// R = [x_B y_B z_B] with y_B = z_B x x_C / |z_B x x_C|, x_B = y_B x z_B and
/// x_C = [cos psi, sin psi, 0]. Throws std::domain_error when z_B is parallel to x_C.
Mat3 rotation_from_thrust_axis(const Vec3& z_B, double psi);

/// Nominal state, input and disturbance from flat outputs and a force
/// disturbance estimate f_d_hat (N) with time derivative f_d_hat_dot.
/// Throws std::domain_error("thrust singularity") if |f*| <= 0.1.
NominalPoint flat_to_nominal(const FlatOutput& fo, const Vec3& f_d_hat, const QuadrotorParams& params,
                             const Vec3& f_d_hat_dot = Vec3::Zero());

struct PlannerOptions {
  /// Time constant of a first-order low-pass on the finite-differenced
  /// estimate derivative; 0 disables it.
  double derivative_smoothing = 0.0;
};

/// Pointwise flat_to_nominal on a uniform grid. `f_d_hat` is empty (zero) or
/// one estimate per grid point; its derivative is taken by centered differences.
std::vector<NominalPoint> nominal_trajectory(const FlatGenerator& gen, const std::vector<double>& t_grid,
                                             const std::vector<Vec3>& f_d_hat, const QuadrotorParams& params,
                                             const PlannerOptions& options = {});

/// Uniform grid t0, t0 + dt, ..., t1 (inclusive up to rounding).
std::vector<double> uniform_grid(double t0, double t1, double dt);

/// |x*' - f(x*) - B(x*) u* - B_w(x*) w*| at every grid point, with x*' from
/// fourth-order finite differences over the grid (one-sided near the ends).
std::vector<double> consistency_residuals(const QuadrotorModel& model, const std::vector<NominalPoint>& traj);

}  // namespace rccm
