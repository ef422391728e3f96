#include "rccm/planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rccm {

FlatOutput spiral_reference(double t) {
  if (t < 0.0) throw std::invalid_argument("spiral_reference: t must be nonnegative");
  const double w = 1.5, r = 3.0;
  const double c = std::cos(w * t), s = std::sin(w * t);
  FlatOutput fo;
  fo.p = {0.5 * t, r * c, r * s};
  fo.v = {0.5, -r * w * s, r * w * c};
  fo.a = {0.0, -r * w * w * c, -r * w * w * s};
  fo.j = {0.0, r * w * w * w * s, -r * w * w * w * c};
  return fo;
}

FlatOutput hover_reference(const Vec3& p) {
  FlatOutput fo;
  fo.p = p;
  return fo;
}

Mat3 rotation_from_thrust_axis(const Vec3& z_B, double psi) {
  const Vec3 x_C(std::cos(psi), std::sin(psi), 0.0);
  const Vec3 n = z_B.cross(x_C);
  const double nn = n.norm();
  if (nn < 1e-6) throw std::domain_error("thrust axis parallel to heading");
  const Vec3 y_B = n / nn;
  const Vec3 x_B = y_B.cross(z_B);
  Mat3 R;
  R << x_B, y_B, z_B;
  return R;
}

NominalPoint flat_to_nominal(const FlatOutput& fo, const Vec3& f_d_hat, const QuadrotorParams& params,
                             const Vec3& f_d_hat_dot) {
  const double m = params.mass;
  const Vec3 f = m * (fo.a - params.gravity) - f_d_hat;
  const double fn = f.norm();
  if (!(fn > 0.1)) throw std::domain_error("thrust singularity");
  const Vec3 f_dot = m * fo.j - f_d_hat_dot;

  NominalPoint np;
  np.psi = fo.psi;
  const Vec3 z_B = f / fn;
  const Mat3 R = rotation_from_thrust_axis(z_B, fo.psi);
  const Vec3 x_B = R.col(0), y_B = R.col(1);
  const Vec3 x_C(std::cos(fo.psi), std::sin(fo.psi), 0.0);
  const Vec3 y_C(-std::sin(fo.psi), std::cos(fo.psi), 0.0);

  const double wx = -y_B.dot(f_dot) / fn;
  const double wy = x_B.dot(f_dot) / fn;
  const double den = std::max(x_B.dot(x_C), 1e-6);
  const double wz = (wx * z_B.dot(x_C) + fo.psi_dot * y_B.dot(y_C)) / den;

  np.x_star.p = fo.p;
  np.x_star.v = fo.v;
  np.x_star.R = R;
  np.u_star.thrust_over_m = fn / m;
  np.u_star.omega_B = {wx, wy, wz};
  np.w_star.f_d_over_m = f_d_hat / m;
  np.w_star.omega_d.setZero();
  return np;
}

std::vector<double> uniform_grid(double t0, double t1, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(t1 > t0)) throw std::invalid_argument("t1 must exceed t0");
  const auto steps = static_cast<std::size_t>(std::floor((t1 - t0) / dt + 1e-9));
  std::vector<double> g(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) g[k] = t0 + static_cast<double>(k) * dt;
  return g;
}

namespace {

double grid_step(const std::vector<double>& t) {
  if (t.size() < 2) return 0.0;
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw std::invalid_argument("time grid must be increasing");
  for (std::size_t k = 1; k < t.size(); ++k)
    if (std::abs((t[k] - t[k - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(t[k])))
      throw std::invalid_argument("time grid must be uniform");
  return dt;
}

}  // namespace

std::vector<NominalPoint> nominal_trajectory(const FlatGenerator& gen, const std::vector<double>& t_grid,
                                             const std::vector<Vec3>& f_d_hat, const QuadrotorParams& params,
                                             const PlannerOptions& options) {
  const std::size_t N = t_grid.size();
  if (!f_d_hat.empty() && f_d_hat.size() != N)
    throw std::invalid_argument("f_d_hat series must match the time grid");
  const double dt = grid_step(t_grid);

  std::vector<Vec3> fd_dot(N, Vec3::Zero());
  if (!f_d_hat.empty() && N >= 2) {
    for (std::size_t k = 0; k < N; ++k) {
      if (N == 2)
        fd_dot[k] = (f_d_hat[1] - f_d_hat[0]) / dt;
      else if (k == 0)
        fd_dot[k] = (-3.0 * f_d_hat[0] + 4.0 * f_d_hat[1] - f_d_hat[2]) / (2.0 * dt);
      else if (k == N - 1)
        fd_dot[k] = (3.0 * f_d_hat[k] - 4.0 * f_d_hat[k - 1] + f_d_hat[k - 2]) / (2.0 * dt);
      else
        fd_dot[k] = (f_d_hat[k + 1] - f_d_hat[k - 1]) / (2.0 * dt);
    }
    if (options.derivative_smoothing > 0.0) {
      const double a = dt / (options.derivative_smoothing + dt);
      Vec3 y = fd_dot[0];
      for (std::size_t k = 0; k < N; ++k) {
        y += a * (fd_dot[k] - y);
        fd_dot[k] = y;
      }
    }
  }

  std::vector<NominalPoint> out;
  out.reserve(N);
  for (std::size_t k = 0; k < N; ++k) {
    const Vec3 fd = f_d_hat.empty() ? Vec3::Zero() : f_d_hat[k];
    NominalPoint np = flat_to_nominal(gen(t_grid[k]), fd, params, fd_dot[k]);
    np.t = t_grid[k];
    out.push_back(np);
  }
  return out;
}

std::vector<double> consistency_residuals(const QuadrotorModel& model, const std::vector<NominalPoint>& traj) {
  const std::size_t N = traj.size();
  if (N < 5) throw std::invalid_argument("consistency check needs at least 5 grid points");
  std::vector<double> t(N);
  std::vector<Vec15> x(N);
  for (std::size_t k = 0; k < N; ++k) {
    t[k] = traj[k].t;
    x[k] = traj[k].x_star.flatten();
  }
  const double h = grid_step(t);

  std::vector<double> res(N);
  for (std::size_t k = 0; k < N; ++k) {
    Vec15 d;
    if (k >= 2 && k + 2 < N) {
      d = (x[k - 2] - 8.0 * x[k - 1] + 8.0 * x[k + 1] - x[k + 2]) / (12.0 * h);
    } else if (k < 2) {
      d = (-25.0 * x[k] + 48.0 * x[k + 1] - 36.0 * x[k + 2] + 16.0 * x[k + 3] - 3.0 * x[k + 4]) / (12.0 * h);
    } else {
      d = (25.0 * x[k] - 48.0 * x[k - 1] + 36.0 * x[k - 2] - 16.0 * x[k - 3] + 3.0 * x[k - 4]) / (12.0 * h);
    }
    const Vec15 f = model.vector_field(traj[k].x_star, traj[k].u_star, traj[k].w_star);
    res[k] = (d - f).norm();
  }
  return res;
}

}  // namespace rccm
