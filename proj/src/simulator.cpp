#include "rccm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rccm {

SimCase parse_sim_case(const std::string& s) {
  if (s == "rccm") return SimCase::rccm;
  if (s == "ccm") return SimCase::ccm;
  if (s == "geometric") return SimCase::geometric;
  if (s == "rccm_ude") return SimCase::rccm_ude;
  throw std::invalid_argument("unknown case '" + s + "' (expected rccm, ccm, geometric or rccm_ude)");
}

std::string to_string(SimCase c) {
  switch (c) {
    case SimCase::rccm: return "rccm";
    case SimCase::ccm: return "ccm";
    case SimCase::geometric: return "geometric";
    case SimCase::rccm_ude: return "rccm_ude";
  }
  return "unknown";
}

Disturbance disturbance_true(double t, double mass) {
  using std::numbers::pi;
  Disturbance w;
  w.f_d_over_m = (0.8 + 0.2 * std::sin(0.2 * pi * t)) * Vec3(0.6, 0.7, 0.3) / mass;
  w.omega_d = (0.5 + 0.5 * std::sin(2.0 * pi * t)) * Vec3(0.1, 0.1, 0.2);
  return w;
}

double disturbance_bound(double mass) {
  const double f_peak = Vec3(0.6, 0.7, 0.3).norm() / mass;
  const double w_peak = Vec3(0.1, 0.1, 0.2).norm();
  return std::sqrt(f_peak * f_peak + w_peak * w_peak);
}

ControlInput geometric_controller(const LieState& x, const NominalPoint& nominal, const GeometricGains& gains) {
  const LieState& xs = nominal.x_star;
  const Vec3 e_p = x.p - xs.p;
  const Vec3 e_v = x.v - xs.v;
  const Vec3 z_star = xs.R.col(2);
  const Vec3 a_des = -gains.K_p * e_p - gains.K_v * e_v + nominal.u_star.thrust_over_m * z_star;
  const double an = a_des.norm();
  if (!(an > 0.1)) throw std::domain_error("free-fall singularity");

  const Mat3 R_des = rotation_from_thrust_axis(a_des / an, nominal.psi);
  const Vec3 e_R = 0.5 * vee(R_des.transpose() * x.R - x.R.transpose() * R_des);
  ControlInput u;
  u.thrust_over_m = a_des.dot(z_star);
  u.omega_B = x.R.transpose() * xs.R * nominal.u_star.omega_B - gains.K_R * e_R;
  return u;
}

Vec3 ude_rhs(const Vec3& xi, const LieState& x, const ControlInput& u, double lambda_d, const QuadrotorParams& params) {
  const double m = params.mass;
  const Vec3 thrust = x.R.col(2) * (u.thrust_over_m * m);
  return -lambda_d * (xi + lambda_d * m * x.v) - lambda_d * (m * params.gravity + thrust);
}

namespace {

LieState retracted(const Eigen::Ref<const VectorXd>& y) {
  LieState s = LieState::unflatten(y);
  s.R = retract_rotation(s.R);
  return s;
}

}  // namespace

LieState rk4_step(const QuadrotorModel& model, const LieState& x, const ControlInput& u, const Disturbance& w,
                  double dt) {
  auto f = [&](const Vec15& y) -> Vec15 { return model.vector_field(LieState::unflatten(y), u, w); };
  const Vec15 y0 = x.flatten();
  const Vec15 k1 = f(y0);
  const Vec15 k2 = f(y0 + 0.5 * dt * k1);
  const Vec15 k3 = f(y0 + 0.5 * dt * k2);
  const Vec15 k4 = f(y0 + dt * k3);
  return retracted(y0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

PlantWithEstimator ude_step(const QuadrotorModel& model, const LieState& x, const UdeState& ude, const ControlInput& u,
                            const Disturbance& w, double dt, double lambda_d) {
  using Vec18 = Eigen::Matrix<double, 18, 1>;
  auto f = [&](const Vec18& y) -> Vec18 {
    const LieState s = LieState::unflatten(y.head<15>());
    Vec18 r;
    r.head<15>() = model.vector_field(s, u, w);
    r.tail<3>() = ude_rhs(y.tail<3>(), s, u, lambda_d, model.params());
    return r;
  };
  Vec18 y0;
  y0 << x.flatten(), ude.xi;
  const Vec18 k1 = f(y0);
  const Vec18 k2 = f(y0 + 0.5 * dt * k1);
  const Vec18 k3 = f(y0 + 0.5 * dt * k2);
  const Vec18 k4 = f(y0 + dt * k3);
  const Vec18 y1 = y0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return {retracted(y1.head<15>()), {y1.tail<3>()}};
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(duration > dt)) throw std::invalid_argument("duration must exceed dt");
  if (!(lambda_d > 0.0)) throw std::invalid_argument("lambda_d must be positive");
  if (!offset.dp.allFinite() || !offset.dv.allFinite() || !offset.dR.allFinite())
    throw std::invalid_argument("initial offset must be finite");
}

SimTrace run_case(const QuadrotorModel& model, const NeuralCertificate* cert, const SimConfig& config,
                  const FlatGenerator& reference) {
  config.validate();
  const SimCase sc = config.sim_case;
  const bool learned = sc != SimCase::geometric;
  const bool ude = sc == SimCase::rccm_ude;
  if (learned && cert == nullptr) throw std::invalid_argument("case '" + to_string(sc) + "' needs weights");
  if (learned) cert->validate(&model);

  const QuadrotorParams& params = model.params();
  const double m = params.mass;
  const double lam = config.lambda_d;

  struct Eval {
    NominalPoint nominal;
    ControlInput u;
    Disturbance w;
    Vec3 f_d_hat;
    Eigen::Matrix<double, 18, 1> rate;
  };

  auto evaluate = [&](double t, const Eigen::Matrix<double, 18, 1>& y) {
    Eval e;
    const LieState x = LieState::unflatten(y.head<15>());
    const Vec3 xi = y.tail<3>();
    e.f_d_hat = ude ? Vec3(xi + lam * m * x.v) : Vec3::Zero();
    e.nominal = flat_to_nominal(reference(t), e.f_d_hat, params);
    e.nominal.t = t;
    if (learned)
      e.u = eval_controller(*cert, model, x, e.nominal.x_star, e.nominal.u_star);
    else
      e.u = geometric_controller(x, e.nominal, config.gains);
    e.w = config.disturbance ? disturbance_true(t, m) : Disturbance{};
    e.rate.head<15>() = model.vector_field(x, e.u, e.w);
    e.rate.tail<3>() = ude ? ude_rhs(xi, x, e.u, lam, params) : Vec3::Zero();
    return e;
  };

  const auto steps = static_cast<std::size_t>(std::llround(config.duration / config.dt));
  const double dt = config.dt;

  const NominalPoint n0 = flat_to_nominal(reference(0.0), Vec3::Zero(), params);
  LieState x0;
  x0.p = n0.x_star.p + config.offset.dp;
  x0.v = n0.x_star.v + config.offset.dv;
  x0.R = n0.x_star.R * rotation_exp(config.offset.dR);
  Eigen::Matrix<double, 18, 1> y;
  y.head<15>() = x0.flatten();
  y.tail<3>() = UdeState::zero_estimate(x0, lam, m).xi;

  SimTrace trace;
  trace.sim_case = sc;
  trace.records.reserve(steps + 1);
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Eval e1 = evaluate(t, y);
    if (!e1.u.to_vector().allFinite()) throw SimulationError("non-finite control input at step " + std::to_string(k), k);

    TraceRecord r;
    r.t = t;
    r.x = LieState::unflatten(y.head<15>());
    r.x_star = e1.nominal.x_star;
    r.u = e1.u;
    r.u_star = e1.nominal.u_star;
    r.w = e1.w;
    r.w_star = e1.nominal.w_star;
    r.f_d_hat = e1.f_d_hat;
    r.f_d_true = e1.w.f_d_over_m * m;
    r.z = model.output(r.x, r.u);
    r.z_star = model.output(r.x_star, r.u_star);
    r.dev = (r.z - r.z_star).norm();
    trace.records.push_back(r);
    if (k == steps) break;

    const Eval e2 = evaluate(t + 0.5 * dt, y + 0.5 * dt * e1.rate);
    const Eval e3 = evaluate(t + 0.5 * dt, y + 0.5 * dt * e2.rate);
    const Eval e4 = evaluate(t + dt, y + dt * e3.rate);
    y += dt / 6.0 * (e1.rate + 2.0 * e2.rate + 2.0 * e3.rate + e4.rate);
    const LieState xr = retracted(y.head<15>());
    y.head<15>() = xr.flatten();
    if (!y.allFinite()) throw SimulationError("state diverged at step " + std::to_string(k + 1), k + 1);
  }
  return trace;
}

TubeSummary tube_metrics(const std::vector<double>& t, const std::vector<double>& dev, double alpha, double w_bar,
                         double transient) {
  if (t.empty() || t.size() != dev.size()) throw std::invalid_argument("tube_metrics needs a nonempty trace");
  TubeSummary s;
  s.bound = alpha * w_bar;
  s.transient = transient;
  s.samples = t.size();
  std::size_t inside = 0, post = 0;
  double post_sum = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    s.max_dev = std::max(s.max_dev, dev[k]);
    if (dev[k] <= s.bound) ++inside;
    if (t[k] > transient) {
      s.post_transient_max = std::max(s.post_transient_max, dev[k]);
      post_sum += dev[k];
      ++post;
    }
  }
  s.inside_fraction = static_cast<double>(inside) / static_cast<double>(t.size());
  s.post_transient_mean = post ? post_sum / static_cast<double>(post) : 0.0;
  return s;
}

TubeSummary tube_metrics(const SimTrace& trace, double alpha, double w_bar, double transient) {
  std::vector<double> t, dev;
  t.reserve(trace.records.size());
  dev.reserve(trace.records.size());
  for (const TraceRecord& r : trace.records) {
    t.push_back(r.t);
    dev.push_back(r.dev);
  }
  return tube_metrics(t, dev, alpha, w_bar, transient);
}

}  // namespace rccm
