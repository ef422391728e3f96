#include "rccm/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rccm {

LossMode parse_loss_mode(const std::string& s) {
  if (s == "rccm") return LossMode::rccm;
  if (s == "ccm") return LossMode::ccm;
  throw std::invalid_argument("unknown loss mode '" + s + "' (expected rccm or ccm)");
}

std::string to_string(LossMode mode) { return mode == LossMode::rccm ? "rccm" : "ccm"; }

TrainSample make_sample(const LieState& x, const LieState& x_star, const ControlInput& u_star, const Disturbance& w) {
  return {x.flatten(), x_star.flatten(), u_star.to_vector(), w.to_vector()};
}

SampleGeometry prepare_sample(const ControlAffineModel& model, const TrainSample& s) {
  SampleGeometry g;
  g.n = model.state_dim();
  g.q = model.tangent_dim();
  g.m = model.input_dim();
  g.p = model.disturbance_dim();
  if (s.x.size() != g.n || s.x_star.size() != g.n || s.u_star.size() != g.m || s.w.size() != g.p)
    throw std::invalid_argument("sample dimensions do not match the model");

  const VectorXd& x = s.x;
  g.S = model.tangent_basis(x);
  g.PS = model.projection(x);
  g.E = model.e_factor(x);
  g.Ew = model.e_w_factor(x);
  g.Eperp = model.e_perp(x);

  const auto [C, D] = model.output_jacobians(x, s.u_star);
  g.CS = C * g.S;
  g.D = D;

  g.eps = model.error(x, s.x_star);
  g.deps = model.error_jacobian(x, s.x_star) * g.S;

  const VectorXd f = model.drift(x);
  const MatrixXd B = model.input_matrix(x);
  const MatrixXd Bw = model.disturbance_matrix(x);
  const MatrixXd PSt = g.PS.transpose();
  g.c_f = PSt * f;
  g.c_b = PSt * B;
  g.c_bw = PSt * Bw;

  auto intrinsic = [&](const VectorXd& F, const MatrixXd& JF) -> MatrixXd {
    return (model.projection_directional(x, F).transpose() + PSt * JF) * g.S;
  };
  g.S_f = intrinsic(f, model.drift_jacobian(x));
  const auto Jb = model.input_jacobians(x);
  const auto Jbw = model.disturbance_jacobians(x);
  for (int i = 0; i < g.m; ++i) g.S_b.push_back(intrinsic(B.col(i), Jb[i]));
  for (int j = 0; j < g.p; ++j) g.S_bw.push_back(intrinsic(Bw.col(j), Jbw[j]));

  g.net_in_w = x;
  g.net_in_k.resize(2 * g.n);
  g.net_in_k << x, s.x_star;
  g.tan_in_w = g.S;
  g.tan_in_k = MatrixXd::Zero(2 * g.n, g.q);
  g.tan_in_k.topRows(g.n) = g.S;
  g.u_star = s.u_star;
  g.w = s.w;
  return g;
}

NetworkOutputs evaluate_networks(const NeuralCertificate& cert, const SampleGeometry& g) {
  NetworkOutputs out;
  const DualBatch w = cert.theta_w.forward_dual(g.net_in_w, g.tan_in_w, g.q);
  const DualBatch k1 = cert.theta_k1.forward_dual(g.net_in_k, g.tan_in_k, g.q);
  const DualBatch k2 = cert.theta_k2.forward_dual(g.net_in_k, g.tan_in_k, g.q);
  out.theta = w.output.col(0);
  out.dtheta = w.output_tangents;
  out.k1 = k1.output.col(0);
  out.dk1 = k1.output_tangents;
  out.k2 = k2.output.col(0);
  out.dk2 = k2.output_tangents;
  return out;
}

namespace {

MatrixXd unit_columns(Rng& rng, int dim, int k) {
  MatrixXd P(dim, k);
  if (dim == 0) return P;
  for (int c = 0; c < k; ++c) {
    double norm = 0.0;
    do {
      for (int r = 0; r < dim; ++r) P(r, c) = rng.normal();
      norm = P.col(c).norm();
    } while (norm < 1e-12);
    P.col(c) /= norm;
  }
  return P;
}

}  // namespace

LpdDirections sample_directions(Rng& rng, int q, int p, int c1_dim, int k) {
  if (k < 1) throw std::invalid_argument("need at least one L_PD direction");
  LpdDirections d;
  d.lmi = unit_columns(rng, q + p, k);
  d.ccm = unit_columns(rng, q, k);
  d.c1 = unit_columns(rng, c1_dim, k);
  return d;
}

double lpd_penalty(const MatrixXd& A, const MatrixXd& directions) {
  if (directions.cols() == 0 || A.size() == 0) return 0.0;
  const MatrixXd AP = A * directions;
  double s = 0.0;
  for (Eigen::Index k = 0; k < directions.cols(); ++k) {
    const double v = -directions.col(k).dot(AP.col(k));
    s += std::isnan(v) ? v : std::max(0.0, v);
  }
  return s / static_cast<double>(directions.cols());
}

LossTerms& LossTerms::operator+=(const LossTerms& o) {
  lpd_R1 += o.lpd_R1;
  lpd_R2 += o.lpd_R2;
  lpd_C1 += o.lpd_C1;
  frob_C2 += o.frob_C2;
  frob_C3 += o.frob_C3;
  lpd_bound += o.lpd_bound;
  relu_alpha += o.relu_alpha;
  return *this;
}

LossTerms& LossTerms::operator*=(double s) {
  lpd_R1 *= s;
  lpd_R2 *= s;
  lpd_C1 *= s;
  frob_C2 *= s;
  frob_C3 *= s;
  lpd_bound *= s;
  relu_alpha *= s;
  return *this;
}

std::string LossTerms::first_non_finite() const {
  const std::pair<const char*, double> terms[] = {{"lpd_R1", lpd_R1},       {"lpd_R2", lpd_R2},
                                                  {"lpd_C1", lpd_C1},       {"frob_C2", frob_C2},
                                                  {"frob_C3", frob_C3},     {"lpd_bound", lpd_bound},
                                                  {"relu_alpha", relu_alpha}};
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v)) return name;
  return {};
}

SampleTape record_sample(Tape& t, const SampleGeometry& g, const NetworkOutputs& nets, const NeuralCertificate& cert,
                         const LpdDirections& dirs, LossMode mode) {
  const int q = g.q, m = g.m, p = g.p;
  const int h = cert.controller_width();
  const CertificateHyper& hp = cert.hyper;
  const bool robust = mode == LossMode::rccm;
  const MatrixXd Iq = MatrixXd::Identity(q, q);

  SampleTape st;
  st.theta = t.leaf(nets.theta);
  st.dtheta = t.leaf(nets.dtheta);
  st.k1 = t.leaf(nets.k1);
  st.dk1 = t.leaf(nets.dk1);
  st.k2 = t.leaf(nets.k2);
  st.dk2 = t.leaf(nets.dk2);
  st.theta_alpha = t.leaf(MatrixXd::Constant(1, 1, cert.theta_alpha));
  st.theta_mu = t.leaf(MatrixXd::Constant(1, 1, cert.theta_mu));
  const Tape::Var alpha = t.softplus(st.theta_alpha);
  const Tape::Var mu = t.softplus(st.theta_mu);

  // Metric.
  const Tape::Var Theta = t.reshape_rows(st.theta, q, q);
  const Tape::Var ThetaT = t.transpose(Theta);
  st.W = t.add(t.matmul(ThetaT, Theta), t.constant(Iq / hp.m_upper));
  st.M = t.inverse(st.W);
  auto dW = [&](Tape::Var c) {
    const Tape::Var dTheta = t.reshape_rows(t.matmul(st.dtheta, c), q, q);
    return t.sym(t.matmul(ThetaT, dTheta));
  };

  // Controller and its derivatives along S.
  const Tape::Var K1 = t.reshape_rows(st.k1, m, h);
  const Tape::Var K2 = t.reshape_rows(st.k2, h, q);
  const Tape::Var eps = t.constant(g.eps);
  const Tape::Var th = t.tanh(t.matmul(K2, eps));
  const Tape::Var slope = t.sub(t.constant(MatrixXd::Ones(h, 1)), t.cwise_mul(th, th));
  st.u = t.add(t.matmul(K1, th), t.constant(g.u_star));
  std::vector<Tape::Var> ks_cols;
  ks_cols.reserve(q);
  for (int j = 0; j < q; ++j) {
    const Tape::Var dK1 = t.reshape_rows(t.block(st.dk1, 0, j, m * h, 1), m, h);
    const Tape::Var dK2 = t.reshape_rows(t.block(st.dk2, 0, j, h * q, 1), h, q);
    const Tape::Var dy = t.add(t.matmul(dK2, eps), t.matmul(K2, t.constant(g.deps.col(j))));
    ks_cols.push_back(t.add(t.matmul(dK1, th), t.matmul(K1, t.cwise_mul(slope, dy))));
  }
  st.KS = t.hcat(ks_cols);

  // Closed-loop differential dynamics in the tangent basis.
  MatrixXd drift_part = g.S_f;
  VectorXd c_const = g.c_f;
  if (robust) {
    for (int j = 0; j < p; ++j) drift_part += g.w(j) * g.S_bw[j];
    c_const += g.c_bw * g.w;
  }
  std::vector<Tape::Var> a_terms{t.constant(drift_part), t.matmul(t.constant(g.E), st.KS)};
  for (int i = 0; i < m; ++i) a_terms.push_back(t.scale_by(t.constant(g.S_b[i]), t.element(st.u, i, 0)));
  st.A_script = t.sum(a_terms);

  const Tape::Var c_xdot = t.add(t.constant(c_const), t.matmul(t.constant(g.c_b), st.u));
  st.Wdot = dW(c_xdot);
  st.Mdot = t.neg(t.matmul(t.matmul(st.M, st.Wdot), st.M));
  st.CCM = t.sum({st.Mdot, t.sym(t.matmul(st.M, st.A_script)), t.scale(st.M, 2.0 * hp.lambda)});

  // Conditions on the unactuated directions.
  const int c1_dim = static_cast<int>(g.Eperp.cols());
  const Tape::Var Ep = t.constant(g.Eperp);
  const Tape::Var EpT = t.constant(g.Eperp.transpose());
  auto project = [&](Tape::Var X) { return t.matmul(EpT, t.matmul(X, Ep)); };
  auto field_term = [&](const VectorXd& c, const MatrixXd& SF) {
    return t.sub(t.sym(t.matmul(t.constant(SF), st.W)), dW(t.constant(c)));
  };
  if (c1_dim > 0) {
    st.C1 = project(t.add(field_term(g.c_f, g.S_f), t.scale(st.W, 2.0 * hp.lambda)));
    for (int i = 0; i < m; ++i) st.C2.push_back(project(field_term(g.c_b.col(i), g.S_b[i])));
    if (robust)
      for (int j = 0; j < p; ++j) st.C3.push_back(project(field_term(g.c_bw.col(j), g.S_bw[j])));
  } else {
    st.C1 = t.constant(MatrixXd::Zero(0, 0));
  }

  std::vector<Tape::Var> c2_norms, c3_norms;
  for (Tape::Var c : st.C2) c2_norms.push_back(t.frobenius(c));
  for (Tape::Var c : st.C3) c3_norms.push_back(t.frobenius(c));
  const Tape::Var zero = t.scalar_constant(0.0);
  st.frob_C2 = c2_norms.empty() ? zero : t.sum(c2_norms);
  st.frob_C3 = c3_norms.empty() ? zero : t.sum(c3_norms);
  st.lpd_C1 = c1_dim > 0 ? t.lpd(t.neg(st.C1), dirs.c1) : zero;
  st.lpd_bound = t.lpd(t.sub(t.constant(Iq / hp.m_lower), st.W), dirs.ccm);

  if (robust) {
    const Tape::Var MEw = t.matmul(st.M, t.constant(g.Ew));
    const Tape::Var Ip = t.constant(MatrixXd::Identity(p, p));
    st.R1 = t.vcat({t.hcat({st.CCM, MEw}), t.hcat({t.transpose(MEw), t.neg(t.scale_by(Ip, mu))})});
    st.C_script = t.add(t.constant(g.CS), t.matmul(t.constant(g.D), st.KS));
    const Tape::Var CtC = t.matmul(t.transpose(st.C_script), st.C_script);
    const Tape::Var top = t.sub(t.scale(st.M, 2.0 * hp.lambda), t.scale_by(CtC, t.inverse(alpha)));
    const Tape::Var bottom = t.scale_by(Ip, t.sub(alpha, mu));
    st.R2 = t.vcat({t.hcat({top, t.constant(MatrixXd::Zero(q, p))}),
                    t.hcat({t.constant(MatrixXd::Zero(p, q)), bottom})});
    st.lpd_R1 = t.lpd(t.neg(st.R1), dirs.lmi);
    st.lpd_R2 = t.lpd(st.R2, dirs.lmi);
    st.relu_alpha = t.relu(t.sub(alpha, t.scalar_constant(hp.alpha_floor)));
  } else {
    st.R1 = st.CCM;
    st.C_script = t.add(t.constant(g.CS), t.matmul(t.constant(g.D), st.KS));
    st.R2 = t.constant(MatrixXd::Zero(0, 0));
    st.lpd_R1 = t.lpd(t.neg(st.CCM), dirs.ccm);
    st.lpd_R2 = zero;
    st.relu_alpha = zero;
  }
  st.loss = t.sum({st.lpd_R1, st.lpd_R2, st.lpd_C1, st.frob_C2, st.frob_C3, st.lpd_bound, st.relu_alpha});
  return st;
}

namespace {

MatrixXd symmetric_part(const MatrixXd& A) { return 0.5 * (A + A.transpose()); }

}  // namespace

CertificateResiduals read_residuals(const Tape& t, const SampleTape& st) {
  CertificateResiduals r;
  r.W = symmetric_part(t.value(st.W));
  r.M = symmetric_part(t.value(st.M));
  r.Wdot = symmetric_part(t.value(st.Wdot));
  r.Mdot = symmetric_part(t.value(st.Mdot));
  r.u = t.value(st.u);
  r.KS = t.value(st.KS);
  r.A_script = t.value(st.A_script);
  r.C_script = t.value(st.C_script);
  r.CCM = symmetric_part(t.value(st.CCM));
  r.R1 = symmetric_part(t.value(st.R1));
  r.R2 = symmetric_part(t.value(st.R2));
  r.C1 = symmetric_part(t.value(st.C1));
  for (Tape::Var c : st.C2) r.C2.push_back(symmetric_part(t.value(c)));
  for (Tape::Var c : st.C3) r.C3.push_back(symmetric_part(t.value(c)));
  r.terms.lpd_R1 = t.scalar(st.lpd_R1);
  r.terms.lpd_R2 = t.scalar(st.lpd_R2);
  r.terms.lpd_C1 = t.scalar(st.lpd_C1);
  r.terms.frob_C2 = t.scalar(st.frob_C2);
  r.terms.frob_C3 = t.scalar(st.frob_C3);
  r.terms.lpd_bound = t.scalar(st.lpd_bound);
  r.terms.relu_alpha = t.scalar(st.relu_alpha);
  r.loss = t.scalar(st.loss);
  return r;
}

namespace {

LpdDirections canonical_directions(const ControlAffineModel& model, const VectorXd& x) {
  const int q = model.tangent_dim(), p = model.disturbance_dim();
  const int c1 = static_cast<int>(model.e_perp(x).cols());
  LpdDirections d;
  d.lmi = MatrixXd::Identity(q + p, q + p);
  d.ccm = MatrixXd::Identity(q, q);
  d.c1 = MatrixXd::Identity(c1, c1);
  return d;
}

}  // namespace

CertificateResiduals evaluate_residuals(const ControlAffineModel& model, const NeuralCertificate& cert,
                                        const TrainSample& sample, const LpdDirections& dirs, LossMode mode) {
  cert.validate(&model);
  const SampleGeometry g = prepare_sample(model, sample);
  const NetworkOutputs nets = evaluate_networks(cert, g);
  Tape tape;
  const SampleTape st = record_sample(tape, g, nets, cert, dirs, mode);
  return read_residuals(tape, st);
}

ClosedLoopFields closed_loop_fields(const ControlAffineModel& model, const NeuralCertificate& cert,
                                    const TrainSample& s) {
  ClosedLoopFields c;
  c.u = eval_controller(cert, model, s.x, s.x_star, s.u_star);
  c.K = controller_jacobian(cert, model, s.x, s.x_star);
  c.A = model.ambient_A(s.x, c.u, s.w);
  c.x_dot = model.vector_field(s.x, c.u, s.w);
  return c;
}

MatrixXd assemble_A_script(const ControlAffineModel& model, const NeuralCertificate& cert, const TrainSample& s) {
  return evaluate_residuals(model, cert, s, canonical_directions(model, s.x)).A_script;
}

MatrixXd assemble_R1(const ControlAffineModel& model, const NeuralCertificate& cert, const TrainSample& s) {
  return evaluate_residuals(model, cert, s, canonical_directions(model, s.x)).R1;
}

MatrixXd assemble_R2(const ControlAffineModel& model, const NeuralCertificate& cert, const TrainSample& s) {
  return evaluate_residuals(model, cert, s, canonical_directions(model, s.x)).R2;
}

CConditions assemble_C_conditions(const ControlAffineModel& model, const NeuralCertificate& cert,
                                  const TrainSample& s) {
  CertificateResiduals r = evaluate_residuals(model, cert, s, canonical_directions(model, s.x));
  return {std::move(r.C1), std::move(r.C2), std::move(r.C3)};
}

SampleLoss sample_loss(const ControlAffineModel& model, const NeuralCertificate& cert, const TrainSample& s,
                       const LpdDirections& dirs, LossMode mode) {
  const CertificateResiduals r = evaluate_residuals(model, cert, s, dirs, mode);
  return {r.loss, r.terms};
}

VectorXd symmetric_eigenvalues(const MatrixXd& A) {
  if (A.size() == 0) return VectorXd();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigenvalue solver failed");
  return es.eigenvalues();
}

double VerifyReport::worst_fraction() const { return std::max({fraction_R1(), fraction_R2(), fraction_C1()}); }

VerifyReport verify(const ControlAffineModel& model, const NeuralCertificate& cert,
                    const std::vector<TrainSample>& samples, double tol) {
  cert.validate(&model);
  VerifyReport rep;
  rep.n_check = samples.size();
  rep.alpha = cert.alpha();
  rep.mu = cert.mu();
  for (const TrainSample& s : samples) {
    const CertificateResiduals r = evaluate_residuals(model, cert, s, canonical_directions(model, s.x));
    const VectorXd e1 = symmetric_eigenvalues(r.R1);
    const VectorXd e2 = symmetric_eigenvalues(r.R2);
    const double r1 = e1(e1.size() - 1), r2 = e2(0);
    rep.R1_max_eig = std::max(rep.R1_max_eig, r1);
    rep.R2_min_eig = std::min(rep.R2_min_eig, r2);
    if (!(r1 <= tol)) ++rep.violations_R1;
    if (!(r2 >= -tol)) ++rep.violations_R2;
    if (r.C1.size() > 0) {
      const VectorXd ec = symmetric_eigenvalues(r.C1);
      const double c1 = ec(ec.size() - 1);
      rep.C1_max_eig = std::max(rep.C1_max_eig, c1);
      if (!(c1 <= tol)) ++rep.violations_C1;
    }
    for (const MatrixXd& c : r.C2) rep.C2_frob_max = std::max(rep.C2_frob_max, c.norm());
    for (const MatrixXd& c : r.C3) rep.C3_frob_max = std::max(rep.C3_frob_max, c.norm());
  }
  return rep;
}

}  // namespace rccm
