#include "rccm/neural_certificate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rccm {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw std::domain_error("inverse_softplus: argument must be positive");
  return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

namespace {

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

MatrixXd reshape_rows(const Eigen::Ref<const VectorXd>& v, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = v(i * cols + j);
  return M;
}

VectorXd concat(const VectorXd& a, const VectorXd& b) {
  VectorXd c(a.size() + b.size());
  c << a, b;
  return c;
}

}  // namespace

NeuralCertificate NeuralCertificate::initialize(const ControlAffineModel& model, const CertificateShape& shape,
                                                Rng& rng) {
  const int n = model.state_dim(), q = model.tangent_dim(), m = model.input_dim(), h = shape.controller_width;
  NeuralCertificate cert;
  cert.theta_w = Mlp::glorot(widths(n, shape.hidden, q * q), rng);
  cert.theta_k1 = Mlp::glorot(widths(2 * n, shape.hidden, m * h), rng);
  cert.theta_k2 = Mlp::glorot(widths(2 * n, shape.hidden, h * q), rng);
  cert.theta_alpha = inverse_softplus(shape.alpha0);
  cert.theta_mu = inverse_softplus(shape.mu0);
  return cert;
}

NeuralCertificate NeuralCertificate::zero(const ControlAffineModel& model, const CertificateShape& shape) {
  const int n = model.state_dim(), q = model.tangent_dim(), m = model.input_dim(), h = shape.controller_width;
  NeuralCertificate cert;
  cert.theta_w = Mlp(widths(n, shape.hidden, q * q));
  cert.theta_k1 = Mlp(widths(2 * n, shape.hidden, m * h));
  cert.theta_k2 = Mlp(widths(2 * n, shape.hidden, h * q));
  cert.theta_alpha = inverse_softplus(shape.alpha0);
  cert.theta_mu = inverse_softplus(shape.mu0);
  return cert;
}

int NeuralCertificate::tangent_dim() const {
  return static_cast<int>(std::lround(std::sqrt(static_cast<double>(theta_w.output_dim()))));
}

int NeuralCertificate::controller_width() const { return theta_k2.output_dim() / tangent_dim(); }

int NeuralCertificate::input_dim() const { return theta_k1.output_dim() / controller_width(); }

void NeuralCertificate::validate(const ControlAffineModel* model) const {
  if (theta_w.widths().empty() || theta_k1.widths().empty() || theta_k2.widths().empty())
    throw std::invalid_argument("certificate networks are missing");
  const int n = state_dim();
  const int q = tangent_dim();
  if (q * q != theta_w.output_dim()) throw std::invalid_argument("theta_w output is not a square matrix");
  if (theta_k1.input_dim() != 2 * n || theta_k2.input_dim() != 2 * n)
    throw std::invalid_argument("controller networks must take [x; x*]");
  if (theta_k2.output_dim() % q != 0) throw std::invalid_argument("theta_k2 output is not h x q");
  const int h = controller_width();
  if (theta_k1.output_dim() % h != 0) throw std::invalid_argument("theta_k1 output is not m x h");
  if (!std::isfinite(theta_alpha) || !std::isfinite(theta_mu)) throw std::invalid_argument("non-finite scalars");
  if (model != nullptr &&
      (model->state_dim() != n || model->tangent_dim() != q || model->input_dim() != input_dim()))
    throw std::invalid_argument("certificate dimensions do not match the model (n=" + std::to_string(n) +
                                ", q=" + std::to_string(q) + ", m=" + std::to_string(input_dim()) + ")");
}

Eigen::Index NeuralCertificate::parameter_count() const {
  return theta_w.parameter_count() + theta_k1.parameter_count() + theta_k2.parameter_count() + 2;
}

VectorXd NeuralCertificate::parameters() const {
  VectorXd flat(parameter_count());
  double* out = flat.data();
  theta_w.copy_parameters_to(out);
  out += theta_w.parameter_count();
  theta_k1.copy_parameters_to(out);
  out += theta_k1.parameter_count();
  theta_k2.copy_parameters_to(out);
  out += theta_k2.parameter_count();
  out[0] = theta_alpha;
  out[1] = theta_mu;
  return flat;
}

void NeuralCertificate::set_parameters(const VectorXd& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("parameter vector has the wrong length");
  const double* in = flat.data();
  theta_w.copy_parameters_from(in);
  in += theta_w.parameter_count();
  theta_k1.copy_parameters_from(in);
  in += theta_k1.parameter_count();
  theta_k2.copy_parameters_from(in);
  in += theta_k2.parameter_count();
  theta_alpha = in[0];
  theta_mu = in[1];
}

MatrixXd eval_dual_metric(const NeuralCertificate& cert, const VectorXd& x) {
  const int q = cert.tangent_dim();
  const MatrixXd Theta = reshape_rows(cert.theta_w.forward(x), q, q);
  const MatrixXd G = Theta.transpose() * Theta;
  MatrixXd W = 0.5 * (G + G.transpose());
  W.diagonal().array() += 1.0 / cert.hyper.m_upper;
  return W;
}

MatrixXd eval_dual_metric_directional(const NeuralCertificate& cert, const VectorXd& x, const VectorXd& d) {
  const int q = cert.tangent_dim();
  const DualVector out = cert.theta_w.directional({x, d});
  const MatrixXd Theta = reshape_rows(out.value, q, q);
  const MatrixXd dTheta = reshape_rows(out.tangent, q, q);
  const MatrixXd G = Theta.transpose() * dTheta;
  return G + G.transpose();
}

MatrixXd eval_metric(const NeuralCertificate& cert, const VectorXd& x) {
  const MatrixXd W = eval_dual_metric(cert, x);
  const MatrixXd M = W.llt().solve(MatrixXd::Identity(W.rows(), W.cols()));
  return 0.5 * (M + M.transpose());
}

VectorXd eval_feedback(const NeuralCertificate& cert, const ControlAffineModel& model, const VectorXd& x,
                       const VectorXd& x_star) {
  const int q = cert.tangent_dim(), h = cert.controller_width(), m = cert.input_dim();
  const VectorXd in = concat(x, x_star);
  const MatrixXd K1 = reshape_rows(cert.theta_k1.forward(in), m, h);
  const MatrixXd K2 = reshape_rows(cert.theta_k2.forward(in), h, q);
  const VectorXd eps = model.error(x, x_star);
  return K1 * (K2 * eps).array().tanh().matrix();
}

VectorXd eval_controller(const NeuralCertificate& cert, const ControlAffineModel& model, const VectorXd& x,
                         const VectorXd& x_star, const VectorXd& u_star) {
  return eval_feedback(cert, model, x, x_star) + u_star;
}

ControlInput eval_controller(const NeuralCertificate& cert, const QuadrotorModel& model, const LieState& x,
                             const LieState& x_star, const ControlInput& u_star) {
  const VectorXd u = eval_controller(cert, static_cast<const ControlAffineModel&>(model), VectorXd(x.flatten()),
                                     VectorXd(x_star.flatten()), VectorXd(u_star.to_vector()));
  return ControlInput::from_vector(u);
}

MatrixXd controller_jacobian(const NeuralCertificate& cert, const ControlAffineModel& model, const VectorXd& x,
                             const VectorXd& x_star) {
  const int n = cert.state_dim(), q = cert.tangent_dim(), h = cert.controller_width(), m = cert.input_dim();
  const VectorXd in = concat(x, x_star);
  MatrixXd dirs = MatrixXd::Zero(2 * n, n);
  dirs.topRows(n).setIdentity();
  const DualBatch p1 = cert.theta_k1.forward_dual(in, dirs, n);
  const DualBatch p2 = cert.theta_k2.forward_dual(in, dirs, n);
  const MatrixXd K1 = reshape_rows(p1.output.col(0), m, h);
  const MatrixXd K2 = reshape_rows(p2.output.col(0), h, q);
  const VectorXd eps = model.error(x, x_star);
  const MatrixXd deps = model.error_jacobian(x, x_star);
  const VectorXd t = (K2 * eps).array().tanh();
  const VectorXd slope = 1.0 - t.array().square();

  MatrixXd J(m, n);
  for (int j = 0; j < n; ++j) {
    const MatrixXd dK1 = reshape_rows(p1.output_tangents.col(j), m, h);
    const MatrixXd dK2 = reshape_rows(p2.output_tangents.col(j), h, q);
    const VectorXd dy = dK2 * eps + K2 * deps.col(j);
    J.col(j) = dK1 * t + K1 * slope.cwiseProduct(dy);
  }
  return J;
}

}  // namespace rccm
