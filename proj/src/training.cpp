#include "rccm/training.hpp"

#include <algorithm>
#include <cmath>

namespace rccm {

namespace {

enum Stream : std::uint64_t { kInit = 1, kData = 2, kShuffle = 3, kDirections = 4, kVerify = 5 };

}  // namespace

void SamplingBox::validate() const {
  if (!(position > 0.0 && velocity > 0.0 && body_rate > 0.0 && force_dist >= 0.0 && rate_dist >= 0.0))
    throw std::invalid_argument("sampling box half-widths must be positive");
  if (!(thrust_lo < thrust_hi)) throw std::invalid_argument("thrust range is empty");
  if (!(euler.roll > 0.0 && euler.pitch > 0.0 && euler.yaw > 0.0))
    throw std::invalid_argument("Euler box must be nonempty");
}

void TrainConfig::validate() const {
  if (n_samples == 0 || epochs <= 0 || batch_size <= 0 || lpd_directions <= 0)
    throw std::invalid_argument("n_samples, epochs, batch_size and lpd_directions must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (shape.controller_width <= 0) throw std::invalid_argument("controller_width must be positive");
  for (int w : shape.hidden)
    if (w <= 0) throw std::invalid_argument("hidden widths must be positive");
  if (!(shape.alpha0 > 0.0 && shape.mu0 > 0.0)) throw std::invalid_argument("alpha0 and mu0 must be positive");
  if (!(hyper.m_lower > 0.0 && hyper.m_upper > 0.0 && hyper.lambda > 0.0))
    throw std::invalid_argument("metric bounds and lambda must be positive");
  box.validate();
}

NumericalError::NumericalError(std::string term, std::size_t sample_index)
    : std::runtime_error("non-finite loss term '" + term + "' at sample " + std::to_string(sample_index)),
      term_(std::move(term)),
      index_(sample_index) {}

namespace {

Vec3 uniform3(Rng& rng, double half) {
  const double a = rng.uniform(-half, half);
  const double b = rng.uniform(-half, half);
  const double c = rng.uniform(-half, half);
  return {a, b, c};
}

LieState sample_state(Rng& rng, const SamplingBox& box) {
  LieState s;
  s.p = uniform3(rng, box.position);
  s.v = uniform3(rng, box.velocity);
  s.R = sample_rotation(rng, box.euler);
  return s;
}

}  // namespace

std::vector<TrainSample> sample_training_set(std::size_t n, const SamplingBox& box, Rng& rng) {
  box.validate();
  std::vector<TrainSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const LieState x = sample_state(rng, box);
    const LieState xs = sample_state(rng, box);
    ControlInput u;
    u.thrust_over_m = rng.uniform(box.thrust_lo, box.thrust_hi);
    u.omega_B = uniform3(rng, box.body_rate);
    Disturbance w;
    w.f_d_over_m = uniform3(rng, box.force_dist);
    w.omega_d = uniform3(rng, box.rate_dist);
    out.push_back(make_sample(x, xs, u, w));
  }
  return out;
}

std::vector<TrainSample> sample_training_set(const TrainConfig& config, Rng& rng) {
  return sample_training_set(config.n_samples, config.box, rng);
}

BatchGradient loss_and_gradient(const ControlAffineModel& model, const NeuralCertificate& cert,
                                const std::vector<const TrainSample*>& batch, const LpdDirections& dirs, LossMode mode,
                                const std::vector<std::size_t>* indices) {
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  if (B == 0) throw std::invalid_argument("empty batch");
  const int n = model.state_dim(), q = model.tangent_dim();

  std::vector<SampleGeometry> geo;
  geo.reserve(batch.size());
  MatrixXd xw(n, B), tw(n, B * q), xk(2 * n, B), tk(2 * n, B * q);
  for (Eigen::Index b = 0; b < B; ++b) {
    geo.push_back(prepare_sample(model, *batch[b]));
    const SampleGeometry& g = geo.back();
    xw.col(b) = g.net_in_w;
    tw.middleCols(b * q, q) = g.tan_in_w;
    xk.col(b) = g.net_in_k;
    tk.middleCols(b * q, q) = g.tan_in_k;
  }
  const DualBatch pw = cert.theta_w.forward_dual(xw, tw, q);
  const DualBatch p1 = cert.theta_k1.forward_dual(xk, tk, q);
  const DualBatch p2 = cert.theta_k2.forward_dual(xk, tk, q);

  MatrixXd aw = MatrixXd::Zero(pw.output.rows(), B), awt = MatrixXd::Zero(pw.output.rows(), B * q);
  MatrixXd a1 = MatrixXd::Zero(p1.output.rows(), B), a1t = MatrixXd::Zero(p1.output.rows(), B * q);
  MatrixXd a2 = MatrixXd::Zero(p2.output.rows(), B), a2t = MatrixXd::Zero(p2.output.rows(), B * q);
  double g_alpha = 0.0, g_mu = 0.0;

  BatchGradient out;
  const double inv_b = 1.0 / static_cast<double>(B);
  Tape tape;
  for (Eigen::Index b = 0; b < B; ++b) {
    NetworkOutputs nets;
    nets.theta = pw.output.col(b);
    nets.dtheta = pw.output_tangents.middleCols(b * q, q);
    nets.k1 = p1.output.col(b);
    nets.dk1 = p1.output_tangents.middleCols(b * q, q);
    nets.k2 = p2.output.col(b);
    nets.dk2 = p2.output_tangents.middleCols(b * q, q);

    tape.clear();
    const SampleTape st = record_sample(tape, geo[b], nets, cert, dirs, mode);
    LossTerms terms = read_residuals(tape, st).terms;
    const std::string bad = terms.first_non_finite();
    if (!bad.empty()) throw NumericalError(bad, indices ? (*indices)[b] : static_cast<std::size_t>(b));
    out.terms += terms;

    tape.backward(st.loss);
    aw.col(b) = tape.grad(st.theta) * inv_b;
    awt.middleCols(b * q, q) = tape.grad(st.dtheta) * inv_b;
    a1.col(b) = tape.grad(st.k1) * inv_b;
    a1t.middleCols(b * q, q) = tape.grad(st.dk1) * inv_b;
    a2.col(b) = tape.grad(st.k2) * inv_b;
    a2t.middleCols(b * q, q) = tape.grad(st.dk2) * inv_b;
    g_alpha += tape.grad(st.theta_alpha)(0, 0) * inv_b;
    g_mu += tape.grad(st.theta_mu)(0, 0) * inv_b;
  }
  out.terms *= inv_b;
  out.loss = out.terms.total();

  MlpGradient gw = cert.theta_w.zero_gradient();
  MlpGradient g1 = cert.theta_k1.zero_gradient();
  MlpGradient g2 = cert.theta_k2.zero_gradient();
  cert.theta_w.backward_dual(pw, aw, awt, gw);
  cert.theta_k1.backward_dual(p1, a1, a1t, g1);
  cert.theta_k2.backward_dual(p2, a2, a2t, g2);

  out.gradient.resize(cert.parameter_count());
  double* dst = out.gradient.data();
  cert.theta_w.copy_gradient_to(gw, dst);
  dst += cert.theta_w.parameter_count();
  cert.theta_k1.copy_gradient_to(g1, dst);
  dst += cert.theta_k1.parameter_count();
  cert.theta_k2.copy_gradient_to(g2, dst);
  dst += cert.theta_k2.parameter_count();
  dst[0] = g_alpha;
  dst[1] = g_mu;
  return out;
}

BatchGradient loss_and_gradient(const ControlAffineModel& model, const NeuralCertificate& cert,
                                const std::vector<TrainSample>& batch, const LpdDirections& dirs, LossMode mode) {
  std::vector<const TrainSample*> ptrs;
  ptrs.reserve(batch.size());
  for (const TrainSample& s : batch) ptrs.push_back(&s);
  return loss_and_gradient(model, cert, ptrs, dirs, mode);
}

Adam::Adam(Eigen::Index size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(VectorXd::Zero(size)), v_(VectorXd::Zero(size)) {}

void Adam::step(VectorXd& params, const VectorXd& grad) {
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

TrainResult train_on(const ControlAffineModel& model, NeuralCertificate cert, const std::vector<TrainSample>& samples,
                     const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  cert.validate(&model);
  if (samples.empty()) throw std::invalid_argument("no training samples");

  Rng shuffle(config.seed, kShuffle);
  Rng dir_rng(config.seed, kDirections);
  const int c1_dim = static_cast<int>(model.e_perp(samples.front().x).cols());

  VectorXd params = cert.parameters();
  Adam adam(params.size(), config.learning_rate);
  TrainResult result;
  const std::size_t N = samples.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<std::size_t> perm = shuffle.permutation(N);
    LossTerms epoch_terms;
    for (std::size_t start = 0; start < N; start += bs) {
      const std::size_t end = std::min(N, start + bs);
      std::vector<const TrainSample*> batch;
      std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                   perm.begin() + static_cast<std::ptrdiff_t>(end));
      batch.reserve(idx.size());
      for (std::size_t i : idx) batch.push_back(&samples[i]);

      const LpdDirections dirs = sample_directions(dir_rng, model.tangent_dim(), model.disturbance_dim(), c1_dim,
                                                   config.lpd_directions);
      const BatchGradient bg = loss_and_gradient(model, cert, batch, dirs, config.mode, &idx);
      LossTerms weighted = bg.terms;
      weighted *= static_cast<double>(end - start);
      epoch_terms += weighted;

      adam.step(params, bg.gradient);
      cert.set_parameters(params);
    }
    epoch_terms *= 1.0 / static_cast<double>(N);
    EpochLog e;
    e.epoch = epoch;
    e.terms = epoch_terms;
    e.mean_loss = epoch_terms.total();
    e.alpha = cert.alpha();
    e.mu = cert.mu();
    result.log.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  result.cert = std::move(cert);
  return result;
}

TrainResult train(const QuadrotorModel& model, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  Rng init(config.seed, kInit);
  NeuralCertificate cert = NeuralCertificate::initialize(model, config.shape, init);
  cert.hyper = config.hyper;
  Rng data(config.seed, kData);
  const std::vector<TrainSample> samples = sample_training_set(config, data);
  return train_on(model, std::move(cert), samples, config, on_epoch);
}

VerifyReport verify_fresh(const QuadrotorModel& model, const NeuralCertificate& cert, std::size_t n_check,
                          std::uint64_t seed, const SamplingBox& box, double tol) {
  Rng rng(seed, kVerify);
  VerifyReport rep = verify(model, cert, sample_training_set(n_check, box, rng), tol);
  rep.seed = seed;
  return rep;
}

}  // namespace rccm
