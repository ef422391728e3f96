#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rccm/certificate.hpp"

namespace rccm {

/// Uniform sampling boxes, symmetric about zero unless given as [lo, hi].
struct SamplingBox {
  double position = 5.0;
  double velocity = 5.0;
  double thrust_lo = 4.0;
  double thrust_hi = 16.0;
  double body_rate = 2.0;
  double force_dist = 1.0;
  double rate_dist = 0.5;
  EulerBox euler;

  void validate() const;
};

struct TrainConfig {
  std::size_t n_samples = 131072;
  int epochs = 30;
  int batch_size = 1024;
  double learning_rate = 1e-3;
  int lpd_directions = 64;
  std::uint64_t seed = 0;
  LossMode mode = LossMode::rccm;
  SamplingBox box;
  CertificateShape shape;
  CertificateHyper hyper;

  void validate() const;
};

/// Raised when a loss term turns non-finite.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string term, std::size_t sample_index);
  const std::string& term() const { return term_; }
  std::size_t sample_index() const { return index_; }

 private:
  std::string term_;
  std::size_t index_;
};

/// Independent uniform draws of (x, x*, u*, w) from the boxes.
std::vector<TrainSample> sample_training_set(std::size_t n, const SamplingBox& box, Rng& rng);
std::vector<TrainSample> sample_training_set(const TrainConfig& config, Rng& rng);

struct BatchGradient {
  double loss = 0.0;
  LossTerms terms;
  VectorXd gradient;  // same order as NeuralCertificate::parameters()
};

/// Mean loss over `batch` and its gradient w.r.t. every parameter.
/// `first_index` is the dataset index of batch[0], used in error messages.
BatchGradient loss_and_gradient(const ControlAffineModel& model, const NeuralCertificate& cert,
                                const std::vector<const TrainSample*>& batch, const LpdDirections& dirs, LossMode mode,
                                const std::vector<std::size_t>* indices = nullptr);

BatchGradient loss_and_gradient(const ControlAffineModel& model, const NeuralCertificate& cert,
                                const std::vector<TrainSample>& batch, const LpdDirections& dirs, LossMode mode);

class Adam {
 public:
  explicit Adam(Eigen::Index size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(VectorXd& params, const VectorXd& grad);
  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  VectorXd m_, v_;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  LossTerms terms;
  double alpha = 0.0;
  double mu = 0.0;
};

struct TrainResult {
  NeuralCertificate cert;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam on the mean sample loss. The initial certificate, the training set,
/// the epoch permutations and the L_PD directions each come from their own
/// stream derived from config.seed.
TrainResult train(const QuadrotorModel& model, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Same loop on a given sample set and starting certificate.
TrainResult train_on(const ControlAffineModel& model, NeuralCertificate cert, const std::vector<TrainSample>& samples,
                     const TrainConfig& config, const EpochCallback& on_epoch = {});

/// verify() on n_check fresh samples drawn from `box` with `seed`.
VerifyReport verify_fresh(const QuadrotorModel& model, const NeuralCertificate& cert, std::size_t n_check,
                          std::uint64_t seed, const SamplingBox& box = {}, double tol = 1e-9);

}  // namespace rccm
