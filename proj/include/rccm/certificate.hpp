#pragma once

// Assembly of the robust contraction conditions at a sample, the training
// loss built from them, and eigenvalue-based verification.
//
// Everything that depends on the networks is recorded on a Tape so that the
// same code path yields values (verification) and adjoints (training). The
// model-side quantities are gathered once per sample in SampleGeometry.
// Directional derivatives along the system's vector fields are taken in the
// tangent basis: every field F satisfies F = S c_F with c_F = P_S^T F, so
// d_F W = sum_k c_F[k] d_{s_k} W and only q network tangents are needed.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rccm/neural_certificate.hpp"
#include "rccm/system.hpp"
#include "rccm/tape.hpp"

namespace rccm {

enum class LossMode { rccm, ccm };

LossMode parse_loss_mode(const std::string& s);
std::string to_string(LossMode mode);

/// Ambient-coordinate sample (x, x*, u*, w).
struct TrainSample {
  VectorXd x;
  VectorXd x_star;
  VectorXd u_star;
  VectorXd w;
};

TrainSample make_sample(const LieState& x, const LieState& x_star, const ControlInput& u_star, const Disturbance& w);

/// Parameter-independent quantities at one sample.
struct SampleGeometry {
  int n = 0, q = 0, m = 0, p = 0;
  MatrixXd S, PS, E, Ew, Eperp;
  MatrixXd CS;  // C S
  MatrixXd D;
  VectorXd eps;
  MatrixXd deps;  // d eps along the columns of S (q x q)
  VectorXd c_f;   // intrinsic coordinates of the vector fields
  MatrixXd c_b;
  MatrixXd c_bw;
  MatrixXd S_f;  // (d_F P_S^T + P_S^T dF/dx) S for F = f, b_i, b_wj
  std::vector<MatrixXd> S_b;
  std::vector<MatrixXd> S_bw;
  VectorXd net_in_w;   // x
  VectorXd net_in_k;   // [x; x*]
  MatrixXd tan_in_w;   // S
  MatrixXd tan_in_k;   // [S; 0]
  VectorXd u_star;
  VectorXd w;
};

SampleGeometry prepare_sample(const ControlAffineModel& model, const TrainSample& sample);

/// Network outputs at one sample together with their derivatives along S.
struct NetworkOutputs {
  VectorXd theta;   // q*q
  MatrixXd dtheta;  // q*q x q
  VectorXd k1;      // m*h
  MatrixXd dk1;
  VectorXd k2;      // h*q
  MatrixXd dk2;
};

NetworkOutputs evaluate_networks(const NeuralCertificate& cert, const SampleGeometry& g);

/// Unit directions for the sampled positive-definiteness penalty, one set per
/// matrix size. Columns are unit vectors.
struct LpdDirections {
  MatrixXd lmi;    // (q+p) x K, for R1 and R2
  MatrixXd ccm;    // q x K, for the CCM block and the metric bound
  MatrixXd c1;     // (q-m) x K
};

/// Uniform directions on the unit sphere; `k` per matrix size.
LpdDirections sample_directions(Rng& rng, int q, int p, int c1_dim, int k);

/// Plain (non-taped) L_PD: mean_k max(0, -p_k^T A p_k).
double lpd_penalty(const MatrixXd& A, const MatrixXd& directions);

struct LossTerms {
  double lpd_R1 = 0.0;  // L_PD(-CCM) in ccm mode
  double lpd_R2 = 0.0;
  double lpd_C1 = 0.0;
  double frob_C2 = 0.0;
  double frob_C3 = 0.0;
  double lpd_bound = 0.0;
  double relu_alpha = 0.0;

  double total() const { return lpd_R1 + lpd_R2 + lpd_C1 + frob_C2 + frob_C3 + lpd_bound + relu_alpha; }
  LossTerms& operator+=(const LossTerms& o);
  LossTerms& operator*=(double s);
  /// Name of the first non-finite term, or empty.
  std::string first_non_finite() const;
};

struct CertificateResiduals {
  MatrixXd W, M, Wdot, Mdot;
  VectorXd u;
  MatrixXd KS;        // K S (m x q)
  MatrixXd A_script;  // (Pdot_S^T + P_S^T A + E K) S
  MatrixXd C_script;  // (C + D K) S
  MatrixXd CCM;       // Mdot + <M A_script> + 2 lambda M
  MatrixXd R1, R2, C1;
  std::vector<MatrixXd> C2, C3;
  LossTerms terms;
  double loss = 0.0;
};

/// Handles of the tape nodes built for one sample.
struct SampleTape {
  Tape::Var theta, dtheta, k1, dk1, k2, dk2, theta_alpha, theta_mu;  // leaves
  Tape::Var loss;
  Tape::Var lpd_R1, lpd_R2, lpd_C1, frob_C2, frob_C3, lpd_bound, relu_alpha;
  Tape::Var W, M, Wdot, Mdot, u, KS, A_script, C_script, CCM, R1, R2, C1;
  std::vector<Tape::Var> C2, C3;
};

/// Records the sample loss on `tape`. Network outputs and the two scalars
/// become leaves.
SampleTape record_sample(Tape& tape, const SampleGeometry& g, const NetworkOutputs& nets, const NeuralCertificate& cert,
                         const LpdDirections& dirs, LossMode mode);

CertificateResiduals read_residuals(const Tape& tape, const SampleTape& st);

/// Residuals and loss at one sample.
CertificateResiduals evaluate_residuals(const ControlAffineModel& model, const NeuralCertificate& cert,
                                        const TrainSample& sample, const LpdDirections& dirs,
                                        LossMode mode = LossMode::rccm);

struct ClosedLoopFields {
  VectorXd x_dot;
  MatrixXd K;  // m x n
  MatrixXd A;  // n x n
  VectorXd u;
};

/// Ambient closed-loop quantities, computed directly (no tape).
ClosedLoopFields closed_loop_fields(const ControlAffineModel& model, const NeuralCertificate& cert,
                                    const TrainSample& sample);

MatrixXd assemble_A_script(const ControlAffineModel& model, const NeuralCertificate& cert, const TrainSample& sample);
MatrixXd assemble_R1(const ControlAffineModel& model, const NeuralCertificate& cert, const TrainSample& sample);
MatrixXd assemble_R2(const ControlAffineModel& model, const NeuralCertificate& cert, const TrainSample& sample);

struct CConditions {
  MatrixXd C1;
  std::vector<MatrixXd> C2;
  std::vector<MatrixXd> C3;
};
CConditions assemble_C_conditions(const ControlAffineModel& model, const NeuralCertificate& cert,
                                  const TrainSample& sample);

struct SampleLoss {
  double total = 0.0;
  LossTerms terms;
};
SampleLoss sample_loss(const ControlAffineModel& model, const NeuralCertificate& cert, const TrainSample& sample,
                       const LpdDirections& dirs, LossMode mode);

struct VerifyReport {
  std::size_t n_check = 0;
  std::uint64_t seed = 0;
  std::size_t violations_R1 = 0;
  std::size_t violations_R2 = 0;
  std::size_t violations_C1 = 0;
  double R1_max_eig = -std::numeric_limits<double>::infinity();
  double R2_min_eig = std::numeric_limits<double>::infinity();
  double C1_max_eig = -std::numeric_limits<double>::infinity();
  double C2_frob_max = 0.0;
  double C3_frob_max = 0.0;
  double alpha = 0.0;
  double mu = 0.0;

  double fraction_R1() const { return n_check ? double(violations_R1) / double(n_check) : 0.0; }
  double fraction_R2() const { return n_check ? double(violations_R2) / double(n_check) : 0.0; }
  double fraction_C1() const { return n_check ? double(violations_C1) / double(n_check) : 0.0; }
  double worst_fraction() const;
};

/// Exact symmetric eigensolves of R1, R2 and C1 at every sample. A sample
/// violates R1 if its largest eigenvalue exceeds `tol`, R2 if its smallest is
/// below -tol, and C1 if its largest exceeds `tol`.
VerifyReport verify(const ControlAffineModel& model, const NeuralCertificate& cert,
                    const std::vector<TrainSample>& samples, double tol = 1e-9);

/// Eigenvalues of a symmetric matrix in ascending order.
VectorXd symmetric_eigenvalues(const MatrixXd& A);

}  // namespace rccm
