#ifndef BSQ_PARAM_EXTRACTION_HPP
#define BSQ_PARAM_EXTRACTION_HPP

#include <string>
#include <vector>

#include "bsq/channel_model.hpp"
#include "bsq/common.hpp"
#include "bsq/hybrid_frontend.hpp"

namespace bsq {

/// Everything the extractor needs to evaluate measurement-domain atoms
/// W^H p(psi, tau): the stacked combiner, the geometry, and which steering
/// model the basis uses (wideband atoms for the proposed extractor,
/// narrowband atoms for the squint-ignoring baseline).
class MeasurementContext {
 public:
  MeasurementContext(const StackedCombiner& combiner, const ArrayConfig& array,
                     const OfdmConfig& ofdm,
                     SteeringModel basis = SteeringModel::kWideband,
                     double tau_max_s = -1.0);

  const StackedCombiner& combiner() const { return *combiner_; }
  const ArrayConfig& array() const { return array_; }
  const OfdmConfig& ofdm() const { return ofdm_; }
  SteeringModel basis() const { return basis_; }
  double tau_max_s() const { return tau_max_s_; }
  double psi_bound() const { return array_.spacing_ratio; }
  int meas_dim() const { return combiner_->meas_dim(); }

  /// Measurement-domain atom W^H p(psi, tau).
  CVec atom(double psi, double tau_s) const;
  /// Atom plus its partial derivatives with respect to psi and tau.
  void atom_with_derivs(double psi, double tau_s, CVec& a, CVec& dpsi,
                        CVec& dtau) const;
  /// Design matrix A = W^H P(psi, tau), one column per path.
  CMat design(const RVec& psi, const RVec& tau) const;

  /// Greedy residual-correlation seeding on a basin-resolution grid;
  /// used to initialize the gridless iteration. Returns at most max_atoms
  /// (psi, tau) pairs, data-adaptively fewer when the residual is exhausted.
  void seed_atoms(const CVec& y, int max_atoms, int angle_oversample,
                  double delay_oversample, RVec& psi0, RVec& tau0) const;

 private:
  const StackedCombiner* combiner_;
  ArrayConfig array_;
  OfdmConfig ofdm_;
  SteeringModel basis_;
  double tau_max_s_;
  std::vector<double> pilot_offsets_hz_;   // (p-1) * eta per pilot
  std::vector<CMat> wh_per_pilot_;         // W_p^H, cols_per_pilot x M
  // Diagonal sums of W_p W_p^H per pilot; ||W_p^H a(xi)||^2 is then a short
  // exponential sum instead of an M^2 product.
  std::vector<CVec> gram_diag_sums_;
};

/// Solver configuration (Table-I constants plus descent controls).
struct ExtractionConfig {
  int max_paths = 8;  // L_M
  // lambda0 = 0 selects the automatic scale (the measurement dimension
  // N_RF P T_up): lambda = lambda0 / ||residual||^2 then approximates the
  // inverse per-element noise variance of beta, which halves noise-level
  // atoms per iteration while leaving real paths nearly untouched.
  double lambda0 = 0.0;
  double lambda_min = 1e-3;
  double lambda_cap_factor = 1e12;  // lambda <= lambda0 * cap_factor
  double beta_min = 0.03;     // prune threshold on |beta_l|
  double gamma_T = 1e-6;      // termination threshold on ||beta change||
  double epsilon_init = 1.0;
  double epsilon_min = 1e-8;
  int max_iters = 300;
  struct Descent {
    int max_line_search_steps = 20;
    double initial_step = 0.0;  // 0 = auto (0.25 / M in scaled coordinates)
    double shrink_factor = 0.5;
    int steps_per_iteration = 3;
  } descent;
  int init_angle_oversample = 4;    // seeding grid: points per DFT bin
  double init_delay_oversample = 2.0;  // seeding grid: points per sample period
  int polish_steps = 60;  // stationarity tail on the final surrogate

  double effective_lambda0(int meas_dim) const {
    return lambda0 > 0.0 ? lambda0 : static_cast<double>(meas_dim);
  }
  void validate() const;
};

/// Iterate of the majorization-minimization loop.
struct ExtractionState {
  CVec beta;
  RVec psi;
  RVec tau;
  double epsilon = 1.0;
  double lambda = 1.0;
  int iter = 0;

  int num_paths() const { return static_cast<int>(beta.size()); }
};

/// One per-iteration diagnostics record (CSV-dumpable).
struct IterationRecord {
  int iter = 0;
  double s1 = 0.0;
  double lambda = 0.0;
  double epsilon = 0.0;
  double gamma = 0.0;
  int num_paths = 0;
};

struct ExtractionResult {
  RVec psi;
  RVec tau;
  CVec alpha;
  bool truncated = false;  // max_iters hit before convergence
  std::vector<IterationRecord> trace;

  std::vector<AngleDelay> angle_delays() const;
};

/// Log-sum sparsity surrogate J0 = sum_l log(|beta_l|^2 + eps).
double log_sum_J0(const CVec& beta, double epsilon);

/// Full objective J0(beta) + lambda * ||y - W^H P(psi,tau) beta||^2.
double objective_J_lambda(const RVec& psi, const RVec& tau, const CVec& beta,
                          const CVec& y, double lambda, double epsilon,
                          const MeasurementContext& ctx);

/// MM weights: diagonal entries 1 / (|beta_l|^2 + eps).
RVec weight_matrix_D(const CVec& beta, double epsilon);

/// Surrogate value S1 = -y^H W^H P (P^H W W^H P + lambda^{-1} D)^{-1} P^H W y
/// (the additive constant C(beta) is dropped throughout).
double surrogate_S1(const RVec& psi, const RVec& tau, const CVec& y,
                    double lambda, const RVec& d_diag,
                    const MeasurementContext& ctx);

/// Closed-form gain update beta* = (P^H W W^H P + lambda^{-1} D)^{-1} P^H W y.
CVec beta_star(const RVec& psi, const RVec& tau, const CVec& y, double lambda,
               const RVec& d_diag, const MeasurementContext& ctx);

/// Analytic gradient of S1. Also returns S1 and beta* since they share the
/// same linear solve.
struct SurrogateEval {
  double s1 = 0.0;
  CVec beta;
  RVec grad_psi;
  RVec grad_tau;
};
SurrogateEval surrogate_gradient(const RVec& psi, const RVec& tau,
                                 const CVec& y, double lambda,
                                 const RVec& d_diag,
                                 const MeasurementContext& ctx);

/// Adaptive regularization lambda = clamp(lambda0 / residual_sq) into
/// [lambda_min, lambda0 * cap_factor].
double lambda_update(double residual_sq, double lambda0, double lambda_min,
                     double cap_factor = 1e12);

/// One backtracking gradient step on (psi, tau) in scaled coordinates
/// (tau carries a factor eta). Guarantees S1 does not increase; returns the
/// inputs unchanged when the line search is exhausted.
struct DescentStatus {
  bool moved = false;
  double s1 = 0.0;
};
DescentStatus descend_psi_tau(RVec& psi, RVec& tau, const CVec& y,
                              double lambda, const RVec& d_diag,
                              const MeasurementContext& ctx,
                              const ExtractionConfig::Descent& opts);

/// Remove every path with |beta_l| < beta_min from all three vectors.
ExtractionState prune_paths(const ExtractionState& state, double beta_min);

/// Full Table-I loop: seed, iterate (descent, gain update, lambda/epsilon
/// schedules, pruning), terminate on gamma_T at the final epsilon.
ExtractionResult extract(const CVec& y, const MeasurementContext& ctx,
                         const ExtractionConfig& config);

/// Per-iteration trace as CSV (iter, s1, lambda, epsilon, gamma, num_paths).
void write_trace_csv(const std::vector<IterationRecord>& trace,
                     const std::string& path);

}  // namespace bsq

#endif  // BSQ_PARAM_EXTRACTION_HPP
