#ifndef BSQ_UPLINK_ESTIMATION_HPP
#define BSQ_UPLINK_ESTIMATION_HPP

#include <utility>
#include <vector>

#include "bsq/channel_model.hpp"
#include "bsq/common.hpp"
#include "bsq/hybrid_frontend.hpp"

namespace bsq {

/// Angle-delay grouping plan: groups partition the users, each group owns a
/// disjoint pilot set, users within a group are pairwise at least `guard`
/// apart in d_U, and no group exceeds `max_group_size`.
struct UserGroupPlan {
  std::vector<std::vector<int>> groups;            // user indices per group
  std::vector<std::vector<int>> pilot_assignment;  // pilot set per group
  double guard = 0.0;
  int max_group_size = 0;

  void validate(const std::vector<std::vector<AngleDelay>>& users, int M, int P,
                double eta) const;
};

/// Channel reconstruction output of one user.
enum class EstimatorKind { kLS, kMmseTrueCov, kMmseReconCov };

struct EstimateReport {
  CVec alpha_hat;
  CVec h_hat_full;  // full_band_basis(params) * alpha_hat
  EstimatorKind method = EstimatorKind::kLS;
};

/// Angle-delay distance d_U: min over path pairs of the Euclidean distance
/// between [M psi, P eta tau] feature points.
double distance_uplink(const std::vector<AngleDelay>& user1,
                       const std::vector<AngleDelay>& user2, int M, int P,
                       double eta);

/// Greedy first-fit grouping in user-index order. `pilot_budget` supplies
/// one disjoint pilot set per prospective group; running out is an error.
UserGroupPlan group_users_uplink(
    const std::vector<std::vector<AngleDelay>>& users, double guard, int kappa,
    const std::vector<std::vector<int>>& pilot_budget, int M, int P, double eta);

/// y_g = W_g^H sum_k h_k + n_g over the group's shared pilot set.
CVec simulate_group_reception(const std::vector<UserChannel>& group_users,
                              const StackedCombiner& stacked,
                              const NoiseModel& noise, const ArrayConfig& array,
                              const OfdmConfig& ofdm);

/// LS gains (W_g^H P_k)^dagger y_g via a rank-revealing least-squares solve.
CVec ls_gains_uplink(const CVec& y_g, const StackedCombiner& w_g,
                     const std::vector<AngleDelay>& params_k,
                     const ArrayConfig& array, const OfdmConfig& ofdm);

/// MMSE gains for member `which_user` of a group:
/// alpha = Lambda_k P_k^H W_g (W_g^H sum_r R_r W_g + sigma2 C_n)^{-1} y_g.
CVec mmse_gains_uplink(const CVec& y_g, const StackedCombiner& w_g,
                       const std::vector<std::vector<AngleDelay>>& group_params,
                       const std::vector<GainStats>& group_stats, int which_user,
                       double sigma2, const CMat& c_n, const ArrayConfig& array,
                       const OfdmConfig& ofdm);

/// h~ = full_band_basis(params) * alpha_hat, length M * N_c.
CVec reconstruct_full_band(const std::vector<AngleDelay>& params,
                           const CVec& alpha_hat, const ArrayConfig& array,
                           const OfdmConfig& ofdm);

/// Estimated-to-true path association by minimum-cost assignment on the d_U
/// feature metric; pairs farther than `guard` stay unmatched.
struct PathAssociation {
  std::vector<std::pair<int, int>> matches;  // (estimate index, truth index)
  std::vector<int> missed_truths;
  std::vector<int> extra_estimates;
};

PathAssociation associate_paths(const std::vector<AngleDelay>& estimates,
                                const std::vector<AngleDelay>& truths, int M,
                                int P, double eta, double guard);

/// AMSE of the physical angle theta = arcsin(psi / spacing_ratio) in rad^2,
/// averaged over truth paths; a missed truth contributes the capped penalty
/// (guard / (M * spacing_ratio))^2.
double metric_amse_angle(const std::vector<AngleDelay>& estimates,
                         const std::vector<AngleDelay>& truths,
                         const ArrayConfig& array, int P, double eta,
                         double guard);

/// AMSE of the path delay scaled by 1/T_s, averaged over truth paths; a
/// missed truth contributes (1/T_s) * (guard / (P eta))^2.
double metric_amse_delay(const std::vector<AngleDelay>& estimates,
                         const std::vector<AngleDelay>& truths,
                         const ArrayConfig& array, const OfdmConfig& ofdm,
                         int P, double guard);

/// Single-realization NMSE ||est - truth||^2 / ||truth||^2 (0 truth with 0
/// estimate gives 0; 0 truth with nonzero estimate gives +inf).
double metric_nmse(const CVec& estimate, const CVec& truth);

}  // namespace bsq

#endif  // BSQ_UPLINK_ESTIMATION_HPP
