#ifndef BSQ_DOWNLINK_PRECODING_HPP
#define BSQ_DOWNLINK_PRECODING_HPP

#include <vector>

#include "bsq/channel_model.hpp"
#include "bsq/common.hpp"
#include "bsq/hybrid_frontend.hpp"
#include "bsq/uplink_estimation.hpp"

namespace bsq {

/// FDD downlink side configuration. blocks_dl is derived from the precoder
/// (ceil(|A_orth| / N_RF)); the field here is only a cap for validation.
struct DownlinkConfig {
  double carrier_dl_hz = 28e9;
  double guard = 0.4;  // Omega_D, compared against the squared distance d_D
};

/// AoA reciprocity map: psi_D = (f_c^D / f_c) * psi; the physical angle is
/// invariant.
double psi_downlink(double psi_ul, double f_c, double f_c_d);

/// Downlink (angle-only) distance d_D: min over path pairs of
/// |M psi_1^D - M psi_2^D|^2. Squared, as defined.
double distance_downlink(const std::vector<AngleDelay>& user1,
                         const std::vector<AngleDelay>& user2, int M);

/// Greedy first-fit downlink grouping on d_D >= guard.
UserGroupPlan group_users_downlink(
    const std::vector<std::vector<AngleDelay>>& users_dl, double guard,
    int kappa, const std::vector<std::vector<int>>& pilot_budget, int M);

/// Integer DFT-beam indices (mod M): floors and ceilings of M * Xi^D over
/// every (user, path, pilot) triple, deduplicated and sorted.
std::vector<int> build_A_orth(
    const std::vector<std::vector<AngleDelay>>& group_params_dl,
    const std::vector<int>& pilot_indices, const ArrayConfig& array_dl,
    const OfdmConfig& ofdm_dl);

/// Spatial beamforming targets B_{k,q}: column l is
/// rho = exp(-j 2 pi (q-1) eta tau_l) / M * a(Xi_l^D((q-1) eta)).
CMat beamforming_target(const std::vector<AngleDelay>& params_dl, int q,
                        const ArrayConfig& array_dl, const OfdmConfig& ofdm_dl,
                        SteeringModel model = SteeringModel::kWideband);

enum class PrecoderKind {
  kProposed,      // A_orth DFT beams, per-subcarrier squint compensation
  kConventional,  // fixed per-path steering at the carrier frequency
};

/// Hybrid precoder of one downlink group: analog beams, per-subcarrier
/// diagonal digital weights, and the orthogonal pilot code C.
class PrecoderSet {
 public:
  PrecoderSet(std::vector<std::vector<AngleDelay>> group_params_dl,
              std::vector<int> pilot_indices, const ArrayConfig& array_dl,
              const OfdmConfig& ofdm_dl, PrecoderKind kind, int num_rf = 1,
              const std::vector<int>& a_orth = {});

  const CMat& f_rf() const { return f_rf_; }
  const CMat& pilot_code() const { return code_; }  // C, orthonormal rows
  const std::vector<int>& pilots() const { return pilots_; }
  int blocks_dl() const { return t_dl_; }           // T_dl
  int max_paths() const { return l_max_; }
  PrecoderKind kind() const { return kind_; }
  const std::vector<std::vector<AngleDelay>>& group_params() const {
    return group_params_;
  }

  /// Diagonal of F_BB,q for combining weights c (length max_paths()).
  CVec digital_diag(int q, const CVec& c) const;
  /// Effective transmit vector F_RF * diag(F_BB,q) * 1 for weights c.
  CVec transmit_vector(int q, const CVec& c) const;
  /// x_{p_i} per pilot with the code column c_i: the diagonal blocks of
  /// Sigma_g, as an M x P matrix.
  const CMat& sigma_blocks() const { return x_per_pilot_; }

 private:
  std::vector<std::vector<AngleDelay>> group_params_;
  std::vector<int> pilots_;
  ArrayConfig array_dl_;
  OfdmConfig ofdm_dl_;
  PrecoderKind kind_;
  int l_max_ = 0;
  int t_dl_ = 0;
  CMat f_rf_;       // M x B
  CMat pinv_f_rf_;  // B x M
  CMat code_;       // L_max x P
  CMat x_per_pilot_;
};

/// Convenience wrapper mirroring the construction contract.
PrecoderSet build_precoders(
    const std::vector<std::vector<AngleDelay>>& group_params_dl,
    const std::vector<int>& pilot_indices, const ArrayConfig& array_dl,
    const OfdmConfig& ofdm_dl, PrecoderKind kind = PrecoderKind::kProposed,
    int num_rf = 1);

/// One user's downlink pilot observations, conjugated stacking:
/// y[i] = conj(h_{k,p_i}^H x_{p_i}) + noise, noise variance sigma2 * T_dl.
CVec simulate_downlink_reception(const UserChannel& user_dl,
                                 const PrecoderSet& precoders,
                                 const NoiseModel& noise,
                                 const ArrayConfig& array_dl,
                                 const OfdmConfig& ofdm_dl);

/// LS gains (C^H)^dagger y, truncated to the user's own path count.
CVec ls_gains_downlink(const CVec& y_k, const CMat& code, int num_paths);

/// MMSE gains Lambda P^H Sigma (Sigma^H P Lambda P^H Sigma
/// + sigma2 T_dl I)^{-1} y with Sigma the per-pilot transmit blocks.
CVec mmse_gains_downlink(const CVec& y_k,
                         const std::vector<AngleDelay>& params_dl,
                         const GainStats& gain_stats, const PrecoderSet& precoders,
                         double sigma2, const ArrayConfig& array_dl,
                         const OfdmConfig& ofdm_dl);

/// |h_{k,q}^H F_RF diag(F_BB,q) 1|^2 over all subcarriers, with the
/// combining weights across paths set to all-ones.
RVec per_subcarrier_power(const UserChannel& user_dl,
                          const PrecoderSet& precoders,
                          const ArrayConfig& array_dl, const OfdmConfig& ofdm_dl);

}  // namespace bsq

#endif  // BSQ_DOWNLINK_PRECODING_HPP
