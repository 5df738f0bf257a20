#ifndef BSQ_CHANNEL_MODEL_HPP
#define BSQ_CHANNEL_MODEL_HPP

#include <vector>

#include "bsq/common.hpp"

namespace bsq {

/// Uniform linear array at the base station. `spacing_ratio` is the antenna
/// spacing in wavelengths of this link's own carrier (d / lambda_c).
struct ArrayConfig {
  int num_antennas = 1;        // M
  double spacing_ratio = 0.5;  // d / lambda_c
  double carrier_hz = 28e9;    // f_c

  void validate() const;
};

/// OFDM grid. Subcarrier spacing and sample period are derived, never stored,
/// so eta * N_c == W holds exactly.
struct OfdmConfig {
  int num_subcarriers = 256;  // N_c
  double bandwidth_hz = 600e6;

  double subcarrier_spacing_hz() const {
    return bandwidth_hz / static_cast<double>(num_subcarriers);
  }
  double sample_period_s() const { return 1.0 / bandwidth_hz; }
  /// Frequency offset of subcarrier q (1-based) from the carrier.
  double subcarrier_offset_hz(int q) const {
    return static_cast<double>(q - 1) * subcarrier_spacing_hz();
  }

  void validate() const;
};

/// Angle/delay pair of one propagation path, without the gain. The gridless
/// extractor and the estimators work on lists of these.
struct AngleDelay {
  double psi = 0.0;    // normalized AoA, (d/lambda_c) * sin(theta)
  double tau_s = 0.0;  // delay at the first antenna, seconds
};

/// One propagation path: normalized AoA, first-antenna delay, equivalent
/// complex gain.
struct PathParams {
  double psi = 0.0;
  double tau_s = 0.0;
  cxd alpha = {0.0, 0.0};

  AngleDelay angle_delay() const { return {psi, tau_s}; }
};

/// Multipath channel of one user. Zero paths is legal and synthesizes the
/// zero channel.
struct UserChannel {
  std::vector<PathParams> paths;

  std::vector<AngleDelay> angle_delays() const;
  CVec gains() const;
};

/// Per-path average powers (diagonal of Lambda_k).
struct GainStats {
  std::vector<double> mean_powers;
};

/// Steering model selector: the exact wideband model carries the
/// frequency-dependent angle Xi(f) = (1 + f/f_c) psi; the narrowband baseline
/// freezes the steering vector at the carrier (Xi = psi) while keeping the
/// per-subcarrier delay phase.
enum class SteeringModel { kWideband, kNarrowband };

/// Frequency-dependent virtual angle Xi(f) = (1 + f/f_c) * psi.
double xi_of(double psi, double f_offset_hz, double carrier_hz);

/// a(xi): element m (1-based) is exp(-j 2 pi (m-1) xi).
CVec steering_vector(double xi, int num_antennas);

/// Exact wideband channel h_{k,q} at subcarrier q (1-based).
CVec channel_at_subcarrier(const UserChannel& user, int q,
                           const ArrayConfig& array, const OfdmConfig& ofdm);

/// Squint-ignoring baseline: steering frozen at the carrier frequency.
CVec narrowband_channel_at_subcarrier(const UserChannel& user, int q,
                                      const ArrayConfig& array,
                                      const OfdmConfig& ofdm);

/// Channel basis p(psi, tau): stack over the pilot set of
/// a(Xi((p-1) eta)) * exp(-j 2 pi (p-1) eta tau). Length M * P.
CVec channel_basis_p(double psi, double tau_s,
                     const std::vector<int>& pilot_indices,
                     const ArrayConfig& array, const OfdmConfig& ofdm,
                     SteeringModel model = SteeringModel::kWideband);

/// Column-stacked channel bases, one column per path. Size MP x L.
CMat basis_matrix_P(const std::vector<AngleDelay>& params,
                    const std::vector<int>& pilot_indices,
                    const ArrayConfig& array, const OfdmConfig& ofdm,
                    SteeringModel model = SteeringModel::kWideband);

/// Basis over all N_c subcarriers (pilot set = 1..N_c). Size M*N_c x L.
CMat full_band_basis(const std::vector<AngleDelay>& params,
                     const ArrayConfig& array, const OfdmConfig& ofdm,
                     SteeringModel model = SteeringModel::kWideband);

/// F_M^H h with F_M the M-point normalized DFT matrix, entries
/// exp(-j 2 pi m n / M) / sqrt(M). Unitary; a steering vector a(v/M) with
/// integer v maps to sqrt(M) * e_{v+1}, so a path at psi peaks near bin
/// M*psi (mod M).
CVec virtual_angle_spectrum(const CVec& h);

/// Beam squint span of a single path and its companion physical quantity.
struct SquintSpan {
  double bins;         // |v_{Nc} - v_1| = M psi (N_c - 1) eta / f_c, exact
  double prop_delay_s; // tau_prop = (M-1) d sin(theta) / c
};

SquintSpan squint_span_samples(double psi, const ArrayConfig& array,
                               const OfdmConfig& ofdm);

/// R = P diag(mean_powers) P^H over the pilot set; Hermitian PSD, rank <= L.
CMat covariance_reconstruct(const std::vector<AngleDelay>& params,
                            const GainStats& gain_stats,
                            const std::vector<int>& pilot_indices,
                            const ArrayConfig& array, const OfdmConfig& ofdm);

/// All subcarrier indices 1..N_c, for full-band pilot sets.
std::vector<int> all_subcarriers(const OfdmConfig& ofdm);

}  // namespace bsq

#endif  // BSQ_CHANNEL_MODEL_HPP
