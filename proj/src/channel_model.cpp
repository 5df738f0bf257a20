#include "bsq/channel_model.hpp"

#include <cmath>

namespace bsq {

void ArrayConfig::validate() const {
  if (num_antennas < 1) throw ConfigError("ArrayConfig: num_antennas must be >= 1");
  if (spacing_ratio <= 0.0) throw ConfigError("ArrayConfig: spacing_ratio must be > 0");
  if (carrier_hz <= 0.0) throw ConfigError("ArrayConfig: carrier_hz must be > 0");
}

void OfdmConfig::validate() const {
  if (num_subcarriers < 1) throw ConfigError("OfdmConfig: num_subcarriers must be >= 1");
  if (bandwidth_hz <= 0.0) throw ConfigError("OfdmConfig: bandwidth_hz must be > 0");
}

std::vector<AngleDelay> UserChannel::angle_delays() const {
  std::vector<AngleDelay> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(p.angle_delay());
  return out;
}

CVec UserChannel::gains() const {
  CVec g(static_cast<Eigen::Index>(paths.size()));
  for (Eigen::Index l = 0; l < g.size(); ++l) g[l] = paths[static_cast<size_t>(l)].alpha;
  return g;
}

double xi_of(double psi, double f_offset_hz, double carrier_hz) {
  return (1.0 + f_offset_hz / carrier_hz) * psi;
}

CVec steering_vector(double xi, int num_antennas) {
  CVec a(num_antennas);
  for (int m = 0; m < num_antennas; ++m) {
    const double phase = -kTwoPi * static_cast<double>(m) * xi;
    a[m] = cxd{std::cos(phase), std::sin(phase)};
  }
  return a;
}

namespace {

void check_subcarrier(int q, const OfdmConfig& ofdm) {
  if (q < 1 || q > ofdm.num_subcarriers)
    throw ConfigError("subcarrier index out of range: q=" + std::to_string(q));
}

double steering_angle(double psi, double f_offset_hz, double carrier_hz,
                      SteeringModel model) {
  return model == SteeringModel::kWideband ? xi_of(psi, f_offset_hz, carrier_hz)
                                           : psi;
}

CVec synthesize_at_subcarrier(const UserChannel& user, int q,
                              const ArrayConfig& array, const OfdmConfig& ofdm,
                              SteeringModel model) {
  check_subcarrier(q, ofdm);
  const double f = ofdm.subcarrier_offset_hz(q);
  CVec h = CVec::Zero(array.num_antennas);
  for (const auto& path : user.paths) {
    const double xi = steering_angle(path.psi, f, array.carrier_hz, model);
    const double dphase = -kTwoPi * f * path.tau_s;
    const cxd delay_phase{std::cos(dphase), std::sin(dphase)};
    h += path.alpha * delay_phase * steering_vector(xi, array.num_antennas);
  }
  return h;
}

}  // namespace

CVec channel_at_subcarrier(const UserChannel& user, int q,
                           const ArrayConfig& array, const OfdmConfig& ofdm) {
  return synthesize_at_subcarrier(user, q, array, ofdm, SteeringModel::kWideband);
}

CVec narrowband_channel_at_subcarrier(const UserChannel& user, int q,
                                      const ArrayConfig& array,
                                      const OfdmConfig& ofdm) {
  return synthesize_at_subcarrier(user, q, array, ofdm, SteeringModel::kNarrowband);
}

CVec channel_basis_p(double psi, double tau_s,
                     const std::vector<int>& pilot_indices,
                     const ArrayConfig& array, const OfdmConfig& ofdm,
                     SteeringModel model) {
  if (pilot_indices.empty()) throw ConfigError("channel_basis_p: empty pilot set");
  const int M = array.num_antennas;
  CVec p(static_cast<Eigen::Index>(pilot_indices.size()) * M);
  Eigen::Index row = 0;
  for (int q : pilot_indices) {
    check_subcarrier(q, ofdm);
    const double f = ofdm.subcarrier_offset_hz(q);
    const double xi = steering_angle(psi, f, array.carrier_hz, model);
    const double dphase = -kTwoPi * f * tau_s;
    const cxd delay_phase{std::cos(dphase), std::sin(dphase)};
    p.segment(row, M) = delay_phase * steering_vector(xi, M);
    row += M;
  }
  return p;
}

CMat basis_matrix_P(const std::vector<AngleDelay>& params,
                    const std::vector<int>& pilot_indices,
                    const ArrayConfig& array, const OfdmConfig& ofdm,
                    SteeringModel model) {
  if (pilot_indices.empty()) throw ConfigError("basis_matrix_P: empty pilot set");
  const Eigen::Index rows =
      static_cast<Eigen::Index>(pilot_indices.size()) * array.num_antennas;
  CMat P(rows, static_cast<Eigen::Index>(params.size()));
  for (Eigen::Index l = 0; l < P.cols(); ++l) {
    const auto& ad = params[static_cast<size_t>(l)];
    P.col(l) = channel_basis_p(ad.psi, ad.tau_s, pilot_indices, array, ofdm, model);
  }
  return P;
}

CMat full_band_basis(const std::vector<AngleDelay>& params,
                     const ArrayConfig& array, const OfdmConfig& ofdm,
                     SteeringModel model) {
  return basis_matrix_P(params, all_subcarriers(ofdm), array, ofdm, model);
}

CVec virtual_angle_spectrum(const CVec& h) {
  const Eigen::Index M = h.size();
  CVec out(M);
  const double scale = 1.0 / std::sqrt(static_cast<double>(M));
  for (Eigen::Index v = 0; v < M; ++v) {
    cxd acc{0.0, 0.0};
    for (Eigen::Index m = 0; m < M; ++m) {
      // Conjugate-transposed DFT entry: exp(+j 2 pi v m / M) / sqrt(M).
      const double phase = kTwoPi * static_cast<double>(v) *
                           static_cast<double>(m) / static_cast<double>(M);
      acc += cxd{std::cos(phase), std::sin(phase)} * h[m];
    }
    out[v] = acc * scale;
  }
  return out;
}

SquintSpan squint_span_samples(double psi, const ArrayConfig& array,
                               const OfdmConfig& ofdm) {
  const double M = static_cast<double>(array.num_antennas);
  const double eta = ofdm.subcarrier_spacing_hz();
  const double bins = M * psi * (static_cast<double>(ofdm.num_subcarriers) - 1.0) *
                      eta / array.carrier_hz;
  // d sin(theta) = psi * lambda_c, so tau_prop = (M-1) psi / f_c.
  const double prop_delay = (M - 1.0) * psi / array.carrier_hz;
  return {bins, prop_delay};
}

CMat covariance_reconstruct(const std::vector<AngleDelay>& params,
                            const GainStats& gain_stats,
                            const std::vector<int>& pilot_indices,
                            const ArrayConfig& array, const OfdmConfig& ofdm) {
  if (gain_stats.mean_powers.size() != params.size())
    throw ConfigError("covariance_reconstruct: gain_stats length mismatch");
  const CMat P = basis_matrix_P(params, pilot_indices, array, ofdm);
  RVec lam(static_cast<Eigen::Index>(params.size()));
  for (Eigen::Index l = 0; l < lam.size(); ++l) {
    const double p = gain_stats.mean_powers[static_cast<size_t>(l)];
    if (p < 0.0) throw ConfigError("covariance_reconstruct: negative mean power");
    lam[l] = p;
  }
  return P * lam.asDiagonal() * P.adjoint();
}

std::vector<int> all_subcarriers(const OfdmConfig& ofdm) {
  std::vector<int> qs(static_cast<size_t>(ofdm.num_subcarriers));
  for (int q = 1; q <= ofdm.num_subcarriers; ++q) qs[static_cast<size_t>(q - 1)] = q;
  return qs;
}

}  // namespace bsq
