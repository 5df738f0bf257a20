#include "bsq/downlink_precoding.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bsq/rng.hpp"

namespace bsq {

double psi_downlink(double psi_ul, double f_c, double f_c_d) {
  if (f_c <= 0.0 || f_c_d <= 0.0)
    throw ConfigError("psi_downlink: carriers must be positive");
  return (f_c_d / f_c) * psi_ul;
}

double distance_downlink(const std::vector<AngleDelay>& user1,
                         const std::vector<AngleDelay>& user2, int M) {
  if (user1.empty() || user2.empty())
    throw ConfigError("distance_downlink: user with no paths");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : user1)
    for (const auto& b : user2) {
      const double d = M * (a.psi - b.psi);
      best = std::min(best, d * d);
    }
  return best;
}

UserGroupPlan group_users_downlink(
    const std::vector<std::vector<AngleDelay>>& users_dl, double guard,
    int kappa, const std::vector<std::vector<int>>& pilot_budget, int M) {
  UserGroupPlan plan;
  plan.guard = guard;
  plan.max_group_size = kappa;
  for (size_t k = 0; k < users_dl.size(); ++k) {
    bool placed = false;
    for (auto& group : plan.groups) {
      if (static_cast<int>(group.size()) >= kappa) continue;
      bool fits = true;
      for (int r : group) {
        if (distance_downlink(users_dl[k], users_dl[static_cast<size_t>(r)], M) <
            guard) {
          fits = false;
          break;
        }
      }
      if (fits) {
        group.push_back(static_cast<int>(k));
        placed = true;
        break;
      }
    }
    if (!placed) {
      if (plan.groups.size() >= pilot_budget.size())
        throw ConfigError("group_users_downlink: pilot budget exhausted");
      plan.groups.push_back({static_cast<int>(k)});
    }
  }
  plan.pilot_assignment.assign(pilot_budget.begin(),
                               pilot_budget.begin() +
                                   static_cast<std::ptrdiff_t>(plan.groups.size()));
  return plan;
}

std::vector<int> build_A_orth(
    const std::vector<std::vector<AngleDelay>>& group_params_dl,
    const std::vector<int>& pilot_indices, const ArrayConfig& array_dl,
    const OfdmConfig& ofdm_dl) {
  const int M = array_dl.num_antennas;
  auto mod_m = [M](long long v) {
    long long r = v % M;
    if (r < 0) r += M;
    return static_cast<int>(r);
  };
  std::set<int> beams;
  for (const auto& user : group_params_dl)
    for (const auto& path : user)
      for (int q : pilot_indices) {
        const double x =
            M * xi_of(path.psi, ofdm_dl.subcarrier_offset_hz(q), array_dl.carrier_hz);
        beams.insert(mod_m(static_cast<long long>(std::floor(x))));
        beams.insert(mod_m(static_cast<long long>(std::ceil(x))));
      }
  return {beams.begin(), beams.end()};
}

CMat beamforming_target(const std::vector<AngleDelay>& params_dl, int q,
                        const ArrayConfig& array_dl, const OfdmConfig& ofdm_dl,
                        SteeringModel model) {
  const int M = array_dl.num_antennas;
  const double f = ofdm_dl.subcarrier_offset_hz(q);
  CMat B(M, static_cast<Eigen::Index>(params_dl.size()));
  for (Eigen::Index l = 0; l < B.cols(); ++l) {
    const auto& path = params_dl[static_cast<size_t>(l)];
    const double xi = model == SteeringModel::kWideband
                          ? xi_of(path.psi, f, array_dl.carrier_hz)
                          : path.psi;
    const double phase = -kTwoPi * f * path.tau_s;
    B.col(l) = (cxd{std::cos(phase), std::sin(phase)} / static_cast<double>(M)) *
               steering_vector(xi, M);
  }
  return B;
}

PrecoderSet::PrecoderSet(std::vector<std::vector<AngleDelay>> group_params_dl,
                         std::vector<int> pilot_indices,
                         const ArrayConfig& array_dl, const OfdmConfig& ofdm_dl,
                         PrecoderKind kind, int num_rf,
                         const std::vector<int>& a_orth)
    : group_params_(std::move(group_params_dl)),
      pilots_(std::move(pilot_indices)),
      array_dl_(array_dl),
      ofdm_dl_(ofdm_dl),
      kind_(kind) {
  if (pilots_.empty()) throw ConfigError("PrecoderSet: empty pilot set");
  const int M = array_dl_.num_antennas;
  const int P = static_cast<int>(pilots_.size());
  for (const auto& user : group_params_)
    l_max_ = std::max(l_max_, static_cast<int>(user.size()));
  if (l_max_ > P)
    throw ConfigError("PrecoderSet: pilot count below the largest path count");

  if (kind_ == PrecoderKind::kProposed) {
    const std::vector<int> beams =
        a_orth.empty() ? build_A_orth(group_params_, pilots_, array_dl_, ofdm_dl_)
                       : a_orth;
    if (beams.empty()) throw ConfigError("PrecoderSet: empty A_orth");
    f_rf_.resize(M, static_cast<Eigen::Index>(beams.size()));
    for (Eigen::Index c = 0; c < f_rf_.cols(); ++c)
      f_rf_.col(c) = steering_vector(
          static_cast<double>(beams[static_cast<size_t>(c)]) / M, M);
    // Integer-grid DFT beams: F^H F = M I, so the pseudo-inverse is F^H / M.
    pinv_f_rf_ = f_rf_.adjoint() / static_cast<double>(M);
  } else {
    int total = 0;
    for (const auto& user : group_params_) total += static_cast<int>(user.size());
    if (total == 0) throw ConfigError("PrecoderSet: no paths in group");
    f_rf_.resize(M, total);
    Eigen::Index c = 0;
    for (const auto& user : group_params_)
      for (const auto& path : user) f_rf_.col(c++) = steering_vector(path.psi, M);
    // Per-path steering vectors are not orthogonal; use the general
    // pseudo-inverse (F^H F)^{-1} F^H.
    const CMat gram = f_rf_.adjoint() * f_rf_;
    Eigen::LDLT<CMat> fact(gram);
    pinv_f_rf_ = fact.solve(f_rf_.adjoint());
    if (!pinv_f_rf_.allFinite()) {
      CMat reg = gram;
      reg.diagonal().array() += cxd{1e-9 * std::abs(gram.trace().real()), 0.0};
      pinv_f_rf_ = Eigen::LDLT<CMat>(reg).solve(f_rf_.adjoint());
    }
  }

  // T_dl = ceil(|A_orth| / N_RF); a non-integer ratio pads the last block
  // with unused RF slots (zero digital weights).
  if (num_rf < 1) throw ConfigError("PrecoderSet: num_rf must be >= 1");
  t_dl_ = static_cast<int>((f_rf_.cols() + num_rf - 1) / num_rf);

  // Pilot code: first L_max rows of the P-point unitary DFT matrix. Rows are
  // orthonormal, so (C^H)^dagger = C.
  code_.resize(l_max_, P);
  const double scale = 1.0 / std::sqrt(static_cast<double>(P));
  for (int r = 0; r < l_max_; ++r)
    for (int c = 0; c < P; ++c) {
      const double phase = -kTwoPi * static_cast<double>(r) *
                           static_cast<double>(c) / static_cast<double>(P);
      code_(r, c) = scale * cxd{std::cos(phase), std::sin(phase)};
    }

  x_per_pilot_.resize(M, P);
  for (int i = 0; i < P; ++i)
    x_per_pilot_.col(i) = transmit_vector(pilots_[static_cast<size_t>(i)],
                                          code_.col(i));
}

CVec PrecoderSet::digital_diag(int q, const CVec& c) const {
  if (c.size() != l_max_)
    throw ConfigError("PrecoderSet::digital_diag: weight length mismatch");
  const int M = array_dl_.num_antennas;
  CVec target = CVec::Zero(M);
  for (const auto& user : group_params_) {
    if (user.empty()) continue;
    const CMat B = beamforming_target(user, q, array_dl_, ofdm_dl_,
                                      kind_ == PrecoderKind::kProposed
                                          ? SteeringModel::kWideband
                                          : SteeringModel::kNarrowband);
    // Users with fewer than L_max paths use the leading entries of c; the
    // missing columns are zero-padded.
    target += B * c.head(B.cols());
  }
  return pinv_f_rf_ * target;
}

CVec PrecoderSet::transmit_vector(int q, const CVec& c) const {
  return f_rf_ * digital_diag(q, c);
}

PrecoderSet build_precoders(
    const std::vector<std::vector<AngleDelay>>& group_params_dl,
    const std::vector<int>& pilot_indices, const ArrayConfig& array_dl,
    const OfdmConfig& ofdm_dl, PrecoderKind kind, int num_rf) {
  return PrecoderSet(group_params_dl, pilot_indices, array_dl, ofdm_dl, kind,
                     num_rf);
}

CVec simulate_downlink_reception(const UserChannel& user_dl,
                                 const PrecoderSet& precoders,
                                 const NoiseModel& noise,
                                 const ArrayConfig& array_dl,
                                 const OfdmConfig& ofdm_dl) {
  if (noise.sigma2 < 0.0) throw ConfigError("NoiseModel: sigma2 must be >= 0");
  const auto& pilots = precoders.pilots();
  CVec y(static_cast<Eigen::Index>(pilots.size()));
  Rng rng(noise.rng_seed);
  const double var = noise.sigma2 * precoders.blocks_dl();
  for (size_t i = 0; i < pilots.size(); ++i) {
    const CVec h = channel_at_subcarrier(user_dl, pilots[i], array_dl, ofdm_dl);
    const cxd rx = h.dot(precoders.sigma_blocks().col(static_cast<Eigen::Index>(i)));
    // h.dot(x) = h^H x; the observation vector stacks the conjugates.
    y[static_cast<Eigen::Index>(i)] =
        std::conj(rx) + (noise.sigma2 > 0.0 ? rng.cnormal(var) : cxd{0.0, 0.0});
  }
  return y;
}

CVec ls_gains_downlink(const CVec& y_k, const CMat& code, int num_paths) {
  if (num_paths < 0 || num_paths > code.rows())
    throw ConfigError("ls_gains_downlink: bad path count");
  const CMat ch = code.adjoint();  // P x L_max
  Eigen::ColPivHouseholderQR<CMat> qr(ch);
  if (qr.rank() < ch.cols())
    throw NumericalError("ls_gains_downlink: rank-deficient pilot code");
  const CVec all = qr.solve(y_k);
  return all.head(num_paths);
}

CVec mmse_gains_downlink(const CVec& y_k,
                         const std::vector<AngleDelay>& params_dl,
                         const GainStats& gain_stats, const PrecoderSet& precoders,
                         double sigma2, const ArrayConfig& array_dl,
                         const OfdmConfig& ofdm_dl) {
  if (params_dl.empty()) return CVec();
  if (gain_stats.mean_powers.size() != params_dl.size())
    throw ConfigError("mmse_gains_downlink: gain stats length mismatch");
  const auto& pilots = precoders.pilots();
  const int P = static_cast<int>(pilots.size());
  const int L = static_cast<int>(params_dl.size());
  // Phi = Sigma_g^H P_k^D, built block by block.
  CMat phi(P, L);
  for (int i = 0; i < P; ++i) {
    const double f = ofdm_dl.subcarrier_offset_hz(pilots[static_cast<size_t>(i)]);
    const CVec x = precoders.sigma_blocks().col(i);
    for (int l = 0; l < L; ++l) {
      const auto& path = params_dl[static_cast<size_t>(l)];
      const double xi = xi_of(path.psi, f, array_dl.carrier_hz);
      const double phase = -kTwoPi * f * path.tau_s;
      const CVec p_block =
          cxd{std::cos(phase), std::sin(phase)} *
          steering_vector(xi, array_dl.num_antennas);
      phi(i, l) = x.dot(p_block);  // x^H p
    }
  }
  RVec lam(L);
  for (int l = 0; l < L; ++l)
    lam[l] = gain_stats.mean_powers[static_cast<size_t>(l)];
  CMat inner = phi * lam.asDiagonal() * phi.adjoint();
  inner.diagonal().array() += cxd{sigma2 * precoders.blocks_dl(), 0.0};
  Eigen::LDLT<CMat> fact(inner);
  CVec z = fact.solve(y_k);
  if (fact.info() != Eigen::Success || !z.allFinite()) {
    const double floor = 1e-12 * std::max(1.0, std::abs(inner.trace().real()));
    inner.diagonal().array() += cxd{floor, 0.0};
    fact.compute(inner);
    z = fact.solve(y_k);
    if (!z.allFinite())
      throw NumericalError("mmse_gains_downlink: singular inner matrix");
  }
  return lam.asDiagonal() * (phi.adjoint() * z);
}

RVec per_subcarrier_power(const UserChannel& user_dl,
                          const PrecoderSet& precoders,
                          const ArrayConfig& array_dl, const OfdmConfig& ofdm_dl) {
  RVec power(ofdm_dl.num_subcarriers);
  const CVec ones = CVec::Ones(precoders.max_paths());
  for (int q = 1; q <= ofdm_dl.num_subcarriers; ++q) {
    const CVec x = precoders.transmit_vector(q, ones);
    const CVec h = channel_at_subcarrier(user_dl, q, array_dl, ofdm_dl);
    power[q - 1] = std::norm(h.dot(x));
  }
  return power;
}

}  // namespace bsq
