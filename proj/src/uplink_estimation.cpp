#include "bsq/uplink_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace bsq {

namespace {

/// Square min-cost assignment (Hungarian algorithm with potentials).
/// Returns the column assigned to each row.
std::vector<int> hungarian(const RMat& cost) {
  const int n = static_cast<int>(cost.rows());
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(n) + 1, 0);  // col -> row (1-based)
  std::vector<int> way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = match[static_cast<size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                           v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (match[static_cast<size_t>(j)] > 0)
      row_to_col[static_cast<size_t>(match[static_cast<size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

double feature_distance(const AngleDelay& a, const AngleDelay& b, int M, int P,
                        double eta) {
  const double dpsi = M * (a.psi - b.psi);
  const double dtau = P * eta * (a.tau_s - b.tau_s);
  return std::hypot(dpsi, dtau);
}

}  // namespace

void UserGroupPlan::validate(const std::vector<std::vector<AngleDelay>>& users,
                             int M, int P, double eta) const {
  std::vector<int> seen(users.size(), 0);
  if (pilot_assignment.size() != groups.size())
    throw ConfigError("UserGroupPlan: pilot assignment count mismatch");
  std::set<int> used_pilots;
  for (size_t g = 0; g < groups.size(); ++g) {
    if (static_cast<int>(groups[g].size()) > max_group_size)
      throw ConfigError("UserGroupPlan: group exceeds max size");
    for (int p : pilot_assignment[g])
      if (!used_pilots.insert(p).second)
        throw ConfigError("UserGroupPlan: pilot sets not disjoint");
    for (size_t a = 0; a < groups[g].size(); ++a) {
      const int ka = groups[g][a];
      seen.at(static_cast<size_t>(ka)) += 1;
      for (size_t b = a + 1; b < groups[g].size(); ++b) {
        const int kb = groups[g][b];
        if (distance_uplink(users[static_cast<size_t>(ka)],
                            users[static_cast<size_t>(kb)], M, P, eta) < guard)
          throw ConfigError("UserGroupPlan: guard violated inside a group");
      }
    }
  }
  for (int count : seen)
    if (count != 1) throw ConfigError("UserGroupPlan: groups do not partition users");
}

double distance_uplink(const std::vector<AngleDelay>& user1,
                       const std::vector<AngleDelay>& user2, int M, int P,
                       double eta) {
  if (user1.empty() || user2.empty())
    throw ConfigError("distance_uplink: user with no paths");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : user1)
    for (const auto& b : user2)
      best = std::min(best, feature_distance(a, b, M, P, eta));
  return best;
}

UserGroupPlan group_users_uplink(
    const std::vector<std::vector<AngleDelay>>& users, double guard, int kappa,
    const std::vector<std::vector<int>>& pilot_budget, int M, int P, double eta) {
  UserGroupPlan plan;
  plan.guard = guard;
  plan.max_group_size = kappa;
  for (size_t k = 0; k < users.size(); ++k) {
    bool placed = false;
    for (auto& group : plan.groups) {
      if (static_cast<int>(group.size()) >= kappa) continue;
      bool fits = true;
      for (int r : group) {
        if (distance_uplink(users[k], users[static_cast<size_t>(r)], M, P, eta) <
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
        throw ConfigError("group_users_uplink: pilot budget exhausted");
      plan.groups.push_back({static_cast<int>(k)});
    }
  }
  plan.pilot_assignment.assign(pilot_budget.begin(),
                               pilot_budget.begin() +
                                   static_cast<std::ptrdiff_t>(plan.groups.size()));
  return plan;
}

CVec simulate_group_reception(const std::vector<UserChannel>& group_users,
                              const StackedCombiner& stacked,
                              const NoiseModel& noise, const ArrayConfig& array,
                              const OfdmConfig& ofdm) {
  // The superposition of member channels is the channel whose path list is
  // the concatenation of the members' paths.
  UserChannel combined;
  for (const auto& user : group_users)
    combined.paths.insert(combined.paths.end(), user.paths.begin(),
                          user.paths.end());
  return simulate_uplink_reception(combined, stacked, noise, array, ofdm);
}

CVec ls_gains_uplink(const CVec& y_g, const StackedCombiner& w_g,
                     const std::vector<AngleDelay>& params_k,
                     const ArrayConfig& array, const OfdmConfig& ofdm) {
  if (params_k.empty()) return CVec();
  const CMat P = basis_matrix_P(params_k, w_g.pilot_indices, array, ofdm);
  CMat A(w_g.meas_dim(), P.cols());
  for (Eigen::Index l = 0; l < P.cols(); ++l)
    A.col(l) = w_g.apply_adjoint(P.col(l));
  Eigen::ColPivHouseholderQR<CMat> qr(A);
  if (qr.rank() < A.cols())
    throw NumericalError("ls_gains_uplink: rank-deficient design (paths too "
                         "close or too few measurements)");
  return qr.solve(y_g);
}

CVec mmse_gains_uplink(const CVec& y_g, const StackedCombiner& w_g,
                       const std::vector<std::vector<AngleDelay>>& group_params,
                       const std::vector<GainStats>& group_stats, int which_user,
                       double sigma2, const CMat& c_n, const ArrayConfig& array,
                       const OfdmConfig& ofdm) {
  if (sigma2 < 0.0) throw ConfigError("mmse_gains_uplink: negative sigma2");
  if (group_params.size() != group_stats.size())
    throw ConfigError("mmse_gains_uplink: params/stats length mismatch");
  const int n = w_g.meas_dim();
  CMat inner = sigma2 * c_n;
  CMat a_own;
  for (size_t r = 0; r < group_params.size(); ++r) {
    if (group_params[r].empty()) continue;
    const CMat P = basis_matrix_P(group_params[r], w_g.pilot_indices, array, ofdm);
    CMat A(n, P.cols());
    for (Eigen::Index l = 0; l < P.cols(); ++l)
      A.col(l) = w_g.apply_adjoint(P.col(l));
    if (group_stats[r].mean_powers.size() != static_cast<size_t>(P.cols()))
      throw ConfigError("mmse_gains_uplink: gain stats length mismatch");
    RVec lam(P.cols());
    for (Eigen::Index l = 0; l < lam.size(); ++l)
      lam[l] = group_stats[r].mean_powers[static_cast<size_t>(l)];
    inner.noalias() += A * lam.asDiagonal() * A.adjoint();
    if (static_cast<int>(r) == which_user) a_own = std::move(A);
  }
  const auto& own_params = group_params.at(static_cast<size_t>(which_user));
  if (own_params.empty()) return CVec();

  Eigen::LDLT<CMat> fact(inner);
  CVec z = fact.solve(y_g);
  if (fact.info() != Eigen::Success || !z.allFinite()) {
    // Singular at sigma2 = 0 with rank-deficient covariance: regularized
    // solve with a trace-scaled floor.
    const double floor = 1e-12 * std::max(1.0, std::abs(inner.trace().real()));
    inner.diagonal().array() += cxd{floor, 0.0};
    fact.compute(inner);
    z = fact.solve(y_g);
    if (!z.allFinite())
      throw NumericalError("mmse_gains_uplink: singular inner matrix");
  }
  RVec lam_own(a_own.cols());
  for (Eigen::Index l = 0; l < lam_own.size(); ++l)
    lam_own[l] =
        group_stats[static_cast<size_t>(which_user)].mean_powers[static_cast<size_t>(l)];
  return lam_own.asDiagonal() * (a_own.adjoint() * z);
}

CVec reconstruct_full_band(const std::vector<AngleDelay>& params,
                           const CVec& alpha_hat, const ArrayConfig& array,
                           const OfdmConfig& ofdm) {
  const Eigen::Index rows =
      static_cast<Eigen::Index>(array.num_antennas) * ofdm.num_subcarriers;
  if (params.empty()) return CVec::Zero(rows);
  if (static_cast<Eigen::Index>(params.size()) != alpha_hat.size())
    throw ConfigError("reconstruct_full_band: params/gains length mismatch");
  return full_band_basis(params, array, ofdm) * alpha_hat;
}

PathAssociation associate_paths(const std::vector<AngleDelay>& estimates,
                                const std::vector<AngleDelay>& truths, int M,
                                int P, double eta, double guard) {
  PathAssociation out;
  const int ne = static_cast<int>(estimates.size());
  const int nt = static_cast<int>(truths.size());
  const int n = std::max(ne, nt);
  if (n == 0) return out;
  // Square cost matrix; matching a dummy row/column costs exactly the guard,
  // so a real pair farther than the guard prefers to stay unmatched.
  RMat cost = RMat::Constant(n, n, guard);
  for (int e = 0; e < ne; ++e)
    for (int t = 0; t < nt; ++t)
      cost(e, t) = feature_distance(estimates[static_cast<size_t>(e)],
                                    truths[static_cast<size_t>(t)], M, P, eta);
  const std::vector<int> row_to_col = hungarian(cost);
  std::vector<char> truth_matched(static_cast<size_t>(nt), 0);
  for (int e = 0; e < ne; ++e) {
    const int t = row_to_col[static_cast<size_t>(e)];
    if (t >= 0 && t < nt && cost(e, t) < guard) {
      out.matches.emplace_back(e, t);
      truth_matched[static_cast<size_t>(t)] = 1;
    } else {
      out.extra_estimates.push_back(e);
    }
  }
  for (int t = 0; t < nt; ++t)
    if (!truth_matched[static_cast<size_t>(t)]) out.missed_truths.push_back(t);
  return out;
}

namespace {

double physical_angle(double psi, double spacing_ratio) {
  return std::asin(std::clamp(psi / spacing_ratio, -1.0, 1.0));
}

}  // namespace

double metric_amse_angle(const std::vector<AngleDelay>& estimates,
                         const std::vector<AngleDelay>& truths,
                         const ArrayConfig& array, int P, double eta,
                         double guard) {
  if (truths.empty()) return 0.0;
  const auto assoc = associate_paths(estimates, truths, array.num_antennas, P,
                                     eta, guard);
  const double penalty =
      guard / (static_cast<double>(array.num_antennas) * array.spacing_ratio);
  double acc = 0.0;
  for (const auto& [e, t] : assoc.matches) {
    const double err =
        physical_angle(estimates[static_cast<size_t>(e)].psi, array.spacing_ratio) -
        physical_angle(truths[static_cast<size_t>(t)].psi, array.spacing_ratio);
    acc += std::min(err * err, penalty * penalty);
  }
  acc += static_cast<double>(assoc.missed_truths.size()) * penalty * penalty;
  return acc / static_cast<double>(truths.size());
}

double metric_amse_delay(const std::vector<AngleDelay>& estimates,
                         const std::vector<AngleDelay>& truths,
                         const ArrayConfig& array, const OfdmConfig& ofdm,
                         int P, double guard) {
  if (truths.empty()) return 0.0;
  const double eta = ofdm.subcarrier_spacing_hz();
  const auto assoc =
      associate_paths(estimates, truths, array.num_antennas, P, eta, guard);
  const double penalty = guard / (static_cast<double>(P) * eta);  // seconds
  double acc = 0.0;
  for (const auto& [e, t] : assoc.matches) {
    const double err = estimates[static_cast<size_t>(e)].tau_s -
                       truths[static_cast<size_t>(t)].tau_s;
    acc += std::min(err * err, penalty * penalty);
  }
  acc += static_cast<double>(assoc.missed_truths.size()) * penalty * penalty;
  return acc / (static_cast<double>(truths.size()) * ofdm.sample_period_s());
}

double metric_nmse(const CVec& estimate, const CVec& truth) {
  const double den = truth.squaredNorm();
  const double num = (estimate - truth).squaredNorm();
  if (den <= 0.0)
    return num <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace bsq
