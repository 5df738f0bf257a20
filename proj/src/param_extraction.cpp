#include "bsq/param_extraction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace bsq {

namespace {

cxd unit_phasor(double phase) { return {std::cos(phase), std::sin(phase)}; }

/// Solve (Hermitian positive definite) sys * x = rhs with one jittered retry.
CVec solve_hpd(CMat sys, const CVec& rhs, const char* who) {
  Eigen::LDLT<CMat> fact(sys);
  CVec x = fact.solve(rhs);
  if (fact.info() == Eigen::Success && x.allFinite()) return x;
  const double scale = std::max(1.0, std::abs(sys.trace().real()) /
                                         static_cast<double>(sys.rows()));
  sys.diagonal().array() += cxd{1e-12 * scale, 0.0};
  fact.compute(sys);
  x = fact.solve(rhs);
  if (x.allFinite()) return x;
  throw NumericalError(std::string(who) + ": ill-conditioned linear system");
}

}  // namespace

MeasurementContext::MeasurementContext(const StackedCombiner& combiner,
                                       const ArrayConfig& array,
                                       const OfdmConfig& ofdm,
                                       SteeringModel basis, double tau_max_s)
    : combiner_(&combiner), array_(array), ofdm_(ofdm), basis_(basis) {
  array_.validate();
  ofdm_.validate();
  const double eta = ofdm_.subcarrier_spacing_hz();
  // Default search box: 1.5x the 300 ns delay-spread scale, kept inside the
  // unambiguous range of the subcarrier grid.
  tau_max_s_ = tau_max_s > 0.0 ? tau_max_s : std::min(450e-9, 0.9 / eta);
  const int M = array_.num_antennas;
  for (int q : combiner.pilot_indices)
    pilot_offsets_hz_.push_back(ofdm_.subcarrier_offset_hz(q));
  for (int i = 0; i < combiner.num_pilots(); ++i) {
    wh_per_pilot_.push_back(combiner.wq(i).adjoint());
    const CMat gram = combiner.wq(i) * combiner.wq(i).adjoint();  // M x M
    CVec sums = CVec::Zero(M);
    for (int d = 0; d < M; ++d)
      for (int m = d; m < M; ++m) sums[d] += gram(m, m - d);
    gram_diag_sums_.push_back(std::move(sums));
  }
}

CVec MeasurementContext::atom(double psi, double tau_s) const {
  const int M = array_.num_antennas;
  const int cols = combiner_->cols_per_pilot();
  CVec out(meas_dim());
  CVec steer(M);
  for (size_t i = 0; i < pilot_offsets_hz_.size(); ++i) {
    const double f = pilot_offsets_hz_[i];
    const double xi = basis_ == SteeringModel::kWideband
                          ? xi_of(psi, f, array_.carrier_hz)
                          : psi;
    const cxd step = unit_phasor(-kTwoPi * xi);
    const cxd delay = unit_phasor(-kTwoPi * f * tau_s);
    cxd ph = delay;
    for (int m = 0; m < M; ++m) {
      steer[m] = ph;
      ph *= step;
    }
    out.segment(static_cast<Eigen::Index>(i) * cols, cols) =
        wh_per_pilot_[i] * steer;
  }
  return out;
}

void MeasurementContext::atom_with_derivs(double psi, double tau_s, CVec& a,
                                          CVec& dpsi, CVec& dtau) const {
  const int M = array_.num_antennas;
  const int cols = combiner_->cols_per_pilot();
  a.resize(meas_dim());
  dpsi.resize(meas_dim());
  dtau.resize(meas_dim());
  CVec steer(M), steer_dpsi(M);
  for (size_t i = 0; i < pilot_offsets_hz_.size(); ++i) {
    const double f = pilot_offsets_hz_[i];
    const double squint = basis_ == SteeringModel::kWideband
                              ? 1.0 + f / array_.carrier_hz
                              : 1.0;
    const double xi = squint * psi;
    const cxd step = unit_phasor(-kTwoPi * xi);
    const cxd delay = unit_phasor(-kTwoPi * f * tau_s);
    cxd ph = delay;
    for (int m = 0; m < M; ++m) {
      steer[m] = ph;
      // d/dpsi of exp(-j 2 pi m squint psi) pulls down -j 2 pi m squint.
      steer_dpsi[m] = cxd{0.0, -kTwoPi * squint * static_cast<double>(m)} * ph;
      ph *= step;
    }
    const Eigen::Index off = static_cast<Eigen::Index>(i) * cols;
    a.segment(off, cols) = wh_per_pilot_[i] * steer;
    dpsi.segment(off, cols) = wh_per_pilot_[i] * steer_dpsi;
    // d/dtau pulls down -j 2 pi f from the delay phase, uniform per pilot.
    dtau.segment(off, cols) = cxd{0.0, -kTwoPi * f} * a.segment(off, cols);
  }
}

CMat MeasurementContext::design(const RVec& psi, const RVec& tau) const {
  if (psi.size() != tau.size())
    throw ConfigError("MeasurementContext::design: psi/tau length mismatch");
  CMat A(meas_dim(), psi.size());
  for (Eigen::Index l = 0; l < psi.size(); ++l) A.col(l) = atom(psi[l], tau[l]);
  return A;
}

void MeasurementContext::seed_atoms(const CVec& y, int max_atoms,
                                    int angle_oversample,
                                    double delay_oversample, RVec& psi0,
                                    RVec& tau0) const {
  const int M = array_.num_antennas;
  const int P = combiner_->num_pilots();
  const int cols = combiner_->cols_per_pilot();
  const double bound = psi_bound();

  const int npsi = std::max(16, angle_oversample * M);
  const double psi_step = 2.0 * bound / npsi;
  const double tau_step = ofdm_.sample_period_s() / delay_oversample;
  const int ntau = std::max(2, static_cast<int>(tau_max_s_ / tau_step) + 1);

  std::vector<double> psis, taus;
  psis.clear();
  taus.clear();
  std::vector<cxd> corr_step(static_cast<size_t>(P));
  for (int i = 0; i < P; ++i)
    corr_step[static_cast<size_t>(i)] =
        unit_phasor(kTwoPi * pilot_offsets_hz_[static_cast<size_t>(i)] * tau_step);

  CVec r = y;
  CMat picked(meas_dim(), 0);
  for (int pick = 0; pick < max_atoms; ++pick) {
    const double r_energy = r.squaredNorm();
    if (r_energy <= 0.0) break;
    // Per-pilot back-projected residual u_i = W_i r_i.
    std::vector<CVec> u(static_cast<size_t>(P));
    for (int i = 0; i < P; ++i)
      u[static_cast<size_t>(i)] =
          wh_per_pilot_[static_cast<size_t>(i)].adjoint() *
          r.segment(static_cast<Eigen::Index>(i) * cols, cols);

    double best_score = -1.0, best_psi = 0.0, best_tau = 0.0;
    std::vector<cxd> g(static_cast<size_t>(P));
    for (int jp = 0; jp < npsi; ++jp) {
      const double psi = -bound + (jp + 0.5) * psi_step;
      double norm2 = 0.0;
      for (int i = 0; i < P; ++i) {
        const double f = pilot_offsets_hz_[static_cast<size_t>(i)];
        const double xi = basis_ == SteeringModel::kWideband
                              ? xi_of(psi, f, array_.carrier_hz)
                              : psi;
        const cxd fwd = unit_phasor(kTwoPi * xi);
        // g_i = a(xi)^H u_i via a running phasor.
        cxd acc{0.0, 0.0};
        cxd ph{1.0, 0.0};
        const CVec& ui = u[static_cast<size_t>(i)];
        for (int m = 0; m < M; ++m) {
          acc += ph * ui[m];
          ph *= fwd;
        }
        g[static_cast<size_t>(i)] = acc;
        // ||W_i^H a||^2 from the Toeplitz diagonal sums of W_i W_i^H.
        const CVec& sums = gram_diag_sums_[static_cast<size_t>(i)];
        double n2 = sums[0].real();
        cxd phd = fwd;
        for (int d = 1; d < M; ++d) {
          n2 += 2.0 * (sums[d] * phd).real();
          phd *= fwd;
        }
        norm2 += n2;
      }
      if (norm2 <= 1e-12) continue;
      // Delay sweep with running phasors per pilot.
      std::vector<cxd> ph(static_cast<size_t>(P), cxd{1.0, 0.0});
      for (int jt = 0; jt < ntau; ++jt) {
        cxd corr{0.0, 0.0};
        for (int i = 0; i < P; ++i) {
          corr += g[static_cast<size_t>(i)] * ph[static_cast<size_t>(i)];
          ph[static_cast<size_t>(i)] *= corr_step[static_cast<size_t>(i)];
        }
        const double score = std::norm(corr) / norm2;
        if (score > best_score) {
          best_score = score;
          best_psi = psi;
          best_tau = jt * tau_step;
        }
      }
    }
    if (best_score < 0.0) break;
    // Local parabolic refinement with exact atoms, one pass per coordinate.
    auto exact_score = [&](double p, double t) {
      const CVec a = atom(p, t);
      const double n2 = a.squaredNorm();
      return n2 > 0.0 ? std::norm(a.dot(r)) / n2 : 0.0;
    };
    auto refine = [&](double& x, double h, double lo, double hi, bool is_psi) {
      const double xm = std::max(lo, x - h), xp = std::min(hi, x + h);
      const double sm = is_psi ? exact_score(xm, best_tau) : exact_score(best_psi, xm);
      const double s0 = is_psi ? exact_score(x, best_tau) : exact_score(best_psi, x);
      const double sp = is_psi ? exact_score(xp, best_tau) : exact_score(best_psi, xp);
      const double denom = sm - 2.0 * s0 + sp;
      if (denom < 0.0) {
        const double delta = 0.5 * (sm - sp) / denom;
        if (std::abs(delta) <= 1.0) x = std::clamp(x + delta * h, lo, hi);
      }
    };
    refine(best_psi, psi_step, -bound, bound, true);
    refine(best_tau, tau_step, 0.0, tau_max_s_, false);

    // Keep only atoms that explain a meaningful share of the residual.
    const double share = exact_score(best_psi, best_tau) / r_energy;
    if (pick > 0 && share < 0.01) break;

    psis.push_back(best_psi);
    taus.push_back(best_tau);
    picked.conservativeResize(Eigen::NoChange, picked.cols() + 1);
    picked.col(picked.cols() - 1) = atom(best_psi, best_tau);
    const CVec beta_ls = picked.colPivHouseholderQr().solve(y);
    r = y - picked * beta_ls;
  }

  psi0.resize(static_cast<Eigen::Index>(psis.size()));
  tau0.resize(static_cast<Eigen::Index>(taus.size()));
  for (Eigen::Index l = 0; l < psi0.size(); ++l) {
    psi0[l] = psis[static_cast<size_t>(l)];
    tau0[l] = taus[static_cast<size_t>(l)];
  }
}

void ExtractionConfig::validate() const {
  if (max_paths < 1) throw ConfigError("ExtractionConfig: max_paths must be >= 1");
  if (lambda0 < 0.0 || lambda_min <= 0.0)
    throw ConfigError("ExtractionConfig: lambda0 must be >= 0 (0 = auto) and "
                      "lambda_min > 0");
  if (epsilon_min > epsilon_init)
    throw ConfigError("ExtractionConfig: epsilon_min must not exceed epsilon_init");
  if (beta_min <= 0.0 || gamma_T <= 0.0)
    throw ConfigError("ExtractionConfig: beta_min and gamma_T must be > 0");
  if (max_iters < 1) throw ConfigError("ExtractionConfig: max_iters must be >= 1");
}

std::vector<AngleDelay> ExtractionResult::angle_delays() const {
  std::vector<AngleDelay> out;
  out.reserve(static_cast<size_t>(psi.size()));
  for (Eigen::Index l = 0; l < psi.size(); ++l) out.push_back({psi[l], tau[l]});
  return out;
}

double log_sum_J0(const CVec& beta, double epsilon) {
  if (epsilon <= 0.0) throw ConfigError("log_sum_J0: epsilon must be > 0");
  double acc = 0.0;
  for (Eigen::Index l = 0; l < beta.size(); ++l)
    acc += std::log(std::norm(beta[l]) + epsilon);
  return acc;
}

double objective_J_lambda(const RVec& psi, const RVec& tau, const CVec& beta,
                          const CVec& y, double lambda, double epsilon,
                          const MeasurementContext& ctx) {
  if (psi.size() != beta.size() || tau.size() != beta.size())
    throw ConfigError("objective_J_lambda: parameter length mismatch");
  const CVec residual = y - ctx.design(psi, tau) * beta;
  return log_sum_J0(beta, epsilon) + lambda * residual.squaredNorm();
}

RVec weight_matrix_D(const CVec& beta, double epsilon) {
  if (epsilon <= 0.0) throw ConfigError("weight_matrix_D: epsilon must be > 0");
  RVec d(beta.size());
  for (Eigen::Index l = 0; l < beta.size(); ++l)
    d[l] = 1.0 / (std::norm(beta[l]) + epsilon);
  return d;
}

namespace {

struct CoreEval {
  CMat design;
  CVec beta;
  double s1 = 0.0;
};

CoreEval core_eval(const RVec& psi, const RVec& tau, const CVec& y,
                   double lambda, const RVec& d_diag,
                   const MeasurementContext& ctx) {
  CoreEval out;
  out.design = ctx.design(psi, tau);
  if (psi.size() == 0) {
    out.beta = CVec();
    out.s1 = 0.0;
    return out;
  }
  const CVec b = out.design.adjoint() * y;
  CMat sys = out.design.adjoint() * out.design;
  sys.diagonal() += (d_diag / lambda).cast<cxd>();
  out.beta = solve_hpd(std::move(sys), b, "surrogate");
  out.s1 = -b.dot(out.beta).real();
  return out;
}

}  // namespace

double surrogate_S1(const RVec& psi, const RVec& tau, const CVec& y,
                    double lambda, const RVec& d_diag,
                    const MeasurementContext& ctx) {
  return core_eval(psi, tau, y, lambda, d_diag, ctx).s1;
}

CVec beta_star(const RVec& psi, const RVec& tau, const CVec& y, double lambda,
               const RVec& d_diag, const MeasurementContext& ctx) {
  return core_eval(psi, tau, y, lambda, d_diag, ctx).beta;
}

SurrogateEval surrogate_gradient(const RVec& psi, const RVec& tau,
                                 const CVec& y, double lambda,
                                 const RVec& d_diag,
                                 const MeasurementContext& ctx) {
  SurrogateEval out;
  CoreEval core = core_eval(psi, tau, y, lambda, d_diag, ctx);
  out.s1 = core.s1;
  out.beta = core.beta;
  out.grad_psi = RVec::Zero(psi.size());
  out.grad_tau = RVec::Zero(psi.size());
  if (psi.size() == 0) return out;
  const CVec residual = y - core.design * core.beta;
  CVec a, dpsi, dtau;
  for (Eigen::Index l = 0; l < psi.size(); ++l) {
    ctx.atom_with_derivs(psi[l], tau[l], a, dpsi, dtau);
    // dS1/dtheta_l = -2 Re{ conj(beta_l) * (d atom_l / d theta)^H residual }.
    out.grad_psi[l] = -2.0 * (std::conj(core.beta[l]) * dpsi.dot(residual)).real();
    out.grad_tau[l] = -2.0 * (std::conj(core.beta[l]) * dtau.dot(residual)).real();
  }
  return out;
}

double lambda_update(double residual_sq, double lambda0, double lambda_min,
                     double cap_factor) {
  if (residual_sq < 0.0) throw ConfigError("lambda_update: negative residual");
  const double cap = lambda0 * cap_factor;
  if (residual_sq <= 0.0) return cap;
  return std::clamp(lambda0 / residual_sq, lambda_min, cap);
}

namespace {

struct DescentWorkspace {
  double step = 0.0;      // last accepted step in scaled coordinates
  RVec prev_x, prev_g;    // for Barzilai-Borwein seeding
  bool has_prev = false;
};

DescentStatus descend_step(RVec& psi, RVec& tau, const CVec& y, double lambda,
                           const RVec& d_diag, const MeasurementContext& ctx,
                           const ExtractionConfig::Descent& opts,
                           DescentWorkspace& ws) {
  DescentStatus status;
  const Eigen::Index L = psi.size();
  const SurrogateEval ev = surrogate_gradient(psi, tau, y, lambda, d_diag, ctx);
  status.s1 = ev.s1;
  if (L == 0) return status;

  const double eta = ctx.ofdm().subcarrier_spacing_hz();
  // Scaled coordinates x = (psi, tau*eta) so both blocks are O(1).
  RVec x(2 * L), g(2 * L);
  x.head(L) = psi;
  x.tail(L) = tau * eta;
  g.head(L) = ev.grad_psi;
  g.tail(L) = ev.grad_tau / eta;
  const double gnorm2 = g.squaredNorm();
  if (gnorm2 < 1e-30) return status;

  double step = opts.initial_step > 0.0
                    ? opts.initial_step
                    : 0.25 / static_cast<double>(ctx.array().num_antennas);
  if (ws.step > 0.0) step = 2.0 * ws.step;
  if (ws.has_prev) {
    const RVec dx = x - ws.prev_x;
    const RVec dg = g - ws.prev_g;
    const double num = dx.dot(dg), den = dg.squaredNorm();
    if (den > 1e-30 && num > 0.0) step = num / den;
  }
  ws.prev_x = x;
  ws.prev_g = g;
  ws.has_prev = true;

  const double bound = ctx.psi_bound();
  RVec cand_psi(L), cand_tau(L);
  for (int trial = 0; trial < opts.max_line_search_steps; ++trial) {
    RVec xc = x - step * g;
    for (Eigen::Index l = 0; l < L; ++l) {
      cand_psi[l] = std::clamp(xc[l], -bound, bound);
      cand_tau[l] = std::clamp(xc[L + l] / eta, 0.0, ctx.tau_max_s());
    }
    RVec xproj(2 * L);
    xproj.head(L) = cand_psi;
    xproj.tail(L) = cand_tau * eta;
    const double pred = g.dot(x - xproj);
    if (pred <= 0.0) break;
    const double s1_new = surrogate_S1(cand_psi, cand_tau, y, lambda, d_diag, ctx);
    if (s1_new <= ev.s1 - 1e-4 * pred) {
      psi = cand_psi;
      tau = cand_tau;
      ws.step = step;
      status.moved = true;
      status.s1 = s1_new;
      return status;
    }
    step *= opts.shrink_factor;
  }
  return status;  // line search exhausted: parameters unchanged
}

}  // namespace

DescentStatus descend_psi_tau(RVec& psi, RVec& tau, const CVec& y,
                              double lambda, const RVec& d_diag,
                              const MeasurementContext& ctx,
                              const ExtractionConfig::Descent& opts) {
  DescentWorkspace ws;
  return descend_step(psi, tau, y, lambda, d_diag, ctx, opts, ws);
}

ExtractionState prune_paths(const ExtractionState& state, double beta_min) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index l = 0; l < state.beta.size(); ++l)
    if (std::abs(state.beta[l]) >= beta_min) keep.push_back(l);
  ExtractionState out;
  out.epsilon = state.epsilon;
  out.lambda = state.lambda;
  out.iter = state.iter;
  out.beta.resize(static_cast<Eigen::Index>(keep.size()));
  out.psi.resize(static_cast<Eigen::Index>(keep.size()));
  out.tau.resize(static_cast<Eigen::Index>(keep.size()));
  for (Eigen::Index i = 0; i < out.beta.size(); ++i) {
    out.beta[i] = state.beta[keep[static_cast<size_t>(i)]];
    out.psi[i] = state.psi[keep[static_cast<size_t>(i)]];
    out.tau[i] = state.tau[keep[static_cast<size_t>(i)]];
  }
  return out;
}

ExtractionResult extract(const CVec& y, const MeasurementContext& ctx,
                         const ExtractionConfig& config) {
  config.validate();
  const double lambda0 = config.effective_lambda0(ctx.meas_dim());
  ExtractionResult result;

  ExtractionState state;
  state.epsilon = config.epsilon_init;
  ctx.seed_atoms(y, config.max_paths, config.init_angle_oversample,
                 config.init_delay_oversample, state.psi, state.tau);
  if (state.psi.size() == 0)
    return result;  // nothing above the seeding floor: empty path set

  // beta^(0) from one beta_star evaluation at unit MM weights; lambda^(0)
  // from the least-squares residual of the seeded atoms.
  {
    const CMat A = ctx.design(state.psi, state.tau);
    const CVec beta_ls = A.colPivHouseholderQr().solve(y);
    const double rsq = (y - A * beta_ls).squaredNorm();
    state.lambda = lambda_update(rsq, lambda0, config.lambda_min,
                                 config.lambda_cap_factor);
    const RVec d0 = RVec::Ones(state.psi.size()) / config.epsilon_init;
    state.beta = beta_star(state.psi, state.tau, y, state.lambda, d0, ctx);
  }

  DescentWorkspace ws;
  bool converged = false;
  for (state.iter = 0; state.iter < config.max_iters; ++state.iter) {
    const RVec d_diag = weight_matrix_D(state.beta, state.epsilon);
    ws.has_prev = false;  // surrogate changed; BB memory is stale
    double s1 = 0.0;
    for (int s = 0; s < config.descent.steps_per_iteration; ++s) {
      const DescentStatus st = descend_step(state.psi, state.tau, y, state.lambda,
                                            d_diag, ctx, config.descent, ws);
      s1 = st.s1;
      if (!st.moved) break;
    }

    const CVec beta_next =
        beta_star(state.psi, state.tau, y, state.lambda, d_diag, ctx);
    const double gamma = (beta_next - state.beta).norm();
    state.beta = beta_next;

    const CVec residual = y - ctx.design(state.psi, state.tau) * state.beta;
    state.lambda = lambda_update(residual.squaredNorm(), lambda0,
                                 config.lambda_min, config.lambda_cap_factor);

    if (gamma < std::sqrt(state.epsilon))
      state.epsilon = std::max(state.epsilon / 10.0, config.epsilon_min);

    state = prune_paths(state, config.beta_min);
    result.trace.push_back({state.iter, s1, state.lambda, state.epsilon, gamma,
                            state.num_paths()});

    if (state.num_paths() == 0) {
      converged = true;
      break;
    }
    if (gamma < config.gamma_T && state.epsilon <= config.epsilon_min) {
      converged = true;
      break;
    }
  }
  result.truncated = !converged;

  // Stationarity tail on the final surrogate: epsilon, lambda, and the MM
  // weights are frozen once beta has stabilized, so these are ordinary
  // iterations of the last majorization stage.
  if (state.num_paths() > 0) {
    const RVec d_diag = weight_matrix_D(state.beta, state.epsilon);
    ws.has_prev = false;
    for (int s = 0; s < config.polish_steps; ++s) {
      const DescentStatus st = descend_step(state.psi, state.tau, y, state.lambda,
                                            d_diag, ctx, config.descent, ws);
      if (!st.moved) break;
    }
    state.beta = beta_star(state.psi, state.tau, y, state.lambda, d_diag, ctx);
    state = prune_paths(state, config.beta_min);
  }

  result.psi = state.psi;
  result.tau = state.tau;
  result.alpha = state.beta;
  return result;
}

void write_trace_csv(const std::vector<IterationRecord>& trace,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_trace_csv: cannot open " + path);
  out << "iter,s1,lambda,epsilon,gamma,num_paths\n";
  out.precision(17);
  for (const auto& rec : trace)
    out << rec.iter << ',' << rec.s1 << ',' << rec.lambda << ',' << rec.epsilon
        << ',' << rec.gamma << ',' << rec.num_paths << '\n';
}

}  // namespace bsq
