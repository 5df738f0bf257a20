#include "bsq/sim/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "bsq/hybrid_frontend.hpp"
#include "bsq/rng.hpp"
#include "bsq/uplink_estimation.hpp"

namespace bsq {

double PopulationConfig::mean_total_power() const {
  const double mean_nlos = 0.5 * (nlos_min + nlos_max);
  return 1.0 + mean_nlos * std::pow(10.0, nlos_gain_db / 10.0);
}

ArrayConfig ScenarioConfig::uplink_array() const {
  return {num_antennas,
          spacing_dl_wavelengths * carrier_hz / carrier_dl_hz, carrier_hz};
}

ArrayConfig ScenarioConfig::downlink_array() const {
  return {num_antennas, spacing_dl_wavelengths, carrier_dl_hz};
}

OfdmConfig ScenarioConfig::ofdm() const {
  return {num_subcarriers, bandwidth_hz};
}

void ScenarioConfig::validate() const {
  uplink_array().validate();
  downlink_array().validate();
  ofdm().validate();
  HybridDims{num_rf, blocks_up, num_pilots}.validate(num_antennas);
  if (trials < 1) throw ConfigError("ScenarioConfig: trials must be >= 1");
  if (sweep.values.empty()) throw ConfigError("ScenarioConfig: empty sweep values");
  if (population.num_users < 1)
    throw ConfigError("ScenarioConfig: num_users must be >= 1");
  if (population.nlos_min < 0 || population.nlos_max < population.nlos_min)
    throw ConfigError("ScenarioConfig: bad NLoS count range");
  if (population.num_users * num_pilots > num_subcarriers)
    throw ConfigError("ScenarioConfig: not enough subcarriers for orthogonal pilots");
  if (threads < 1) throw ConfigError("ScenarioConfig: threads must be >= 1");
  extraction.validate();
  if (extraction.max_paths > num_pilots)
    throw ConfigError("ScenarioConfig: extraction.max_paths must not exceed num_pilots");
  static const std::vector<std::string> known = {
      "ls", "mmse-recon", "mmse-true", "conventional-baseline"};
  for (const auto& e : estimators)
    if (std::find(known.begin(), known.end(), e) == known.end())
      throw ConfigError("ScenarioConfig: unknown estimator '" + e + "'");
  static const std::vector<std::string> vars = {"snr_db", "M", "W", "N_RF",
                                                "squint_level"};
  if (std::find(vars.begin(), vars.end(), sweep.variable) == vars.end())
    throw ConfigError("ScenarioConfig: unknown sweep variable '" +
                      sweep.variable + "'");
}

double squint_level_to_bandwidth(double level, int num_antennas,
                                 const ArrayConfig& array) {
  if (level <= 0.0) throw ConfigError("squint_level_to_bandwidth: level must be > 0");
  return level * array.carrier_hz /
         ((static_cast<double>(num_antennas) - 1.0) * array.spacing_ratio);
}

namespace {

struct Key {
  std::string estimator;
  std::string metric;
  bool operator<(const Key& o) const {
    if (estimator != o.estimator) return estimator < o.estimator;
    return metric < o.metric;
  }
};

/// Per-trial metric contributions as (numerator, denominator) pairs so that
/// NMSE aggregates as a ratio of sums and plain means use denominator counts.
using TrialMetrics = std::map<Key, std::pair<double, double>>;

void add_metric(TrialMetrics& m, const std::string& est, const std::string& metric,
                double num, double den) {
  auto& slot = m[{est, metric}];
  slot.first += num;
  slot.second += den;
}

ScenarioConfig apply_sweep(const ScenarioConfig& base, double value) {
  ScenarioConfig cfg = base;
  if (cfg.sweep.variable == "snr_db") {
    cfg.snr_db = value;
  } else if (cfg.sweep.variable == "M") {
    cfg.num_antennas = static_cast<int>(value);
  } else if (cfg.sweep.variable == "W") {
    cfg.bandwidth_hz = value;
  } else if (cfg.sweep.variable == "N_RF") {
    cfg.num_rf = static_cast<int>(value);
  } else if (cfg.sweep.variable == "squint_level") {
    cfg.bandwidth_hz =
        squint_level_to_bandwidth(value, cfg.num_antennas, cfg.uplink_array());
  } else {
    throw ConfigError("unknown sweep variable " + cfg.sweep.variable);
  }
  cfg.validate();
  return cfg;
}

int uniform_int(Rng& rng, int lo, int hi) {
  const int span = hi - lo + 1;
  int v = lo + static_cast<int>(rng.uniform() * span);
  return std::min(v, hi);
}

std::vector<UserChannel> draw_population(const PopulationConfig& pop,
                                         double spacing_ratio, Rng& rng) {
  std::vector<UserChannel> users(static_cast<size_t>(pop.num_users));
  const double nlos_var = std::pow(10.0, pop.nlos_gain_db / 10.0);
  for (auto& user : users) {
    const int num_paths = 1 + uniform_int(rng, pop.nlos_min, pop.nlos_max);
    for (int l = 0; l < num_paths; ++l) {
      PathParams path;
      const double aoa_deg = rng.uniform(pop.aoa_min_deg, pop.aoa_max_deg);
      path.psi = spacing_ratio * std::sin(aoa_deg * kTwoPi / 360.0);
      path.tau_s = rng.uniform(pop.delay_min_s, pop.delay_max_s);
      path.alpha = rng.cnormal(l == 0 ? 1.0 : nlos_var);
      user.paths.push_back(path);
    }
  }
  return users;
}

/// Redraw gains on the same paths (the two-phase protocol: angles and delays
/// persist across coherence blocks, gains do not).
std::vector<UserChannel> redraw_gains(const std::vector<UserChannel>& users,
                                      double nlos_var, Rng& rng) {
  std::vector<UserChannel> out = users;
  for (auto& user : out)
    for (size_t l = 0; l < user.paths.size(); ++l)
      user.paths[l].alpha = rng.cnormal(l == 0 ? 1.0 : nlos_var);
  return out;
}

GainStats true_gain_stats(const UserChannel& user, double nlos_var) {
  GainStats stats;
  for (size_t l = 0; l < user.paths.size(); ++l)
    stats.mean_powers.push_back(l == 0 ? 1.0 : nlos_var);
  return stats;
}

/// Disjoint pilot sets: a seeded permutation of 1..N_c chopped into
/// consecutive chunks of P, one per prospective group/user.
std::vector<std::vector<int>> pilot_partition(int n_c, int p, int count,
                                              Rng& rng) {
  std::vector<int> perm(static_cast<size_t>(n_c));
  for (int q = 1; q <= n_c; ++q) perm[static_cast<size_t>(q - 1)] = q;
  for (int i = n_c - 1; i > 0; --i) {
    const int j = uniform_int(rng, 0, i);
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }
  std::vector<std::vector<int>> sets;
  for (int g = 0; g < count; ++g) {
    std::vector<int> s(perm.begin() + static_cast<std::ptrdiff_t>(g) * p,
                       perm.begin() + static_cast<std::ptrdiff_t>(g + 1) * p);
    std::sort(s.begin(), s.end());
    sets.push_back(std::move(s));
  }
  return sets;
}

struct VariantData {
  std::string prefix;  // "" for proposed, "conv-" for the baseline
  SteeringModel basis = SteeringModel::kWideband;
  std::vector<ExtractionResult> extraction;  // per user
};

struct TrialContext {
  const ScenarioConfig& cfg;
  std::uint64_t trial_seed;
  double sigma2;
  bool want_ls, want_mmse_recon, want_mmse_true;
};

void uplink_phase(const TrialContext& t, const VariantData& var,
                  const std::vector<UserChannel>& users2,
                  const std::vector<CVec>& h_true_full,
                  const CombinerSet& combiner, std::uint64_t variant_salt,
                  TrialMetrics& metrics) {
  const ScenarioConfig& cfg = t.cfg;
  const ArrayConfig array = cfg.uplink_array();
  const OfdmConfig ofdm = cfg.ofdm();
  const double eta = ofdm.subcarrier_spacing_hz();
  const double nlos_var = std::pow(10.0, cfg.population.nlos_gain_db / 10.0);
  const int num_users = static_cast<int>(users2.size());

  auto add_nmse = [&](const std::string& estimator, int k, const CVec& h_hat) {
    add_metric(metrics, var.prefix + estimator, "nmse_ul",
               (h_hat - h_true_full[static_cast<size_t>(k)]).squaredNorm(),
               h_true_full[static_cast<size_t>(k)].squaredNorm());
  };
  auto add_zero_estimate = [&](int k) {
    if (t.want_ls) add_nmse("ls", k, CVec::Zero(h_true_full[0].size()));
    if (t.want_mmse_recon)
      add_nmse("mmse-recon", k, CVec::Zero(h_true_full[0].size()));
  };

  // Users whose extraction came back empty cannot be grouped or estimated.
  std::vector<int> active;
  std::vector<std::vector<AngleDelay>> active_params;
  for (int k = 0; k < num_users; ++k) {
    const auto params = var.extraction[static_cast<size_t>(k)].angle_delays();
    if (params.empty()) {
      add_zero_estimate(k);
    } else {
      active.push_back(k);
      active_params.push_back(params);
    }
  }
  if (active.empty()) return;

  Rng pilot_rng(mix_seed(t.trial_seed, 0x40 + variant_salt));
  const auto budget = pilot_partition(ofdm.num_subcarriers, cfg.num_pilots,
                                      static_cast<int>(active.size()), pilot_rng);
  const UserGroupPlan plan =
      group_users_uplink(active_params, cfg.uplink_guard, cfg.max_group_size,
                         budget, array.num_antennas, cfg.num_pilots, eta);

  for (size_t g = 0; g < plan.groups.size(); ++g) {
    const auto& group = plan.groups[g];
    const StackedCombiner stacked =
        stack_combiners(combiner, plan.pilot_assignment[g]);
    std::vector<UserChannel> members;
    std::vector<std::vector<AngleDelay>> member_params;
    std::vector<std::vector<AngleDelay>> member_true_params;
    std::vector<GainStats> member_recon_stats;
    std::vector<GainStats> member_true_stats;
    for (int idx : group) {
      const int k = active[static_cast<size_t>(idx)];
      members.push_back(users2[static_cast<size_t>(k)]);
      member_params.push_back(active_params[static_cast<size_t>(idx)]);
      member_true_params.push_back(users2[static_cast<size_t>(k)].angle_delays());
      GainStats recon;
      const CVec& a0 = var.extraction[static_cast<size_t>(k)].alpha;
      for (Eigen::Index l = 0; l < a0.size(); ++l)
        recon.mean_powers.push_back(std::norm(a0[l]));
      member_recon_stats.push_back(std::move(recon));
      member_true_stats.push_back(
          true_gain_stats(users2[static_cast<size_t>(k)], nlos_var));
    }
    const NoiseModel noise{t.sigma2,
                           mix_seed(t.trial_seed, 0x200 + variant_salt * 64 + g)};
    const CVec y_g = simulate_group_reception(members, stacked, noise, array, ofdm);
    CMat c_n;
    if (t.want_mmse_recon || t.want_mmse_true) c_n = noise_covariance_C(stacked);

    for (size_t m = 0; m < group.size(); ++m) {
      const int k = active[static_cast<size_t>(plan.groups[g][m])];
      if (t.want_ls) {
        CVec alpha;
        try {
          alpha = ls_gains_uplink(y_g, stacked, member_params[m], array, ofdm);
        } catch (const NumericalError&) {
          alpha = CVec::Zero(static_cast<Eigen::Index>(member_params[m].size()));
        }
        add_nmse("ls", k, reconstruct_full_band(member_params[m], alpha, array, ofdm));
      }
      if (t.want_mmse_recon) {
        const CVec alpha = mmse_gains_uplink(y_g, stacked, member_params,
                                             member_recon_stats, static_cast<int>(m),
                                             t.sigma2, c_n, array, ofdm);
        add_nmse("mmse-recon", k,
                 reconstruct_full_band(member_params[m], alpha, array, ofdm));
      }
      if (t.want_mmse_true && var.prefix.empty()) {
        const CVec alpha = mmse_gains_uplink(y_g, stacked, member_true_params,
                                             member_true_stats, static_cast<int>(m),
                                             t.sigma2, c_n, array, ofdm);
        add_nmse("mmse-true", k,
                 reconstruct_full_band(member_true_params[m], alpha, array, ofdm));
      }
    }
  }
}

void downlink_phase(const TrialContext& t, const VariantData& var,
                    const std::vector<UserChannel>& users_dl,
                    const std::vector<CVec>& h_dl_true_full,
                    std::uint64_t variant_salt, TrialMetrics& metrics) {
  const ScenarioConfig& cfg = t.cfg;
  const ArrayConfig array_dl = cfg.downlink_array();
  const OfdmConfig ofdm = cfg.ofdm();
  const double ratio = cfg.carrier_dl_hz / cfg.carrier_hz;
  const double nlos_var = std::pow(10.0, cfg.population.nlos_gain_db / 10.0);
  const int num_users = static_cast<int>(users_dl.size());

  auto add_nmse = [&](const std::string& estimator, int k, const CVec& h_hat) {
    add_metric(metrics, var.prefix + estimator, "nmse_dl",
               (h_hat - h_dl_true_full[static_cast<size_t>(k)]).squaredNorm(),
               h_dl_true_full[static_cast<size_t>(k)].squaredNorm());
  };

  std::vector<int> active;
  std::vector<std::vector<AngleDelay>> active_params_dl;
  for (int k = 0; k < num_users; ++k) {
    std::vector<AngleDelay> params;
    for (const auto& ad : var.extraction[static_cast<size_t>(k)].angle_delays())
      params.push_back({psi_downlink(ad.psi, cfg.carrier_hz, cfg.carrier_dl_hz),
                        ad.tau_s});
    if (params.empty()) {
      const CVec zero = CVec::Zero(h_dl_true_full[0].size());
      if (t.want_ls) add_nmse("ls", k, zero);
      if (t.want_mmse_recon) add_nmse("mmse-recon", k, zero);
    } else {
      active.push_back(k);
      active_params_dl.push_back(std::move(params));
    }
  }
  if (active.empty()) return;

  Rng pilot_rng(mix_seed(t.trial_seed, 0x60 + variant_salt));
  const auto budget = pilot_partition(ofdm.num_subcarriers, cfg.num_pilots,
                                      static_cast<int>(active.size()), pilot_rng);
  const UserGroupPlan plan =
      group_users_downlink(active_params_dl, cfg.downlink_guard,
                           cfg.max_group_size, budget, array_dl.num_antennas);

  for (size_t g = 0; g < plan.groups.size(); ++g) {
    const auto& group = plan.groups[g];
    std::vector<std::vector<AngleDelay>> member_params;
    for (int idx : group)
      member_params.push_back(active_params_dl[static_cast<size_t>(idx)]);
    const PrecoderKind kind = var.prefix.empty() ? PrecoderKind::kProposed
                                                 : PrecoderKind::kConventional;
    const PrecoderSet precoders(member_params, plan.pilot_assignment[g], array_dl,
                                ofdm, kind, cfg.num_rf);

    for (size_t m = 0; m < group.size(); ++m) {
      const int k = active[static_cast<size_t>(group[m])];
      const UserChannel& truth = users_dl[static_cast<size_t>(k)];
      const NoiseModel noise{
          t.sigma2, mix_seed(t.trial_seed, 0x300 + variant_salt * 64 + g * 16 + m)};
      const CVec y =
          simulate_downlink_reception(truth, precoders, noise, array_dl, ofdm);
      if (t.want_ls) {
        CVec alpha;
        try {
          alpha = ls_gains_downlink(y, precoders.pilot_code(),
                                    static_cast<int>(member_params[m].size()));
        } catch (const NumericalError&) {
          alpha = CVec::Zero(static_cast<Eigen::Index>(member_params[m].size()));
        }
        add_nmse("ls", k,
                 reconstruct_full_band(member_params[m], alpha, array_dl, ofdm));
      }
      if (t.want_mmse_recon) {
        GainStats recon;
        const CVec& a0 = var.extraction[static_cast<size_t>(k)].alpha;
        for (Eigen::Index l = 0; l < a0.size(); ++l)
          recon.mean_powers.push_back(std::norm(a0[l]));
        const CVec alpha = mmse_gains_downlink(y, member_params[m], recon,
                                               precoders, t.sigma2, array_dl, ofdm);
        add_nmse("mmse-recon", k,
                 reconstruct_full_band(member_params[m], alpha, array_dl, ofdm));
      }
      if (t.want_mmse_true && var.prefix.empty()) {
        const auto params_true = truth.angle_delays();
        const CVec alpha =
            mmse_gains_downlink(y, params_true, true_gain_stats(truth, nlos_var),
                                precoders, t.sigma2, array_dl, ofdm);
        add_nmse("mmse-true", k,
                 reconstruct_full_band(params_true, alpha, array_dl, ofdm));
      }
    }
  }
}

TrialMetrics run_trial(const ScenarioConfig& cfg, std::uint64_t trial_seed,
                       bool want_conv, bool run_uplink_estimation) {
  TrialMetrics metrics;
  const ArrayConfig array = cfg.uplink_array();
  const OfdmConfig ofdm = cfg.ofdm();
  const double eta = ofdm.subcarrier_spacing_hz();
  const double sigma2 =
      cfg.population.mean_total_power() / std::pow(10.0, cfg.snr_db / 10.0);
  const double nlos_var = std::pow(10.0, cfg.population.nlos_gain_db / 10.0);

  Rng channel_rng(mix_seed(trial_seed, 0x10));
  const std::vector<UserChannel> users =
      draw_population(cfg.population, array.spacing_ratio, channel_rng);
  const int num_users = static_cast<int>(users.size());

  const HybridDims dims{cfg.num_rf, cfg.blocks_up, cfg.num_pilots};
  const CombinerSet combiner =
      random_analog_combiner(dims, array.num_antennas, mix_seed(trial_seed, 0x20));

  Rng pilot_rng(mix_seed(trial_seed, 0x30));
  const auto initial_pilots =
      pilot_partition(ofdm.num_subcarriers, cfg.num_pilots, num_users, pilot_rng);

  std::vector<VariantData> variants;
  variants.push_back({"", SteeringModel::kWideband, {}});
  if (want_conv) variants.push_back({"conv-", SteeringModel::kNarrowband, {}});

  // Phase 1: initial parameter extraction on orthogonal pilots.
  for (int k = 0; k < num_users; ++k) {
    const StackedCombiner stacked =
        stack_combiners(combiner, initial_pilots[static_cast<size_t>(k)]);
    const NoiseModel noise{sigma2, mix_seed(trial_seed, 0x100 + k)};
    const CVec y = simulate_uplink_reception(users[static_cast<size_t>(k)], stacked,
                                             noise, array, ofdm);
    for (auto& var : variants) {
      MeasurementContext ctx(stacked, array, ofdm, var.basis);
      var.extraction.push_back(extract(y, ctx, cfg.extraction));
    }
  }

  for (auto& var : variants) {
    const std::string est = var.prefix + "extract";
    for (int k = 0; k < num_users; ++k) {
      const auto& truth = users[static_cast<size_t>(k)];
      const auto truths = truth.angle_delays();
      const auto ests = var.extraction[static_cast<size_t>(k)].angle_delays();
      const double n_paths = static_cast<double>(truths.size());
      add_metric(metrics, est, "amse_theta",
                 metric_amse_angle(ests, truths, array, cfg.num_pilots, eta,
                                   cfg.uplink_guard) * n_paths,
                 n_paths);
      add_metric(metrics, est, "amse_tau",
                 metric_amse_delay(ests, truths, array, ofdm, cfg.num_pilots,
                                   cfg.uplink_guard) * n_paths,
                 n_paths);
      // Gain NMSE over associated paths; misses count their full power.
      const auto assoc = associate_paths(ests, truths, array.num_antennas,
                                         cfg.num_pilots, eta, cfg.uplink_guard);
      double num = 0.0, den = 0.0;
      for (const auto& [e, ti] : assoc.matches)
        num += std::norm(var.extraction[static_cast<size_t>(k)].alpha[e] -
                         truth.paths[static_cast<size_t>(ti)].alpha);
      for (int ti : assoc.missed_truths)
        num += std::norm(truth.paths[static_cast<size_t>(ti)].alpha);
      for (const auto& path : truth.paths) den += std::norm(path.alpha);
      add_metric(metrics, est, "nmse_alpha", num, den);
    }
  }

  if (!run_uplink_estimation && !cfg.downlink_enabled) return metrics;

  const TrialContext t{cfg, trial_seed, sigma2,
                       std::find(cfg.estimators.begin(), cfg.estimators.end(),
                                 "ls") != cfg.estimators.end(),
                       std::find(cfg.estimators.begin(), cfg.estimators.end(),
                                 "mmse-recon") != cfg.estimators.end(),
                       std::find(cfg.estimators.begin(), cfg.estimators.end(),
                                 "mmse-true") != cfg.estimators.end()};

  if (run_uplink_estimation) {
    // Phase 2: grouped re-estimation with fresh gains on the true paths.
    Rng gain_rng(mix_seed(trial_seed, 0x11));
    const std::vector<UserChannel> users2 = redraw_gains(users, nlos_var, gain_rng);
    std::vector<CVec> h_true_full;
    for (const auto& user : users2)
      h_true_full.push_back(
          reconstruct_full_band(user.angle_delays(), user.gains(), array, ofdm));
    std::uint64_t salt = 0;
    for (const auto& var : variants)
      uplink_phase(t, var, users2, h_true_full, combiner, salt++, metrics);
  }

  if (cfg.downlink_enabled) {
    // Phase 3: downlink training with reciprocal angles and fresh gains.
    const ArrayConfig array_dl = cfg.downlink_array();
    Rng dl_rng(mix_seed(trial_seed, 0x12));
    std::vector<UserChannel> users_dl = users;
    const double ratio = cfg.carrier_dl_hz / cfg.carrier_hz;
    for (auto& user : users_dl)
      for (size_t l = 0; l < user.paths.size(); ++l) {
        user.paths[l].psi *= ratio;
        user.paths[l].alpha = dl_rng.cnormal(l == 0 ? 1.0 : nlos_var);
      }
    std::vector<CVec> h_dl_true_full;
    for (const auto& user : users_dl)
      h_dl_true_full.push_back(reconstruct_full_band(user.angle_delays(),
                                                     user.gains(), array_dl, ofdm));
    std::uint64_t salt = 0;
    for (const auto& var : variants)
      downlink_phase(t, var, users_dl, h_dl_true_full, salt++, metrics);
  }
  return metrics;
}

}  // namespace

ResultTable run_scenario(const ScenarioConfig& config) {
  config.validate();
  const bool want_conv =
      std::find(config.estimators.begin(), config.estimators.end(),
                "conventional-baseline") != config.estimators.end();
  const bool run_uplink =
      std::find_if(config.estimators.begin(), config.estimators.end(),
                   [](const std::string& e) {
                     return e == "ls" || e == "mmse-recon" || e == "mmse-true";
                   }) != config.estimators.end();

  ResultTable table;
  for (size_t sv = 0; sv < config.sweep.values.size(); ++sv) {
    const double value = config.sweep.values[sv];
    const ScenarioConfig cfg = apply_sweep(config, value);
    const std::uint64_t sweep_seed = mix_seed(config.seed, 0xABCD + sv);

    std::vector<TrialMetrics> per_trial(static_cast<size_t>(cfg.trials));
    std::atomic<long> next{0};
    auto worker = [&]() {
      for (;;) {
        const long trial = next.fetch_add(1);
        if (trial >= cfg.trials) return;
        per_trial[static_cast<size_t>(trial)] =
            run_trial(cfg, mix_seed(sweep_seed, static_cast<std::uint64_t>(trial)),
                      want_conv, run_uplink);
      }
    };
    if (cfg.threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int i = 0; i < cfg.threads; ++i) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }

    // Deterministic reduction in trial order.
    std::map<Key, std::pair<double, double>> totals;
    std::map<Key, std::vector<double>> ratios;
    for (const auto& tm : per_trial)
      for (const auto& [key, nd] : tm) {
        totals[key].first += nd.first;
        totals[key].second += nd.second;
        if (nd.second > 0.0) ratios[key].push_back(nd.first / nd.second);
      }

    static const std::vector<std::string> est_order = {
        "extract", "ls", "mmse-recon", "mmse-true",
        "conv-extract", "conv-ls", "conv-mmse-recon", "conv-mmse-true"};
    static const std::vector<std::string> metric_order = {
        "amse_theta", "amse_tau", "nmse_alpha", "nmse_ul", "nmse_dl"};
    for (const auto& est : est_order)
      for (const auto& metric : metric_order) {
        const Key key{est, metric};
        auto it = totals.find(key);
        if (it == totals.end()) continue;
        ResultRow row;
        row.sweep_var = config.sweep.variable;
        row.sweep_value = value;
        row.estimator = est;
        row.metric = metric;
        row.mean = it->second.second > 0.0 ? it->second.first / it->second.second
                                           : 0.0;
        const auto& rs = ratios[key];
        if (rs.size() > 1) {
          double mean = 0.0;
          for (double r : rs) mean += r;
          mean /= static_cast<double>(rs.size());
          double var = 0.0;
          for (double r : rs) var += (r - mean) * (r - mean);
          var /= static_cast<double>(rs.size() - 1);
          row.stderr_mean = std::sqrt(var / static_cast<double>(rs.size()));
        }
        row.trials = cfg.trials;
        row.seed = config.seed;
        table.rows.push_back(std::move(row));
      }
  }
  return table;
}

void dump_extraction_trace(const ScenarioConfig& config, const std::string& path) {
  config.validate();
  const ScenarioConfig cfg = apply_sweep(config, config.sweep.values.front());
  const std::uint64_t trial_seed = mix_seed(mix_seed(cfg.seed, 0xABCD), 0);
  const ArrayConfig array = cfg.uplink_array();
  const OfdmConfig ofdm = cfg.ofdm();
  const double sigma2 =
      cfg.population.mean_total_power() / std::pow(10.0, cfg.snr_db / 10.0);
  Rng channel_rng(mix_seed(trial_seed, 0x10));
  const auto users = draw_population(cfg.population, array.spacing_ratio, channel_rng);
  const HybridDims dims{cfg.num_rf, cfg.blocks_up, cfg.num_pilots};
  const CombinerSet combiner =
      random_analog_combiner(dims, array.num_antennas, mix_seed(trial_seed, 0x20));
  Rng pilot_rng(mix_seed(trial_seed, 0x30));
  const auto pilots = pilot_partition(ofdm.num_subcarriers, cfg.num_pilots,
                                      static_cast<int>(users.size()), pilot_rng);
  const StackedCombiner stacked = stack_combiners(combiner, pilots.front());
  const NoiseModel noise{sigma2, mix_seed(trial_seed, 0x100)};
  const CVec y =
      simulate_uplink_reception(users.front(), stacked, noise, array, ofdm);
  MeasurementContext ctx(stacked, array, ofdm, SteeringModel::kWideband);
  const ExtractionResult res = extract(y, ctx, cfg.extraction);
  write_trace_csv(res.trace, path);
}

}  // namespace bsq
