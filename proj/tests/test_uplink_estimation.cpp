#include <doctest.h>

#include <cmath>

#include "bsq/rng.hpp"
#include "bsq/uplink_estimation.hpp"

using namespace bsq;

namespace {

std::vector<AngleDelay> one_at(double psi, double tau) { return {{psi, tau}}; }

struct GroupFixture {
  ArrayConfig array{32, 0.5, 26e9};
  OfdmConfig ofdm{256, 600e6};
  std::vector<int> pilots;
  CombinerSet set;
  StackedCombiner stacked;

  explicit GroupFixture(std::uint64_t seed = 3) {
    Rng rng(seed);
    while (pilots.size() < 12) {
      const int q = 1 + static_cast<int>(rng.uniform() * 256);
      if (std::find(pilots.begin(), pilots.end(), q) == pilots.end())
        pilots.push_back(q);
    }
    std::sort(pilots.begin(), pilots.end());
    set = random_analog_combiner({4, 12, 12}, 32, seed + 1);
    stacked = stack_combiners(set, pilots);
  }
};

UserChannel make_user(const std::vector<AngleDelay>& params,
                      const std::vector<cxd>& gains) {
  UserChannel u;
  for (size_t l = 0; l < params.size(); ++l)
    u.paths.push_back({params[l].psi, params[l].tau_s, gains[l]});
  return u;
}

}  // namespace

TEST_CASE("distance_uplink: pinned values, symmetry, zero for shared path") {
  const double eta = 600e6 / 256.0;
  CHECK(distance_uplink(one_at(0.1, 50e-9), one_at(0.1, 50e-9), 64, 12, eta) ==
        doctest::Approx(0.0));
  CHECK(distance_uplink(one_at(0.10, 70e-9), one_at(0.20, 70e-9), 64, 12, eta) ==
        doctest::Approx(6.4).epsilon(1e-12));
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    std::vector<AngleDelay> a = {{rng.uniform(-0.5, 0.5), rng.uniform(0.0, 3e-7)},
                                 {rng.uniform(-0.5, 0.5), rng.uniform(0.0, 3e-7)}};
    std::vector<AngleDelay> b = {{rng.uniform(-0.5, 0.5), rng.uniform(0.0, 3e-7)}};
    CHECK(distance_uplink(a, b, 64, 12, eta) ==
          doctest::Approx(distance_uplink(b, a, 64, 12, eta)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(distance_uplink({}, one_at(0.1, 0.0), 64, 12, eta), ConfigError);
}

TEST_CASE("group_users_uplink: greedy first-fit traces") {
  const double eta = 1.0;  // unit spacing for hand-computable distances
  const std::vector<std::vector<int>> budget = {{1, 2}, {3, 4}, {5, 6}};

  SUBCASE("mutually close users end up in singleton groups") {
    std::vector<std::vector<AngleDelay>> users = {
        one_at(0.100, 0.0), one_at(0.101, 0.0), one_at(0.102, 0.0)};
    const auto plan = group_users_uplink(users, 5.0, 10, budget, 64, 12, eta);
    CHECK(plan.groups.size() == 3);
    plan.validate(users, 64, 12, eta);
  }
  SUBCASE("mutually distant users share one group when kappa allows") {
    std::vector<std::vector<AngleDelay>> users = {
        one_at(-0.4, 0.0), one_at(0.0, 0.0), one_at(0.4, 0.0)};
    const auto plan = group_users_uplink(users, 5.0, 100, budget, 64, 12, eta);
    CHECK(plan.groups.size() == 1);
    CHECK(plan.groups[0].size() == 3);
    plan.validate(users, 64, 12, eta);
  }
  SUBCASE("hand-traced {10, 10, 2} distances with guard 5") {
    // d(1,2) = 10, d(1,3) = 10, d(2,3) = 2: first-fit gives {1,2},{3}.
    std::vector<std::vector<AngleDelay>> users = {
        one_at(0.0, 0.0), one_at(10.0 / 64.0, 0.0), one_at(8.0 / 64.0, 0.0)};
    const auto plan = group_users_uplink(users, 5.0, 10, budget, 64, 12, eta);
    REQUIRE(plan.groups.size() == 2);
    CHECK(plan.groups[0] == std::vector<int>{0, 1});
    CHECK(plan.groups[1] == std::vector<int>{2});
    plan.validate(users, 64, 12, eta);
  }
  SUBCASE("kappa forces a split even when distances allow grouping") {
    std::vector<std::vector<AngleDelay>> users = {
        one_at(-0.4, 0.0), one_at(0.0, 0.0), one_at(0.4, 0.0)};
    const auto plan = group_users_uplink(users, 5.0, 2, budget, 64, 12, eta);
    CHECK(plan.groups.size() == 2);
    plan.validate(users, 64, 12, eta);
  }
  SUBCASE("pilot budget exhaustion") {
    std::vector<std::vector<AngleDelay>> users = {
        one_at(0.100, 0.0), one_at(0.101, 0.0), one_at(0.102, 0.0),
        one_at(0.103, 0.0)};
    CHECK_THROWS_AS(group_users_uplink(users, 5.0, 10, budget, 64, 12, eta),
                    ConfigError);
  }
}

TEST_CASE("grouping plan validity under random populations (property)") {
  Rng rng(99);
  const double eta = 600e6 / 256.0;
  for (int trial = 0; trial < 30; ++trial) {
    const int K = 2 + static_cast<int>(rng.uniform() * 10);
    std::vector<std::vector<AngleDelay>> users;
    for (int k = 0; k < K; ++k) {
      std::vector<AngleDelay> paths;
      const int L = 1 + static_cast<int>(rng.uniform() * 4);
      for (int l = 0; l < L; ++l)
        paths.push_back({rng.uniform(-0.5, 0.5), rng.uniform(0.0, 300e-9)});
      users.push_back(paths);
    }
    std::vector<std::vector<int>> budget;
    for (int g = 0; g < K; ++g) budget.push_back({g * 12 + 1});
    const int kappa = 1 + static_cast<int>(rng.uniform() * 4);
    const auto plan = group_users_uplink(users, 5.0, kappa, budget, 64, 12, eta);
    plan.validate(users, 64, 12, eta);
  }
}

TEST_CASE("simulate_group_reception: singleton equals single-user reception, "
          "superposition holds") {
  GroupFixture fx;
  const UserChannel u = make_user({{0.2, 50e-9}, {-0.3, 120e-9}},
                                  {cxd{1.0, 0.2}, cxd{-0.5, 0.3}});
  const UserChannel v = make_user({{-0.1, 200e-9}}, {cxd{0.3, -0.9}});

  const CVec single = simulate_group_reception({u}, fx.stacked, {0.0, 5},
                                               fx.array, fx.ofdm);
  CHECK((single - simulate_uplink_reception(u, fx.stacked, {0.0, 5}, fx.array,
                                            fx.ofdm)).norm() < 1e-12);

  const CVec both = simulate_group_reception({u, v}, fx.stacked, {0.0, 5},
                                             fx.array, fx.ofdm);
  const CVec vy = simulate_uplink_reception(v, fx.stacked, {0.0, 5}, fx.array,
                                            fx.ofdm);
  CHECK((both - (single + vy)).norm() < 1e-10);
}

TEST_CASE("ls_gains_uplink: exact noiseless recovery, zero data, interference "
          "leakage bound") {
  GroupFixture fx;
  Rng rng(4);

  SUBCASE("single user, noiseless: exact recovery") {
    const std::vector<AngleDelay> params = {{0.22, 60e-9}, {-0.31, 140e-9}};
    const UserChannel u = make_user(params, {cxd{0.8, -0.1}, cxd{0.2, 0.5}});
    const CVec y = simulate_group_reception({u}, fx.stacked, {0.0, 1}, fx.array,
                                            fx.ofdm);
    const CVec a = ls_gains_uplink(y, fx.stacked, params, fx.array, fx.ofdm);
    CHECK(std::abs(a[0] - cxd{0.8, -0.1}) < 1e-9);
    CHECK(std::abs(a[1] - cxd{0.2, 0.5}) < 1e-9);
  }
  SUBCASE("zero observation gives zero gains") {
    const CVec y = CVec::Zero(fx.stacked.meas_dim());
    const CVec a = ls_gains_uplink(y, fx.stacked, one_at(0.1, 10e-9), fx.array,
                                   fx.ofdm);
    CHECK(a.norm() < 1e-12);
  }
  SUBCASE("two well-separated users leak less than 10%") {
    const double eta = fx.ofdm.subcarrier_spacing_hz();
    int ok = 0, total = 0;
    for (int t = 0; t < 30; ++t) {
      const double psi1 = rng.uniform(-0.45, 0.2);
      const double sep = rng.uniform(5.0, 12.0) / 32.0;
      const std::vector<AngleDelay> p1 = {{psi1, rng.uniform(0.0, 300e-9)}};
      const std::vector<AngleDelay> p2 = {{psi1 + sep, rng.uniform(0.0, 300e-9)}};
      if (distance_uplink(p1, p2, 32, 12, eta) < 5.0) continue;
      const cxd a1 = rng.cnormal(1.0), a2 = rng.cnormal(1.0);
      if (std::abs(a1) < 0.2) continue;  // relative leakage needs a live gain
      const UserChannel u1 = make_user(p1, {a1});
      const UserChannel u2 = make_user(p2, {a2});
      const CVec y = simulate_group_reception({u1, u2}, fx.stacked, {0.0, 1},
                                              fx.array, fx.ofdm);
      const CVec a = ls_gains_uplink(y, fx.stacked, p1, fx.array, fx.ofdm);
      const double leak = std::abs(a[0] - a1) / std::abs(a1);
      ++total;
      if (leak < 0.1) ++ok;
    }
    REQUIRE(total > 15);
    // Asymptotic-orthogonality leakage: typically below 10%; allow a couple
    // of tail samples where the interferer's gain draw is large.
    CHECK(ok >= total - 2);
  }
}

TEST_CASE("mmse_gains_uplink: zero data, shrinkage to zero, LS agreement at "
          "sigma2 -> 0") {
  GroupFixture fx;
  const std::vector<AngleDelay> params = {{0.18, 90e-9}, {-0.27, 210e-9}};
  const UserChannel u = make_user(params, {cxd{1.1, 0.0}, cxd{0.0, -0.6}});
  const CVec y = simulate_group_reception({u}, fx.stacked, {0.0, 2}, fx.array,
                                          fx.ofdm);
  const CMat c_n = noise_covariance_C(fx.stacked);
  const GainStats stats{{1.0, 0.5}};

  SUBCASE("zero observation") {
    const CVec a = mmse_gains_uplink(CVec::Zero(fx.stacked.meas_dim()), fx.stacked,
                                     {params}, {stats}, 0, 1.0, c_n, fx.array,
                                     fx.ofdm);
    CHECK(a.norm() < 1e-12);
  }
  SUBCASE("sigma2 -> infinity shrinks the estimate to zero") {
    const CVec a_small = mmse_gains_uplink(y, fx.stacked, {params}, {stats}, 0,
                                           1e6, c_n, fx.array, fx.ofdm);
    const CVec a_huge = mmse_gains_uplink(y, fx.stacked, {params}, {stats}, 0,
                                          1e12, c_n, fx.array, fx.ofdm);
    CHECK(a_huge.norm() < a_small.norm());
    CHECK(a_huge.norm() < 1e-6);
  }
  SUBCASE("sigma2 = 0 single user matches LS") {
    const CVec mmse = mmse_gains_uplink(y, fx.stacked, {params}, {stats}, 0, 0.0,
                                        c_n, fx.array, fx.ofdm);
    const CVec ls = ls_gains_uplink(y, fx.stacked, params, fx.array, fx.ofdm);
    CHECK((mmse - ls).norm() < 1e-6 * std::max(1.0, ls.norm()));
  }
}

TEST_CASE("MMSE dominance: paired Monte Carlo, two-user groups at 0 dB") {
  GroupFixture fx(17);
  Rng rng(2025);
  const double eta = fx.ofdm.subcarrier_spacing_hz();
  const CMat c_n = noise_covariance_C(fx.stacked);
  double mse_ls = 0.0, mse_mmse = 0.0;
  int trials = 0;
  for (int t = 0; t < 560 && trials < 500; ++t) {
    const double psi1 = rng.uniform(-0.45, 0.15);
    const double sep = rng.uniform(5.5, 10.0) / 32.0;
    const std::vector<AngleDelay> p1 = {{psi1, rng.uniform(0.0, 300e-9)}};
    const std::vector<AngleDelay> p2 = {{psi1 + sep, rng.uniform(0.0, 300e-9)}};
    if (distance_uplink(p1, p2, 32, 12, eta) < 5.0) continue;
    const cxd a1 = rng.cnormal(1.0), a2 = rng.cnormal(1.0);
    const UserChannel u1 = make_user(p1, {a1});
    const UserChannel u2 = make_user(p2, {a2});
    const double sigma2 = 2.0;  // SNR 0 dB against total mean power 2
    const CVec y = simulate_group_reception(
        {u1, u2}, fx.stacked, {sigma2, 10000 + static_cast<std::uint64_t>(t)},
        fx.array, fx.ofdm);
    CVec ls;
    try {
      ls = ls_gains_uplink(y, fx.stacked, p1, fx.array, fx.ofdm);
    } catch (const NumericalError&) {
      continue;
    }
    const CVec mmse = mmse_gains_uplink(
        y, fx.stacked, {p1, p2}, {GainStats{{1.0}}, GainStats{{1.0}}}, 0, sigma2,
        c_n, fx.array, fx.ofdm);
    mse_ls += std::norm(ls[0] - a1);
    mse_mmse += std::norm(mmse[0] - a1);
    ++trials;
  }
  REQUIRE(trials >= 500);
  CHECK(mse_mmse <= mse_ls);
}

TEST_CASE("reconstruct_full_band: zero gains, exact identity, smooth "
          "perturbation growth") {
  const ArrayConfig array{16, 0.5, 26e9};
  const OfdmConfig ofdm{64, 150e6};
  const std::vector<AngleDelay> params = {{0.2, 40e-9}, {-0.1, 180e-9}};

  CHECK(reconstruct_full_band(params, CVec::Zero(2), array, ofdm).norm() == 0.0);
  CHECK(reconstruct_full_band({}, CVec(), array, ofdm).norm() == 0.0);

  CVec gains(2);
  gains << cxd{0.9, -0.2}, cxd{-0.4, 0.6};
  const UserChannel u = make_user(params, {gains[0], gains[1]});
  const CVec h = reconstruct_full_band(params, gains, array, ofdm);
  for (int q = 1; q <= 64; ++q)
    CHECK((h.segment(static_cast<Eigen::Index>(q - 1) * 16, 16) -
           channel_at_subcarrier(u, q, array, ofdm)).norm() < 1e-10);

  double prev_nmse = 0.0;
  for (double dpsi : {1e-4, 3e-4, 1e-3, 3e-3}) {
    std::vector<AngleDelay> shifted = params;
    shifted[0].psi += dpsi;
    const CVec h2 = reconstruct_full_band(shifted, gains, array, ofdm);
    const double nmse = metric_nmse(h2, h);
    CHECK(nmse > prev_nmse);
    CHECK(nmse < 1.0);
    prev_nmse = nmse;
  }
}

TEST_CASE("path association and AMSE metrics") {
  const ArrayConfig array{64, 0.5, 26e9};
  const OfdmConfig ofdm{256, 600e6};
  const double eta = ofdm.subcarrier_spacing_hz();

  SUBCASE("perfect estimates give zero AMSE") {
    const std::vector<AngleDelay> truth = {{0.2, 50e-9}, {-0.3, 150e-9}};
    CHECK(metric_amse_angle(truth, truth, array, 12, eta, 5.0) == 0.0);
    CHECK(metric_amse_delay(truth, truth, array, ofdm, 12, 5.0) == 0.0);
  }
  SUBCASE("association picks the min-cost pairing") {
    const std::vector<AngleDelay> truth = {{0.10, 0.0}, {0.20, 0.0}};
    const std::vector<AngleDelay> est = {{0.21, 0.0}, {0.11, 0.0}};
    const auto assoc = associate_paths(est, truth, 64, 12, eta, 5.0);
    REQUIRE(assoc.matches.size() == 2);
    CHECK(assoc.matches[0] == std::pair<int, int>{0, 1});
    CHECK(assoc.matches[1] == std::pair<int, int>{1, 0});
  }
  SUBCASE("missed truths and extra estimates are reported") {
    const std::vector<AngleDelay> truth = {{0.10, 0.0}, {-0.40, 200e-9}};
    const std::vector<AngleDelay> est = {{0.101, 1e-9}};
    const auto assoc = associate_paths(est, truth, 64, 12, eta, 5.0);
    CHECK(assoc.matches.size() == 1);
    REQUIRE(assoc.missed_truths.size() == 1);
    CHECK(assoc.missed_truths[0] == 1);
    CHECK(assoc.extra_estimates.empty());
  }
  SUBCASE("hand-computed two-path AMSE") {
    // Angles map through asin(psi / 0.5); errors in physical radians.
    const std::vector<AngleDelay> truth = {{0.10, 100e-9}, {0.30, 200e-9}};
    const std::vector<AngleDelay> est = {{0.11, 110e-9}, {0.29, 190e-9}};
    const double e1 = std::asin(0.22) - std::asin(0.20);
    const double e2 = std::asin(0.58) - std::asin(0.60);
    const double expect_angle = (e1 * e1 + e2 * e2) / 2.0;
    CHECK(metric_amse_angle(est, truth, array, 12, eta, 5.0) ==
          doctest::Approx(expect_angle).epsilon(1e-9));
    const double dt = 10e-9;
    const double expect_delay = (dt * dt + dt * dt) / 2.0 / ofdm.sample_period_s();
    CHECK(metric_amse_delay(est, truth, array, ofdm, 12, 5.0) ==
          doctest::Approx(expect_delay).epsilon(1e-9));
  }
  SUBCASE("a miss contributes the capped penalty") {
    const std::vector<AngleDelay> truth = {{0.0, 0.0}};
    const std::vector<AngleDelay> est = {};
    const double penalty = 5.0 / (64.0 * 0.5);
    CHECK(metric_amse_angle(est, truth, array, 12, eta, 5.0) ==
          doctest::Approx(penalty * penalty).epsilon(1e-12));
  }
}

TEST_CASE("metric_nmse: zero estimator gives 1, perfect gives 0") {
  Rng rng(55);
  CVec h(128);
  for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = rng.cnormal(1.0);
  CHECK(metric_nmse(CVec::Zero(128), h) == doctest::Approx(1.0));
  CHECK(metric_nmse(h, h) == doctest::Approx(0.0));
  CHECK(metric_nmse(CVec::Zero(4), CVec::Zero(4)) == 0.0);
}
