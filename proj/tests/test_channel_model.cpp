#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>

#include "bsq/channel_model.hpp"
#include "bsq/rng.hpp"

using namespace bsq;

namespace {

double deg2rad(double d) { return d * kTwoPi / 360.0; }

UserChannel one_path(double psi, double tau, cxd alpha = {1.0, 0.0}) {
  UserChannel u;
  u.paths.push_back({psi, tau, alpha});
  return u;
}

}  // namespace

TEST_CASE("xi_of: zero offset, carrier doubling, Fig.1 operating point") {
  CHECK(xi_of(0.3, 0.0, 26e9) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(xi_of(0.3, 26e9, 26e9) == doctest::Approx(0.6).epsilon(1e-15));
  // psi = 0.5 sin(56.5 deg), f = 0.1 fc (2047/2048); value frozen from
  // independent arithmetic.
  const double psi = 0.5 * std::sin(deg2rad(56.5));
  const double f_c = 28e9;
  const double f = 0.1 * f_c * (2047.0 / 2048.0);
  CHECK(xi_of(psi, f, f_c) == doctest::Approx(0.4586168435963647).epsilon(1e-12));
}

TEST_CASE("steering_vector: pinned small cases") {
  const CVec a0 = steering_vector(0.0, 4);
  for (int m = 0; m < 4; ++m) CHECK(std::abs(a0[m] - cxd{1, 0}) < 1e-15);

  const CVec a1 = steering_vector(0.5, 2);
  CHECK(std::abs(a1[0] - cxd{1, 0}) < 1e-15);
  CHECK(std::abs(a1[1] - cxd{-1, 0}) < 1e-12);

  const CVec a2 = steering_vector(0.25, 4);
  CHECK(std::abs(a2[0] - cxd{1, 0}) < 1e-12);
  CHECK(std::abs(a2[1] - cxd{0, -1}) < 1e-12);
  CHECK(std::abs(a2[2] - cxd{-1, 0}) < 1e-12);
  CHECK(std::abs(a2[3] - cxd{0, 1}) < 1e-12);
}

TEST_CASE("steering_vector: unit modulus for random arguments") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const CVec a = steering_vector(rng.uniform(-3.0, 3.0), 32);
    for (int m = 0; m < 32; ++m)
      CHECK(std::abs(std::abs(a[m]) - 1.0) < 1e-12);
  }
}

TEST_CASE("channel_at_subcarrier: degenerate and pinned cases") {
  const ArrayConfig array{2, 0.5, 26e9};
  const OfdmConfig ofdm{256, 256e6};  // eta = 1 MHz

  SUBCASE("no paths -> zero vector") {
    const CVec h = channel_at_subcarrier(UserChannel{}, 5, array, ofdm);
    CHECK(h.norm() == 0.0);
  }
  SUBCASE("unit path at q=1 equals the steering vector") {
    const ArrayConfig big{16, 0.5, 26e9};
    const CVec h = channel_at_subcarrier(one_path(0.23, 55e-9), 1, big, ofdm);
    const CVec a = steering_vector(0.23, 16);
    CHECK((h - a).norm() < 1e-12);
  }
  SUBCASE("hand-evaluated point: psi=0.2, tau=10ns, q=2, eta=1MHz, M=2") {
    const CVec h = channel_at_subcarrier(one_path(0.2, 10e-9), 2, array, ofdm);
    CHECK(std::abs(h[0] - cxd{0.9980267284282716, -0.06279051952931337}) < 1e-12);
    CHECK(std::abs(h[1] - cxd{0.24864307312450495, -0.9685951797253597}) < 1e-12);
  }
  SUBCASE("out-of-range subcarrier throws") {
    CHECK_THROWS_AS(channel_at_subcarrier(one_path(0.1, 0), 0, array, ofdm),
                    ConfigError);
    CHECK_THROWS_AS(channel_at_subcarrier(one_path(0.1, 0), 257, array, ofdm),
                    ConfigError);
  }
}

TEST_CASE("narrowband baseline: q=1 agreement, single-antenna agreement, "
          "per-element phase error at the band edge") {
  const OfdmConfig ofdm{256, 598e6};  // W/fc = 0.023
  const ArrayConfig array{64, 0.5, 26e9};
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    UserChannel u;
    const int n = 1 + static_cast<int>(rng.uniform() * 3);
    for (int l = 0; l < n; ++l)
      u.paths.push_back({rng.uniform(-0.5, 0.5), rng.uniform(0.0, 200e-9),
                         rng.cnormal(1.0)});
    const CVec a = channel_at_subcarrier(u, 1, array, ofdm);
    const CVec b = narrowband_channel_at_subcarrier(u, 1, array, ofdm);
    CHECK((a - b).norm() < 1e-12);
  }

  const ArrayConfig single{1, 0.5, 26e9};
  const UserChannel u = one_path(0.3, 80e-9, {0.7, -0.2});
  const int nc = ofdm.num_subcarriers;
  CHECK((channel_at_subcarrier(u, nc, single, ofdm) -
         narrowband_channel_at_subcarrier(u, nc, single, ofdm)).norm() < 1e-12);

  // Element m phase error is 2 pi (m-1) psi W (Nc-1) / (Nc fc).
  const UserChannel u64 = one_path(0.31, 0.0);
  const CVec exact = channel_at_subcarrier(u64, nc, array, ofdm);
  const CVec nb = narrowband_channel_at_subcarrier(u64, nc, array, ofdm);
  const double shift = kTwoPi * 0.31 * ofdm.bandwidth_hz * (nc - 1) /
                       (static_cast<double>(nc) * array.carrier_hz);
  for (int m = 0; m < 64; ++m) {
    const cxd ratio = exact[m] / nb[m];
    const double expected = -shift * m;
    CHECK(std::abs(std::arg(ratio * std::polar(1.0, -expected))) < 1e-9);
  }
}

TEST_CASE("channel_basis_p: all-ones case, single pilot, empty pilot error") {
  const ArrayConfig array{8, 0.5, 26e9};
  const OfdmConfig ofdm{64, 64e6};
  const std::vector<int> pilots = {1, 9, 33};
  const CVec p0 = channel_basis_p(0.0, 0.0, pilots, array, ofdm);
  REQUIRE(p0.size() == 24);
  for (Eigen::Index i = 0; i < p0.size(); ++i)
    CHECK(std::abs(p0[i] - cxd{1, 0}) < 1e-12);

  const CVec p1 = channel_basis_p(0.27, 13e-9, {1}, array, ofdm);
  CHECK((p1 - steering_vector(0.27, 8)).norm() < 1e-12);

  CHECK_THROWS_AS(channel_basis_p(0.1, 0.0, {}, array, ofdm), ConfigError);
}

namespace {

std::vector<int> scattered_pilots(int n_c, int count, Rng& rng) {
  std::vector<int> all(static_cast<size_t>(n_c));
  for (int q = 1; q <= n_c; ++q) all[static_cast<size_t>(q - 1)] = q;
  for (int i = n_c - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform() * (i + 1));
    std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(j)]);
  }
  std::vector<int> out(all.begin(), all.begin() + count);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("channel basis: cross-correlation statistics beyond 2 angle bins "
          "(M=64, P=12, scattered pilots, random delays)") {
  const ArrayConfig array{64, 0.5, 26e9};
  const OfdmConfig ofdm{256, 600e6};
  const double mp = 64.0 * 12.0;
  Rng rng(11);
  double sum = 0.0;
  std::vector<double> samples;
  for (int trial = 0; trial < 300; ++trial) {
    const auto pilots = scattered_pilots(256, 12, rng);
    const double psi1 = rng.uniform(-0.4, 0.4);
    const double sep_bins = rng.uniform(2.0, 12.0);
    double psi2 = psi1 + sep_bins / 64.0 * (rng.uniform() < 0.5 ? -1 : 1);
    psi2 = std::clamp(psi2, -0.5, 0.5);
    const CVec a =
        channel_basis_p(psi1, rng.uniform(0.0, 300e-9), pilots, array, ofdm);
    const CVec b =
        channel_basis_p(psi2, rng.uniform(0.0, 300e-9), pilots, array, ofdm);
    const double c = std::abs(a.dot(b)) / mp;
    samples.push_back(c);
    sum += c;
  }
  std::sort(samples.begin(), samples.end());
  CHECK(sum / 300.0 < 0.02);
  CHECK(samples[296] < 0.1);  // 99th percentile under the spec bound
}

TEST_CASE("asymptotic angle-delay orthogonality: envelope decay, < 0.05 at "
          ">= 5 angle bins (M=64, P=12)") {
  const ArrayConfig array{64, 0.5, 26e9};
  const OfdmConfig ofdm{256, 600e6};
  const double mp = 64.0 * 12.0;
  const double eta = ofdm.subcarrier_spacing_hz();
  Rng rng(13);
  const auto pilots = scattered_pilots(256, 12, rng);

  auto coupling_angle = [&](double bins) {
    const CVec a = channel_basis_p(0.05, 40e-9, pilots, array, ofdm);
    const CVec b = channel_basis_p(0.05 + bins / 64.0, 40e-9, pilots, array, ofdm);
    return std::abs(a.dot(b)) / mp;
  };
  // Envelope over one-bin windows of the angle coordinate decays.
  std::vector<double> envelope;
  for (int win = 0; win < 8; ++win) {
    double peak = 0.0;
    for (int s = 0; s < 8; ++s)
      peak = std::max(peak, coupling_angle(1.0 + win + s / 8.0));
    envelope.push_back(peak);
  }
  for (size_t w = 1; w < envelope.size(); ++w)
    CHECK(envelope[w] < envelope[0] + 1e-9);

  // Delay coordinate: the main lobe decays, then floors near 1/sqrt(P) for
  // finite P (the orthogonality is asymptotic in P).
  auto coupling_delay = [&](double bins) {
    const CVec a = channel_basis_p(-0.1, 30e-9, pilots, array, ofdm);
    const CVec b =
        channel_basis_p(-0.1, 30e-9 + bins / (12.0 * eta), pilots, array, ofdm);
    return std::abs(a.dot(b)) / mp;
  };
  CHECK(coupling_delay(0.0) == doctest::Approx(1.0).epsilon(1e-9));
  for (int s = 0; s < 16; ++s) CHECK(coupling_delay(1.0 + s * 0.5) < 0.8);

  // Generic pairs at >= 5 angle bins with random delays sit under 0.05.
  for (int trial = 0; trial < 200; ++trial) {
    const auto ps = scattered_pilots(256, 12, rng);
    const double psi1 = rng.uniform(-0.4, 0.4);
    double psi2 = psi1 + rng.uniform(5.0, 16.0) / 64.0 *
                             (rng.uniform() < 0.5 ? -1 : 1);
    psi2 = std::clamp(psi2, -0.5, 0.5);
    const CVec a = channel_basis_p(psi1, rng.uniform(0.0, 300e-9), ps, array, ofdm);
    const CVec b = channel_basis_p(psi2, rng.uniform(0.0, 300e-9), ps, array, ofdm);
    CHECK(std::abs(a.dot(b)) / mp < 0.05);
  }
}

TEST_CASE("basis_matrix_P and full_band_basis reproduce direct synthesis") {
  const ArrayConfig array{16, 0.5, 26e9};
  const OfdmConfig ofdm{32, 64e6};
  const std::vector<int> pilots = {2, 7, 15, 31};

  CHECK(basis_matrix_P({}, pilots, array, ofdm).cols() == 0);
  CHECK(full_band_basis({}, array, ofdm).cols() == 0);

  UserChannel u;
  Rng rng(5);
  for (int l = 0; l < 3; ++l)
    u.paths.push_back({rng.uniform(-0.45, 0.45), rng.uniform(0.0, 300e-9),
                       rng.cnormal(1.0)});
  const CMat P = basis_matrix_P(u.angle_delays(), pilots, array, ofdm);
  REQUIRE(P.rows() == 64);
  REQUIRE(P.cols() == 3);
  CHECK((P.col(0) - channel_basis_p(u.paths[0].psi, u.paths[0].tau_s, pilots,
                                    array, ofdm)).norm() < 1e-12);
  const CVec h = P * u.gains();
  for (size_t i = 0; i < pilots.size(); ++i) {
    const CVec hq = channel_at_subcarrier(u, pilots[i], array, ofdm);
    CHECK((h.segment(static_cast<Eigen::Index>(i) * 16, 16) - hq).norm() < 1e-10);
  }

  const CMat Pf = full_band_basis(u.angle_delays(), array, ofdm);
  REQUIRE(Pf.rows() == 16 * 32);
  const CVec hf = Pf * u.gains();
  for (int q = 1; q <= 32; ++q) {
    const CVec hq = channel_at_subcarrier(u, q, array, ofdm);
    CHECK((hf.segment(static_cast<Eigen::Index>(q - 1) * 16, 16) - hq).norm() <
          1e-10);
  }

  const OfdmConfig tiny{1, 1e6};
  const CMat P1 = full_band_basis(u.angle_delays(), array, tiny);
  const CMat P2 = basis_matrix_P(u.angle_delays(), {1}, array, tiny);
  CHECK((P1 - P2).norm() < 1e-14);
}

TEST_CASE("virtual_angle_spectrum: constant input, unitarity, integer-grid "
          "steering peak") {
  const CVec ones = CVec::Ones(16);
  const CVec s = virtual_angle_spectrum(ones);
  CHECK(std::abs(s[0] - cxd{4.0, 0.0}) < 1e-12);
  for (int v = 1; v < 16; ++v) CHECK(std::abs(s[v]) < 1e-12);

  Rng rng(9);
  CVec h(32);
  for (int m = 0; m < 32; ++m) h[m] = rng.cnormal(1.0);
  const CVec sh = virtual_angle_spectrum(h);
  CHECK(sh.norm() == doctest::Approx(h.norm()).epsilon(1e-12));

  for (int v : {0, 3, 17, 31}) {
    const CVec a = steering_vector(static_cast<double>(v) / 32.0, 32);
    const CVec sa = virtual_angle_spectrum(a);
    CHECK(std::abs(sa[v] - cxd{std::sqrt(32.0), 0.0}) < 1e-9);
  }
}

TEST_CASE("squint_span_samples: broadside zero, Remark-1 constant, Fig.1 span") {
  const ArrayConfig array{128, 0.5, 28e9};
  const OfdmConfig ofdm{2048, 2.8e9};
  CHECK(squint_span_samples(0.0, array, ofdm).bins == 0.0);

  // 128 antennas, half-wavelength spacing, 28 GHz, 600 MHz: the maximum
  // array propagation delay is 1.36 sample periods.
  const OfdmConfig ofdm600{2048, 600e6};
  const auto remark = squint_span_samples(0.5 /* sin = 1 */, array, ofdm600);
  CHECK(remark.prop_delay_s / ofdm600.sample_period_s() ==
        doctest::Approx(1.36).epsilon(0.01));

  const double psi = 0.5 * std::sin(deg2rad(56.5));
  const auto fig1 = squint_span_samples(psi, array, ofdm);  // W/fc = 0.1
  CHECK(fig1.bins == doctest::Approx(5.334263368035916).epsilon(1e-9));
}

TEST_CASE("squint-peak agreement: DFT argmax trace matches the span formula") {
  for (int m : {64, 128}) {
    const ArrayConfig array{m, 0.5, 28e9};
    const OfdmConfig ofdm{256, 0.1 * 28e9};
    const double psi = 0.5 * std::sin(deg2rad(56.5));
    const UserChannel u = one_path(psi, 120e-9);
    auto argmax_bin = [&](int q) {
      const CVec s = virtual_angle_spectrum(channel_at_subcarrier(u, q, array, ofdm));
      int best = 0;
      for (int v = 1; v < m; ++v)
        if (std::abs(s[v]) > std::abs(s[best])) best = v;
      return best;
    };
    const int span_observed = argmax_bin(ofdm.num_subcarriers) - argmax_bin(1);
    const double span_formula = squint_span_samples(psi, array, ofdm).bins;
    CHECK(std::abs(span_observed - std::round(span_formula)) <= 1.0);
  }
}

TEST_CASE("covariance_reconstruct: rank-1 case, trace identity, PSD floor, "
          "eigen-approximation") {
  const ArrayConfig array{64, 0.5, 26e9};
  const OfdmConfig ofdm{256, 600e6};
  std::vector<int> pilots;
  for (int i = 0; i < 12; ++i) pilots.push_back(5 + 20 * i + (i % 5));

  SUBCASE("one unit-power path gives p p^H") {
    const std::vector<AngleDelay> params = {{0.2, 50e-9}};
    const CMat R = covariance_reconstruct(params, {{1.0}}, pilots, array, ofdm);
    const CVec p = channel_basis_p(0.2, 50e-9, pilots, array, ofdm);
    CHECK((R - p * p.adjoint()).norm() < 1e-9);
    Eigen::SelfAdjointEigenSolver<CMat> eig(R);
    int significant = 0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
      if (eig.eigenvalues()[i] > 1e-6 * eig.eigenvalues().maxCoeff()) ++significant;
    CHECK(significant == 1);
  }

  SUBCASE("trace equals MP * sum of mean powers; min eigenvalue bounded") {
    const std::vector<AngleDelay> params = {{0.31, 10e-9}, {-0.22, 140e-9},
                                            {0.05, 260e-9}};
    const GainStats stats{{1.0, 0.4, 0.15}};
    const CMat R = covariance_reconstruct(params, stats, pilots, array, ofdm);
    const double mp = 64.0 * 12.0;
    CHECK(R.trace().real() == doctest::Approx(mp * 1.55).epsilon(1e-9));
    Eigen::SelfAdjointEigenSolver<CMat> eig(R);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * R.trace().real());
  }

  SUBCASE("well-separated paths: top eigenvalues near MP * power (5%)") {
    const std::vector<AngleDelay> params = {{-0.35, 20e-9}, {0.02, 150e-9},
                                            {0.38, 280e-9}};
    const GainStats stats{{1.0, 0.6, 0.3}};
    const CMat R = covariance_reconstruct(params, stats, pilots, array, ofdm);
    Eigen::SelfAdjointEigenSolver<CMat> eig(R);
    const double mp = 64.0 * 12.0;
    const auto ev = eig.eigenvalues();
    std::vector<double> expected = {mp * 0.3, mp * 0.6, mp * 1.0};
    for (int i = 0; i < 3; ++i) {
      const double got = ev[ev.size() - 3 + i];
      CHECK(std::abs(got - expected[static_cast<size_t>(i)]) /
                expected[static_cast<size_t>(i)] < 0.05);
    }
  }

  SUBCASE("length mismatch throws") {
    CHECK_THROWS_AS(covariance_reconstruct({{0.1, 0.0}}, {{1.0, 2.0}}, pilots,
                                           array, ofdm),
                    ConfigError);
  }
}
