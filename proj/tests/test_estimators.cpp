#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mfse/estimators.hpp"

using namespace mfse;

namespace {

std::mt19937_64 g_rng(777);

cd random_c() {
  std::normal_distribution<double> d(0.0, 1.0);
  return cd(d(g_rng), d(g_rng));
}

}  // namespace

TEST_CASE("smoothing config validation") {
  SmoothingConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda = 1.5;
  CHECK_THROWS(cfg.validate());
  cfg.lambda = -0.1;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("oracle_correlation recursion on a constant track") {
  // constant v: Phi_l = (1 - lambda^{l+1}) v v^H
  SmoothingConfig cfg;
  cfg.lambda = 0.5;
  const cvec v = {cd(1, 1), cd(2, -1)};
  const std::vector<cvec> track(6, v);
  const auto phis = oracle_correlation(track, cfg);
  REQUIRE(phis.size() == 6);
  for (std::size_t l = 0; l < 6; ++l) {
    const double scale = 1.0 - std::pow(0.5, static_cast<double>(l + 1));
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        const cd expect = scale * v[i] * std::conj(v[j]);
        CHECK(std::abs(phis[l].at(i, j) - expect) <= 1e-12);
      }
    }
  }
}

TEST_CASE("oracle_correlation converges to the true covariance") {
  SmoothingConfig cfg;  // lambda = 0.9
  std::vector<cvec> track(4000);
  for (auto& v : track) v = {random_c(), random_c()};
  const auto phis = oracle_correlation(track, cfg);
  // E[v v^H] = 2 I for unit-variance complex Gaussian entries; average the
  // smoothed estimates over the tail to beat down the estimator variance
  CMat mean(2);
  for (std::size_t l = 2000; l < 4000; ++l) {
    mean = add(mean, scale(phis[l], 1.0 / 2000.0));
  }
  CHECK(std::abs(mean.at(0, 0).real() - 2.0) <= 0.2);
  CHECK(std::abs(mean.at(1, 1).real() - 2.0) <= 0.2);
  CHECK(std::abs(mean.at(0, 1)) <= 0.2);
}

TEST_CASE("oracle_snr tracks the smoothed power ratio") {
  SmoothingConfig cfg;
  const std::size_t n = 300;
  std::vector<cd> x(n), w(n);
  for (std::size_t l = 0; l < n; ++l) {
    x[l] = 2.0 * std::exp(cd(0.0, 0.03 * static_cast<double>(l)));
    w[l] = cd(1.0, 0.0);
  }
  const auto xi = oracle_snr(x, w, cfg);
  // constant-magnitude tracks: ratio of smoothed powers converges to 4
  CHECK(std::abs(xi.back() - 4.0) <= 1e-6);

  // silent speech hits the floor
  const auto xi0 = oracle_snr(std::vector<cd>(n, cd(0, 0)), w, cfg);
  CHECK(xi0.back() == kXiFloor);
}

TEST_CASE("decision_directed_snr limits") {
  const std::size_t n = 200;
  std::vector<cd> y(n);
  std::vector<double> phi_n(n, 1.0);
  for (auto& v : y) v = cd(3.0, 0.0);

  // beta = 0: pure ML term max(|Y|^2/phi_n - 1, 0)
  const auto xi_ml = decision_directed_snr(y, phi_n, 0.0);
  for (double v : xi_ml) CHECK(v == doctest::Approx(8.0).epsilon(1e-12));

  // beta = 0.98 converges towards the same stationary value
  const auto xi_dd = decision_directed_snr(y, phi_n, 0.98);
  CHECK(std::abs(xi_dd.back() - 8.0) / 8.0 <= 0.2);

  // silence clamps to the floor
  const auto xi_sil =
      decision_directed_snr(std::vector<cd>(n, cd(0, 0)), phi_n, 0.98);
  for (double v : xi_sil) CHECK(v == kXiFloor);
}

TEST_CASE("decision-directed tracks the oracle at favourable SNR") {
  // stationary scene per bin: deterministic-amplitude speech phasor plus
  // complex white noise with known power. The gain-squared feedback gives
  // the classic decision-directed rule a systematic underestimate, so the
  // comparison is made where speech clearly dominates.
  for (double snr_db : {10.0, 20.0}) {
    const double snr = std::pow(10.0, snr_db / 10.0);
    const std::size_t n = 400;
    std::mt19937_64 rng(static_cast<std::uint64_t>(snr_db) + 5);
    std::normal_distribution<double> d(0.0, std::sqrt(0.5));
    std::vector<cd> x(n), w(n), y(n);
    for (std::size_t l = 0; l < n; ++l) {
      x[l] = std::sqrt(snr) * std::exp(cd(0.0, 0.21 * static_cast<double>(l)));
      w[l] = cd(d(rng), d(rng));  // unit power
      y[l] = x[l] + w[l];
    }
    SmoothingConfig cfg;
    const auto xi_oracle = oracle_snr(x, w, cfg);
    const auto xi_dd = decision_directed_snr(y, std::vector<double>(n, 1.0), 0.98);
    // compare time-averaged dB values after convergence
    double mean_oracle = 0.0, mean_dd = 0.0;
    for (std::size_t l = 200; l < n; ++l) {
      mean_oracle += 10.0 * std::log10(xi_oracle[l]);
      mean_dd += 10.0 * std::log10(xi_dd[l]);
    }
    mean_oracle /= 200.0;
    mean_dd /= 200.0;
    CHECK(std::abs(mean_oracle - mean_dd) <= 2.0);
  }
}

TEST_CASE("hermitian packing round trip and hand examples") {
  // N = 2: [d0, d1, re01, im01]
  const CMat id = assemble_hermitian({1.0, 1.0, 0.0, 0.0});
  CHECK(id.at(0, 0) == cd(1, 0));
  CHECK(id.at(1, 1) == cd(1, 0));
  CHECK(id.at(0, 1) == cd(0, 0));

  const CMat m = assemble_hermitian({2.0, 5.0, 1.0, -3.0});
  CHECK(m.at(0, 0) == cd(2, 0));
  CHECK(m.at(1, 1) == cd(5, 0));
  CHECK(m.at(0, 1) == cd(1, -3));
  CHECK(m.at(1, 0) == cd(1, 3));

  // pack/unpack is an exact bijection for random vectors
  std::normal_distribution<double> d(0.0, 2.0);
  for (std::size_t n : {1u, 2u, 5u}) {
    std::vector<double> h(n * n);
    for (auto& v : h) v = d(g_rng);
    const auto back = unpack_hermitian(assemble_hermitian(h));
    REQUIRE(back.size() == h.size());
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(back[i] == h[i]);
  }

  CHECK_THROWS(assemble_hermitian({1.0, 2.0, 3.0}));  // not a square count
}

TEST_CASE("psd_from_factor is positive semidefinite") {
  for (int trial = 0; trial < 200; ++trial) {
    CMat h(5);
    for (auto& v : h.a) v = random_c();
    const CMat psd = psd_from_factor(h);
    const auto ev = hermitian_eigenvalues(psd);
    for (double e : ev) CHECK(e >= -1e-12 * psd.trace_real());
  }
}

TEST_CASE("snr_activation is a clamped softplus") {
  CHECK(snr_activation(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(snr_activation(-1e3) == kXiFloor);
  CHECK(snr_activation(1e9) == kXiCeil);
  // monotone
  CHECK(snr_activation(1.0) > snr_activation(0.5));
  // large positive raw ~ identity
  CHECK(snr_activation(30.0) == doctest::Approx(30.0).epsilon(1e-10));
}

TEST_CASE("features are finite and shaped correctly") {
  Spectrogram s(3, 10);
  s.at(1, 4) = cd(0.5, -0.25);
  const Sequence fc = features_complex(s, 1);
  CHECK(fc.frames == 10);
  CHECK(fc.channels == 2);
  CHECK(fc.at(4, 0) == 0.5);
  CHECK(fc.at(4, 1) == -0.25);

  // silence: the log floor keeps features finite
  const Sequence fl = features_log_mag(s, 0);
  CHECK(fl.channels == 1);
  for (double v : fl.data) {
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(std::log10(kLogFloor)));
  }
}

TEST_CASE("oracle_estimates field shape and internal consistency") {
  Spectrogram clean(4, 30), noise(4, 30), noisy(4, 30);
  for (std::size_t i = 0; i < noisy.values.size(); ++i) {
    clean.values[i] = random_c();
    noise.values[i] = 0.5 * random_c();
    noisy.values[i] = clean.values[i] + noise.values[i];
  }
  SmoothingConfig cfg;
  const EstimateField f = oracle_estimates(noisy, clean, noise, 3, cfg);
  CHECK(f.bins == 4);
  CHECK(f.frames == 30);
  CHECK(f.taps == 3);
  REQUIRE(f.phi_y.size() == 4 * 30);
  REQUIRE(f.xi.size() == 4 * 30);
  // phi_n matches smoothing the stacked noise track directly
  const auto stacked_n = stack_frames(noise, 2, 3);
  const auto phis = oracle_correlation(stacked_n, cfg);
  for (std::size_t l = 0; l < 30; ++l) {
    for (std::size_t i = 0; i < 9; ++i) {
      CHECK(std::abs(f.phi_n[f.index(2, l)].a[i] - phis[l].a[i]) <= 1e-12);
    }
  }
  for (double xi : f.xi) {
    CHECK(xi >= kXiFloor);
    CHECK(xi <= kXiCeil);
  }
}

TEST_CASE("neural_estimate applies the output parameterizations") {
  TcnArch psd_arch;
  psd_arch.hidden_dim = 8;
  psd_arch.bottleneck_dim = 4;
  psd_arch.input_dim = 2;
  psd_arch.output_dim = 9;  // N = 3
  TcnArch snr_arch = psd_arch;
  snr_arch.input_dim = 1;
  snr_arch.output_dim = 1;

  TcnModelSet models;
  models.f_y = init_model(psd_arch, 1);
  models.f_n = init_model(psd_arch, 2);
  models.f_xi = init_model(snr_arch, 3);

  Spectrogram noisy(3, 20);
  for (auto& v : noisy.values) v = random_c();
  const EstimateField f = neural_estimate(noisy, models, 3);
  CHECK(f.taps == 3);
  for (const CMat& m : f.phi_y) {
    const auto ev = hermitian_eigenvalues(m);
    for (double e : ev) CHECK(e >= -1e-10 * std::max(m.trace_real(), 1.0));
  }
  for (double xi : f.xi) {
    CHECK(xi >= kXiFloor);
    CHECK(xi <= kXiCeil);
  }
}
