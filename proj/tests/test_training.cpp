#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mfse/training.hpp"

using namespace mfse;

namespace {

Waveform wf(std::vector<double> v) {
  Waveform w;
  w.samples = std::move(v);
  return w;
}

TcnArch tiny_arch(int in, int out) {
  TcnArch a;
  a.hidden_dim = 16;
  a.bottleneck_dim = 8;
  a.input_dim = in;
  a.output_dim = out;
  return a;
}

TcnModelSet tiny_models(std::size_t taps, std::uint64_t seed) {
  const int n2 = static_cast<int>(taps * taps);
  TcnModelSet m;
  m.f_y = init_model(tiny_arch(2, n2), seed);
  m.f_n = init_model(tiny_arch(2, n2), seed + 1);
  m.f_xi = init_model(tiny_arch(1, 1), seed + 2);
  return m;
}

std::vector<TrainUtterance> tiny_batch(double duration_s, std::uint64_t seed) {
  MixtureSpec spec;
  spec.snr_db = 0.0;
  spec.seed = seed;
  spec.duration_s = duration_s;
  const SynthTriple t = make_mixture(spec);
  return {{t.noisy, t.speech}};
}

}  // namespace

TEST_CASE("si_sdr hand-computed example") {
  // ref = [1,0,0], est = [0.5,0.5,0]: projection alpha = 0.5, target energy
  // 0.25, residual energy 0.25 -> 0 dB
  const double v = si_sdr(wf({0.5, 0.5, 0.0}), wf({1.0, 0.0, 0.0}));
  CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("si_sdr is scale invariant in the estimate") {
  const Waveform ref = wf({1.0, -0.3, 0.2, 0.7, -1.1});
  const Waveform est = wf({0.9, -0.1, 0.3, 0.6, -1.0});
  const double a = si_sdr(est, ref);
  Waveform est2 = est;
  for (auto& s : est2.samples) s *= 37.5;
  CHECK(std::abs(si_sdr(est2, ref) - a) <= 1e-9);
}

TEST_CASE("si_sdr caps at 120 dB for a perfect estimate") {
  const Waveform ref = wf({0.4, -0.2, 0.9});
  CHECK(si_sdr(ref, ref) == doctest::Approx(120.0).epsilon(1e-9));
}

TEST_CASE("si_sdr edge cases") {
  CHECK(si_sdr(wf({0.0, 0.0}), wf({1.0, 1.0})) <= -100.0);
  CHECK_THROWS(si_sdr(wf({1.0}), wf({1.0, 2.0})));
  CHECK_THROWS(si_sdr(wf({1.0, 1.0}), wf({0.0, 0.0})));
}

TEST_CASE("loss matches forward-only evaluation") {
  const auto batch = tiny_batch(0.12, 5);
  const TcnModelSet models = tiny_models(5, 100);
  LossSettings settings;
  const LossResult r = loss_and_gradients(batch, models, settings);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == doctest::Approx(loss_only(batch, models, settings)).epsilon(1e-12));
  CHECK(global_grad_norm(r.grads) > 0.0);
}

TEST_CASE("gradient check passes on healthy gradients") {
  const auto batch = tiny_batch(0.12, 6);
  const TcnModelSet models = tiny_models(5, 200);
  LossSettings settings;
  settings.reg.min_gain_db = -400.0;  // floor off: strict tolerance applies
  const GradCheckReport rep = gradient_check(batch, models, settings, 4, 17);
  CHECK(rep.passed);
  CHECK(rep.max_rel_error <= 1e-3);
  CHECK(rep.probes.size() >= 12);
}

TEST_CASE("gradient check flags a corrupted adjoint") {
  const auto batch = tiny_batch(0.12, 6);
  const TcnModelSet models = tiny_models(5, 200);
  LossSettings settings;
  settings.reg.min_gain_db = -400.0;
  // 1% scale error on one head's adjoint must trip the 1e-3 tolerance
  const GradCheckReport rep =
      gradient_check(batch, models, settings, 4, 17, 1.01);
  CHECK_FALSE(rep.passed);
  CHECK(rep.max_rel_error > 1e-3);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = -1.0;
  CHECK_THROWS(cfg.validate());
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("zero learning rate leaves the loss unchanged") {
  auto data = tiny_batch(0.12, 9);
  data.push_back(tiny_batch(0.12, 10)[0]);
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.max_epochs = 3;
  cfg.batch_size = 1;
  cfg.early_stop_patience = 100;
  LossSettings settings;
  const TrainResult r =
      train_toy(data, cfg, settings, tiny_arch(2, 25), tiny_arch(1, 1), 7);
  // every validation entry equals the epoch-0 value
  double val0 = 0.0;
  bool seen = false;
  for (const auto& e : r.log) {
    if (e.split != "val") continue;
    if (!seen) {
      val0 = e.loss;
      seen = true;
    }
    CHECK(e.loss == doctest::Approx(val0).epsilon(1e-15));
  }
  CHECK(seen);
}

TEST_CASE("training is deterministic under a fixed seed") {
  auto data = tiny_batch(0.12, 21);
  data.push_back(tiny_batch(0.12, 22)[0]);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.max_epochs = 2;
  cfg.batch_size = 1;
  LossSettings settings;
  const TrainResult a =
      train_toy(data, cfg, settings, tiny_arch(2, 25), tiny_arch(1, 1), 3);
  const TrainResult b =
      train_toy(data, cfg, settings, tiny_arch(2, 25), tiny_arch(1, 1), 3);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].to_line() == b.log[i].to_line());
  }
  CHECK(a.best_val_loss == b.best_val_loss);
}

TEST_CASE("a few steps of overfitting reduce the loss") {
  const auto data = tiny_batch(0.3, 31);
  std::vector<TrainUtterance> both = {data[0], data[0]};  // train == val
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.max_epochs = 5;
  cfg.batch_size = 1;
  cfg.early_stop_patience = 100;
  LossSettings settings;
  const TrainResult r =
      train_toy(both, cfg, settings, tiny_arch(2, 25), tiny_arch(1, 1), 11);
  double first_val = 0.0, best = 1e300;
  bool seen = false;
  for (const auto& e : r.log) {
    if (e.split != "val") continue;
    if (!seen) {
      first_val = e.loss;
      seen = true;
    }
    best = std::min(best, e.loss);
  }
  REQUIRE(seen);
  CHECK(best < first_val);
  CHECK(r.best_val_loss == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("log lines carry epoch, split and loss") {
  TrainLogEntry e;
  e.epoch = 3;
  e.split = "val";
  e.loss = -1.25;
  e.lr = 1e-3;
  const std::string line = e.to_line();
  CHECK(line.find("epoch=3") != std::string::npos);
  CHECK(line.find("split=val") != std::string::npos);
  CHECK(line.find("loss=") != std::string::npos);
}
