#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mfse/metrics.hpp"
#include "mfse/pipeline.hpp"

using namespace mfse;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const char* name, const std::string& content) {
  const std::string path = (fs::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("method and estimator parsing") {
  CHECK(method_from_string("mfmvdr") == Method::Mfmvdr);
  CHECK(method_from_string("masking") == Method::Masking);
  CHECK(method_from_string("direct") == Method::Direct);
  CHECK(method_from_string("passthrough") == Method::Passthrough);
  CHECK(method_from_string("wiener") == Method::Wiener);
  CHECK_THROWS(method_from_string("mvdr"));

  CHECK(estimator_from_string("oracle") == EstimatorKind::Oracle);
  CHECK(estimator_from_string("model-based") == EstimatorKind::ModelBased);
  CHECK(estimator_from_string("neural") == EstimatorKind::Neural);
  CHECK_THROWS(estimator_from_string("psychic"));
}

TEST_CASE("key=value config parsing") {
  const std::string path = write_temp("mfse_cfg.txt",
                                      "# comment line\n"
                                      "frame_len_ms = 8\n"
                                      "frame_shift_ms = 2\n"
                                      "n_taps = 7\n"
                                      "delta = 0.01\n"
                                      "min_gain_db = -20\n"
                                      "lambda = 0.85\n"
                                      "beta = 0.9\n"
                                      "threads = 4\n");
  const PipelineConfig cfg = load_config(path);
  CHECK(cfg.stft.frame_len == 128);
  CHECK(cfg.stft.frame_shift == 32);
  CHECK(cfg.taps == 7);
  CHECK(cfg.reg.delta == doctest::Approx(0.01));
  CHECK(cfg.reg.min_gain_db == doctest::Approx(-20.0));
  CHECK(cfg.smoothing.lambda == doctest::Approx(0.85));
  CHECK(cfg.beta == doctest::Approx(0.9));
  CHECK(cfg.threads == 4);
  fs::remove(path);
}

TEST_CASE("JSON config parsing matches key=value") {
  const std::string path = write_temp(
      "mfse_cfg.json", R"({"n_taps": 7, "delta": 0.01, "lambda": 0.85})");
  const PipelineConfig cfg = load_config(path);
  CHECK(cfg.taps == 7);
  CHECK(cfg.reg.delta == doctest::Approx(0.01));
  CHECK(cfg.smoothing.lambda == doctest::Approx(0.85));
  fs::remove(path);
}

TEST_CASE("unknown or malformed config keys are rejected") {
  const std::string bad_key = write_temp("mfse_badkey.txt", "tapz = 5\n");
  CHECK_THROWS(load_config(bad_key));
  const std::string bad_val = write_temp("mfse_badval.txt", "n_taps = many\n");
  CHECK_THROWS(load_config(bad_val));
  const std::string bad_win = write_temp("mfse_badwin.txt", "window = boxcar\n");
  CHECK_THROWS(load_config(bad_win));
  CHECK_THROWS(load_config("/nonexistent/mfse.cfg"));
  fs::remove(bad_key);
  fs::remove(bad_val);
  fs::remove(bad_win);
}

TEST_CASE("pipeline config validation") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.taps = 0;
  CHECK_THROWS(cfg.validate());
  cfg = PipelineConfig{};
  cfg.taps = kMaxTaps + 1;
  CHECK_THROWS(cfg.validate());
  cfg = PipelineConfig{};
  cfg.beta = 1.5;
  CHECK_THROWS(cfg.validate());
  cfg = PipelineConfig{};
  cfg.threads = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("passthrough equals the analysis/synthesis round trip") {
  MixtureSpec spec;
  spec.seed = 12;
  const SynthTriple t = make_mixture(spec);
  PipelineConfig cfg;
  EnhanceRequest req;
  req.method = Method::Passthrough;
  const Waveform out = run_enhance(t.noisy, cfg, req);
  REQUIRE(out.samples.size() == t.noisy.samples.size());
  const Spectrogram s = analyze(t.noisy, cfg.stft);
  const Waveform ref = synthesize(s, cfg.stft, t.noisy.samples.size());
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    CHECK(out.samples[i] == ref.samples[i]);
  }
}

TEST_CASE("oracle mfmvdr improves SI-SDR on a synthetic mixture") {
  MixtureSpec spec;
  spec.snr_db = 0.0;
  spec.seed = 1;
  const SynthTriple t = make_mixture(spec);
  PipelineConfig cfg;
  EnhanceRequest req;
  req.clean = &t.speech;
  req.noise = &t.noise;
  EnhanceDiagnostics diag;
  const Waveform out = run_enhance(t.noisy, cfg, req, &diag);
  const EvalReport r = evaluate(out, t.noisy, t.speech);
  CHECK(r.delta > 3.0);
}

TEST_CASE("model-based estimator runs without the clean track") {
  MixtureSpec spec;
  spec.seed = 2;
  spec.duration_s = 0.5;
  const SynthTriple t = make_mixture(spec);
  PipelineConfig cfg;
  EnhanceRequest req;
  req.estimator = EstimatorKind::ModelBased;
  req.noise = &t.noise;
  const Waveform out = run_enhance(t.noisy, cfg, req);
  CHECK(out.samples.size() == t.noisy.samples.size());
  for (double v : out.samples) CHECK(std::isfinite(v));
}

TEST_CASE("neural estimator runs with freshly initialized heads") {
  MixtureSpec spec;
  spec.seed = 3;
  spec.duration_s = 0.3;
  const SynthTriple t = make_mixture(spec);
  PipelineConfig cfg;
  cfg.taps = 3;

  TcnArch psd;
  psd.hidden_dim = 8;
  psd.bottleneck_dim = 4;
  psd.output_dim = 9;
  TcnArch snr = psd;
  snr.input_dim = 1;
  snr.output_dim = 1;
  TcnModelSet models;
  models.f_y = init_model(psd, 1);
  models.f_n = init_model(psd, 2);
  models.f_xi = init_model(snr, 3);

  EnhanceRequest req;
  req.estimator = EstimatorKind::Neural;
  req.models = &models;
  const Waveform out = run_enhance(t.noisy, cfg, req);
  CHECK(out.samples.size() == t.noisy.samples.size());
  for (double v : out.samples) CHECK(std::isfinite(v));
}

TEST_CASE("missing inputs are reported") {
  MixtureSpec spec;
  spec.seed = 5;
  spec.duration_s = 0.2;
  const SynthTriple t = make_mixture(spec);
  PipelineConfig cfg;

  EnhanceRequest req;  // oracle estimator but no clean/noise tracks
  CHECK_THROWS(run_enhance(t.noisy, cfg, req));

  EnhanceRequest neural;
  neural.estimator = EstimatorKind::Neural;  // no models
  CHECK_THROWS(run_enhance(t.noisy, cfg, neural));

  EnhanceRequest masking;
  masking.method = Method::Masking;  // no baseline model
  CHECK_THROWS(run_enhance(t.noisy, cfg, masking));
}

TEST_CASE("baseline methods consume a baseline model") {
  MixtureSpec spec;
  spec.seed = 6;
  spec.duration_s = 0.3;
  const SynthTriple t = make_mixture(spec);
  PipelineConfig cfg;

  TcnArch mask_arch;
  mask_arch.hidden_dim = 8;
  mask_arch.bottleneck_dim = 4;
  mask_arch.output_dim = 2;
  const TcnModel mask_model = init_model(mask_arch, 9);

  EnhanceRequest req;
  req.method = Method::Masking;
  req.baseline_model = &mask_model;
  const Waveform out = run_enhance(t.noisy, cfg, req);
  CHECK(out.samples.size() == t.noisy.samples.size());

  TcnArch dir_arch = mask_arch;
  dir_arch.output_dim = static_cast<int>(2 * cfg.taps);
  const TcnModel dir_model = init_model(dir_arch, 10);
  EnhanceRequest dreq;
  dreq.method = Method::Direct;
  dreq.baseline_model = &dir_model;
  const Waveform dout = run_enhance(t.noisy, cfg, dreq);
  CHECK(dout.samples.size() == t.noisy.samples.size());

  // wrong output width is a shape error
  EnhanceRequest wrong;
  wrong.method = Method::Direct;
  wrong.baseline_model = &mask_model;
  CHECK_THROWS(run_enhance(t.noisy, cfg, wrong));
}
