// mfse: single-microphone multi-frame MVDR speech enhancement toolkit.
//
// Subcommands: synth, enhance, gradcheck, train-toy, bench.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mfse/metrics.hpp"
#include "mfse/pipeline.hpp"
#include "mfse/training.hpp"

namespace fs = std::filesystem;
using namespace mfse;

namespace {

// Numerical failures (divergence, failed checks) map to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::string config_path;
  std::optional<std::size_t> n_taps;
  std::optional<double> delta;
  std::optional<double> min_gain_db;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "config file (key=value or JSON)");
  cmd->add_option("--n-taps", o.n_taps, "multi-frame filter length N");
  cmd->add_option("--delta", o.delta, "Tikhonov regularization constant");
  cmd->add_option("--min-gain-db", o.min_gain_db, "minimum gain floor in dB");
  cmd->add_option("--threads", o.threads, "worker threads for enhancement");
}

PipelineConfig resolve_config(const CommonOpts& o) {
  PipelineConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  if (o.n_taps) cfg.taps = *o.n_taps;
  if (o.delta) cfg.reg.delta = *o.delta;
  if (o.min_gain_db) cfg.reg.min_gain_db = *o.min_gain_db;
  if (o.threads) cfg.threads = *o.threads;
  cfg.validate();
  return cfg;
}

TcnArch small_arch(std::size_t input_dim, std::size_t output_dim) {
  TcnArch a;
  a.hidden_dim = 16;
  a.bottleneck_dim = 8;
  a.input_dim = input_dim;
  a.output_dim = output_dim;
  return a;
}

int cmd_synth(double snr_db, std::uint64_t seed, double duration_s,
              bool tonal, const std::string& out_dir) {
  if (!fs::is_directory(out_dir)) {
    throw std::runtime_error("synth: output directory '" + out_dir +
                             "' does not exist");
  }
  MixtureSpec spec;
  spec.snr_db = snr_db;
  spec.seed = seed;
  spec.duration_s = duration_s;
  spec.tonal_noise = tonal;
  const SynthTriple t = make_mixture(spec);
  write_wav((fs::path(out_dir) / "speech.wav").string(), t.speech);
  write_wav((fs::path(out_dir) / "noise.wav").string(), t.noise);
  write_wav((fs::path(out_dir) / "noisy.wav").string(), t.noisy);
  std::printf("wrote speech.wav noise.wav noisy.wav to %s\n", out_dir.c_str());
  std::printf("requested_snr_db=%.6f measured_snr_db=%.6f seed=%llu\n", snr_db,
              measured_snr_db(t.speech, t.noise),
              static_cast<unsigned long long>(seed));
  return 0;
}

int cmd_enhance(const CommonOpts& common, const std::string& in_path,
                const std::string& out_path, const std::string& method_str,
                const std::string& estimator_str, const std::string& clean_path,
                const std::string& noise_path, const std::string& model_y,
                const std::string& model_n, const std::string& model_xi) {
  const PipelineConfig cfg = resolve_config(common);
  const Waveform noisy = read_wav(in_path);

  EnhanceRequest req;
  req.method = method_from_string(method_str);
  req.estimator = estimator_from_string(estimator_str);

  std::optional<Waveform> clean, noise;
  if (!clean_path.empty()) clean = read_wav(clean_path);
  if (!noise_path.empty()) noise = read_wav(noise_path);
  if (clean) req.clean = &*clean;
  if (noise) req.noise = &*noise;

  TcnModelSet models;
  TcnModel baseline;
  const bool needs_baseline =
      req.method == Method::Masking || req.method == Method::Direct;
  if (needs_baseline) {
    if (model_y.empty()) {
      throw std::runtime_error(
          "enhance: masking/direct methods need --model-y (baseline weights)");
    }
    baseline = load_model(model_y);
    req.baseline_model = &baseline;
  } else if (req.estimator == EstimatorKind::Neural &&
             req.method != Method::Passthrough) {
    if (model_y.empty() || model_n.empty() || model_xi.empty()) {
      throw std::runtime_error(
          "enhance: neural estimator needs --model-y, --model-n, --model-xi");
    }
    models.f_y = load_model(model_y);
    models.f_n = load_model(model_n);
    models.f_xi = load_model(model_xi);
    req.models = &models;
  }

  EnhanceDiagnostics diag;
  const Waveform enhanced = run_enhance(noisy, cfg, req, &diag);
  write_wav(out_path, enhanced);
  std::printf("wrote %s (%zu samples)\n", out_path.c_str(), enhanced.size());
  if (diag.singular_fallbacks || diag.degenerate_fallbacks) {
    std::printf("fallbacks: singular=%zu degenerate=%zu\n",
                diag.singular_fallbacks, diag.degenerate_fallbacks);
  }
  if (clean) {
    const EvalReport r = evaluate(enhanced, noisy, *clean);
    std::printf(
        "si_sdr_in_db=%.4f si_sdr_out_db=%.4f delta_db=%.4f seg_snr_db=%.4f\n",
        r.si_sdr_in, r.si_sdr_out, r.delta, r.seg_snr_out);
  }
  return 0;
}

LossSettings default_loss_settings(const PipelineConfig& cfg) {
  LossSettings s;
  s.stft = cfg.stft;
  s.taps = cfg.taps;
  s.reg = cfg.reg;
  return s;
}

int cmd_gradcheck(const CommonOpts& common, int samples, std::uint64_t seed,
                  double snr_db, double adjoint_scale) {
  const PipelineConfig cfg = resolve_config(common);
  LossSettings settings = default_loss_settings(cfg);
  // Unless asked otherwise, verify with the minimum-gain floor disabled so
  // every probe is held to the strict tolerance; the floor's kink otherwise
  // limits what finite differences can resolve.
  if (!common.min_gain_db) settings.reg.min_gain_db = -400.0;

  MixtureSpec spec;
  spec.snr_db = snr_db;
  spec.seed = seed;
  spec.duration_s = 0.15;  // short utterance keeps finite differences cheap
  const SynthTriple t = make_mixture(spec);

  TcnModelSet models;
  models.f_y = init_model(small_arch(2, cfg.taps * cfg.taps), seed + 11);
  models.f_n = init_model(small_arch(2, cfg.taps * cfg.taps), seed + 12);
  models.f_xi = init_model(small_arch(1, 1), seed + 13);

  const std::vector<TrainUtterance> batch = {{t.noisy, t.speech}};
  const GradCheckReport report = gradient_check(batch, models, settings,
                                                samples, seed, adjoint_scale);
  const GradCheckProbe* worst = nullptr;
  for (const auto& p : report.probes) {
    if (!worst || p.rel_error > worst->rel_error) worst = &p;
  }
  std::printf("probes=%zu max_rel_error=%.3e floor_active=%d\n",
              report.probes.size(), report.max_rel_error,
              report.probes.empty() ? 0 : report.probes.front().floor_active);
  if (worst) {
    std::printf("worst: head=%s tensor=%s index=%zu analytic=%.6e "
                "numeric=%.6e rel_error=%.3e\n",
                worst->head.c_str(), worst->tensor.c_str(), worst->index,
                worst->analytic, worst->numeric, worst->rel_error);
  }
  std::printf("gradcheck %s\n", report.passed ? "PASS" : "FAIL");
  if (!report.passed) {
    throw NumericalError("gradcheck failed: max relative error " +
                         std::to_string(report.max_rel_error));
  }
  return 0;
}

std::vector<TrainUtterance> load_dataset(const std::string& dir) {
  std::vector<TrainUtterance> out;
  std::vector<fs::path> noisy_files;
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("train-toy: dataset directory '" + dir +
                             "' does not exist");
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("noisy_", 0) == 0 && e.path().extension() == ".wav") {
      noisy_files.push_back(e.path());
    }
  }
  std::sort(noisy_files.begin(), noisy_files.end());
  for (const fs::path& np : noisy_files) {
    std::string ref_name = np.filename().string();
    ref_name.replace(0, 6, "speech_");
    const fs::path rp = np.parent_path() / ref_name;
    if (!fs::exists(rp)) {
      throw std::runtime_error("train-toy: missing reference " + rp.string());
    }
    out.push_back({read_wav(np.string()), read_wav(rp.string())});
  }
  if (out.empty()) {
    throw std::runtime_error("train-toy: no noisy_*.wav files in " + dir);
  }
  return out;
}

int cmd_train_toy(const CommonOpts& common, const std::string& data_dir,
                  const std::string& out_dir, int epochs, double lr,
                  int batch_size, std::uint64_t seed) {
  const PipelineConfig cfg = resolve_config(common);
  const LossSettings settings = default_loss_settings(cfg);
  if (!fs::is_directory(out_dir)) {
    throw std::runtime_error("train-toy: output directory '" + out_dir +
                             "' does not exist");
  }
  const std::vector<TrainUtterance> dataset = load_dataset(data_dir);

  TrainConfig tc;
  tc.max_epochs = epochs;
  tc.lr = lr;
  tc.batch_size = batch_size;

  const TrainResult res =
      train_toy(dataset, tc, settings, small_arch(2, cfg.taps * cfg.taps),
                small_arch(1, 1), seed);

  save_model(res.models.f_y, (fs::path(out_dir) / "f_y.tcn").string());
  save_model(res.models.f_n, (fs::path(out_dir) / "f_n.tcn").string());
  save_model(res.models.f_xi, (fs::path(out_dir) / "f_xi.tcn").string());
  std::ofstream log((fs::path(out_dir) / "train_log.txt").string());
  for (const TrainLogEntry& e : res.log) {
    log << e.to_line() << "\n";
    std::printf("%s\n", e.to_line().c_str());
  }
  std::printf("best_epoch=%d best_val_loss=%.6f\n", res.best_epoch,
              res.best_val_loss);
  if (!std::isfinite(res.best_val_loss)) {
    throw NumericalError("train-toy: diverged (non-finite validation loss)");
  }
  return 0;
}

int cmd_bench(const CommonOpts& common, double duration_s, std::uint64_t seed,
              int repeats) {
  const PipelineConfig cfg = resolve_config(common);
  MixtureSpec spec;
  spec.seed = seed;
  spec.duration_s = duration_s;
  const SynthTriple t = make_mixture(spec);

  const TcnModel mask_model = init_model(small_arch(2, 2), seed + 21);
  const TcnModel direct_model =
      init_model(small_arch(2, 2 * cfg.taps), seed + 22);

  std::printf("config: frame_len=%zu frame_shift=%zu n_taps=%zu delta=%g "
              "min_gain_db=%g lambda=%g threads=%d\n",
              cfg.stft.frame_len, cfg.stft.frame_shift, cfg.taps,
              cfg.reg.delta, cfg.reg.min_gain_db, cfg.smoothing.lambda,
              cfg.threads);

  struct Entry {
    const char* name;
    Method method;
    const TcnModel* baseline;
  };
  const Entry entries[] = {{"passthrough", Method::Passthrough, nullptr},
                           {"masking", Method::Masking, &mask_model},
                           {"direct", Method::Direct, &direct_model},
                           {"mfmvdr", Method::Mfmvdr, nullptr}};
  for (const Entry& e : entries) {
    EnhanceRequest req;
    req.method = e.method;
    req.estimator = EstimatorKind::Oracle;
    req.clean = &t.speech;
    req.noise = &t.noise;
    req.baseline_model = e.baseline;
    const double rtf = benchmark_rtf(
        [&]() { (void)run_enhance(t.noisy, cfg, req); }, duration_s, repeats);
    if (!std::isfinite(rtf)) {
      throw NumericalError(std::string("bench: non-finite RTF for ") + e.name);
    }
    std::printf("method=%-11s rtf=%.4f\n", e.name, rtf);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-frame MVDR speech enhancement toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a seeded mixture triple");
  double snr_db = 0.0, duration_s = 1.0;
  std::uint64_t seed = 1;
  bool tonal = true;
  std::string out_dir = ".";
  synth->add_option("--snr", snr_db, "mixture SNR in dB");
  synth->add_option("--seed", seed, "random seed");
  synth->add_option("--duration", duration_s, "duration in seconds");
  synth->add_flag("--tonal,!--no-tonal", tonal, "add tonal noise components");
  synth->add_option("--out", out_dir, "output directory");

  // enhance
  auto* enh = app.add_subcommand("enhance", "enhance a noisy WAV file");
  CommonOpts enh_common;
  add_common(enh, enh_common);
  std::string in_path, out_path = "enhanced.wav", method_str = "mfmvdr";
  std::string estimator_str = "oracle", clean_path, noise_path;
  std::string model_y, model_n, model_xi;
  enh->add_option("--in", in_path, "noisy input WAV")->required();
  enh->add_option("--out", out_path, "enhanced output WAV");
  enh->add_option("--method", method_str,
                  "mfmvdr|masking|direct|passthrough|wiener");
  enh->add_option("--estimator", estimator_str, "oracle|model|neural");
  enh->add_option("--clean", clean_path, "clean reference WAV");
  enh->add_option("--noise", noise_path, "noise track WAV");
  enh->add_option("--model-y", model_y, "noisy-correlation head weights");
  enh->add_option("--model-n", model_n, "noise-correlation head weights");
  enh->add_option("--model-xi", model_xi, "SNR head weights");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference gradient verification");
  CommonOpts gc_common;
  add_common(gc, gc_common);
  int gc_samples = 20;
  std::uint64_t gc_seed = 7;
  double gc_snr = 0.0, gc_adjoint_scale = 1.0;
  gc->add_option("--samples", gc_samples, "probes per model head");
  gc->add_option("--seed", gc_seed, "random seed");
  gc->add_option("--snr", gc_snr, "test mixture SNR in dB");
  gc->add_option("--adjoint-scale", gc_adjoint_scale,
                 "scale one adjoint (sensitivity test hook)");

  // train-toy
  auto* tt = app.add_subcommand("train-toy", "small-scale training run");
  CommonOpts tt_common;
  add_common(tt, tt_common);
  std::string data_dir, tt_out = ".";
  int tt_epochs = 10, tt_batch = 2;
  double tt_lr = 3e-4;
  std::uint64_t tt_seed = 7;
  tt->add_option("--data", data_dir, "dataset dir with noisy_*/speech_* WAVs")
      ->required();
  tt->add_option("--out", tt_out, "output directory for weights and log");
  tt->add_option("--epochs", tt_epochs, "maximum epochs");
  tt->add_option("--lr", tt_lr, "learning rate");
  tt->add_option("--batch-size", tt_batch, "batch size");
  tt->add_option("--seed", tt_seed, "initialization seed");

  // bench
  auto* bench = app.add_subcommand("bench", "real-time-factor benchmark");
  CommonOpts bench_common;
  add_common(bench, bench_common);
  double bench_duration = 1.0;
  std::uint64_t bench_seed = 3;
  int bench_repeats = 3;
  bench->add_option("--duration", bench_duration, "test signal seconds");
  bench->add_option("--seed", bench_seed, "random seed");
  bench->add_option("--repeats", bench_repeats, "timing repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      return cmd_synth(snr_db, seed, duration_s, tonal, out_dir);
    }
    if (enh->parsed()) {
      return cmd_enhance(enh_common, in_path, out_path, method_str,
                         estimator_str, clean_path, noise_path, model_y,
                         model_n, model_xi);
    }
    if (gc->parsed()) {
      return cmd_gradcheck(gc_common, gc_samples, gc_seed, gc_snr,
                           gc_adjoint_scale);
    }
    if (tt->parsed()) {
      return cmd_train_toy(tt_common, data_dir, tt_out, tt_epochs, tt_lr,
                           tt_batch, tt_seed);
    }
    if (bench->parsed()) {
      return cmd_bench(bench_common, bench_duration, bench_seed,
                       bench_repeats);
    }
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
