// End-to-end wiring: configuration, estimator selection, and waveform-level
// enhancement shared by the CLI, benchmarks, and tests.
#pragma once

#include <optional>
#include <string>

#include "mfse/filters.hpp"

namespace mfse {

enum class Method { Mfmvdr, Masking, Direct, Passthrough, Wiener };
enum class EstimatorKind { Oracle, ModelBased, Neural };

Method method_from_string(const std::string& s);
EstimatorKind estimator_from_string(const std::string& s);

struct PipelineConfig {
  StftConfig stft;
  std::size_t taps = 5;
  RegularizationConfig reg;
  SmoothingConfig smoothing;
  double beta = 0.98;       // decision-directed blend
  double xi_floor = kXiFloor;
  double xi_ceil = kXiCeil;
  double log_floor = kLogFloor;
  int threads = 1;

  void validate() const;
};

// Flat key=value or JSON config file. Recognized keys: frame_len_ms,
// frame_shift_ms, window, n_taps, delta, min_gain_db, lambda, beta,
// xi_floor, xi_ceil, log_floor, threads.
PipelineConfig load_config(const std::string& path);

struct EnhanceRequest {
  Method method = Method::Mfmvdr;
  EstimatorKind estimator = EstimatorKind::Oracle;
  const TcnModelSet* models = nullptr;       // neural estimator heads
  const TcnModel* baseline_model = nullptr;  // masking / direct baselines
  const Waveform* clean = nullptr;           // oracle estimator input
  const Waveform* noise = nullptr;           // oracle / model-based input
};

Waveform run_enhance(const Waveform& noisy, const PipelineConfig& cfg,
                     const EnhanceRequest& req,
                     EnhanceDiagnostics* diag = nullptr);

}  // namespace mfse
