// SI-SDR loss, reverse-mode gradients of the loss through the full
// enhancement pipeline, finite-difference verification, and a small-scale
// training loop (Adam, gradient clipping, LR halving, early stopping).
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfse/pipeline.hpp"

namespace mfse {

// Scale-invariant signal-to-distortion ratio in dB. A relative 1e-12 guard
// in the denominator caps the value at 120 dB for a perfect estimate.
double si_sdr(const Waveform& estimate, const Waveform& reference);

struct TrainConfig {
  double lr = 3e-4;
  int max_epochs = 50;
  double grad_clip_norm = 5.0;
  int batch_size = 2;
  int lr_halve_patience = 3;
  int early_stop_patience = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct TrainUtterance {
  Waveform noisy;
  Waveform reference;
};

struct LossSettings {
  StftConfig stft;
  std::size_t taps = 5;
  RegularizationConfig reg;
};

struct ModelGradients {
  std::vector<Tensor> f_y;
  std::vector<Tensor> f_n;
  std::vector<Tensor> f_xi;
};

// Mean negated SI-SDR over the batch at the MFMVDR output, plus gradients
// for every trainable tensor of the three heads. The first frame_len output
// samples (analysis warm-up) are excluded from the loss.
struct LossResult {
  double loss = 0.0;  // -SI-SDR, dB
  ModelGradients grads;
};
LossResult loss_and_gradients(const std::vector<TrainUtterance>& batch,
                              const TcnModelSet& models,
                              const LossSettings& settings);

// Forward-only loss, used by finite differencing and validation.
double loss_only(const std::vector<TrainUtterance>& batch,
                 const TcnModelSet& models, const LossSettings& settings);

struct GradCheckProbe {
  std::string head;    // "f_y" / "f_n" / "f_xi"
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool floor_active = false;  // min-gain floor engaged anywhere in the batch
};

struct GradCheckReport {
  std::vector<GradCheckProbe> probes;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Central finite differences on `probes_per_head` randomly selected weights
// per head. Tolerance 1e-3, relaxed to 1e-2 when the minimum-gain floor is
// active. `adjoint_scale` != 1 deliberately corrupts one gradient (test
// hook for verifying the check's sensitivity).
GradCheckReport gradient_check(const std::vector<TrainUtterance>& batch,
                               const TcnModelSet& models,
                               const LossSettings& settings,
                               int probes_per_head, std::uint64_t seed,
                               double adjoint_scale = 1.0);

// True if the min-gain floor engages anywhere in the batch.
bool min_gain_active(const std::vector<TrainUtterance>& batch,
                     const TcnModelSet& models, const LossSettings& settings);

struct TrainLogEntry {
  int epoch = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;  // pre-clip global norm (train entries)

  std::string to_line() const;
};

struct TrainResult {
  TcnModelSet models;  // best-validation weights
  std::vector<TrainLogEntry> log;
  double best_val_loss = 0.0;
  int best_epoch = -1;
};

// Deterministic toy-scale training: Adam with global gradient-norm clipping,
// LR halving and early stopping on the validation loss.
TrainResult train_toy(const std::vector<TrainUtterance>& dataset,
                      const TrainConfig& cfg, const LossSettings& settings,
                      const TcnArch& arch_yn, const TcnArch& arch_xi,
                      std::uint64_t init_seed);

double global_grad_norm(const ModelGradients& grads);

}  // namespace mfse
