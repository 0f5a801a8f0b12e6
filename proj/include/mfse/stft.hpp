// Causal STFT analysis and weighted overlap-add synthesis.
//
// Analysis prepends frame_len - frame_shift zeros so that frame l only
// depends on input samples up to l*shift + shift - 1 of the original signal.
// Synthesis divides by the per-sample sum of analysis*synthesis windows.
#pragma once

#include <complex>
#include <vector>

#include "mfse/audio.hpp"
#include "mfse/fft.hpp"

namespace mfse {

enum class WindowType { Hann };

struct StftConfig {
  std::size_t frame_len = 128;   // 8 ms @ 16 kHz
  std::size_t frame_shift = 32;  // 2 ms @ 16 kHz
  WindowType window = WindowType::Hann;

  std::size_t num_bins() const { return frame_len / 2 + 1; }
  void validate() const;
};

struct Spectrogram {
  std::size_t bins = 0;    // K = frame_len/2 + 1
  std::size_t frames = 0;  // L
  std::vector<cd> values;  // row-major: [k * frames + l]

  Spectrogram() = default;
  Spectrogram(std::size_t k, std::size_t l)
      : bins(k), frames(l), values(k * l) {}
  cd& at(std::size_t k, std::size_t l) { return values[k * frames + l]; }
  const cd& at(std::size_t k, std::size_t l) const {
    return values[k * frames + l];
  }
};

std::vector<double> make_window(WindowType type, std::size_t len);

Spectrogram analyze(const Waveform& w, const StftConfig& cfg);

// out_len: number of output samples (typically the analyzed signal length).
Waveform synthesize(const Spectrogram& s, const StftConfig& cfg,
                    std::size_t out_len);

// Adjoint of synthesize as a linear map from spectrogram to waveform:
// given dLoss/dsample, returns dLoss/dRe + i*dLoss/dIm per STFT coefficient.
Spectrogram synthesize_adjoint(const std::vector<double>& grad_out,
                               const StftConfig& cfg, std::size_t frames);

// Number of frames analyze() produces for a signal of given length.
std::size_t num_frames(std::size_t signal_len, const StftConfig& cfg);

}  // namespace mfse
