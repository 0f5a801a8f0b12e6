#include "mfse/stft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mfse {

void StftConfig::validate() const {
  if (frame_shift < 1) throw std::invalid_argument("stft: frame_shift < 1");
  if (frame_len % frame_shift != 0) {
    throw std::invalid_argument("stft: frame_shift must divide frame_len");
  }
  if (!is_power_of_two(frame_len)) {
    throw std::invalid_argument("stft: frame_len must be a power of two");
  }
}

std::vector<double> make_window(WindowType type, std::size_t len) {
  std::vector<double> w(len);
  switch (type) {
    case WindowType::Hann:
      for (std::size_t n = 0; n < len; ++n) {
        w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n /
                                    static_cast<double>(len));
      }
      break;
  }
  return w;
}

std::size_t num_frames(std::size_t signal_len, const StftConfig& cfg) {
  if (signal_len == 0) return 0;
  const std::size_t lead = cfg.frame_len - cfg.frame_shift;
  return (lead + signal_len - 1) / cfg.frame_shift + 1;
}

Spectrogram analyze(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != kPipelineSampleRate) {
    throw std::invalid_argument("analyze: expected 16 kHz input");
  }
  const std::size_t M = cfg.frame_len;
  const std::size_t S = cfg.frame_shift;
  const std::size_t lead = M - S;
  const std::size_t L = num_frames(w.samples.size(), cfg);
  const std::size_t K = cfg.num_bins();
  const std::vector<double> win = make_window(cfg.window, M);

  std::vector<double> padded(lead + w.samples.size() + M, 0.0);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    padded[lead + i] = w.samples[i];
  }

  Spectrogram s(K, L);
  std::vector<double> frame(M);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t j = 0; j < M; ++j) {
      frame[j] = win[j] * padded[l * S + j];
    }
    std::vector<cd> bins = rfft(frame.data(), M);
    for (std::size_t k = 0; k < K; ++k) s.at(k, l) = bins[k];
  }
  return s;
}

namespace {

// Per-sample sum of analysis*synthesis window products over all frames.
std::vector<double> cola_weights(const StftConfig& cfg, std::size_t frames,
                                 std::size_t padded_len) {
  const std::vector<double> win = make_window(cfg.window, cfg.frame_len);
  std::vector<double> wsum(padded_len, 0.0);
  for (std::size_t l = 0; l < frames; ++l) {
    for (std::size_t j = 0; j < cfg.frame_len; ++j) {
      const std::size_t t = l * cfg.frame_shift + j;
      if (t < padded_len) wsum[t] += win[j] * win[j];
    }
  }
  return wsum;
}

}  // namespace

Waveform synthesize(const Spectrogram& s, const StftConfig& cfg,
                    std::size_t out_len) {
  cfg.validate();
  const std::size_t M = cfg.frame_len;
  const std::size_t S = cfg.frame_shift;
  const std::size_t lead = M - S;
  const std::size_t K = cfg.num_bins();
  if (s.bins != K) throw std::invalid_argument("synthesize: bin mismatch");

  const std::size_t padded_len = (s.frames > 0 ? (s.frames - 1) * S : 0) + M;
  const std::vector<double> win = make_window(cfg.window, M);
  std::vector<double> acc(padded_len, 0.0);

  std::vector<cd> half(K);
  for (std::size_t l = 0; l < s.frames; ++l) {
    for (std::size_t k = 0; k < K; ++k) half[k] = s.at(k, l);
    std::vector<double> frame = irfft(half, M);
    for (std::size_t j = 0; j < M; ++j) {
      acc[l * S + j] += win[j] * frame[j];
    }
  }

  const std::vector<double> wsum = cola_weights(cfg, s.frames, padded_len);
  Waveform out;
  out.sample_rate = kPipelineSampleRate;
  out.samples.assign(out_len, 0.0);
  for (std::size_t i = 0; i < out_len; ++i) {
    const std::size_t t = lead + i;
    if (t < padded_len && wsum[t] > 1e-12) {
      out.samples[i] = acc[t] / wsum[t];
    }
  }
  return out;
}

Spectrogram synthesize_adjoint(const std::vector<double>& grad_out,
                               const StftConfig& cfg, std::size_t frames) {
  cfg.validate();
  const std::size_t M = cfg.frame_len;
  const std::size_t S = cfg.frame_shift;
  const std::size_t lead = M - S;
  const std::size_t K = cfg.num_bins();
  const std::size_t padded_len = (frames > 0 ? (frames - 1) * S : 0) + M;
  const std::vector<double> win = make_window(cfg.window, M);
  const std::vector<double> wsum = cola_weights(cfg, frames, padded_len);

  // dLoss/d(accumulated padded sample)
  std::vector<double> grad_acc(padded_len, 0.0);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const std::size_t t = lead + i;
    if (t < padded_len && wsum[t] > 1e-12) {
      grad_acc[t] = grad_out[i] / wsum[t];
    }
  }

  Spectrogram g(K, frames);
  std::vector<double> frame(M);
  for (std::size_t l = 0; l < frames; ++l) {
    for (std::size_t j = 0; j < M; ++j) {
      frame[j] = win[j] * grad_acc[l * S + j];
    }
    // adjoint of irfft's real output: forward DFT with symmetry folding
    std::vector<cd> spec = rfft(frame.data(), M);
    const double inv_m = 1.0 / static_cast<double>(M);
    for (std::size_t k = 0; k < K; ++k) {
      if (k == 0 || k == M / 2) {
        g.at(k, l) = cd(spec[k].real() * inv_m, 0.0);
      } else {
        g.at(k, l) = 2.0 * inv_m * spec[k];
      }
    }
  }
  return g;
}

}  // namespace mfse
