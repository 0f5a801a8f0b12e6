// Evaluation: SI-SDR improvement, segmental SNR, and real-time-factor
// benchmarking.
#pragma once

#include <functional>

#include "mfse/training.hpp"

namespace mfse {

struct EvalReport {
  double si_sdr_in = 0.0;   // noisy vs clean, dB
  double si_sdr_out = 0.0;  // enhanced vs clean, dB
  double delta = 0.0;       // improvement, dB
  double seg_snr_out = 0.0; // segmental SNR of the enhanced signal, dB
};

// Segmental SNR over 32 ms non-overlapping segments, each clamped to
// [-10, 35] dB; segments with (near) zero reference energy are skipped.
double segmental_snr_db(const Waveform& estimate, const Waveform& reference);

EvalReport evaluate(const Waveform& enhanced, const Waveform& noisy,
                    const Waveform& clean);

// Median over `repeats` runs of wall-clock time divided by audio duration.
double benchmark_rtf(const std::function<void()>& fn, double audio_seconds,
                     int repeats = 5);

}  // namespace mfse
