// Mono waveform type, WAV I/O, and seeded mixture synthesis.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mfse {

constexpr int kPipelineSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;  // nominal range [-1, 1]
  int sample_rate = kPipelineSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class WavEncoding { Pcm16, Float32 };

Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w,
               WavEncoding enc = WavEncoding::Float32);

// Scales `noise` so that 10*log10(E_speech / E_noise) == snr_db and adds it
// to `speech`. Returns {noisy, scaled_noise}; noisy - scaled_noise == speech.
struct Mixture {
  Waveform noisy;
  Waveform scaled_noise;
};
Mixture mix_at_snr(const Waveform& speech, const Waveform& noise,
                   double snr_db);

double energy(const Waveform& w);
double measured_snr_db(const Waveform& speech, const Waveform& noise);

// Synthetic sources standing in for a speech/noise corpus. All deterministic
// given the seed.
struct MixtureSpec {
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  double duration_s = 1.0;
  bool tonal_noise = true;  // add a sinusoid bed on top of white noise
};

// Harmonic complex with vibrato and syllabic amplitude modulation; strongly
// correlated across adjacent 2 ms frames, which is what the multi-frame
// filter exploits.
Waveform synth_speech_like(std::uint64_t seed, std::size_t num_samples,
                           int sample_rate = kPipelineSampleRate);
// Gaussian white noise, unit-scale.
Waveform synth_white_noise(std::uint64_t seed, std::size_t num_samples,
                           int sample_rate = kPipelineSampleRate);
// White noise plus a bed of fixed sinusoids.
Waveform synth_tonal_noise(std::uint64_t seed, std::size_t num_samples,
                           int sample_rate = kPipelineSampleRate);

struct SynthTriple {
  Waveform speech;
  Waveform noise;  // scaled noise actually present in the mixture
  Waveform noisy;
};
SynthTriple make_mixture(const MixtureSpec& spec);

}  // namespace mfse
