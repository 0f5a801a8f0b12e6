#include "mfse/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mfse {
namespace {

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw std::runtime_error("wav: unexpected end of file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(buf[i]) << (8 * i);
  }
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void check_finite(const Waveform& w, const char* what) {
  for (double s : w.samples) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument(std::string(what) + ": non-finite sample");
    }
  }
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("wav: cannot open " + path);

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) {
    throw std::runtime_error("wav: missing RIFF header in " + path);
  }
  (void)read_le<std::uint32_t>(in);  // riff size
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) {
    throw std::runtime_error("wav: not a WAVE file: " + path);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  Waveform w;

  while (in.read(tag, 4)) {
    std::uint32_t chunk_size = read_le<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      (void)read_le<std::uint32_t>(in);  // byte rate
      (void)read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("wav: data before fmt chunk");
      if (channels != 1) {
        throw std::runtime_error("wav: expected mono, got " +
                                 std::to_string(channels) + " channels");
      }
      if (format == 1 && bits == 16) {
        std::size_t n = chunk_size / 2;
        w.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          auto v = static_cast<std::int16_t>(read_le<std::uint16_t>(in));
          w.samples[i] = static_cast<double>(v) / 32768.0;
        }
      } else if (format == 3 && bits == 32) {
        std::size_t n = chunk_size / 4;
        w.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          std::uint32_t u = read_le<std::uint32_t>(in);
          float f;
          std::memcpy(&f, &u, 4);
          w.samples[i] = static_cast<double>(f);
        }
      } else {
        throw std::runtime_error("wav: unsupported encoding (format=" +
                                 std::to_string(format) +
                                 ", bits=" + std::to_string(bits) + ")");
      }
      w.sample_rate = static_cast<int>(rate);
      return w;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw std::runtime_error("wav: no data chunk in " + path);
}

void write_wav(const std::string& path, const Waveform& w, WavEncoding enc) {
  check_finite(w, "write_wav");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("wav: cannot write " + path);

  const std::uint16_t channels = 1;
  const std::uint16_t bits = (enc == WavEncoding::Pcm16) ? 16 : 32;
  const std::uint16_t format = (enc == WavEncoding::Pcm16) ? 1 : 3;
  const std::uint32_t byte_per_sample = bits / 8;
  const auto data_size =
      static_cast<std::uint32_t>(w.samples.size() * byte_per_sample);

  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, format);
  write_le<std::uint16_t>(out, channels);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) *
                                   channels * byte_per_sample);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels *
                                                          byte_per_sample));
  write_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_size);

  if (enc == WavEncoding::Pcm16) {
    for (double s : w.samples) {
      double scaled = std::round(s * 32768.0);
      scaled = std::min(std::max(scaled, -32768.0), 32767.0);
      write_le<std::uint16_t>(
          out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    }
  } else {
    for (double s : w.samples) {
      auto f = static_cast<float>(s);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      write_le<std::uint32_t>(out, u);
    }
  }
  if (!out) throw std::runtime_error("wav: write failed for " + path);
}

double energy(const Waveform& w) {
  double e = 0.0;
  for (double s : w.samples) e += s * s;
  return e;
}

double measured_snr_db(const Waveform& speech, const Waveform& noise) {
  return 10.0 * std::log10(energy(speech) / energy(noise));
}

Mixture mix_at_snr(const Waveform& speech, const Waveform& noise,
                   double snr_db) {
  if (speech.samples.size() != noise.samples.size()) {
    throw std::invalid_argument("mix_at_snr: length mismatch");
  }
  if (speech.sample_rate != noise.sample_rate) {
    throw std::invalid_argument("mix_at_snr: sample-rate mismatch");
  }
  const double es = energy(speech);
  const double en = energy(noise);
  if (es <= 0.0 || en <= 0.0) {
    throw std::invalid_argument("mix_at_snr: zero-energy input");
  }
  // 10*log10(es / (g^2 * en)) == snr_db
  const double g = std::sqrt(es / en * std::pow(10.0, -snr_db / 10.0));
  Mixture m;
  m.scaled_noise.sample_rate = noise.sample_rate;
  m.noisy.sample_rate = speech.sample_rate;
  m.scaled_noise.samples.resize(noise.samples.size());
  m.noisy.samples.resize(noise.samples.size());
  for (std::size_t i = 0; i < noise.samples.size(); ++i) {
    m.scaled_noise.samples[i] = g * noise.samples[i];
    m.noisy.samples[i] = speech.samples[i] + m.scaled_noise.samples[i];
  }
  return m;
}

Waveform synth_speech_like(std::uint64_t seed, std::size_t num_samples,
                           int sample_rate) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const double f0_base = 110.0 + 80.0 * unif(rng);  // fundamental, Hz
  const double vibrato_hz = 4.0 + 2.0 * unif(rng);
  const double vibrato_depth = 0.02 + 0.02 * unif(rng);
  const double syllable_hz = 2.5 + 1.5 * unif(rng);
  const int num_harmonics = 10;

  std::vector<double> harmonic_amp(num_harmonics);
  std::vector<double> harmonic_phase(num_harmonics);
  for (int h = 0; h < num_harmonics; ++h) {
    harmonic_amp[h] = 1.0 / (1.0 + 0.6 * h);
    harmonic_phase[h] = 2.0 * std::numbers::pi * unif(rng);
  }

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(num_samples);
  double phase = 0.0;
  const double syl_phase0 = 2.0 * std::numbers::pi * unif(rng);
  for (std::size_t i = 0; i < num_samples; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f0 =
        f0_base * (1.0 + vibrato_depth *
                             std::sin(2.0 * std::numbers::pi * vibrato_hz * t));
    phase += 2.0 * std::numbers::pi * f0 / sample_rate;
    // syllabic envelope: raised cosine, never fully silent
    const double env =
        0.4 + 0.6 * 0.5 *
                   (1.0 + std::sin(2.0 * std::numbers::pi * syllable_hz * t +
                                   syl_phase0));
    double s = 0.0;
    for (int h = 0; h < num_harmonics; ++h) {
      s += harmonic_amp[h] * std::sin((h + 1) * phase + harmonic_phase[h]);
    }
    w.samples[i] = 0.12 * env * s;
  }
  return w;
}

Waveform synth_white_noise(std::uint64_t seed, std::size_t num_samples,
                           int sample_rate) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(num_samples);
  for (auto& s : w.samples) s = 0.1 * gauss(rng);
  return w;
}

Waveform synth_tonal_noise(std::uint64_t seed, std::size_t num_samples,
                           int sample_rate) {
  Waveform w = synth_white_noise(seed, num_samples, sample_rate);
  // mostly tonal: a strong sinusoid bed over a low white floor
  for (auto& s : w.samples) s *= 0.25;
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // tones deliberately land in the speech band so that scalar gains cannot
  // remove them without also removing speech
  const int num_tones = 6;
  for (int j = 0; j < num_tones; ++j) {
    const double f = 150.0 + 1850.0 * unif(rng);
    const double a = 0.1 + 0.1 * unif(rng);
    const double p = 2.0 * std::numbers::pi * unif(rng);
    for (std::size_t i = 0; i < num_samples; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      w.samples[i] += a * std::sin(2.0 * std::numbers::pi * f * t + p);
    }
  }
  return w;
}

SynthTriple make_mixture(const MixtureSpec& spec) {
  if (spec.duration_s <= 0.0) {
    throw std::invalid_argument("make_mixture: duration must be positive");
  }
  const auto n = static_cast<std::size_t>(
      std::llround(spec.duration_s * kPipelineSampleRate));
  SynthTriple t;
  t.speech = synth_speech_like(spec.seed, n);
  Waveform raw_noise = spec.tonal_noise ? synth_tonal_noise(spec.seed, n)
                                        : synth_white_noise(spec.seed, n);
  Mixture m = mix_at_snr(t.speech, raw_noise, spec.snr_db);
  t.noise = std::move(m.scaled_noise);
  t.noisy = std::move(m.noisy);
  return t;
}

}  // namespace mfse
