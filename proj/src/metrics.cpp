#include "mfse/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace mfse {

double segmental_snr_db(const Waveform& estimate, const Waveform& reference) {
  if (estimate.samples.size() != reference.samples.size()) {
    throw std::invalid_argument("seg_snr: length mismatch");
  }
  const std::size_t seg = static_cast<std::size_t>(
      0.032 * static_cast<double>(reference.sample_rate));
  if (reference.samples.size() < seg) {
    throw std::invalid_argument("seg_snr: signal shorter than one segment");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start + seg <= reference.samples.size();
       start += seg) {
    double es = 0.0, ee = 0.0;
    for (std::size_t i = start; i < start + seg; ++i) {
      const double s = reference.samples[i];
      const double d = s - estimate.samples[i];
      es += s * s;
      ee += d * d;
    }
    if (es <= 1e-20) continue;
    const double snr = 10.0 * std::log10(es / std::max(ee, 1e-20));
    sum += std::clamp(snr, -10.0, 35.0);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("seg_snr: silent reference");
  return sum / static_cast<double>(count);
}

EvalReport evaluate(const Waveform& enhanced, const Waveform& noisy,
                    const Waveform& clean) {
  EvalReport r;
  r.si_sdr_in = si_sdr(noisy, clean);
  r.si_sdr_out = si_sdr(enhanced, clean);
  r.delta = r.si_sdr_out - r.si_sdr_in;
  r.seg_snr_out = segmental_snr_db(enhanced, clean);
  return r;
}

double benchmark_rtf(const std::function<void()>& fn, double audio_seconds,
                     int repeats) {
  if (repeats < 1) throw std::invalid_argument("benchmark: repeats >= 1");
  if (!(audio_seconds > 0.0)) {
    throw std::invalid_argument("benchmark: non-positive duration");
  }
  std::vector<double> rtf(repeats);
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    rtf[i] = std::chrono::duration<double>(t1 - t0).count() / audio_seconds;
  }
  std::sort(rtf.begin(), rtf.end());
  return rtf[rtf.size() / 2];
}

}  // namespace mfse
