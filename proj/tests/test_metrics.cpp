#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <thread>

#include "mfse/metrics.hpp"

using namespace mfse;

TEST_CASE("segmental SNR is capped for identical signals") {
  const Waveform s = synth_speech_like(1, 16000);
  CHECK(segmental_snr_db(s, s) == doctest::Approx(35.0).epsilon(1e-12));
}

TEST_CASE("segmental SNR is floored for pure noise") {
  const Waveform s = synth_speech_like(2, 16000);
  Waveform bad = s;
  for (auto& v : bad.samples) v = -v;  // error energy = 4x reference energy
  const double snr = segmental_snr_db(bad, s);
  CHECK(snr == doctest::Approx(10.0 * std::log10(0.25)).epsilon(1e-9));

  Waveform worse = s;
  for (auto& v : worse.samples) v *= 5.0;  // error = 4x ref -> -12 dB, clamped
  CHECK(segmental_snr_db(worse, s) == doctest::Approx(-10.0).epsilon(1e-9));
}

TEST_CASE("segmental SNR matches a single-segment hand computation") {
  // one 32 ms segment = 512 samples at 16 kHz
  Waveform ref, est;
  ref.samples.assign(512, 1.0);
  est.samples.assign(512, 1.1);  // error energy ratio 0.01 -> 20 dB
  CHECK(segmental_snr_db(est, ref) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("silent reference segments are skipped") {
  Waveform ref, est;
  ref.samples.assign(1024, 0.0);
  est.samples.assign(1024, 0.0);
  for (std::size_t i = 0; i < 512; ++i) {
    ref.samples[i] = 1.0;
    est.samples[i] = 1.1;
  }
  // second segment has zero reference energy and must not drag the mean
  CHECK(segmental_snr_db(est, ref) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("evaluate wires the deltas together") {
  MixtureSpec spec;
  spec.seed = 4;
  const SynthTriple t = make_mixture(spec);
  const EvalReport r = evaluate(t.speech, t.noisy, t.speech);
  CHECK(r.si_sdr_out == doctest::Approx(120.0));
  CHECK(r.delta == doctest::Approx(r.si_sdr_out - r.si_sdr_in).epsilon(1e-12));
  CHECK(r.seg_snr_out == doctest::Approx(35.0));
}

TEST_CASE("benchmark_rtf reports wall time over audio time") {
  const double rtf = benchmark_rtf(
      [] { std::this_thread::sleep_for(std::chrono::milliseconds(20)); }, 1.0,
      3);
  CHECK(rtf >= 0.015);
  CHECK(rtf <= 0.5);
  CHECK(std::isfinite(rtf));
}
