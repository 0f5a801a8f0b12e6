// MFMVDR filter, the masking / direct-filtering baselines, and spectrogram
// enhancement. Filters apply as X_hat = w^H y.
#pragma once

#include "mfse/estimators.hpp"
#include "mfse/mf_core.hpp"

namespace mfse {

struct RegularizationConfig {
  double delta = 1e-3;        // Tikhonov constant, scaled by trace/N
  double min_gain_db = -17.0;

  void validate() const;
};

// w = A^{-1} gamma / (gamma^H A^{-1} gamma), A = Phi_n + delta*(tr/N)*I.
// Throws on a numerically singular A (condition estimate > 1e12).
cvec mfmvdr_weights(const cvec& gamma_x, const CMat& phi_n,
                    const RegularizationConfig& reg);

cd apply_filter(const cvec& w, const cvec& y);

// Magnitude floor at 10^(min_gain_db/20) * |Y|, keeping the estimate's phase
// (noisy phase when the estimate is zero).
cd apply_min_gain(cd x_hat, cd y_current, double min_gain_db);

// Baseline 1: complex mask with re/im squashed into [-2, 2].
cd masking_baseline(double mask_re_raw, double mask_im_raw, cd y_current);

// Baseline 2: direct multi-frame filter with re/im squashed into [-1, 1];
// raw layout [re_0..re_{N-1}, im_0..im_{N-1}].
cd direct_filter_baseline(const std::vector<double>& filter_raw,
                          const cvec& y);

struct EnhanceDiagnostics {
  std::size_t singular_fallbacks = 0;    // passthrough w = e used
  std::size_t degenerate_fallbacks = 0;  // e^T Phi e below the divide guard
};

// Per-(k,l) MFMVDR enhancement of the noisy spectrogram.
Spectrogram enhance(const Spectrogram& noisy, const EstimateField& estimates,
                    const RegularizationConfig& reg,
                    EnhanceDiagnostics* diag = nullptr, int threads = 1);

// Single-frame Wiener gain xi/(1+xi) from the estimate field's SNR track,
// with the same minimum gain. The N=1 reference the multi-frame filter is
// measured against.
Spectrogram enhance_wiener(const Spectrogram& noisy,
                           const EstimateField& estimates,
                           const RegularizationConfig& reg);

}  // namespace mfse
