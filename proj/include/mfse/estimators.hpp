// Estimation of the quantities the multi-frame filter needs: noisy/noise
// correlation matrices and the a-priori SNR. Three routes: oracle recursive
// smoothing of the true components, model-based (decision-directed SNR), and
// TCN heads with Hermitian-PSD / softplus output parameterizations.
#pragma once

#include <cstdint>
#include <vector>

#include "mfse/mf_core.hpp"
#include "mfse/tcn.hpp"

namespace mfse {

constexpr double kLogFloor = 1e-8;  // |Y| floor inside log10 features

struct SmoothingConfig {
  double lambda = 0.9;  // recursive averaging constant per 2 ms frame
  void validate() const;
};

// Per-(k,l) estimates laid out like a Spectrogram: index k * frames + l.
struct EstimateField {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::size_t taps = 0;
  std::vector<CMat> phi_y;
  std::vector<CMat> phi_n;
  std::vector<double> xi;

  std::size_t index(std::size_t k, std::size_t l) const {
    return k * frames + l;
  }
};

// Phi_l = lambda * Phi_{l-1} + (1 - lambda) * v_l v_l^H, Phi_{-1} = 0.
std::vector<CMat> oracle_correlation(const std::vector<cvec>& track,
                                     const SmoothingConfig& cfg);

// xi = smoothed |X|^2 / smoothed |N|^2, clamped.
std::vector<double> oracle_snr(const std::vector<cd>& x_track,
                               const std::vector<cd>& n_track,
                               const SmoothingConfig& cfg,
                               double xi_floor = kXiFloor,
                               double xi_ceil = kXiCeil);

// Decision-directed a-priori SNR. phi_n_track holds the per-frame noise PSD;
// the previous clean-speech estimate is formed internally with a Wiener gain.
std::vector<double> decision_directed_snr(const std::vector<cd>& y_track,
                                          const std::vector<double>& phi_n_track,
                                          double beta,
                                          double xi_floor = kXiFloor,
                                          double xi_ceil = kXiCeil);

// Packs an N^2 real vector into an N x N Hermitian matrix: first N entries
// are the (real) diagonal, then re/im pairs of the strict upper triangle in
// row-major order; lower triangle by conjugation.
CMat assemble_hermitian(const std::vector<double>& h);
std::vector<double> unpack_hermitian(const CMat& m);

// H H^H: Hermitian positive semidefinite by construction.
CMat psd_from_factor(const CMat& h);

// softplus then clamp to [kXiFloor, kXiCeil].
double snr_activation(double raw, double xi_floor = kXiFloor,
                      double xi_ceil = kXiCeil);

struct TcnModelSet {
  TcnModel f_y;   // input [Re Y, Im Y] -> N^2 coefficients
  TcnModel f_n;   // input [Re Y, Im Y] -> N^2 coefficients
  TcnModel f_xi;  // input log10|Y| -> 1 raw SNR logit
};

// Runs the three heads over every bin of the noisy spectrogram and applies
// the PSD / SNR output parameterizations.
EstimateField neural_estimate(const Spectrogram& noisy,
                              const TcnModelSet& models, std::size_t taps);

// Feature extraction shared with the training path.
Sequence features_complex(const Spectrogram& s, std::size_t bin);
Sequence features_log_mag(const Spectrogram& s, std::size_t bin,
                          double log_floor = kLogFloor);

// Oracle estimates from the true components of a synthetic mixture.
EstimateField oracle_estimates(const Spectrogram& noisy,
                               const Spectrogram& clean,
                               const Spectrogram& noise, std::size_t taps,
                               const SmoothingConfig& cfg);

// Model-based estimates: smoothed correlation matrices plus the
// decision-directed SNR computed from the noisy coefficients. The noise
// track is still required for the noise statistics (no blind estimator).
EstimateField model_based_estimates(const Spectrogram& noisy,
                                    const Spectrogram& noise,
                                    std::size_t taps,
                                    const SmoothingConfig& cfg, double beta);

}  // namespace mfse
