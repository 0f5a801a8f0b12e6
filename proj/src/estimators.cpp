#include "mfse/estimators.hpp"

#include <cmath>
#include <stdexcept>

namespace mfse {

void SmoothingConfig::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::invalid_argument("smoothing: lambda must be in (0,1)");
  }
}

std::vector<CMat> oracle_correlation(const std::vector<cvec>& track,
                                     const SmoothingConfig& cfg) {
  cfg.validate();
  std::vector<CMat> out;
  out.reserve(track.size());
  if (track.empty()) return out;
  const std::size_t n = track.front().size();
  CMat phi(n);
  for (const cvec& v : track) {
    if (v.size() != n) throw std::invalid_argument("oracle: tap mismatch");
    const CMat inst = outer_self(v);
    for (std::size_t i = 0; i < phi.a.size(); ++i) {
      phi.a[i] = cfg.lambda * phi.a[i] + (1.0 - cfg.lambda) * inst.a[i];
    }
    out.push_back(phi);
  }
  return out;
}

std::vector<double> oracle_snr(const std::vector<cd>& x_track,
                               const std::vector<cd>& n_track,
                               const SmoothingConfig& cfg, double xi_floor,
                               double xi_ceil) {
  cfg.validate();
  if (x_track.size() != n_track.size()) {
    throw std::invalid_argument("oracle_snr: track length mismatch");
  }
  std::vector<double> out(x_track.size());
  double px = 0.0, pn = 0.0;
  for (std::size_t l = 0; l < x_track.size(); ++l) {
    px = cfg.lambda * px + (1.0 - cfg.lambda) * std::norm(x_track[l]);
    pn = cfg.lambda * pn + (1.0 - cfg.lambda) * std::norm(n_track[l]);
    out[l] = pn > kEpsDiv ? clamp_xi(px / pn, xi_floor, xi_ceil) : xi_ceil;
  }
  return out;
}

std::vector<double> decision_directed_snr(const std::vector<cd>& y_track,
                                          const std::vector<double>& phi_n_track,
                                          double beta, double xi_floor,
                                          double xi_ceil) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("decision-directed: beta must be in [0,1]");
  }
  if (y_track.size() != phi_n_track.size()) {
    throw std::invalid_argument("decision-directed: track length mismatch");
  }
  std::vector<double> out(y_track.size());
  double prev_clean_pow = 0.0;  // |X_hat_{l-1}|^2
  for (std::size_t l = 0; l < y_track.size(); ++l) {
    const double phi_n = phi_n_track[l];
    if (!(phi_n > kEpsDiv)) {
      throw std::runtime_error("decision-directed: degenerate noise PSD");
    }
    const double posteriori = std::norm(y_track[l]) / phi_n;
    const double ml = std::max(posteriori - 1.0, 0.0);
    const double xi =
        clamp_xi(beta * prev_clean_pow / phi_n + (1.0 - beta) * ml, xi_floor,
                 xi_ceil);
    out[l] = xi;
    const double gain = xi / (1.0 + xi);  // Wiener gain for the next frame
    prev_clean_pow = gain * gain * std::norm(y_track[l]);
  }
  return out;
}

CMat assemble_hermitian(const std::vector<double>& h) {
  const auto n = static_cast<std::size_t>(std::lround(std::sqrt(
      static_cast<double>(h.size()))));
  if (n * n != h.size()) {
    throw std::invalid_argument("assemble_hermitian: length is not N^2");
  }
  CMat m(n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = cd(h[i], 0.0);
  std::size_t idx = n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const cd v(h[idx], h[idx + 1]);
      idx += 2;
      m.at(i, j) = v;
      m.at(j, i) = std::conj(v);
    }
  }
  return m;
}

std::vector<double> unpack_hermitian(const CMat& m) {
  const std::size_t n = m.n;
  std::vector<double> h(n * n);
  for (std::size_t i = 0; i < n; ++i) h[i] = m.at(i, i).real();
  std::size_t idx = n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      h[idx] = m.at(i, j).real();
      h[idx + 1] = m.at(i, j).imag();
      idx += 2;
    }
  }
  return h;
}

CMat psd_from_factor(const CMat& h) {
  CMat m = mul_ah(h, h);
  symmetrize(m);
  return m;
}

double snr_activation(double raw, double xi_floor, double xi_ceil) {
  // numerically stable softplus
  const double sp = raw > 30.0 ? raw : std::log1p(std::exp(std::min(raw, 30.0)));
  return clamp_xi(sp, xi_floor, xi_ceil);
}

Sequence features_complex(const Spectrogram& s, std::size_t bin) {
  Sequence f(s.frames, 2);
  for (std::size_t l = 0; l < s.frames; ++l) {
    f.at(l, 0) = s.at(bin, l).real();
    f.at(l, 1) = s.at(bin, l).imag();
  }
  return f;
}

Sequence features_log_mag(const Spectrogram& s, std::size_t bin,
                          double log_floor) {
  Sequence f(s.frames, 1);
  for (std::size_t l = 0; l < s.frames; ++l) {
    f.at(l, 0) = std::log10(std::max(std::abs(s.at(bin, l)), log_floor));
  }
  return f;
}

EstimateField neural_estimate(const Spectrogram& noisy,
                              const TcnModelSet& models, std::size_t taps) {
  const auto n2 = static_cast<std::size_t>(taps * taps);
  if (models.f_y.arch.output_dim != static_cast<int>(n2) ||
      models.f_n.arch.output_dim != static_cast<int>(n2) ||
      models.f_xi.arch.output_dim != 1) {
    throw std::invalid_argument("neural_estimate: head width does not match N");
  }
  EstimateField est;
  est.bins = noisy.bins;
  est.frames = noisy.frames;
  est.taps = taps;
  est.phi_y.resize(noisy.bins * noisy.frames);
  est.phi_n.resize(noisy.bins * noisy.frames);
  est.xi.resize(noisy.bins * noisy.frames);

  std::vector<double> coeffs(n2);
  for (std::size_t k = 0; k < noisy.bins; ++k) {
    const Sequence fc = features_complex(noisy, k);
    const Sequence fm = features_log_mag(noisy, k);
    const Sequence hy = tcn_forward(models.f_y, fc);
    const Sequence hn = tcn_forward(models.f_n, fc);
    const Sequence hx = tcn_forward(models.f_xi, fm);
    for (std::size_t l = 0; l < noisy.frames; ++l) {
      const std::size_t idx = est.index(k, l);
      for (std::size_t j = 0; j < n2; ++j) coeffs[j] = hy.at(l, j);
      est.phi_y[idx] = psd_from_factor(assemble_hermitian(coeffs));
      for (std::size_t j = 0; j < n2; ++j) coeffs[j] = hn.at(l, j);
      est.phi_n[idx] = psd_from_factor(assemble_hermitian(coeffs));
      est.xi[idx] = snr_activation(hx.at(l, 0));
    }
  }
  return est;
}

EstimateField oracle_estimates(const Spectrogram& noisy,
                               const Spectrogram& clean,
                               const Spectrogram& noise, std::size_t taps,
                               const SmoothingConfig& cfg) {
  if (noisy.bins != clean.bins || noisy.frames != clean.frames ||
      noisy.bins != noise.bins || noisy.frames != noise.frames) {
    throw std::invalid_argument("oracle_estimates: shape mismatch");
  }
  EstimateField est;
  est.bins = noisy.bins;
  est.frames = noisy.frames;
  est.taps = taps;
  est.phi_y.resize(noisy.bins * noisy.frames);
  est.phi_n.resize(noisy.bins * noisy.frames);
  est.xi.resize(noisy.bins * noisy.frames);

  for (std::size_t k = 0; k < noisy.bins; ++k) {
    const auto y_vecs = stack_frames(noisy, k, taps);
    const auto n_vecs = stack_frames(noise, k, taps);
    const auto phi_y = oracle_correlation(y_vecs, cfg);
    const auto phi_n = oracle_correlation(n_vecs, cfg);
    std::vector<cd> x_track(noisy.frames), n_track(noisy.frames);
    for (std::size_t l = 0; l < noisy.frames; ++l) {
      x_track[l] = clean.at(k, l);
      n_track[l] = noise.at(k, l);
    }
    const auto xi = oracle_snr(x_track, n_track, cfg);
    for (std::size_t l = 0; l < noisy.frames; ++l) {
      const std::size_t idx = est.index(k, l);
      est.phi_y[idx] = phi_y[l];
      est.phi_n[idx] = phi_n[l];
      est.xi[idx] = xi[l];
    }
  }
  return est;
}

EstimateField model_based_estimates(const Spectrogram& noisy,
                                    const Spectrogram& noise,
                                    std::size_t taps,
                                    const SmoothingConfig& cfg, double beta) {
  if (noisy.bins != noise.bins || noisy.frames != noise.frames) {
    throw std::invalid_argument("model_based_estimates: shape mismatch");
  }
  EstimateField est;
  est.bins = noisy.bins;
  est.frames = noisy.frames;
  est.taps = taps;
  est.phi_y.resize(noisy.bins * noisy.frames);
  est.phi_n.resize(noisy.bins * noisy.frames);
  est.xi.resize(noisy.bins * noisy.frames);

  for (std::size_t k = 0; k < noisy.bins; ++k) {
    const auto y_vecs = stack_frames(noisy, k, taps);
    const auto n_vecs = stack_frames(noise, k, taps);
    const auto phi_y = oracle_correlation(y_vecs, cfg);
    const auto phi_n = oracle_correlation(n_vecs, cfg);
    std::vector<cd> y_track(noisy.frames);
    std::vector<double> phi_n_track(noisy.frames);
    for (std::size_t l = 0; l < noisy.frames; ++l) {
      y_track[l] = noisy.at(k, l);
      phi_n_track[l] = std::max(phi_n[l].at(0, 0).real(), kEpsDiv * 10.0);
    }
    const auto xi = decision_directed_snr(y_track, phi_n_track, beta);
    for (std::size_t l = 0; l < noisy.frames; ++l) {
      const std::size_t idx = est.index(k, l);
      est.phi_y[idx] = phi_y[l];
      est.phi_n[idx] = phi_n[l];
      est.xi[idx] = xi[l];
    }
  }
  return est;
}

}  // namespace mfse
