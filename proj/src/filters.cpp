#include "mfse/filters.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace mfse {

void RegularizationConfig::validate() const {
  if (delta < 0.0) throw std::invalid_argument("reg: delta must be >= 0");
  if (min_gain_db > 0.0) {
    throw std::invalid_argument("reg: min_gain_db must be <= 0");
  }
}

cvec mfmvdr_weights(const cvec& gamma_x, const CMat& phi_n,
                    const RegularizationConfig& reg) {
  reg.validate();
  const std::size_t n = phi_n.n;
  if (gamma_x.size() != n) {
    throw std::invalid_argument("mfmvdr: gamma/Phi dim mismatch");
  }
  CMat a = phi_n;
  const double tik = reg.delta * phi_n.trace_real() / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) a.at(i, i) += tik;

  const CMat lower = cholesky(a);
  if (cholesky_condition_estimate(lower) > 1e12) {
    throw std::runtime_error("mfmvdr: numerically singular noise matrix");
  }
  const cvec u = cholesky_solve(lower, gamma_x);
  const double d = dot_conj(gamma_x, u).real();
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw std::runtime_error("mfmvdr: non-positive normalization");
  }
  cvec w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = u[i] / d;
  return w;
}

cd apply_filter(const cvec& w, const cvec& y) {
  if (w.size() != y.size()) {
    throw std::invalid_argument("apply_filter: length mismatch");
  }
  return dot_conj(w, y);
}

cd apply_min_gain(cd x_hat, cd y_current, double min_gain_db) {
  const double g = std::pow(10.0, min_gain_db / 20.0);
  const double floor_mag = g * std::abs(y_current);
  const double mag = std::abs(x_hat);
  if (mag >= floor_mag) return x_hat;
  if (mag > 0.0) return x_hat * (floor_mag / mag);
  return g * y_current;
}

cd masking_baseline(double mask_re_raw, double mask_im_raw, cd y_current) {
  const cd mask(2.0 * std::tanh(mask_re_raw / 2.0),
                2.0 * std::tanh(mask_im_raw / 2.0));
  return mask * y_current;
}

cd direct_filter_baseline(const std::vector<double>& filter_raw,
                          const cvec& y) {
  const std::size_t n = y.size();
  if (filter_raw.size() != 2 * n) {
    throw std::invalid_argument("direct filter: raw length must be 2N");
  }
  cvec w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = cd(std::tanh(filter_raw[i]), std::tanh(filter_raw[n + i]));
  }
  return apply_filter(w, y);
}

namespace {

void enhance_bin(const Spectrogram& noisy, const EstimateField& est,
                 const RegularizationConfig& reg, std::size_t k,
                 Spectrogram& out, EnhanceDiagnostics& diag) {
  const std::size_t taps = est.taps;
  const auto y_vecs = stack_frames(noisy, k, taps);
  for (std::size_t l = 0; l < noisy.frames; ++l) {
    const std::size_t idx = est.index(k, l);
    const cd y_cur = noisy.at(k, l);
    cd x_hat;
    bool fell_back = false;
    try {
      const cvec gamma =
          ifc_from_snr(est.phi_y[idx], est.phi_n[idx], est.xi[idx]);
      const cvec w = mfmvdr_weights(gamma, est.phi_n[idx], reg);
      x_hat = apply_filter(w, y_vecs[l]);
    } catch (const std::runtime_error& e) {
      // passthrough fallback w = e
      x_hat = y_cur;
      fell_back = true;
      if (std::string(e.what()).find("degenerate") != std::string::npos) {
        ++diag.degenerate_fallbacks;
      } else {
        ++diag.singular_fallbacks;
      }
    }
    out.at(k, l) =
        fell_back ? x_hat : apply_min_gain(x_hat, y_cur, reg.min_gain_db);
  }
}

}  // namespace

Spectrogram enhance(const Spectrogram& noisy, const EstimateField& estimates,
                    const RegularizationConfig& reg,
                    EnhanceDiagnostics* diag, int threads) {
  if (estimates.bins != noisy.bins || estimates.frames != noisy.frames) {
    throw std::invalid_argument("enhance: estimate/spectrogram shape mismatch");
  }
  reg.validate();
  Spectrogram out(noisy.bins, noisy.frames);
  std::vector<EnhanceDiagnostics> per_bin(noisy.bins);

  if (threads <= 1) {
    for (std::size_t k = 0; k < noisy.bins; ++k) {
      enhance_bin(noisy, estimates, reg, k, out, per_bin[k]);
    }
  } else {
    std::vector<std::thread> pool;
    std::size_t stride = static_cast<std::size_t>(threads);
    for (std::size_t t = 0; t < stride; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t k = t; k < noisy.bins; k += stride) {
          enhance_bin(noisy, estimates, reg, k, out, per_bin[k]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  if (diag) {
    // fixed-order reduction over bins
    for (const auto& d : per_bin) {
      diag->singular_fallbacks += d.singular_fallbacks;
      diag->degenerate_fallbacks += d.degenerate_fallbacks;
    }
  }
  return out;
}

Spectrogram enhance_wiener(const Spectrogram& noisy,
                           const EstimateField& estimates,
                           const RegularizationConfig& reg) {
  if (estimates.bins != noisy.bins || estimates.frames != noisy.frames) {
    throw std::invalid_argument("wiener: estimate/spectrogram shape mismatch");
  }
  Spectrogram out(noisy.bins, noisy.frames);
  for (std::size_t k = 0; k < noisy.bins; ++k) {
    for (std::size_t l = 0; l < noisy.frames; ++l) {
      const double xi = estimates.xi[estimates.index(k, l)];
      const cd y = noisy.at(k, l);
      out.at(k, l) = apply_min_gain(xi / (1.0 + xi) * y, y, reg.min_gain_db);
    }
  }
  return out;
}

}  // namespace mfse
