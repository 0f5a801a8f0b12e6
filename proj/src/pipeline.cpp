#include "mfse/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mfse {

namespace {

constexpr int kSampleRate = 16000;  // config frame sizes are given in ms

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value for " + key);
  }
  if (pos != value.size()) {
    throw std::invalid_argument("config: bad value for " + key);
  }
  return v;
}

void apply_key(PipelineConfig& cfg, const std::string& key,
               const std::string& value) {
  if (key == "frame_len_ms") {
    cfg.stft.frame_len = static_cast<std::size_t>(
        std::lround(parse_double(key, value) * kSampleRate / 1000.0));
  } else if (key == "frame_shift_ms") {
    cfg.stft.frame_shift = static_cast<std::size_t>(
        std::lround(parse_double(key, value) * kSampleRate / 1000.0));
  } else if (key == "window") {
    if (lower(value) != "hann") {
      throw std::invalid_argument("config: unknown window '" + value + "'");
    }
  } else if (key == "n_taps") {
    cfg.taps = static_cast<std::size_t>(parse_double(key, value));
  } else if (key == "delta") {
    cfg.reg.delta = parse_double(key, value);
  } else if (key == "min_gain_db") {
    cfg.reg.min_gain_db = parse_double(key, value);
  } else if (key == "lambda") {
    cfg.smoothing.lambda = parse_double(key, value);
  } else if (key == "beta") {
    cfg.beta = parse_double(key, value);
  } else if (key == "xi_floor") {
    cfg.xi_floor = parse_double(key, value);
  } else if (key == "xi_ceil") {
    cfg.xi_ceil = parse_double(key, value);
  } else if (key == "log_floor") {
    cfg.log_floor = parse_double(key, value);
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(parse_double(key, value));
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Method method_from_string(const std::string& s) {
  const std::string v = lower(s);
  if (v == "mfmvdr") return Method::Mfmvdr;
  if (v == "masking") return Method::Masking;
  if (v == "direct") return Method::Direct;
  if (v == "passthrough") return Method::Passthrough;
  if (v == "wiener") return Method::Wiener;
  throw std::invalid_argument("unknown method '" + s + "'");
}

EstimatorKind estimator_from_string(const std::string& s) {
  const std::string v = lower(s);
  if (v == "oracle") return EstimatorKind::Oracle;
  if (v == "model" || v == "model-based") return EstimatorKind::ModelBased;
  if (v == "neural") return EstimatorKind::Neural;
  throw std::invalid_argument("unknown estimator '" + s + "'");
}

void PipelineConfig::validate() const {
  stft.validate();
  if (taps < 1 || taps > kMaxTaps) {
    throw std::invalid_argument("config: n_taps out of range");
  }
  reg.validate();
  smoothing.validate();
  if (beta < 0.0 || beta > 1.0) {
    throw std::invalid_argument("config: beta out of [0, 1]");
  }
  if (!(xi_floor > 0.0) || !(xi_ceil > xi_floor)) {
    throw std::invalid_argument("config: bad xi bounds");
  }
  if (!(log_floor > 0.0)) {
    throw std::invalid_argument("config: log_floor must be positive");
  }
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  PipelineConfig cfg;
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("config: bad JSON: ") +
                                  e.what());
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      std::string value = it.value().is_string()
                              ? it.value().get<std::string>()
                              : it.value().dump();
      apply_key(cfg, it.key(), value);
    }
  } else {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("config: expected key=value, got '" + t +
                                    "'");
      }
      apply_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
  }
  cfg.validate();
  return cfg;
}

namespace {

void clamp_field_snr(EstimateField& est, const PipelineConfig& cfg) {
  for (double& v : est.xi) v = clamp_xi(v, cfg.xi_floor, cfg.xi_ceil);
}

EstimateField build_estimates(const Spectrogram& noisy,
                              const PipelineConfig& cfg,
                              const EnhanceRequest& req) {
  EstimateField est;
  switch (req.estimator) {
    case EstimatorKind::Oracle: {
      if (!req.clean || !req.noise) {
        throw std::invalid_argument(
            "enhance: oracle estimator needs clean and noise tracks");
      }
      const Spectrogram clean = analyze(*req.clean, cfg.stft);
      const Spectrogram noise = analyze(*req.noise, cfg.stft);
      est = oracle_estimates(noisy, clean, noise, cfg.taps, cfg.smoothing);
      break;
    }
    case EstimatorKind::ModelBased: {
      if (!req.noise) {
        throw std::invalid_argument(
            "enhance: model-based estimator needs a noise track");
      }
      const Spectrogram noise = analyze(*req.noise, cfg.stft);
      est = model_based_estimates(noisy, noise, cfg.taps, cfg.smoothing,
                                  cfg.beta);
      break;
    }
    case EstimatorKind::Neural: {
      if (!req.models) {
        throw std::invalid_argument(
            "enhance: neural estimator needs the three model heads");
      }
      est = neural_estimate(noisy, *req.models, cfg.taps);
      break;
    }
  }
  clamp_field_snr(est, cfg);
  return est;
}

Spectrogram enhance_baseline(const Spectrogram& noisy, Method method,
                             const PipelineConfig& cfg,
                             const TcnModel& model) {
  const std::size_t expect =
      method == Method::Masking ? 2 : 2 * cfg.taps;
  if (model.arch.output_dim != expect || model.arch.input_dim != 2) {
    throw std::invalid_argument("enhance: baseline model head width mismatch");
  }
  Spectrogram out(noisy.bins, noisy.frames);
  for (std::size_t k = 0; k < noisy.bins; ++k) {
    const Sequence fc = features_complex(noisy, k);
    const Sequence raw = tcn_forward(model, fc);
    if (method == Method::Masking) {
      for (std::size_t l = 0; l < noisy.frames; ++l) {
        out.at(k, l) =
            masking_baseline(raw.at(l, 0), raw.at(l, 1), noisy.at(k, l));
      }
    } else {
      const auto y_vecs = stack_frames(noisy, k, cfg.taps);
      std::vector<double> coefs(2 * cfg.taps);
      for (std::size_t l = 0; l < noisy.frames; ++l) {
        for (std::size_t c = 0; c < 2 * cfg.taps; ++c) coefs[c] = raw.at(l, c);
        out.at(k, l) = direct_filter_baseline(coefs, y_vecs[l]);
      }
    }
  }
  return out;
}

}  // namespace

Waveform run_enhance(const Waveform& noisy, const PipelineConfig& cfg,
                     const EnhanceRequest& req, EnhanceDiagnostics* diag) {
  cfg.validate();
  const Spectrogram spec = analyze(noisy, cfg.stft);

  Spectrogram out;
  switch (req.method) {
    case Method::Passthrough:
      out = spec;
      break;
    case Method::Masking:
    case Method::Direct: {
      if (!req.baseline_model) {
        throw std::invalid_argument("enhance: baseline method needs a model");
      }
      out = enhance_baseline(spec, req.method, cfg, *req.baseline_model);
      break;
    }
    case Method::Mfmvdr: {
      const EstimateField est = build_estimates(spec, cfg, req);
      out = enhance(spec, est, cfg.reg, diag, cfg.threads);
      break;
    }
    case Method::Wiener: {
      const EstimateField est = build_estimates(spec, cfg, req);
      out = enhance_wiener(spec, est, cfg.reg);
      break;
    }
  }

  Waveform result = synthesize(out, cfg.stft, noisy.samples.size());
  result.sample_rate = noisy.sample_rate;
  return result;
}

}  // namespace mfse
