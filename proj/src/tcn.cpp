#include "mfse/tcn.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace mfse {

namespace {

constexpr double kLnEps = 1e-8;

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t p = 1;
  for (std::size_t s : shape) p *= s;
  return p;
}

}  // namespace

int TcnArch::receptive_field() const {
  int sum_dil = 0;
  for (int b = 0; b < num_blocks(); ++b) sum_dil += dilation(b);
  return 1 + (kernel_size - 1) * sum_dil;
}

void TcnArch::validate() const {
  if (num_stacks < 1 || layers_per_stack < 1 || kernel_size < 1 ||
      hidden_dim < 1 || bottleneck_dim < 1 || input_dim < 1 ||
      output_dim < 1) {
    throw std::invalid_argument("tcn arch: all dimensions must be >= 1");
  }
}

Tensor& TcnModel::tensor(const std::string& name) {
  for (Tensor& t : tensors) {
    if (t.name == name) return t;
  }
  throw std::invalid_argument("tcn: no tensor named " + name);
}

const Tensor& TcnModel::tensor(const std::string& name) const {
  for (const Tensor& t : tensors) {
    if (t.name == name) return t;
  }
  throw std::invalid_argument("tcn: no tensor named " + name);
}

std::size_t TcnModel::num_parameters() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += t.size();
  return n;
}

void TcnModel::validate() const {
  arch.validate();
  const TcnModel ref = make_model(arch);
  if (ref.tensors.size() != tensors.size()) {
    throw std::runtime_error("tcn: tensor count mismatch");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name != ref.tensors[i].name ||
        tensors[i].shape != ref.tensors[i].shape ||
        tensors[i].data.size() != product(tensors[i].shape)) {
      throw std::runtime_error("tcn: shape mismatch for tensor " +
                               tensors[i].name);
    }
    for (double v : tensors[i].data) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("tcn: non-finite value in tensor " +
                                 tensors[i].name);
      }
    }
  }
}

TcnModel make_model(const TcnArch& arch) {
  arch.validate();
  TcnModel m;
  m.arch = arch;
  const auto B = static_cast<std::size_t>(arch.bottleneck_dim);
  const auto H = static_cast<std::size_t>(arch.hidden_dim);
  const auto K = static_cast<std::size_t>(arch.kernel_size);
  auto push = [&m](std::string name, std::vector<std::size_t> shape) {
    Tensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    t.data.assign(product(t.shape), 0.0);
    m.tensors.push_back(std::move(t));
  };
  push("in_proj.w", {B, static_cast<std::size_t>(arch.input_dim)});
  push("in_proj.b", {B});
  for (int i = 0; i < arch.num_blocks(); ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    push(p + "pw1.w", {H, B});
    push(p + "pw1.b", {H});
    push(p + "prelu1.alpha", {1});
    push(p + "norm1.gain", {H});
    push(p + "norm1.bias", {H});
    push(p + "dw.w", {H, K});
    push(p + "dw.b", {H});
    push(p + "prelu2.alpha", {1});
    push(p + "norm2.gain", {H});
    push(p + "norm2.bias", {H});
    push(p + "pw2.w", {B, H});
    push(p + "pw2.b", {B});
  }
  push("head.w", {static_cast<std::size_t>(arch.output_dim), B});
  push("head.b", {static_cast<std::size_t>(arch.output_dim)});
  return m;
}

TcnModel init_model(const TcnArch& arch, std::uint64_t seed) {
  TcnModel m = make_model(arch);
  std::mt19937_64 rng(seed);
  for (Tensor& t : m.tensors) {
    const bool is_alpha = t.name.find("prelu") != std::string::npos;
    const bool is_gain = t.name.find("norm") != std::string::npos &&
                         t.name.find("gain") != std::string::npos;
    const bool is_bias = t.name.ends_with(".b") ||
                         t.name.find("norm") != std::string::npos;
    if (is_alpha) {
      t.data[0] = 0.25;
    } else if (is_gain) {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    } else if (is_bias) {
      // biases start at zero
    } else {
      const std::size_t fan_in = t.shape.size() > 1 ? t.shape[1] : t.shape[0];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> unif(-bound, bound);
      for (double& v : t.data) v = unif(rng);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// serialization

std::uint32_t crc32(const std::uint8_t* data, std::size_t len,
                    std::uint32_t seed) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      }
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) {
    c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

namespace {

nlohmann::json arch_to_json(const TcnArch& a) {
  return {{"num_stacks", a.num_stacks},
          {"layers_per_stack", a.layers_per_stack},
          {"kernel_size", a.kernel_size},
          {"hidden_dim", a.hidden_dim},
          {"bottleneck_dim", a.bottleneck_dim},
          {"input_dim", a.input_dim},
          {"output_dim", a.output_dim}};
}

TcnArch arch_from_json(const nlohmann::json& j) {
  TcnArch a;
  a.num_stacks = j.at("num_stacks").get<int>();
  a.layers_per_stack = j.at("layers_per_stack").get<int>();
  a.kernel_size = j.at("kernel_size").get<int>();
  a.hidden_dim = j.at("hidden_dim").get<int>();
  a.bottleneck_dim = j.at("bottleneck_dim").get<int>();
  a.input_dim = j.at("input_dim").get<int>();
  a.output_dim = j.at("output_dim").get<int>();
  return a;
}

void append_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
}

std::uint32_t read_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void save_model(const TcnModel& model, const std::string& path) {
  model.validate();
  nlohmann::json header;
  header["arch"] = arch_to_json(model.arch);
  nlohmann::json table = nlohmann::json::array();
  for (const Tensor& t : model.tensors) {
    table.push_back({{"name", t.name}, {"shape", t.shape}});
  }
  header["tensors"] = table;
  const std::string header_str = header.dump();

  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), {'T', 'C', 'N', '1'});
  append_u32(buf, static_cast<std::uint32_t>(header_str.size()));
  buf.insert(buf.end(), header_str.begin(), header_str.end());
  while (buf.size() % 8 != 0) buf.push_back(0);
  for (const Tensor& t : model.tensors) {
    for (double v : t.data) {
      const auto f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      append_u32(buf, u);
    }
  }
  append_u32(buf, crc32(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("tcn: cannot write " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("tcn: write failed for " + path);
}

TcnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("tcn: cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "TCN1", 4) != 0) {
    throw std::runtime_error("tcn: bad magic in " + path);
  }
  const std::uint32_t stored_crc = read_u32(buf.data() + buf.size() - 4);
  if (crc32(buf.data(), buf.size() - 4) != stored_crc) {
    throw std::runtime_error("tcn: checksum failure in " + path);
  }
  const std::uint32_t header_len = read_u32(buf.data() + 4);
  if (8 + header_len > buf.size() - 4) {
    throw std::runtime_error("tcn: corrupt header length in " + path);
  }
  const nlohmann::json header = nlohmann::json::parse(
      buf.begin() + 8, buf.begin() + 8 + header_len, nullptr, true);

  TcnModel m;
  m.arch = arch_from_json(header.at("arch"));
  std::size_t offset = 8 + header_len;
  while (offset % 8 != 0) ++offset;
  for (const auto& entry : header.at("tensors")) {
    Tensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<std::size_t>>();
    const std::size_t count = product(t.shape);
    if (offset + 4 * count > buf.size() - 4) {
      throw std::runtime_error("tcn: payload truncated at tensor " + t.name);
    }
    t.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t u = read_u32(buf.data() + offset + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      t.data[i] = static_cast<double>(f);
    }
    offset += 4 * count;
    m.tensors.push_back(std::move(t));
  }
  if (offset != buf.size() - 4) {
    throw std::runtime_error("tcn: trailing bytes in " + path);
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// forward

namespace {

// out[t] = W x[t] + b, W shape [out_dim, in_dim]
void pointwise(const Tensor& w, const Tensor& b, const Sequence& in,
               Sequence& out) {
  const std::size_t od = w.shape[0], id = w.shape[1];
  for (std::size_t t = 0; t < in.frames; ++t) {
    const double* x = &in.data[t * id];
    double* y = &out.data[t * od];
    for (std::size_t o = 0; o < od; ++o) {
      double s = b.data[o];
      const double* row = &w.data[o * id];
      for (std::size_t i = 0; i < id; ++i) s += row[i] * x[i];
      y[o] = s;
    }
  }
}

void prelu(double alpha, const Sequence& in, Sequence& out) {
  for (std::size_t i = 0; i < in.data.size(); ++i) {
    const double x = in.data[i];
    out.data[i] = x >= 0.0 ? x : alpha * x;
  }
}

// Frame-local layer norm over channels; optionally records mean/var.
void layer_norm(const Tensor& gain, const Tensor& bias, const Sequence& in,
                Sequence& out, std::vector<double>* means,
                std::vector<double>* vars) {
  const std::size_t c = in.channels;
  for (std::size_t t = 0; t < in.frames; ++t) {
    const double* x = &in.data[t * c];
    double mu = 0.0;
    for (std::size_t i = 0; i < c; ++i) mu += x[i];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      const double d = x[i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double inv_s = 1.0 / std::sqrt(var + kLnEps);
    double* y = &out.data[t * c];
    for (std::size_t i = 0; i < c; ++i) {
      y[i] = gain.data[i] * (x[i] - mu) * inv_s + bias.data[i];
    }
    if (means) (*means)[t] = mu;
    if (vars) (*vars)[t] = var;
  }
}

// Causal dilated depthwise conv; `history` (may be null) provides the
// (kernel-1)*dilation frames preceding the chunk and is updated in place.
void depthwise(const Tensor& w, const Tensor& b, int kernel, int dilation,
               const Sequence& in, Sequence& out,
               std::vector<double>* history) {
  const std::size_t c = in.channels;
  const std::size_t hist_frames =
      static_cast<std::size_t>((kernel - 1) * dilation);
  for (std::size_t t = 0; t < in.frames; ++t) {
    double* y = &out.data[t * c];
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = b.data[ch];
      for (int j = 0; j < kernel; ++j) {
        const std::ptrdiff_t src =
            static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(j) * dilation;
        double xv = 0.0;
        if (src >= 0) {
          xv = in.at(static_cast<std::size_t>(src), ch);
        } else if (history) {
          const std::ptrdiff_t h =
              static_cast<std::ptrdiff_t>(hist_frames) + src;
          if (h >= 0) xv = (*history)[static_cast<std::size_t>(h) * c + ch];
        }
        s += w.data[ch * kernel + j] * xv;
      }
      y[ch] = s;
    }
  }
  if (history && hist_frames > 0) {
    // shift in the last hist_frames frames of this chunk
    std::vector<double> updated(hist_frames * c, 0.0);
    for (std::size_t h = 0; h < hist_frames; ++h) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(in.frames) -
                                 static_cast<std::ptrdiff_t>(hist_frames) +
                                 static_cast<std::ptrdiff_t>(h);
      for (std::size_t ch = 0; ch < c; ++ch) {
        if (src >= 0) {
          updated[h * c + ch] = in.at(static_cast<std::size_t>(src), ch);
        } else {
          const std::ptrdiff_t old =
              static_cast<std::ptrdiff_t>(hist_frames) + src;
          updated[h * c + ch] =
              old >= 0 ? (*history)[static_cast<std::size_t>(old) * c + ch]
                       : 0.0;
        }
      }
    }
    *history = std::move(updated);
  }
}

}  // namespace

StreamState make_stream_state(const TcnArch& arch) {
  StreamState st;
  st.blocks.resize(arch.num_blocks());
  for (int i = 0; i < arch.num_blocks(); ++i) {
    const std::size_t hist =
        static_cast<std::size_t>((arch.kernel_size - 1) * arch.dilation(i));
    st.blocks[i].dw_history.assign(hist * arch.hidden_dim, 0.0);
  }
  return st;
}

Sequence tcn_forward(const TcnModel& model, const Sequence& input,
                     StreamState* state) {
  const TcnArch& arch = model.arch;
  if (input.channels != static_cast<std::size_t>(arch.input_dim)) {
    throw std::invalid_argument("tcn forward: input dim mismatch");
  }
  const std::size_t T = input.frames;
  const auto B = static_cast<std::size_t>(arch.bottleneck_dim);
  const auto H = static_cast<std::size_t>(arch.hidden_dim);

  Sequence x(T, B);
  pointwise(model.tensor("in_proj.w"), model.tensor("in_proj.b"), input, x);

  Sequence h1(T, H), h2(T, H), h3(T, H), res(T, B);
  for (int i = 0; i < arch.num_blocks(); ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    pointwise(model.tensor(p + "pw1.w"), model.tensor(p + "pw1.b"), x, h1);
    prelu(model.tensor(p + "prelu1.alpha").data[0], h1, h1);
    layer_norm(model.tensor(p + "norm1.gain"), model.tensor(p + "norm1.bias"),
               h1, h2, nullptr, nullptr);
    depthwise(model.tensor(p + "dw.w"), model.tensor(p + "dw.b"),
              arch.kernel_size, arch.dilation(i), h2, h3,
              state ? &state->blocks[i].dw_history : nullptr);
    prelu(model.tensor(p + "prelu2.alpha").data[0], h3, h3);
    layer_norm(model.tensor(p + "norm2.gain"), model.tensor(p + "norm2.bias"),
               h3, h1, nullptr, nullptr);
    pointwise(model.tensor(p + "pw2.w"), model.tensor(p + "pw2.b"), h1, res);
    for (std::size_t j = 0; j < x.data.size(); ++j) x.data[j] += res.data[j];
  }

  Sequence out(T, static_cast<std::size_t>(arch.output_dim));
  pointwise(model.tensor("head.w"), model.tensor("head.b"), x, out);
  return out;
}

TcnActivations tcn_forward_stored(const TcnModel& model,
                                  const Sequence& input) {
  const TcnArch& arch = model.arch;
  if (input.channels != static_cast<std::size_t>(arch.input_dim)) {
    throw std::invalid_argument("tcn forward: input dim mismatch");
  }
  const std::size_t T = input.frames;
  const auto B = static_cast<std::size_t>(arch.bottleneck_dim);
  const auto H = static_cast<std::size_t>(arch.hidden_dim);

  TcnActivations acts;
  acts.input = input;
  acts.bottleneck = Sequence(T, B);
  pointwise(model.tensor("in_proj.w"), model.tensor("in_proj.b"), input,
            acts.bottleneck);

  Sequence x = acts.bottleneck;
  acts.blocks.resize(arch.num_blocks());
  for (int i = 0; i < arch.num_blocks(); ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    auto& blk = acts.blocks[i];
    blk.residual_in = x;
    blk.pw1_out = Sequence(T, H);
    pointwise(model.tensor(p + "pw1.w"), model.tensor(p + "pw1.b"), x,
              blk.pw1_out);
    blk.prelu1_out = Sequence(T, H);
    prelu(model.tensor(p + "prelu1.alpha").data[0], blk.pw1_out,
          blk.prelu1_out);
    blk.norm1_out = Sequence(T, H);
    blk.norm1_mean.resize(T);
    blk.norm1_var.resize(T);
    layer_norm(model.tensor(p + "norm1.gain"), model.tensor(p + "norm1.bias"),
               blk.prelu1_out, blk.norm1_out, &blk.norm1_mean, &blk.norm1_var);
    blk.dw_out = Sequence(T, H);
    depthwise(model.tensor(p + "dw.w"), model.tensor(p + "dw.b"),
              arch.kernel_size, arch.dilation(i), blk.norm1_out, blk.dw_out,
              nullptr);
    blk.prelu2_out = Sequence(T, H);
    prelu(model.tensor(p + "prelu2.alpha").data[0], blk.dw_out,
          blk.prelu2_out);
    blk.norm2_out = Sequence(T, H);
    blk.norm2_mean.resize(T);
    blk.norm2_var.resize(T);
    layer_norm(model.tensor(p + "norm2.gain"), model.tensor(p + "norm2.bias"),
               blk.prelu2_out, blk.norm2_out, &blk.norm2_mean, &blk.norm2_var);
    Sequence res(T, B);
    pointwise(model.tensor(p + "pw2.w"), model.tensor(p + "pw2.b"),
              blk.norm2_out, res);
    for (std::size_t j = 0; j < x.data.size(); ++j) x.data[j] += res.data[j];
  }
  acts.head_in = x;
  acts.output = Sequence(T, static_cast<std::size_t>(arch.output_dim));
  pointwise(model.tensor("head.w"), model.tensor("head.b"), x, acts.output);
  return acts;
}

// ---------------------------------------------------------------------------
// backward

namespace {

// grad wrt pointwise conv: accumulates weight/bias grads, returns input grad.
void pointwise_backward(const Tensor& w, const Sequence& in,
                        const Sequence& grad_out, Tensor& gw, Tensor& gb,
                        Sequence& grad_in) {
  const std::size_t od = w.shape[0], id = w.shape[1];
  for (std::size_t t = 0; t < in.frames; ++t) {
    const double* x = &in.data[t * id];
    const double* gy = &grad_out.data[t * od];
    double* gx = &grad_in.data[t * id];
    for (std::size_t o = 0; o < od; ++o) {
      const double g = gy[o];
      gb.data[o] += g;
      double* grow = &gw.data[o * id];
      const double* row = &w.data[o * id];
      for (std::size_t i = 0; i < id; ++i) {
        grow[i] += g * x[i];
        gx[i] += g * row[i];
      }
    }
  }
}

void prelu_backward(double alpha, const Sequence& pre, const Sequence& grad_out,
                    Tensor& galpha, Sequence& grad_in) {
  double ga = 0.0;
  for (std::size_t i = 0; i < pre.data.size(); ++i) {
    const double x = pre.data[i];
    const double g = grad_out.data[i];
    if (x >= 0.0) {
      grad_in.data[i] += g;
    } else {
      grad_in.data[i] += g * alpha;
      ga += g * x;
    }
  }
  galpha.data[0] += ga;
}

void layer_norm_backward(const Tensor& gain, const Sequence& pre,
                         const std::vector<double>& means,
                         const std::vector<double>& vars,
                         const Sequence& grad_out, Tensor& ggain,
                         Tensor& gbias, Sequence& grad_in) {
  const std::size_t c = pre.channels;
  std::vector<double> xhat(c), gch(c);
  for (std::size_t t = 0; t < pre.frames; ++t) {
    const double* x = &pre.data[t * c];
    const double* gy = &grad_out.data[t * c];
    double* gx = &grad_in.data[t * c];
    const double inv_s = 1.0 / std::sqrt(vars[t] + kLnEps);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      xhat[i] = (x[i] - means[t]) * inv_s;
      gch[i] = gy[i] * gain.data[i];
      ggain.data[i] += gy[i] * xhat[i];
      gbias.data[i] += gy[i];
      sum_g += gch[i];
      sum_gx += gch[i] * xhat[i];
    }
    const double inv_c = 1.0 / static_cast<double>(c);
    for (std::size_t i = 0; i < c; ++i) {
      gx[i] += inv_s * (gch[i] - inv_c * sum_g - xhat[i] * inv_c * sum_gx);
    }
  }
}

void depthwise_backward(const Tensor& w, int kernel, int dilation,
                        const Sequence& in, const Sequence& grad_out,
                        Tensor& gw, Tensor& gb, Sequence& grad_in) {
  const std::size_t c = in.channels;
  for (std::size_t t = 0; t < in.frames; ++t) {
    const double* gy = &grad_out.data[t * c];
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double g = gy[ch];
      gb.data[ch] += g;
      for (int j = 0; j < kernel; ++j) {
        const std::ptrdiff_t src =
            static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(j) * dilation;
        if (src < 0) continue;
        gw.data[ch * kernel + j] += g * in.at(static_cast<std::size_t>(src), ch);
        grad_in.data[static_cast<std::size_t>(src) * c + ch] +=
            g * w.data[ch * kernel + j];
      }
    }
  }
}

}  // namespace

std::vector<Tensor> make_gradients(const TcnModel& model) {
  std::vector<Tensor> g = model.tensors;
  for (Tensor& t : g) std::fill(t.data.begin(), t.data.end(), 0.0);
  return g;
}

void tcn_backward(const TcnModel& model, const TcnActivations& acts,
                  const Sequence& grad_output, std::vector<Tensor>& grads) {
  const TcnArch& arch = model.arch;
  const std::size_t T = acts.input.frames;
  const auto B = static_cast<std::size_t>(arch.bottleneck_dim);
  const auto H = static_cast<std::size_t>(arch.hidden_dim);

  auto grad_of = [&](const std::string& name) -> Tensor& {
    for (std::size_t i = 0; i < model.tensors.size(); ++i) {
      if (model.tensors[i].name == name) return grads[i];
    }
    throw std::invalid_argument("tcn backward: no gradient slot for " + name);
  };

  // head
  Sequence gx(T, B);
  pointwise_backward(model.tensor("head.w"), acts.head_in, grad_output,
                     grad_of("head.w"), grad_of("head.b"), gx);

  for (int i = arch.num_blocks() - 1; i >= 0; --i) {
    const std::string p = "block" + std::to_string(i) + ".";
    const auto& blk = acts.blocks[i];

    // residual: gx flows both to pw2 branch and straight through
    Sequence g_norm2(T, H);
    pointwise_backward(model.tensor(p + "pw2.w"), blk.norm2_out, gx,
                       grad_of(p + "pw2.w"), grad_of(p + "pw2.b"), g_norm2);
    Sequence g_prelu2(T, H);
    layer_norm_backward(model.tensor(p + "norm2.gain"), blk.prelu2_out,
                        blk.norm2_mean, blk.norm2_var, g_norm2,
                        grad_of(p + "norm2.gain"), grad_of(p + "norm2.bias"),
                        g_prelu2);
    Sequence g_dw(T, H);
    prelu_backward(model.tensor(p + "prelu2.alpha").data[0], blk.dw_out,
                   g_prelu2, grad_of(p + "prelu2.alpha"), g_dw);
    Sequence g_norm1(T, H);
    depthwise_backward(model.tensor(p + "dw.w"), arch.kernel_size,
                       arch.dilation(i), blk.norm1_out, g_dw,
                       grad_of(p + "dw.w"), grad_of(p + "dw.b"), g_norm1);
    Sequence g_prelu1(T, H);
    layer_norm_backward(model.tensor(p + "norm1.gain"), blk.prelu1_out,
                        blk.norm1_mean, blk.norm1_var, g_norm1,
                        grad_of(p + "norm1.gain"), grad_of(p + "norm1.bias"),
                        g_prelu1);
    Sequence g_pw1(T, H);
    prelu_backward(model.tensor(p + "prelu1.alpha").data[0], blk.pw1_out,
                   g_prelu1, grad_of(p + "prelu1.alpha"), g_pw1);
    // input grad of pw1 adds to the residual passthrough grad
    pointwise_backward(model.tensor(p + "pw1.w"), blk.residual_in, g_pw1,
                       grad_of(p + "pw1.w"), grad_of(p + "pw1.b"), gx);
  }

  Sequence g_input(T, static_cast<std::size_t>(arch.input_dim));
  pointwise_backward(model.tensor("in_proj.w"), acts.input, gx,
                     grad_of("in_proj.w"), grad_of("in_proj.b"), g_input);
}

}  // namespace mfse
