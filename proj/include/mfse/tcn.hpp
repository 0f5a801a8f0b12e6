// Causal temporal convolutional network: dilated depthwise-separable residual
// blocks with PReLU and frame-local layer normalization, plus a portable
// binary weight format. Normalizing within the current frame only keeps the
// receptive field exactly equal to the convolutional one.
//
// Weight file layout (all little-endian):
//   "TCN1" magic, u32 header length, UTF-8 JSON header (arch + ordered tensor
//   table), zero padding to 8-byte alignment, float32 tensor payloads in
//   table order, CRC32 of all preceding bytes.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mfse {

struct TcnArch {
  int num_stacks = 2;
  int layers_per_stack = 4;
  int kernel_size = 3;
  int hidden_dim = 128;
  int bottleneck_dim = 64;
  int input_dim = 2;
  int output_dim = 1;

  int num_blocks() const { return num_stacks * layers_per_stack; }
  int dilation(int block) const { return 1 << (block % layers_per_stack); }
  // 1 + (kernel-1) * sum of dilations
  int receptive_field() const;
  void validate() const;
  bool operator==(const TcnArch&) const = default;
};

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
};

struct TcnModel {
  TcnArch arch;
  std::vector<Tensor> tensors;  // fixed serialization order

  Tensor& tensor(const std::string& name);
  const Tensor& tensor(const std::string& name) const;
  std::size_t num_parameters() const;
  void validate() const;
};

// Model with the canonical tensor set for `arch`, zero-initialized.
TcnModel make_model(const TcnArch& arch);
// Seeded uniform fan-in initialization.
TcnModel init_model(const TcnArch& arch, std::uint64_t seed);

void save_model(const TcnModel& model, const std::string& path);
TcnModel load_model(const std::string& path);

// Input/output sequences are row-major [frame][channel].
struct Sequence {
  std::size_t frames = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  Sequence() = default;
  Sequence(std::size_t t, std::size_t c)
      : frames(t), channels(c), data(t * c, 0.0) {}
  double& at(std::size_t t, std::size_t c) { return data[t * channels + c]; }
  double at(std::size_t t, std::size_t c) const {
    return data[t * channels + c];
  }
};

// Carried state for chunked evaluation: per-block depthwise-conv history.
struct StreamState {
  struct BlockState {
    std::vector<double> dw_history;  // [(kernel-1)*dilation][hidden]
  };
  std::vector<BlockState> blocks;
};

StreamState make_stream_state(const TcnArch& arch);

Sequence tcn_forward(const TcnModel& model, const Sequence& input,
                     StreamState* state = nullptr);

// Forward pass retaining every intermediate needed by tcn_backward.
struct TcnActivations {
  Sequence input;
  Sequence bottleneck;  // after input projection
  struct Block {
    Sequence residual_in;   // block input (bottleneck width)
    Sequence pw1_out;       // hidden width
    Sequence prelu1_out;
    Sequence norm1_out;
    std::vector<double> norm1_mean, norm1_var;  // per frame
    Sequence dw_out;
    Sequence prelu2_out;
    Sequence norm2_out;
    std::vector<double> norm2_mean, norm2_var;
  };
  std::vector<Block> blocks;
  Sequence head_in;  // bottleneck width, after last residual add
  Sequence output;
};

TcnActivations tcn_forward_stored(const TcnModel& model,
                                  const Sequence& input);

// Gradients aligned with model.tensors; accumulates into `grads`.
void tcn_backward(const TcnModel& model, const TcnActivations& acts,
                  const Sequence& grad_output,
                  std::vector<Tensor>& grads);

// Zero-filled gradient tensors matching the model layout.
std::vector<Tensor> make_gradients(const TcnModel& model);

std::uint32_t crc32(const std::uint8_t* data, std::size_t len,
                    std::uint32_t seed = 0);

}  // namespace mfse
