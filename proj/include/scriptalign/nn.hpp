#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scriptalign/core.hpp"

namespace scriptalign::nn {

enum class LayerKind : std::uint8_t { Conv = 0, MaxPool = 1, Dense = 2, Dropout = 3 };

std::string to_string(LayerKind kind);

// One layer of the twin tower. Conv and Dense layers apply ReLU to their
// output. Convolutions are valid (no padding) with stride 1; pools use a
// stride equal to the pool size and floor the output size.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::size_t filters = 0;   // conv output channels / dense width
  std::size_t kernel_h = 0;  // conv kernel or pool window
  std::size_t kernel_w = 0;
  double rate = 0.0;         // dropout probability

  static LayerSpec conv(std::size_t filters, std::size_t kh, std::size_t kw);
  static LayerSpec max_pool(std::size_t ph, std::size_t pw);
  static LayerSpec dense(std::size_t width);
  static LayerSpec dropout(double rate);

  bool operator==(const LayerSpec&) const = default;
};

// The twin CNN: five conv stages interleaved with 2x2 pools, then
// Dense 4096 -> Dropout 0.1 -> Dense 4096. Filter counts and dense widths are
// scaled by `multiplier` (rounded up); multiplier 1 is the full-size tower.
std::vector<LayerSpec> default_architecture(double multiplier = 1.0);

struct TensorShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const TensorShape&) const = default;
};

std::string to_string(const TensorShape& shape);

// Returns the input shape followed by the output shape of every layer.
// Dense layers flatten their input and report shape (width, 1, 1).
// Throws IncompatibleGeometry naming the first layer that would produce an
// empty map, and std::invalid_argument style errors for malformed specs.
std::vector<TensorShape> infer_shapes(std::span<const LayerSpec> specs, const CanvasSpec& canvas);

struct LayerParams {
  std::vector<double> weights;  // conv: [out][in][kh][kw]; dense: [out][in]
  std::vector<double> bias;

  bool operator==(const LayerParams&) const = default;
};

struct ModelParams {
  std::vector<LayerParams> layers;  // one entry per LayerSpec (empty for pool/dropout)

  std::size_t parameter_count() const;
  bool operator==(const ModelParams&) const = default;
};

enum class InitScheme : std::uint8_t {
  Fixed = 0,     // every weight ~ N(0, stddev^2)
  FanInScaled,   // weight ~ N(0, stddev^2 * 2 / fan_in)
};

// Zero-mean normal weights, zero biases, deterministic for a fixed seed.
ModelParams init_params(std::span<const LayerSpec> specs, const CanvasSpec& canvas, double stddev,
                        std::uint64_t seed, InitScheme scheme = InitScheme::Fixed);

// Same layout as `like`, every entry zero.
ModelParams zeros_like(const ModelParams& like);

// Activations cached by a forward pass for the matching backward pass.
struct Tape {
  struct Layer {
    std::vector<double> input;   // dense input / conv im2col matrix
    std::vector<double> output;  // post-activation output
    std::vector<std::uint32_t> argmax;  // max-pool winners (flat input index)
    std::vector<std::uint8_t> keep;     // dropout mask
  };
  std::vector<TensorShape> shapes;
  std::vector<Layer> layers;
};

struct ForwardResult {
  std::vector<double> embedding;
  Tape tape;
};

// Runs the tower on one image. In train mode dropout drops each unit with
// probability `rate` and scales survivors by 1/(1-rate); in eval mode dropout
// is the identity.
ForwardResult forward(const ModelParams& params, std::span<const LayerSpec> specs,
                      const SubwordImage& img, bool train_mode, std::uint64_t dropout_seed);

// Eval-mode forward pass that keeps no tape.
std::vector<double> embed(const ModelParams& params, std::span<const LayerSpec> specs,
                          const SubwordImage& img);

// Backpropagates d(objective)/d(embedding) through a recorded tape and
// accumulates parameter gradients into `grads` (which must match `params`).
void backward(const ModelParams& params, std::span<const LayerSpec> specs, const Tape& tape,
              std::span<const double> upstream, ModelParams& grads);

// Convenience form returning fresh gradients.
ModelParams backward(const ModelParams& params, std::span<const LayerSpec> specs, const Tape& tape,
                     std::span<const double> upstream);

inline constexpr double kBceEpsilon = 1e-7;

// Binary cross-entropy on a probability clamped to [eps, 1-eps].
double bce_loss(double prediction, int label);

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double init_stddev = 0.01;
  InitScheme init_scheme = InitScheme::Fixed;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// Throws std::invalid_argument style ConfigError for epochs/batch_size of 0,
// non-positive learning rate or momentum outside [0,1).
void validate(const TrainConfig& config);

// Classical momentum: v <- mu*v - lr*g; w <- w + v. Throws DivergenceError if
// any gradient is non-finite; params are untouched in that case.
void sgd_step(ModelParams& params, const ModelParams& grads, ModelParams& velocity,
              const TrainConfig& config);

// Elementwise helpers used by the trainer.
void add_into(ModelParams& acc, const ModelParams& other);
void scale(ModelParams& params, double factor);

}  // namespace scriptalign::nn
