#include "scriptalign/nn.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "scriptalign/error.hpp"
#include "scriptalign/rng.hpp"

namespace scriptalign::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

std::size_t scaled(std::size_t count, double multiplier) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(count) * multiplier - 1e-9));
}

std::string layer_name(std::size_t index, const LayerSpec& spec) {
  return "layer " + std::to_string(index) + " (" + to_string(spec.kind) + ")";
}

// (C,H,W) -> (C*kh*kw) x (Ho*Wo), row k = (c*kh + i)*kw + j.
void im2col(std::span<const double> in, const TensorShape& s, std::size_t kh, std::size_t kw,
            std::vector<double>& col) {
  const std::size_t ho = s.height - kh + 1;
  const std::size_t wo = s.width - kw + 1;
  const std::size_t p = ho * wo;
  col.resize(s.channels * kh * kw * p);
  double* dst = col.data();
  for (std::size_t c = 0; c < s.channels; ++c) {
    const double* plane = in.data() + c * s.height * s.width;
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const double* src = plane + (oy + i) * s.width + j;
          std::copy(src, src + wo, dst);
          dst += wo;
        }
      }
    }
  }
}

void col2im_add(const RowMat& dcol, const TensorShape& s, std::size_t kh, std::size_t kw,
                std::vector<double>& dinput) {
  const std::size_t ho = s.height - kh + 1;
  const std::size_t wo = s.width - kw + 1;
  const double* src = dcol.data();
  for (std::size_t c = 0; c < s.channels; ++c) {
    double* plane = dinput.data() + c * s.height * s.width;
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        for (std::size_t oy = 0; oy < ho; ++oy) {
          double* dst = plane + (oy + i) * s.width + j;
          for (std::size_t ox = 0; ox < wo; ++ox) dst[ox] += src[ox];
          src += wo;
        }
      }
    }
  }
}

std::size_t fan_in(const LayerSpec& spec, const TensorShape& in) {
  return spec.kind == LayerKind::Conv ? in.channels * spec.kernel_h * spec.kernel_w : in.size();
}

// Shared forward implementation; `tape` may be null for eval-only passes.
std::vector<double> run_forward(const ModelParams& params, std::span<const LayerSpec> specs,
                                const std::vector<TensorShape>& shapes, const SubwordImage& img,
                                bool train_mode, std::uint64_t dropout_seed, Tape* tape) {
  if (params.layers.size() != specs.size()) {
    throw InternalError("parameter set does not match layer chain");
  }
  const TensorShape& input_shape = shapes.front();
  if (img.height() != input_shape.height || img.width() != input_shape.width) {
    throw IncompatibleGeometry("input image is " + std::to_string(img.height()) + "x" +
                               std::to_string(img.width()) + ", model expects " +
                               std::to_string(input_shape.height) + "x" +
                               std::to_string(input_shape.width));
  }
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const LayerSpec& spec = specs[l];
    if (spec.kind != LayerKind::Conv && spec.kind != LayerKind::Dense) continue;
    if (params.layers[l].weights.size() != spec.filters * fan_in(spec, shapes[l]) ||
        params.layers[l].bias.size() != spec.filters) {
      throw IncompatibleGeometry(layer_name(l, spec) + ": parameters do not fit input " +
                                 std::to_string(img.height()) + "x" + std::to_string(img.width()));
    }
  }
  std::vector<double> act(img.pixels().begin(), img.pixels().end());
  std::vector<double> col;
  if (tape) {
    tape->shapes = shapes;
    tape->layers.assign(specs.size(), {});
  }

  for (std::size_t l = 0; l < specs.size(); ++l) {
    const LayerSpec& spec = specs[l];
    const TensorShape& in = shapes[l];
    const TensorShape& out = shapes[l + 1];
    Tape::Layer* rec = tape ? &tape->layers[l] : nullptr;
    std::vector<double> next(out.size());

    switch (spec.kind) {
      case LayerKind::Conv: {
        im2col(act, in, spec.kernel_h, spec.kernel_w, col);
        const std::size_t k = in.channels * spec.kernel_h * spec.kernel_w;
        const std::size_t p = out.height * out.width;
        ConstMatMap w(params.layers[l].weights.data(), static_cast<Eigen::Index>(spec.filters),
                      static_cast<Eigen::Index>(k));
        ConstMatMap x(col.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
        MatMap y(next.data(), static_cast<Eigen::Index>(spec.filters), static_cast<Eigen::Index>(p));
        y.noalias() = w * x;
        for (std::size_t f = 0; f < spec.filters; ++f) {
          const double b = params.layers[l].bias[f];
          double* row = next.data() + f * p;
          for (std::size_t i = 0; i < p; ++i) row[i] = std::max(0.0, row[i] + b);
        }
        if (rec) rec->input = std::move(col);
        break;
      }
      case LayerKind::MaxPool: {
        if (rec) rec->argmax.resize(out.size());
        for (std::size_t c = 0; c < out.channels; ++c) {
          for (std::size_t oy = 0; oy < out.height; ++oy) {
            for (std::size_t ox = 0; ox < out.width; ++ox) {
              std::size_t best = (c * in.height + oy * spec.kernel_h) * in.width + ox * spec.kernel_w;
              for (std::size_t i = 0; i < spec.kernel_h; ++i) {
                for (std::size_t j = 0; j < spec.kernel_w; ++j) {
                  const std::size_t idx =
                      (c * in.height + oy * spec.kernel_h + i) * in.width + ox * spec.kernel_w + j;
                  if (act[idx] > act[best]) best = idx;
                }
              }
              const std::size_t o = (c * out.height + oy) * out.width + ox;
              next[o] = act[best];
              if (rec) rec->argmax[o] = static_cast<std::uint32_t>(best);
            }
          }
        }
        break;
      }
      case LayerKind::Dense: {
        ConstMatMap w(params.layers[l].weights.data(), static_cast<Eigen::Index>(out.channels),
                      static_cast<Eigen::Index>(in.size()));
        ConstVecMap x(act.data(), static_cast<Eigen::Index>(in.size()));
        VecMap y(next.data(), static_cast<Eigen::Index>(out.channels));
        y.noalias() = w * x;
        for (std::size_t i = 0; i < out.channels; ++i) {
          next[i] = std::max(0.0, next[i] + params.layers[l].bias[i]);
        }
        if (rec) rec->input = act;
        break;
      }
      case LayerKind::Dropout: {
        if (!train_mode || spec.rate == 0.0) {
          next = act;
          break;
        }
        Rng rng(derive_seed(dropout_seed, l));
        const double keep_scale = 1.0 / (1.0 - spec.rate);
        if (rec) rec->keep.resize(act.size());
        for (std::size_t i = 0; i < act.size(); ++i) {
          const bool keep = unit_interval(rng()) >= spec.rate;
          next[i] = keep ? act[i] * keep_scale : 0.0;
          if (rec) rec->keep[i] = keep ? 1 : 0;
        }
        break;
      }
    }
    act = std::move(next);
    if (rec) rec->output = act;
  }
  return act;
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Dense: return "dense";
    case LayerKind::Dropout: return "dropout";
  }
  return "unknown";
}

std::string to_string(const TensorShape& shape) {
  if (shape.height == 1 && shape.width == 1) return std::to_string(shape.channels);
  return std::to_string(shape.channels) + "@" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

LayerSpec LayerSpec::conv(std::size_t filters, std::size_t kh, std::size_t kw) {
  return {LayerKind::Conv, filters, kh, kw, 0.0};
}
LayerSpec LayerSpec::max_pool(std::size_t ph, std::size_t pw) {
  return {LayerKind::MaxPool, 0, ph, pw, 0.0};
}
LayerSpec LayerSpec::dense(std::size_t width) { return {LayerKind::Dense, width, 0, 0, 0.0}; }
LayerSpec LayerSpec::dropout(double rate) { return {LayerKind::Dropout, 0, 0, 0, rate}; }

std::vector<LayerSpec> default_architecture(double multiplier) {
  if (!(multiplier > 0.0 && multiplier <= 1.0)) {
    throw ConfigError("channel multiplier must lie in (0,1]");
  }
  auto f = [multiplier](std::size_t n) { return scaled(n, multiplier); };
  return {
      LayerSpec::conv(f(64), 5, 5),  LayerSpec::max_pool(2, 2),
      LayerSpec::conv(f(64), 4, 4),  LayerSpec::conv(f(128), 4, 4), LayerSpec::max_pool(2, 2),
      LayerSpec::conv(f(128), 3, 3), LayerSpec::conv(f(256), 3, 3), LayerSpec::max_pool(2, 2),
      LayerSpec::conv(f(256), 2, 2), LayerSpec::conv(f(512), 2, 2), LayerSpec::max_pool(2, 2),
      LayerSpec::dense(f(4096)),     LayerSpec::dropout(0.1),       LayerSpec::dense(f(4096)),
  };
}

std::vector<TensorShape> infer_shapes(std::span<const LayerSpec> specs, const CanvasSpec& canvas) {
  std::vector<TensorShape> shapes;
  shapes.reserve(specs.size() + 1);
  shapes.push_back({1, canvas.target_height, canvas.target_width});
  if (canvas.target_height == 0 || canvas.target_width == 0) {
    throw IncompatibleGeometry("canvas must be at least 1x1");
  }
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const LayerSpec& spec = specs[l];
    const TensorShape in = shapes.back();
    TensorShape out;
    switch (spec.kind) {
      case LayerKind::Conv:
        if (spec.filters == 0 || spec.kernel_h == 0 || spec.kernel_w == 0) {
          throw ConfigError(layer_name(l, spec) + ": filters and kernel dims must be >= 1");
        }
        if (in.height < spec.kernel_h || in.width < spec.kernel_w) {
          throw IncompatibleGeometry(layer_name(l, spec) + ": kernel " +
                                     std::to_string(spec.kernel_h) + "x" +
                                     std::to_string(spec.kernel_w) + " does not fit input " +
                                     to_string(in));
        }
        out = {spec.filters, in.height - spec.kernel_h + 1, in.width - spec.kernel_w + 1};
        break;
      case LayerKind::MaxPool:
        if (spec.kernel_h == 0 || spec.kernel_w == 0) {
          throw ConfigError(layer_name(l, spec) + ": pool dims must be >= 1");
        }
        out = {in.channels, in.height / spec.kernel_h, in.width / spec.kernel_w};
        if (out.height == 0 || out.width == 0) {
          throw IncompatibleGeometry(layer_name(l, spec) + ": pooling input " + to_string(in) +
                                     " yields an empty map");
        }
        break;
      case LayerKind::Dense:
        if (spec.filters == 0) throw ConfigError(layer_name(l, spec) + ": width must be >= 1");
        out = {spec.filters, 1, 1};
        break;
      case LayerKind::Dropout:
        if (!(spec.rate >= 0.0 && spec.rate < 1.0)) {
          throw ConfigError(layer_name(l, spec) + ": rate must lie in [0,1)");
        }
        out = in;
        break;
    }
    shapes.push_back(out);
  }
  return shapes;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
  return n;
}

ModelParams init_params(std::span<const LayerSpec> specs, const CanvasSpec& canvas, double stddev,
                        std::uint64_t seed, InitScheme scheme) {
  if (!(stddev >= 0.0) || !std::isfinite(stddev)) throw ConfigError("init stddev must be >= 0");
  const auto shapes = infer_shapes(specs, canvas);
  ModelParams params;
  params.layers.resize(specs.size());
  Rng rng(seed);
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const LayerSpec& spec = specs[l];
    if (spec.kind != LayerKind::Conv && spec.kind != LayerKind::Dense) continue;
    const std::size_t fan = fan_in(spec, shapes[l]);
    double sigma = stddev;
    if (scheme == InitScheme::FanInScaled) sigma *= std::sqrt(2.0 / static_cast<double>(fan));
    auto& layer = params.layers[l];
    layer.weights.resize(spec.filters * fan);
    layer.bias.assign(spec.filters, 0.0);
    if (sigma == 0.0) {
      std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
      continue;
    }
    std::normal_distribution<double> normal(0.0, sigma);
    for (double& w : layer.weights) w = normal(rng);
  }
  return params;
}

ModelParams zeros_like(const ModelParams& like) {
  ModelParams z;
  z.layers.resize(like.layers.size());
  for (std::size_t l = 0; l < like.layers.size(); ++l) {
    z.layers[l].weights.assign(like.layers[l].weights.size(), 0.0);
    z.layers[l].bias.assign(like.layers[l].bias.size(), 0.0);
  }
  return z;
}

ForwardResult forward(const ModelParams& params, std::span<const LayerSpec> specs,
                      const SubwordImage& img, bool train_mode, std::uint64_t dropout_seed) {
  const CanvasSpec canvas{img.height(), img.width()};
  ForwardResult result;
  const auto shapes = infer_shapes(specs, canvas);
  result.embedding = run_forward(params, specs, shapes, img, train_mode, dropout_seed, &result.tape);
  return result;
}

std::vector<double> embed(const ModelParams& params, std::span<const LayerSpec> specs,
                          const SubwordImage& img) {
  const CanvasSpec canvas{img.height(), img.width()};
  return run_forward(params, specs, infer_shapes(specs, canvas), img, false, 0, nullptr);
}

void backward(const ModelParams& params, std::span<const LayerSpec> specs, const Tape& tape,
              std::span<const double> upstream, ModelParams& grads) {
  if (tape.layers.size() != specs.size() || tape.shapes.size() != specs.size() + 1 ||
      params.layers.size() != specs.size() || grads.layers.size() != specs.size()) {
    throw InternalError("tape does not match the layer chain");
  }
  if (upstream.size() != tape.shapes.back().size()) {
    throw InternalError("upstream gradient has " + std::to_string(upstream.size()) +
                        " entries, expected " + std::to_string(tape.shapes.back().size()));
  }

  std::vector<double> grad(upstream.begin(), upstream.end());
  for (std::size_t l = specs.size(); l-- > 0;) {
    const LayerSpec& spec = specs[l];
    const TensorShape& in = tape.shapes[l];
    const TensorShape& out = tape.shapes[l + 1];
    const Tape::Layer& rec = tape.layers[l];
    if (rec.output.size() != out.size()) throw InternalError("tape output size mismatch");
    const bool need_input_grad = l > 0;
    std::vector<double> grad_in;
    if (need_input_grad) grad_in.assign(in.size(), 0.0);

    switch (spec.kind) {
      case LayerKind::Conv: {
        const std::size_t k = in.channels * spec.kernel_h * spec.kernel_w;
        const std::size_t p = out.height * out.width;
        if (rec.input.size() != k * p) throw InternalError("tape im2col size mismatch");
        for (std::size_t i = 0; i < grad.size(); ++i) {
          if (rec.output[i] <= 0.0) grad[i] = 0.0;
        }
        ConstMatMap g(grad.data(), static_cast<Eigen::Index>(spec.filters),
                      static_cast<Eigen::Index>(p));
        ConstMatMap x(rec.input.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
        auto& gl = grads.layers[l];
        MatMap dw(gl.weights.data(), static_cast<Eigen::Index>(spec.filters),
                  static_cast<Eigen::Index>(k));
        dw.noalias() += g * x.transpose();
        VecMap db(gl.bias.data(), static_cast<Eigen::Index>(spec.filters));
        db += g.rowwise().sum();
        if (need_input_grad) {
          ConstMatMap w(params.layers[l].weights.data(), static_cast<Eigen::Index>(spec.filters),
                        static_cast<Eigen::Index>(k));
          RowMat dcol = w.transpose() * g;
          col2im_add(dcol, in, spec.kernel_h, spec.kernel_w, grad_in);
        }
        break;
      }
      case LayerKind::MaxPool: {
        if (rec.argmax.size() != out.size()) throw InternalError("tape pool size mismatch");
        if (need_input_grad) {
          for (std::size_t o = 0; o < out.size(); ++o) grad_in[rec.argmax[o]] += grad[o];
        }
        break;
      }
      case LayerKind::Dense: {
        if (rec.input.size() != in.size()) throw InternalError("tape dense input mismatch");
        for (std::size_t i = 0; i < grad.size(); ++i) {
          if (rec.output[i] <= 0.0) grad[i] = 0.0;
        }
        ConstVecMap g(grad.data(), static_cast<Eigen::Index>(out.channels));
        ConstVecMap x(rec.input.data(), static_cast<Eigen::Index>(in.size()));
        auto& gl = grads.layers[l];
        MatMap dw(gl.weights.data(), static_cast<Eigen::Index>(out.channels),
                  static_cast<Eigen::Index>(in.size()));
        dw.noalias() += g * x.transpose();
        VecMap db(gl.bias.data(), static_cast<Eigen::Index>(out.channels));
        db += g;
        if (need_input_grad) {
          ConstMatMap w(params.layers[l].weights.data(), static_cast<Eigen::Index>(out.channels),
                        static_cast<Eigen::Index>(in.size()));
          VecMap gi(grad_in.data(), static_cast<Eigen::Index>(in.size()));
          gi.noalias() = w.transpose() * g;
        }
        break;
      }
      case LayerKind::Dropout: {
        if (!need_input_grad) break;
        if (rec.keep.empty()) {
          grad_in = grad;  // eval-mode or rate 0
        } else {
          if (rec.keep.size() != out.size()) throw InternalError("tape dropout mask mismatch");
          const double keep_scale = 1.0 / (1.0 - spec.rate);
          for (std::size_t i = 0; i < grad.size(); ++i) {
            grad_in[i] = rec.keep[i] ? grad[i] * keep_scale : 0.0;
          }
        }
        break;
      }
    }
    grad = std::move(grad_in);
  }
}

ModelParams backward(const ModelParams& params, std::span<const LayerSpec> specs, const Tape& tape,
                     std::span<const double> upstream) {
  ModelParams grads = zeros_like(params);
  backward(params, specs, tape, upstream, grads);
  return grads;
}

double bce_loss(double prediction, int label) {
  const double p = std::clamp(prediction, kBceEpsilon, 1.0 - kBceEpsilon);
  return label ? -std::log(p) : -std::log(1.0 - p);
}

void validate(const TrainConfig& config) {
  if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0,1)");
  }
  if (!(config.init_stddev > 0.0) || !std::isfinite(config.init_stddev)) {
    throw ConfigError("init_stddev must be positive");
  }
  if (config.workers < 1) throw ConfigError("workers must be >= 1");
}

void sgd_step(ModelParams& params, const ModelParams& grads, ModelParams& velocity,
              const TrainConfig& config) {
  if (grads.layers.size() != params.layers.size() || velocity.layers.size() != params.layers.size()) {
    throw InternalError("optimizer state does not match parameters");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& g = grads.layers[l];
    if (g.weights.size() != params.layers[l].weights.size() ||
        g.bias.size() != params.layers[l].bias.size()) {
      throw InternalError("gradient shape mismatch at layer " + std::to_string(l));
    }
    for (double v : g.weights) {
      if (!std::isfinite(v)) throw DivergenceError("non-finite gradient at layer " + std::to_string(l));
    }
    for (double v : g.bias) {
      if (!std::isfinite(v)) throw DivergenceError("non-finite gradient at layer " + std::to_string(l));
    }
  }
  auto update = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& v) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = config.momentum * v[i] - config.learning_rate * g[i];
      w[i] += v[i];
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weights, grads.layers[l].weights, velocity.layers[l].weights);
    update(params.layers[l].bias, grads.layers[l].bias, velocity.layers[l].bias);
  }
}

void add_into(ModelParams& acc, const ModelParams& other) {
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    auto& a = acc.layers[l];
    const auto& b = other.layers[l];
    for (std::size_t i = 0; i < a.weights.size(); ++i) a.weights[i] += b.weights[i];
    for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += b.bias[i];
  }
}

void scale(ModelParams& params, double factor) {
  for (auto& layer : params.layers) {
    for (double& w : layer.weights) w *= factor;
    for (double& b : layer.bias) b *= factor;
  }
}

}  // namespace scriptalign::nn
