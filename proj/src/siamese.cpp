#include "scriptalign/siamese.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <thread>

#include "scriptalign/error.hpp"
#include "scriptalign/log.hpp"
#include "scriptalign/rng.hpp"

namespace scriptalign {

namespace {

const SubwordImage& image_of(const SubwordAnnotation& token) {
  if (!token.image) {
    throw InvalidImage("token '" + token.form_id + "' (" + token.manuscript_id + ") has no image");
  }
  return *token.image;
}

void check_geometry(const SiameseModel& model, const SubwordImage& img) {
  if (img.height() != model.canvas.target_height || img.width() != model.canvas.target_width) {
    throw IncompatibleGeometry("image is " + std::to_string(img.height()) + "x" +
                               std::to_string(img.width()) + ", model canvas is " +
                               std::to_string(model.canvas.target_height) + "x" +
                               std::to_string(model.canvas.target_width));
  }
}

// Runs `fn(begin, end, chunk)` over `workers` contiguous chunks of [0, n).
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    threads.emplace_back([&, begin, end, w] {
      try {
        fn(begin, end, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

using EmbeddingCache = std::unordered_map<const SubwordImage*, std::vector<double>>;

EmbeddingCache embed_all(const SiameseModel& model, std::span<const PairSample> pairs,
                         std::size_t workers) {
  std::vector<const SubwordImage*> images;
  EmbeddingCache cache;
  for (const auto& p : pairs) {
    for (const auto* tok : {&p.left, &p.right}) {
      const SubwordImage* img = &image_of(*tok);
      if (cache.emplace(img, std::vector<double>{}).second) images.push_back(img);
    }
  }
  std::vector<std::vector<double>> out(images.size());
  parallel_chunks(images.size(), workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      check_geometry(model, *images[i]);
      out[i] = nn::embed(model.twin, model.specs, *images[i]);
    }
  });
  for (std::size_t i = 0; i < images.size(); ++i) cache[images[i]] = std::move(out[i]);
  return cache;
}

double model_accuracy(const SiameseModel& model, std::span<const PairSample> pairs,
                      std::size_t workers) {
  if (pairs.empty()) throw EmptySet("cannot evaluate an empty pair set");
  const EmbeddingCache cache = embed_all(model, pairs, workers);
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const double s = head_score(model, cache.at(p.left.image.get()), cache.at(p.right.image.get()));
    if ((s >= kDecisionThreshold) == p.same) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// Gradient buffers for one chunk of a mini-batch.
struct GradientBuffer {
  nn::ModelParams twin;
  std::vector<double> head_w;
  double head_b = 0.0;
  double loss = 0.0;
  std::size_t correct = 0;

  void reset(const SiameseModel& model) {
    if (twin.layers.empty()) {
      twin = nn::zeros_like(model.twin);
    } else {
      for (auto& layer : twin.layers) {
        std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
      }
    }
    head_w.assign(model.head_weights.size(), 0.0);
    head_b = 0.0;
    loss = 0.0;
    correct = 0;
  }
};

void accumulate_pair(const SiameseModel& model, const PairSample& sample, std::uint64_t dropout_seed,
                     GradientBuffer& buf) {
  const SubwordImage& li = image_of(sample.left);
  const SubwordImage& ri = image_of(sample.right);
  check_geometry(model, li);
  check_geometry(model, ri);
  // Both towers share one dropout mask per pair.
  const auto left = nn::forward(model.twin, model.specs, li, true, dropout_seed);
  const auto right = nn::forward(model.twin, model.specs, ri, true, dropout_seed);
  const std::size_t n = model.head_weights.size();
  double z = model.head_bias;
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = left.embedding[i] - right.embedding[i];
    z += model.head_weights[i] * std::abs(diff[i]);
  }
  const double p = sigmoid(z);
  const int y = sample.same ? 1 : 0;
  buf.loss += nn::bce_loss(p, y);
  if ((p >= kDecisionThreshold) == sample.same) ++buf.correct;

  const double dz = p - static_cast<double>(y);
  std::vector<double> up_left(n);
  std::vector<double> up_right(n);
  for (std::size_t i = 0; i < n; ++i) {
    buf.head_w[i] += dz * std::abs(diff[i]);
    const double sign = diff[i] > 0.0 ? 1.0 : (diff[i] < 0.0 ? -1.0 : 0.0);
    up_left[i] = dz * model.head_weights[i] * sign;
    up_right[i] = -up_left[i];
  }
  buf.head_b += dz;
  nn::backward(model.twin, model.specs, left.tape, up_left, buf.twin);
  nn::backward(model.twin, model.specs, right.tape, up_right, buf.twin);
}

}  // namespace

SiameseModel make_siamese(const CanvasSpec& canvas, double multiplier, const nn::TrainConfig& config) {
  return make_siamese(nn::default_architecture(multiplier), canvas, multiplier, config.init_stddev,
                      config.seed, config.init_scheme);
}

SiameseModel make_siamese(std::vector<nn::LayerSpec> specs, const CanvasSpec& canvas,
                          double multiplier, double stddev, std::uint64_t seed,
                          nn::InitScheme scheme) {
  SiameseModel model;
  model.specs = std::move(specs);
  model.canvas = canvas;
  model.multiplier = multiplier;
  model.twin = nn::init_params(model.specs, canvas, stddev, seed, scheme);
  const auto shapes = nn::infer_shapes(model.specs, canvas);
  const std::size_t n = shapes.back().size();
  model.head_weights.resize(n);
  double sigma = stddev;
  if (scheme == nn::InitScheme::FanInScaled) sigma *= std::sqrt(2.0 / static_cast<double>(n));
  if (sigma == 0.0) {
    std::fill(model.head_weights.begin(), model.head_weights.end(), 0.0);
  } else {
    Rng rng(derive_seed(seed, "head"));
    std::normal_distribution<double> normal(0.0, sigma);
    for (double& w : model.head_weights) w = normal(rng);
  }
  model.head_bias = 0.0;
  return model;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double head_score(const SiameseModel& model, std::span<const double> left,
                  std::span<const double> right) {
  const std::size_t n = model.head_weights.size();
  if (left.size() != n || right.size() != n) {
    throw IncompatibleGeometry("embedding size does not match the head");
  }
  double z = model.head_bias;
  for (std::size_t i = 0; i < n; ++i) z += model.head_weights[i] * std::abs(left[i] - right[i]);
  return sigmoid(z);
}

double siamese_score(const SiameseModel& model, const SubwordImage& left, const SubwordImage& right) {
  check_geometry(model, left);
  check_geometry(model, right);
  return head_score(model, nn::embed(model.twin, model.specs, left),
                    nn::embed(model.twin, model.specs, right));
}

SiameseScorer::SiameseScorer(std::shared_ptr<const SiameseModel> model, std::string source)
    : model_(std::move(model)), source_(std::move(source)) {
  if (!model_) throw InternalError("SiameseScorer needs a model");
}

const std::vector<double>& SiameseScorer::embedding(const SubwordAnnotation& token) const {
  const SubwordImage& img = image_of(token);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(&img); it != cache_.end()) return it->second;
  }
  check_geometry(*model_, img);
  auto e = nn::embed(model_->twin, model_->specs, img);
  std::lock_guard lock(mutex_);
  return cache_.emplace(&img, std::move(e)).first->second;
}

double SiameseScorer::score(const SubwordAnnotation& left, const SubwordAnnotation& right) const {
  return head_score(*model_, embedding(left), embedding(right));
}

std::string SiameseScorer::describe() const { return "siamese:" + source_; }

double oracle_score(const SubwordAnnotation& left, const SubwordAnnotation& right,
                    double flip_probability, std::uint64_t seed) {
  const double base = left.form_id == right.form_id ? 1.0 : 0.0;
  if (flip_probability <= 0.0) return base;
  const std::uint64_t a = occurrence_key(left);
  const std::uint64_t b = occurrence_key(right);
  const std::uint64_t key = derive_seed(derive_seed(seed, std::min(a, b)), std::max(a, b));
  const bool flip = unit_interval(mix64(key)) < flip_probability;
  return flip ? 1.0 - base : base;
}

OracleScorer::OracleScorer(double flip_probability, std::uint64_t seed)
    : flip_probability_(flip_probability), seed_(seed) {
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw ConfigError("oracle flip probability must lie in [0,1]");
  }
}

double OracleScorer::score(const SubwordAnnotation& left, const SubwordAnnotation& right) const {
  return oracle_score(left, right, flip_probability_, seed_);
}

std::string OracleScorer::describe() const {
  return "oracle:" + std::to_string(flip_probability_);
}

std::unique_ptr<SimilarityScorer> make_scorer(std::string_view spec, std::uint64_t seed) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("scorer must be siamese:<checkpoint> or oracle:<flip_probability>, got '" +
                      std::string(spec) + "'");
  }
  const std::string_view kind = spec.substr(0, colon);
  const std::string arg(spec.substr(colon + 1));
  if (kind == "siamese") {
    if (arg.empty()) throw ConfigError("siamese scorer needs a checkpoint path");
    auto model = std::make_shared<const SiameseModel>(load_checkpoint(arg));
    return std::make_unique<SiameseScorer>(std::move(model), arg);
  }
  if (kind == "oracle") {
    double p = 0.0;
    const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), p);
    if (ec != std::errc() || ptr != arg.data() + arg.size()) {
      throw ConfigError("oracle flip probability '" + arg + "' is not a number");
    }
    return std::make_unique<OracleScorer>(p, seed);
  }
  throw ConfigError("unknown scorer kind '" + std::string(kind) + "'");
}

double evaluate(const SimilarityScorer& scorer, std::span<const PairSample> pairs, double threshold) {
  if (pairs.empty()) throw EmptySet("cannot evaluate an empty pair set");
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    if ((scorer.score(p.left, p.right) >= threshold) == p.same) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

TrainResult train(SiameseModel model, const DatasetBundle& bundle, const nn::TrainConfig& config,
                  const EpochCallback& on_epoch) {
  nn::validate(config);
  if (bundle.train.empty()) throw EmptyTrainingSet("training set is empty");
  if (bundle.validation.empty()) throw EmptySet("validation set is empty");

  nn::ModelParams velocity = nn::zeros_like(model.twin);
  nn::ModelParams head = {{{model.head_weights, {model.head_bias}}}};
  nn::ModelParams head_velocity = nn::zeros_like(head);

  std::vector<std::size_t> order(bundle.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(config.seed, "epoch-order"));

  const std::size_t workers = std::max<std::size_t>(1, config.workers);
  std::vector<GradientBuffer> buffers(std::min(workers, config.batch_size));

  TrainResult result{model, {}};
  double best = -1.0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      const std::size_t chunks = std::min(buffers.size(), len);
      parallel_chunks(len, chunks, [&](std::size_t begin, std::size_t end, std::size_t w) {
        GradientBuffer& buf = buffers[w];
        buf.reset(model);
        for (std::size_t i = begin; i < end; ++i) {
          const std::size_t idx = order[start + i];
          const std::uint64_t dropout_seed =
              derive_seed(derive_seed(config.seed, epoch), idx);
          accumulate_pair(model, bundle.train[idx], dropout_seed, buf);
        }
      });
      GradientBuffer& total = buffers[0];
      for (std::size_t w = 1; w < chunks; ++w) {
        nn::add_into(total.twin, buffers[w].twin);
        for (std::size_t i = 0; i < total.head_w.size(); ++i) total.head_w[i] += buffers[w].head_w[i];
        total.head_b += buffers[w].head_b;
        total.loss += buffers[w].loss;
      }
      if (!std::isfinite(total.loss)) {
        throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch));
      }
      epoch_loss += total.loss;

      const double inv = 1.0 / static_cast<double>(len);
      nn::scale(total.twin, inv);
      nn::ModelParams head_grad = {{{total.head_w, {total.head_b}}}};
      nn::scale(head_grad, inv);
      try {
        nn::sgd_step(model.twin, total.twin, velocity, config);
        nn::sgd_step(head, head_grad, head_velocity, config);
      } catch (const DivergenceError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      model.head_weights = head.layers[0].weights;
      model.head_bias = head.layers[0].bias[0];
    }

    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(order.size());
    stats.train_accuracy = model_accuracy(model, bundle.train, workers);
    stats.validation_accuracy = model_accuracy(model, bundle.validation, workers);
    result.report.epochs.push_back(stats);
    spdlog::info("epoch {}: loss {:.5f} train acc {:.4f} val acc {:.4f}", epoch + 1,
                 stats.train_loss, stats.train_accuracy, stats.validation_accuracy);
    if (stats.validation_accuracy > best) {
      best = stats.validation_accuracy;
      result.model = model;
      result.report.best_epoch = epoch;
      result.report.best_validation_accuracy = best;
    }
    if (on_epoch) on_epoch(epoch, stats);
  }
  return result;
}

}  // namespace scriptalign
