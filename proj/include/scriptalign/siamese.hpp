#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scriptalign/core.hpp"
#include "scriptalign/dataset.hpp"
#include "scriptalign/nn.hpp"

namespace scriptalign {

// Twin tower with tied weights and a weighted-L1 + sigmoid head. There is one
// parameter set; both inputs run through it.
struct SiameseModel {
  std::vector<nn::LayerSpec> specs;
  CanvasSpec canvas;
  double multiplier = 1.0;
  nn::ModelParams twin;
  std::vector<double> head_weights;  // one per embedding coordinate
  double head_bias = 0.0;

  std::size_t embedding_size() const { return head_weights.size(); }

  bool operator==(const SiameseModel&) const = default;
};

// Builds the full twin architecture scaled by `multiplier` and initializes
// tower and head weights from the same zero-mean normal; head bias is 0.
SiameseModel make_siamese(const CanvasSpec& canvas, double multiplier, const nn::TrainConfig& config);

// Same, for an arbitrary layer chain.
SiameseModel make_siamese(std::vector<nn::LayerSpec> specs, const CanvasSpec& canvas,
                          double multiplier, double stddev, std::uint64_t seed,
                          nn::InitScheme scheme = nn::InitScheme::Fixed);

double sigmoid(double z);

// sigmoid(head_bias + sum_i w_i * |a_i - b_i|).
double head_score(const SiameseModel& model, std::span<const double> left,
                  std::span<const double> right);

// Eval-mode embeddings of both images through the shared tower, then the head.
double siamese_score(const SiameseModel& model, const SubwordImage& left, const SubwordImage& right);

// Scores a token pair in [0,1]; 1 means "same text".
class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  virtual double score(const SubwordAnnotation& left, const SubwordAnnotation& right) const = 0;
  virtual std::string describe() const = 0;
};

// Trained model behind the scorer interface. Embeddings are cached per image
// object, so repeated scoring inside alignment windows runs each image once.
class SiameseScorer final : public SimilarityScorer {
 public:
  explicit SiameseScorer(std::shared_ptr<const SiameseModel> model, std::string source = {});

  double score(const SubwordAnnotation& left, const SubwordAnnotation& right) const override;
  std::string describe() const override;

  const SiameseModel& model() const { return *model_; }

 private:
  const std::vector<double>& embedding(const SubwordAnnotation& token) const;

  std::shared_ptr<const SiameseModel> model_;
  std::string source_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<const SubwordImage*, std::vector<double>> cache_;
};

// 1 if the forms match, else 0, inverted with `flip_probability` using a
// stream keyed on the unordered pair of occurrences (so it is symmetric).
double oracle_score(const SubwordAnnotation& left, const SubwordAnnotation& right,
                    double flip_probability, std::uint64_t seed);

class OracleScorer final : public SimilarityScorer {
 public:
  explicit OracleScorer(double flip_probability = 0.0, std::uint64_t seed = 0);

  double score(const SubwordAnnotation& left, const SubwordAnnotation& right) const override;
  std::string describe() const override;

 private:
  double flip_probability_;
  std::uint64_t seed_;
};

// Parses `siamese:<checkpoint path>` or `oracle:<flip probability>`.
std::unique_ptr<SimilarityScorer> make_scorer(std::string_view spec, std::uint64_t seed = 0);

inline constexpr double kDecisionThreshold = 0.5;

// Fraction of pairs where (score >= threshold) equals the label.
double evaluate(const SimilarityScorer& scorer, std::span<const PairSample> pairs,
                double threshold = kDecisionThreshold);

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 0-based
  double best_validation_accuracy = 0.0;
};

struct TrainResult {
  SiameseModel model;
  TrainReport report;
};

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

// Mini-batch SGD with momentum on binary cross-entropy. After each epoch the
// model is scored on the validation set; the parameters of the first epoch
// with the highest validation accuracy are returned. Train accuracy is
// measured in eval mode after the epoch. Both towers of a pair use the same
// dropout mask. Deterministic for a fixed seed and
// worker count.
TrainResult train(SiameseModel model, const DatasetBundle& bundle, const nn::TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Binary checkpoint: magic, canvas, multiplier, layer chain, then
// little-endian float64 parameter blocks in layer order, then the head.
void save_checkpoint(const std::filesystem::path& path, const SiameseModel& model);
SiameseModel load_checkpoint(const std::filesystem::path& path);

}  // namespace scriptalign
