#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "scriptalign/dataset.hpp"
#include "scriptalign/nn.hpp"
#include "scriptalign/siamese.hpp"

namespace scriptalign {

struct CrossValConfig {
  nn::TrainConfig train;
  double multiplier = 1.0;
  CanvasSpec canvas;
  PairOptions pairs;
  // Splits evaluated concurrently; each training run uses train.workers.
  std::size_t workers = 1;
  // When set (e.g. "oracle:0"), this scorer replaces training on every split.
  std::string scorer_override;
};

struct CrossValRow {
  std::string heldout_a;
  std::string heldout_b;
  double test_accuracy = 0.0;
  double validation_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  std::size_t best_epoch = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

struct CrossValReport {
  std::vector<CrossValRow> rows;  // in split-plan order

  double mean_test_accuracy() const;
  double mean_validation_accuracy() const;
};

using SplitCallback = std::function<void(std::size_t index, const CrossValRow& row)>;

// One row per leave-two-out split: build the bundle, train (or substitute the
// override scorer), then score validation and test halves.
CrossValReport run_cross_validation(const ManuscriptCorpus& corpus, const CrossValConfig& config,
                                    std::uint64_t seed, const SplitCallback& on_split = {});

struct BundleScores {
  double validation_accuracy = 0.0;
  double test_accuracy = 0.0;
};

BundleScores evaluate_bundle(const SimilarityScorer& scorer, const DatasetBundle& bundle);

// Columns: heldout,test_accuracy,validation_accuracy,train_size,
// validation_size,test_size,best_epoch,seed,seconds.
std::string report_to_csv(const CrossValReport& report, bool with_timing = true);

// Stable hex digest of the configuration, used to tie reports to settings.
std::string config_fingerprint(const CrossValConfig& config, std::uint64_t seed);

// Means, row count, config and its fingerprint as pretty-printed JSON.
std::string report_summary_json(const CrossValReport& report, const CrossValConfig& config,
                                std::uint64_t seed);

}  // namespace scriptalign
