#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scriptalign/core.hpp"

namespace scriptalign {

// Address of one occurrence inside a corpus.
struct TokenLoc {
  std::size_t manuscript = 0;  // index into ManuscriptCorpus::manuscripts
  std::size_t line = 0;        // index into Document::lines
  std::size_t position = 0;

  auto operator<=>(const TokenLoc&) const = default;
};

struct ManuscriptCorpus {
  std::vector<Document> manuscripts;  // sorted by manuscript_id
  // form_id -> per-manuscript occurrence lists (outer index = manuscript index)
  std::map<std::string, std::vector<std::vector<TokenLoc>>> form_index;

  const SubwordAnnotation& token(const TokenLoc& loc) const {
    return manuscripts[loc.manuscript].lines[loc.line].tokens[loc.position];
  }
  std::size_t annotation_count() const;
  std::vector<std::string> manuscript_ids() const;
  // Throws ManifestError if the id is unknown.
  std::size_t manuscript_index(const std::string& id) const;
};

// Sorts manuscripts by id, lines by (page, line), and rebuilds form_index.
// Throws ManifestError for duplicate ids, duplicate or non-contiguous positions.
ManuscriptCorpus make_corpus(std::vector<Document> documents);

inline constexpr const char* kManifestHeader = "manuscript_id,page,line,position,form_id,image_path";

// Reads the manifest CSV (header required). Image paths are resolved relative
// to the manifest's directory and rescaled to `canvas`; an empty image_path
// yields a token without an image.
ManuscriptCorpus load_corpus(const std::filesystem::path& manifest_path, const CanvasSpec& canvas);

// Writes a manifest for the corpus; image paths are written as stored.
void write_manifest(const std::filesystem::path& manifest_path, const ManuscriptCorpus& corpus);

struct PairSample {
  SubwordAnnotation left;
  SubwordAnnotation right;
  bool same = false;  // true-pair

  const std::string& left_form() const { return left.form_id; }
  const std::string& right_form() const { return right.form_id; }
};

struct SplitPlan {
  std::pair<std::string, std::string> heldout;
  std::vector<std::string> training;
  std::uint64_t seed = 0;

  std::string label() const { return heldout.first + "," + heldout.second; }
};

// One plan per unordered held-out pair, ordered by manuscript index pairs.
std::vector<SplitPlan> enumerate_split_plans(const ManuscriptCorpus& corpus, std::uint64_t seed);

struct PairOptions {
  std::size_t cap_per_form = 400;
  double min_share = 0.20;
  std::size_t share_retries = 8;
};

struct TrainingPairStats {
  std::size_t forms_used = 0;
  std::size_t forms_skipped = 0;       // present in fewer than two training manuscripts
  std::size_t forms_capped = 0;
  std::size_t forms_share_unmet = 0;   // capped forms whose best draw missed min_share
  std::size_t true_pairs = 0;
  std::size_t false_pairs = 0;
  // Share of true-pair image slots contributed by each training manuscript.
  std::map<std::string, double> manuscript_share;
};

std::vector<PairSample> build_training_pairs(const ManuscriptCorpus& corpus, const SplitPlan& plan,
                                             const PairOptions& options = {},
                                             TrainingPairStats* stats = nullptr);

struct HeldoutSets {
  std::vector<PairSample> validation;
  std::vector<PairSample> test;
};

HeldoutSets build_heldout_sets(const ManuscriptCorpus& corpus, const SplitPlan& plan);

struct DatasetBundle {
  std::vector<PairSample> train;
  std::vector<PairSample> validation;
  std::vector<PairSample> test;
  SplitPlan plan;
};

DatasetBundle build_bundle(const ManuscriptCorpus& corpus, const SplitPlan& plan,
                           const PairOptions& options = {}, TrainingPairStats* stats = nullptr);

// Directory layout: metadata.json plus {train,validation,test}/pairs.csv with
// columns left_path,right_path,label,left_form,right_form.
void write_bundle(const std::filesystem::path& dir, const DatasetBundle& bundle,
                  const PairOptions& options, const TrainingPairStats& stats);

// Reads a bundle written by write_bundle; images are loaded and rescaled.
DatasetBundle load_bundle(const std::filesystem::path& dir, const CanvasSpec& canvas);

}  // namespace scriptalign
