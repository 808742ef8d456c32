#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scriptalign/align.hpp"
#include "scriptalign/core.hpp"
#include "scriptalign/dataset.hpp"

namespace scriptalign {

// Per-token edit probabilities applied when deriving one text from another.
struct EditRates {
  double p_swap = 0.0;
  double p_insert = 0.0;
  double p_delete = 0.0;
  double p_replace = 0.0;
};

struct SynthConfig {
  std::size_t vocab_size = 5000;
  std::size_t lines = 1;
  std::size_t min_tokens = 30;
  std::size_t max_tokens = 60;
  EditRates rates;
  std::uint64_t seed = 0;
  // No form repeats within a left/right line pair, so a form-equality scorer
  // has exactly one correct alignment.
  bool unique_forms_per_line = false;
};

// Throws ConfigError on invalid rates, vocab_size < 2, an empty or inverted
// token range, or a vocabulary too small for unique_forms_per_line.
void validate(const SynthConfig& config);

// How often each edit was drawn. A swap drawn on a final token or on two equal
// forms cannot be applied; it is counted in `swaps` and in `skipped_swaps`.
struct EditCounts {
  std::size_t draws = 0;
  std::size_t swaps = 0;
  std::size_t skipped_swaps = 0;
  std::size_t inserts = 0;
  std::size_t deletes = 0;
  std::size_t replaces = 0;

  EditCounts& operator+=(const EditCounts& other);
};

struct SynthPair {
  Document left_doc;
  Document right_doc;
  std::vector<std::vector<AlignmentOp>> truth;  // one list per line
  EditCounts counts;
};

// Forms are named "f<index>", index in [0, vocab_size).
std::string form_name(std::size_t index);

// Token-only documents (no images) with ids "left" and "right".
SynthPair generate_pair(const SynthConfig& config);

// Rebuilds the right line's form sequence from the left line and the truth ops.
std::vector<std::string> replay_truth(const TextLine& left, const TextLine& right,
                                      const std::vector<AlignmentOp>& truth);

// Procedural pseudo-glyph, ink 1 on background 0. The form picks the stroke
// skeleton; the style sets stroke width, slant and horizontal scale.
SubwordImage render_token(const std::string& form_id, std::size_t style_id, const CanvasSpec& canvas);

struct CorpusConfig {
  std::size_t manuscripts = 7;
  std::size_t vocab_size = 60;
  std::size_t lines = 4;
  std::size_t min_tokens = 8;
  std::size_t max_tokens = 12;
  double zipf_exponent = 1.0;  // base-text form frequencies ~ 1/(rank+1)^s
  EditRates rates{0.02, 0.03, 0.03, 0.02};
  CanvasSpec canvas;
  std::uint64_t seed = 0;
};

void validate(const CorpusConfig& config);

// Manuscripts m1..mN share one base text, each with its own edits and its own
// writing style (style id = manuscript index). Images are rendered in memory
// and shared per (form, style); image_path is set to images/s<style>/<form>.png.
ManuscriptCorpus synthesize_corpus(const CorpusConfig& config);

// Writes every distinct image below `dir` and dir/manifest.csv; returns the
// manifest path.
std::filesystem::path write_corpus(const std::filesystem::path& dir, const ManuscriptCorpus& corpus);

}  // namespace scriptalign
