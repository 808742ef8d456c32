#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scriptalign/assignment.hpp"
#include "scriptalign/core.hpp"
#include "scriptalign/siamese.hpp"

namespace scriptalign {

enum class OpKind { Match, Swap, InsertLeft, InsertRight };

std::string to_string(OpKind kind);
OpKind op_kind_from_string(const std::string& text);

// InsertLeft: a left token with no counterpart (equivalently, omitted on the
// right). InsertRight is the mirror case.
struct AlignmentOp {
  OpKind kind = OpKind::Match;
  std::optional<std::size_t> left_pos;
  std::optional<std::size_t> right_pos;
  double confidence = 1.0;
  bool low_confidence = false;

  static AlignmentOp match(std::size_t l, std::size_t r, double confidence = 1.0);
  static AlignmentOp swap(std::size_t l, std::size_t r, double confidence = 1.0);
  static AlignmentOp insert_left(std::size_t l, double confidence = 1.0);
  static AlignmentOp insert_right(std::size_t r, double confidence = 1.0);

  // Same kind and positions; confidence is ignored.
  bool same_edit(const AlignmentOp& other) const {
    return kind == other.kind && left_pos == other.left_pos && right_pos == other.right_pos;
  }
};

struct AlignmentResult {
  std::vector<AlignmentOp> ops;  // ordered by min(left_pos, right_pos)
  double left_coverage = 0.0;
  double right_coverage = 0.0;
};

struct AlignConfig {
  std::size_t min_window = 5;
  double threshold = 0.5;
  std::size_t max_growth = 8;
  const SimilarityScorer* scorer = nullptr;
};

// Throws ConfigError for min_window < 2, threshold outside (0,1), no scorer.
void validate(const AlignConfig& config);

struct WindowState {
  std::size_t left_start = 0;
  std::size_t right_start = 0;
  std::size_t left_len = 0;
  std::size_t right_len = 0;
};

enum class WindowClass { Identical, Swapped, NeedsGrowth, Mixed };

std::string to_string(WindowClass cls);

// Identical / Swapped when every matched score clears tau (with zero / some
// crossings); NeedsGrowth / Mixed when some matched score is below tau (with
// zero / some crossings among the above-tau matches).
WindowClass classify_window(const SimilarityMatrix& matrix, const Assignment& assignment, double tau);

// Exhausted means neither window can grow any further.
enum class GrowthSide { Left, Right, Both, Exhausted };

std::string to_string(GrowthSide side);

// Each token without an above-tau partner in the window is probed against
// the next max_growth tokens past the opposite window. A right token that
// finds an above-tau partner further along the left line means the left
// window holds the extra text, and vice versa; the side with the nearest hit
// grows. Equal-distance hits on both
// sides indicate a pair straddling the window edge, so both grow. Without
// hits the side with more unconsumed tokens grows, ties going Left. Sides at
// their growth cap or line end are never chosen.
GrowthSide choose_growth_side(const TextLine& left, const TextLine& right, const WindowState& state,
                              const SimilarityMatrix& matrix, const Assignment& assignment,
                              const AlignConfig& config);

// Slides a window pair along both lines. Each window is scored, assigned and
// classified; windows with weak tokens grow toward the nearest reachable
// partner until they settle. A settled window emits Match/Swap for its strong
// pairs, splits weak pairs into low-confidence inserts, and advances past
// itself. Throws EmptyLine for an empty line.
AlignmentResult align_lines(const TextLine& left, const TextLine& right, const AlignConfig& config);

// Lines are paired by index. Throws LinePairingError when counts differ or
// there are no lines.
std::vector<AlignmentResult> align_documents(const Document& left, const Document& right,
                                             const AlignConfig& config);

// |truth ops reproduced by the result (kind and positions)| / |truth|.
double alignment_accuracy(const AlignmentResult& result, std::span<const AlignmentOp> truth);

// Pooled over lines: total reproduced ops / total truth ops.
double alignment_accuracy(std::span<const AlignmentResult> results,
                          std::span<const std::vector<AlignmentOp>> truth);

// JSON array of {kind, left:{page,line,position}|null, right:..., confidence,
// low_confidence}, ops of all lines concatenated in line order.
std::string alignment_to_json(const Document& left, const Document& right,
                              std::span<const AlignmentResult> results);

std::string alignment_to_tsv(const Document& left, const Document& right,
                             std::span<const AlignmentResult> results);

// Self-contained page with one row per op and the subword images inlined.
std::string alignment_to_html(const Document& left, const Document& right,
                              std::span<const AlignmentResult> results);

}  // namespace scriptalign
