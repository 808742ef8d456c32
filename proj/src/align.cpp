#include "scriptalign/align.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <tuple>

#include <spdlog/spdlog.h>

#include "scriptalign/error.hpp"

namespace scriptalign {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kMaxSwapCrossings = 3;

SimilarityMatrix window_matrix(const TextLine& left, const TextLine& right, const WindowState& st,
                               const SimilarityScorer& scorer) {
  SimilarityMatrix m(st.left_len, st.right_len);
  for (std::size_t i = 0; i < st.left_len; ++i) {
    for (std::size_t j = 0; j < st.right_len; ++j) {
      const double s = scorer.score(left.tokens[st.left_start + i], right.tokens[st.right_start + j]);
      m.set(i, j, std::clamp(s, 0.0, 1.0));
    }
  }
  return m;
}

// Among equal-score optima, prefers pairs close to the window diagonal. The
// perturbation is far below any score difference a scorer produces.
Assignment solve_near_diagonal(const SimilarityMatrix& m) {
  constexpr double kDiagonalPrior = 1e-6;
  SimilarityMatrix biased(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double gap = static_cast<double>(i > j ? i - j : j - i);
      biased.set(i, j, std::max(0.0, m.at(i, j) - kDiagonalPrior * gap));
    }
  }
  Assignment a = solve_assignment(biased);
  a.total_score = 0.0;
  for (const auto& match : a.matches) a.total_score += m.at(match.left, match.right);
  return a;
}

// Inversions among the matches accepted by `keep`.
template <typename Keep>
std::size_t inversions_where(const Assignment& a, Keep keep) {
  std::vector<Match> kept;
  for (const auto& m : a.matches) {
    if (keep(m)) kept.push_back(m);
  }
  return count_inversions(kept);
}

bool crosses_any(const Match& m, std::span<const Match> others) {
  for (const auto& o : others) {
    if ((m.left < o.left && m.right > o.right) || (m.left > o.left && m.right < o.right)) return true;
  }
  return false;
}

// Repeatedly removes the pair crossing the most others while that count
// reaches kMaxSwapCrossings; such pairs span far more text than a local swap.
void drop_long_crossings(std::vector<Match>& matches) {
  while (true) {
    std::size_t worst = 0;
    std::size_t worst_count = 0;
    for (std::size_t a = 0; a < matches.size(); ++a) {
      std::size_t count = 0;
      for (const auto& o : matches) {
        if ((matches[a].left < o.left && matches[a].right > o.right) ||
            (matches[a].left > o.left && matches[a].right < o.right)) {
          ++count;
        }
      }
      if (count > worst_count) {
        worst = a;
        worst_count = count;
      }
    }
    if (worst_count < kMaxSwapCrossings) return;
    matches.erase(matches.begin() + static_cast<std::ptrdiff_t>(worst));
  }
}

// An above-tau pair (l, r) with a neighbouring pair (diagonal or swapped)
// that also clears tau, or which sits at a line end. A lone hit is more likely noise.
bool confirmed_pair(const TextLine& left, const TextLine& right, std::size_t l, std::size_t r,
                    const AlignConfig& config) {
  const auto strong = [&](std::size_t a, std::size_t b) {
    return config.scorer->score(left.tokens[a], right.tokens[b]) >= config.threshold;
  };
  if (!strong(l, r)) return false;
  const bool l_next = l + 1 < left.size();
  const bool r_next = r + 1 < right.size();
  if (!l_next || !r_next || strong(l + 1, r + 1)) return true;
  if (l > 0 && r > 0 && strong(l - 1, r - 1)) return true;
  // Swapped neighbours.
  return (r > 0 && strong(l + 1, r - 1)) || (l > 0 && strong(l - 1, r + 1));
}

struct ProbeHits {
  std::size_t left = kNone;   // a weak right token re-appears further along the left line
  std::size_t right = kNone;  // a weak left token re-appears further along the right line
};

// Lookahead distance of the nearest above-tau partner for the window's weak
// tokens, per side.
ProbeHits probe_hits(const TextLine& left, const TextLine& right, const WindowState& st,
                     const SimilarityMatrix& matrix, const Assignment& assignment,
                     const AlignConfig& config) {
  const std::size_t left_end = st.left_start + st.left_len;
  const std::size_t right_end = st.right_start + st.right_len;
  // Only partners that growth can still reach count.
  const std::size_t cap = config.min_window + config.max_growth;
  const std::size_t reach_left = cap > st.left_len ? cap - st.left_len : 0;
  const std::size_t reach_right = cap > st.right_len ? cap - st.right_len : 0;
  // Weak tokens: matched below tau, or left unmatched by a rectangular window.
  std::vector<char> strong_row(st.left_len, 0);
  std::vector<char> strong_col(st.right_len, 0);
  for (const auto& m : assignment.matches) {
    if (matrix.at(m.left, m.right) >= config.threshold) strong_row[m.left] = strong_col[m.right] = 1;
  }

  const auto probe = [&](bool confirmed) {
    const auto hit = [&](std::size_t l, std::size_t r) {
      return confirmed ? confirmed_pair(left, right, l, r, config)
                       : config.scorer->score(left.tokens[l], right.tokens[r]) >= config.threshold;
    };
    ProbeHits hits;
    for (std::size_t j = 0; j < st.right_len; ++j) {
      if (strong_col[j]) continue;
      for (std::size_t d = 1; d <= reach_left && left_end + d - 1 < left.size() && d < hits.left; ++d) {
        if (hit(left_end + d - 1, st.right_start + j)) {
          hits.left = d;
          break;
        }
      }
    }
    for (std::size_t i = 0; i < st.left_len; ++i) {
      if (strong_row[i]) continue;
      for (std::size_t d = 1; d <= reach_right && right_end + d - 1 < right.size() && d < hits.right; ++d) {
        if (hit(st.left_start + i, right_end + d - 1)) {
          hits.right = d;
          break;
        }
      }
    }
    return hits;
  };
  // Confirmed hits win; lone hits are used only when nothing is confirmed.
  const ProbeHits hits = probe(true);
  if (hits.left != kNone || hits.right != kNone) return hits;
  return probe(false);
}

class LineAligner {
 public:
  LineAligner(const TextLine& left, const TextLine& right, const AlignConfig& config)
      : left_(left), right_(right), config_(config) {}

  AlignmentResult run() {
    const std::size_t nl = left_.size();
    const std::size_t nr = right_.size();
    std::size_t ls = 0;
    std::size_t rs = 0;
    while (ls < nl && rs < nr) {
      WindowState st{ls, rs, std::min(config_.min_window, nl - ls),
                     std::min(config_.min_window, nr - rs)};
      while (true) {
        SimilarityMatrix matrix = window_matrix(left_, right_, st, *config_.scorer);
        const Assignment assignment = solve_near_diagonal(matrix);
        const WindowClass cls = classify_window(matrix, assignment, config_.threshold);
        spdlog::debug("window L[{},{}) R[{},{}) {}", st.left_start, st.left_start + st.left_len,
                      st.right_start, st.right_start + st.right_len, to_string(cls));
        if (cls == WindowClass::Identical || cls == WindowClass::Swapped) {
          emit_window(st, matrix, assignment);
          ls += st.left_len;
          rs += st.right_len;
          break;
        }
        const ProbeHits hits = probe_hits(left_, right_, st, matrix, assignment, config_);
        if (hits.left == kNone && hits.right == kNone) {
          // No weak token has a partner within reach; growing cannot help.
          emit_window(st, matrix, assignment);
          ls += st.left_len;
          rs += st.right_len;
          break;
        }
        const GrowthSide side =
            choose_growth_side(left_, right_, st, matrix, assignment, config_);
        spdlog::debug("grow {}", to_string(side));
        if (side == GrowthSide::Exhausted) {
          emit_window(st, matrix, assignment);
          ls += st.left_len;
          rs += st.right_len;
          break;
        }
        if (side == GrowthSide::Left || side == GrowthSide::Both) ++st.left_len;
        if (side == GrowthSide::Right || side == GrowthSide::Both) ++st.right_len;
      }
    }
    for (; ls < nl; ++ls) ops_.push_back(AlignmentOp::insert_left(ls));
    for (; rs < nr; ++rs) ops_.push_back(AlignmentOp::insert_right(rs));

    std::stable_sort(ops_.begin(), ops_.end(), [](const AlignmentOp& a, const AlignmentOp& b) {
      return order_key(a) < order_key(b);
    });
    AlignmentResult result;
    result.ops = std::move(ops_);
    std::vector<char> seen_l(nl);
    std::vector<char> seen_r(nr);
    for (const auto& op : result.ops) {
      if (op.left_pos) seen_l[*op.left_pos] = 1;
      if (op.right_pos) seen_r[*op.right_pos] = 1;
    }
    result.left_coverage =
        static_cast<double>(std::count(seen_l.begin(), seen_l.end(), 1)) / static_cast<double>(nl);
    result.right_coverage =
        static_cast<double>(std::count(seen_r.begin(), seen_r.end(), 1)) / static_cast<double>(nr);
    return result;
  }

 private:
  static std::size_t order_key(const AlignmentOp& op) {
    return std::min(op.left_pos.value_or(kNone), op.right_pos.value_or(kNone));
  }

  // Certainty that a token has no counterpart in the opposite window.
  static double unmatched_confidence(const SimilarityMatrix& m, std::size_t index, bool is_row) {
    double best = 0.0;
    const std::size_t n = is_row ? m.cols() : m.rows();
    for (std::size_t k = 0; k < n; ++k) best = std::max(best, is_row ? m.at(index, k) : m.at(k, index));
    return 1.0 - best;
  }

  // Above-tau pairs become Match/Swap (crossings counted among them only).
  // Below-tau pairs are split into two inserts flagged low-confidence; other
  // leftover tokens become plain inserts.
  void emit_window(const WindowState& st, const SimilarityMatrix& m, const Assignment& a) {
    std::vector<char> row_used(st.left_len);
    std::vector<char> col_used(st.right_len);
    std::vector<Match> strong;
    for (const auto& match : a.matches) {
      const double score = m.at(match.left, match.right);
      if (score >= config_.threshold) {
        strong.push_back(match);
        continue;
      }
      AlignmentOp il = AlignmentOp::insert_left(st.left_start + match.left, 1.0 - score);
      AlignmentOp ir = AlignmentOp::insert_right(st.right_start + match.right, 1.0 - score);
      il.low_confidence = ir.low_confidence = true;
      ops_.push_back(il);
      ops_.push_back(ir);
      row_used[match.left] = col_used[match.right] = 1;
    }
    drop_long_crossings(strong);
    for (const auto& match : strong) {
      row_used[match.left] = col_used[match.right] = 1;
      const double conf = m.at(match.left, match.right);
      const std::size_t l = st.left_start + match.left;
      const std::size_t r = st.right_start + match.right;
      ops_.push_back(crosses_any(match, strong) ? AlignmentOp::swap(l, r, conf)
                                                : AlignmentOp::match(l, r, conf));
    }
    for (std::size_t i = 0; i < st.left_len; ++i) {
      if (!row_used[i]) {
        ops_.push_back(AlignmentOp::insert_left(st.left_start + i, unmatched_confidence(m, i, true)));
      }
    }
    for (std::size_t j = 0; j < st.right_len; ++j) {
      if (!col_used[j]) {
        ops_.push_back(AlignmentOp::insert_right(st.right_start + j, unmatched_confidence(m, j, false)));
      }
    }
  }

  const TextLine& left_;
  const TextLine& right_;
  const AlignConfig& config_;
  std::vector<AlignmentOp> ops_;
};

}  // namespace

std::string to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Match: return "match";
    case OpKind::Swap: return "swap";
    case OpKind::InsertLeft: return "insert_left";
    case OpKind::InsertRight: return "insert_right";
  }
  return "unknown";
}

OpKind op_kind_from_string(const std::string& text) {
  for (OpKind k : {OpKind::Match, OpKind::Swap, OpKind::InsertLeft, OpKind::InsertRight}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown op kind '" + text + "'");
}

std::string to_string(WindowClass cls) {
  switch (cls) {
    case WindowClass::Identical: return "identical";
    case WindowClass::Swapped: return "swapped";
    case WindowClass::NeedsGrowth: return "needs_growth";
    case WindowClass::Mixed: return "mixed";
  }
  return "unknown";
}

std::string to_string(GrowthSide side) {
  switch (side) {
    case GrowthSide::Left: return "left";
    case GrowthSide::Right: return "right";
    case GrowthSide::Both: return "both";
    case GrowthSide::Exhausted: return "exhausted";
  }
  return "unknown";
}

AlignmentOp AlignmentOp::match(std::size_t l, std::size_t r, double confidence) {
  return {OpKind::Match, l, r, confidence, false};
}
AlignmentOp AlignmentOp::swap(std::size_t l, std::size_t r, double confidence) {
  return {OpKind::Swap, l, r, confidence, false};
}
AlignmentOp AlignmentOp::insert_left(std::size_t l, double confidence) {
  return {OpKind::InsertLeft, l, std::nullopt, confidence, false};
}
AlignmentOp AlignmentOp::insert_right(std::size_t r, double confidence) {
  return {OpKind::InsertRight, std::nullopt, r, confidence, false};
}

void validate(const AlignConfig& config) {
  if (config.min_window < 2) throw ConfigError("min_window must be >= 2");
  if (!(config.threshold > 0.0 && config.threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0,1)");
  }
  if (!config.scorer) throw ConfigError("alignment needs a scorer");
}

WindowClass classify_window(const SimilarityMatrix& matrix, const Assignment& assignment, double tau) {
  auto strong = [&](const Match& m) { return matrix.at(m.left, m.right) >= tau; };
  const bool all_strong = std::all_of(assignment.matches.begin(), assignment.matches.end(), strong);
  if (all_strong) {
    return assignment.inversions == 0 ? WindowClass::Identical : WindowClass::Swapped;
  }
  return inversions_where(assignment, strong) == 0 ? WindowClass::NeedsGrowth : WindowClass::Mixed;
}

GrowthSide choose_growth_side(const TextLine& left, const TextLine& right, const WindowState& st,
                              const SimilarityMatrix& matrix, const Assignment& assignment,
                              const AlignConfig& config) {
  const std::size_t cap = config.min_window + config.max_growth;
  const std::size_t left_end = st.left_start + st.left_len;
  const std::size_t right_end = st.right_start + st.right_len;
  const bool can_left = st.left_len < cap && left_end < left.size();
  const bool can_right = st.right_len < cap && right_end < right.size();
  if (!can_left && !can_right) return GrowthSide::Exhausted;

  const auto [hit_left, hit_right] = probe_hits(left, right, st, matrix, assignment, config);

  auto pick = [&](GrowthSide preferred) {
    if (preferred == GrowthSide::Left) return can_left ? GrowthSide::Left : GrowthSide::Right;
    return can_right ? GrowthSide::Right : GrowthSide::Left;
  };
  if (hit_left == kNone && hit_right == kNone) {
    const std::size_t rem_left = left.size() - left_end;
    const std::size_t rem_right = right.size() - right_end;
    return pick(rem_right > rem_left ? GrowthSide::Right : GrowthSide::Left);
  }
  if (hit_left == hit_right) {
    if (can_left && can_right) return GrowthSide::Both;
    return can_left ? GrowthSide::Left : GrowthSide::Right;
  }
  return pick(hit_left < hit_right ? GrowthSide::Left : GrowthSide::Right);
}

AlignmentResult align_lines(const TextLine& left, const TextLine& right, const AlignConfig& config) {
  validate(config);
  if (left.empty() || right.empty()) throw EmptyLine("cannot align an empty line");
  return LineAligner(left, right, config).run();
}

std::vector<AlignmentResult> align_documents(const Document& left, const Document& right,
                                             const AlignConfig& config) {
  if (left.lines.size() != right.lines.size()) {
    throw LinePairingError("line counts differ: left has " + std::to_string(left.lines.size()) +
                           ", right has " + std::to_string(right.lines.size()));
  }
  if (left.lines.empty()) throw LinePairingError("documents share no lines");
  std::vector<AlignmentResult> results;
  results.reserve(left.lines.size());
  for (std::size_t i = 0; i < left.lines.size(); ++i) {
    results.push_back(align_lines(left.lines[i], right.lines[i], config));
  }
  return results;
}

double alignment_accuracy(const AlignmentResult& result, std::span<const AlignmentOp> truth) {
  if (truth.empty()) throw EmptySet("ground truth has no ops");
  using Key = std::tuple<OpKind, std::size_t, std::size_t>;
  auto key = [](const AlignmentOp& op) {
    return Key{op.kind, op.left_pos.value_or(kNone), op.right_pos.value_or(kNone)};
  };
  std::set<Key> produced;
  for (const auto& op : result.ops) produced.insert(key(op));
  const auto hits = std::count_if(truth.begin(), truth.end(),
                                  [&](const AlignmentOp& op) { return produced.count(key(op)) > 0; });
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double alignment_accuracy(std::span<const AlignmentResult> results,
                          std::span<const std::vector<AlignmentOp>> truth) {
  if (results.size() != truth.size()) {
    throw LinePairingError("result and ground-truth line counts differ");
  }
  double hits = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (truth[i].empty()) continue;
    hits += alignment_accuracy(results[i], truth[i]) * static_cast<double>(truth[i].size());
    total += truth[i].size();
  }
  if (total == 0) throw EmptySet("ground truth has no ops");
  return hits / static_cast<double>(total);
}

}  // namespace scriptalign
