#include "scriptalign/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <unordered_set>

#include "scriptalign/error.hpp"
#include "scriptalign/image_io.hpp"
#include "scriptalign/rng.hpp"

namespace scriptalign {

namespace fs = std::filesystem;

namespace {

double uniform(Rng& rng) { return unit_interval(rng()); }

std::size_t below(Rng& rng, std::size_t n) { return static_cast<std::size_t>(uniform(rng) * static_cast<double>(n)); }

void check_rates(const EditRates& r) {
  for (double p : {r.p_swap, r.p_insert, r.p_delete, r.p_replace}) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("edit probabilities must lie in [0,1)");
  }
  if (!(r.p_swap + r.p_insert + r.p_delete + r.p_replace < 1.0)) {
    throw ConfigError("edit probabilities must sum to less than 1");
  }
}

struct EditedLine {
  std::vector<std::string> right;
  std::vector<AlignmentOp> truth;
  EditCounts counts;
};

// `fresh(avoid)` draws a form for an insertion or replacement; `avoid` is the
// replaced form or empty.
template <typename Fresh>
EditedLine apply_edits(const std::vector<std::string>& left, const EditRates& rates, Rng& rng, Fresh fresh) {
  EditedLine out;
  const double c_swap = rates.p_swap;
  const double c_insert = c_swap + rates.p_insert;
  const double c_delete = c_insert + rates.p_delete;
  const double c_replace = c_delete + rates.p_replace;
  for (std::size_t i = 0; i < left.size(); ++i) {
    const std::size_t k = out.right.size();
    const double u = uniform(rng);
    ++out.counts.draws;
    if (u < c_swap) {
      ++out.counts.swaps;
      if (i + 1 < left.size() && left[i] != left[i + 1]) {
        out.right.push_back(left[i + 1]);
        out.right.push_back(left[i]);
        out.truth.push_back(AlignmentOp::swap(i, k + 1));
        out.truth.push_back(AlignmentOp::swap(i + 1, k));
        ++i;
        continue;
      }
      ++out.counts.skipped_swaps;
    } else if (u < c_insert) {
      ++out.counts.inserts;
      out.right.push_back(fresh(std::string{}));
      out.truth.push_back(AlignmentOp::insert_right(k));
      out.right.push_back(left[i]);
      out.truth.push_back(AlignmentOp::match(i, k + 1));
      continue;
    } else if (u < c_delete) {
      ++out.counts.deletes;
      out.truth.push_back(AlignmentOp::insert_left(i));
      continue;
    } else if (u < c_replace) {
      ++out.counts.replaces;
      out.right.push_back(fresh(left[i]));
      out.truth.push_back(AlignmentOp::insert_left(i));
      out.truth.push_back(AlignmentOp::insert_right(k));
      continue;
    }
    out.right.push_back(left[i]);
    out.truth.push_back(AlignmentOp::match(i, k));
  }
  std::stable_sort(out.truth.begin(), out.truth.end(), [](const AlignmentOp& a, const AlignmentOp& b) {
    auto key = [](const AlignmentOp& op) {
      return std::min(op.left_pos.value_or(SIZE_MAX), op.right_pos.value_or(SIZE_MAX));
    };
    return key(a) < key(b);
  });
  return out;
}

TextLine make_line(const std::string& manuscript, std::size_t page, std::size_t line,
                   const std::vector<std::string>& forms) {
  TextLine out;
  for (std::size_t p = 0; p < forms.size(); ++p) {
    SubwordAnnotation tok;
    tok.manuscript_id = manuscript;
    tok.page = page;
    tok.line = line;
    tok.position = p;
    tok.form_id = forms[p];
    out.tokens.push_back(std::move(tok));
  }
  return out;
}

struct Point {
  double x;
  double y;
};

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

// Inverse-CDF sampler over ranks with weight 1/(rank+1)^s.
class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double s) : cdf_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) cdf_[r] = total += std::pow(static_cast<double>(r + 1), -s);
    for (double& c : cdf_) c /= total;
  }

  std::size_t operator()(Rng& rng) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), uniform(rng));
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

EditCounts& EditCounts::operator+=(const EditCounts& o) {
  draws += o.draws;
  swaps += o.swaps;
  skipped_swaps += o.skipped_swaps;
  inserts += o.inserts;
  deletes += o.deletes;
  replaces += o.replaces;
  return *this;
}

void validate(const SynthConfig& config) {
  check_rates(config.rates);
  if (config.vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (config.min_tokens < 1 || config.min_tokens > config.max_tokens) {
    throw ConfigError("token range must satisfy 1 <= min_tokens <= max_tokens");
  }
  if (config.unique_forms_per_line && config.vocab_size < 2 * config.max_tokens + 1) {
    throw ConfigError("unique_forms_per_line needs vocab_size > 2 * max_tokens");
  }
}

std::string form_name(std::size_t index) { return "f" + std::to_string(index); }

SynthPair generate_pair(const SynthConfig& config) {
  validate(config);
  SynthPair out;
  out.left_doc.manuscript_id = "left";
  out.right_doc.manuscript_id = "right";
  for (std::size_t l = 0; l < config.lines; ++l) {
    Rng rng(derive_seed(config.seed, l));
    const std::size_t n = config.min_tokens + below(rng, config.max_tokens - config.min_tokens + 1);
    std::unordered_set<std::size_t> used;
    auto draw = [&](std::size_t avoid) {
      while (true) {
        const std::size_t f = below(rng, config.vocab_size);
        if (f == avoid) continue;
        if (config.unique_forms_per_line && !used.insert(f).second) continue;
        return f;
      }
    };
    std::vector<std::string> left;
    for (std::size_t i = 0; i < n; ++i) left.push_back(form_name(draw(SIZE_MAX)));
    auto fresh = [&](const std::string& avoid) {
      const std::size_t skip = avoid.empty() ? SIZE_MAX : std::stoul(avoid.substr(1));
      return form_name(draw(skip));
    };
    EditedLine edited = apply_edits(left, config.rates, rng, fresh);
    out.left_doc.lines.push_back(make_line("left", 0, l, left));
    out.right_doc.lines.push_back(make_line("right", 0, l, edited.right));
    out.truth.push_back(std::move(edited.truth));
    out.counts += edited.counts;
  }
  return out;
}

std::vector<std::string> replay_truth(const TextLine& left, const TextLine& right,
                                      const std::vector<AlignmentOp>& truth) {
  std::vector<std::optional<std::string>> slots(right.size());
  std::vector<char> left_seen(left.size());
  for (const auto& op : truth) {
    if (op.left_pos) {
      if (*op.left_pos >= left.size() || left_seen[*op.left_pos]) {
        throw InternalError("truth op reuses or overruns a left position");
      }
      left_seen[*op.left_pos] = 1;
    }
    if (!op.right_pos) continue;
    if (*op.right_pos >= right.size() || slots[*op.right_pos]) {
      throw InternalError("truth op reuses or overruns a right position");
    }
    slots[*op.right_pos] = op.kind == OpKind::InsertRight ? right.tokens[*op.right_pos].form_id
                                                          : left.tokens[*op.left_pos].form_id;
  }
  std::vector<std::string> out;
  for (auto& s : slots) {
    if (!s) throw InternalError("truth ops leave a right position uncovered");
    out.push_back(std::move(*s));
  }
  if (std::count(left_seen.begin(), left_seen.end(), 0) != 0) {
    throw InternalError("truth ops leave a left position uncovered");
  }
  return out;
}

SubwordImage render_token(const std::string& form_id, std::size_t style_id, const CanvasSpec& canvas) {
  validate_canvas(canvas);
  Rng form_rng(derive_seed(0x676c797068ULL, form_id));
  Rng style_rng(derive_seed(0x7374796c65ULL, static_cast<std::uint64_t>(style_id)));

  auto coord = [&] { return 0.12 + 0.76 * uniform(form_rng); };
  std::vector<std::array<Point, 3>> strokes(2 + below(form_rng, 3));
  for (auto& s : strokes) {
    for (auto& p : s) p = {coord(), coord()};
  }
  std::vector<Point> dots(below(form_rng, 3));
  for (auto& d : dots) d = {coord(), coord()};

  const double width = 0.028 + 0.030 * uniform(style_rng);
  const double slant = -0.30 + 0.60 * uniform(style_rng);
  const double x_scale = 0.75 + 0.30 * uniform(style_rng);
  const double y_scale = 0.85 + 0.15 * uniform(style_rng);

  const auto h = static_cast<double>(canvas.target_height - 1);
  const auto w = static_cast<double>(canvas.target_width - 1);
  auto place = [&](Point p) {
    const double y = 0.5 + (p.y - 0.5) * y_scale;
    const double x = 0.5 + (p.x - 0.5) * x_scale + slant * (0.5 - y);
    return Point{x * w, y * h};
  };

  constexpr int kSteps = 24;
  std::vector<std::pair<Point, Point>> segments;
  for (const auto& s : strokes) {
    Point prev = place(s[0]);
    for (int k = 1; k <= kSteps; ++k) {
      const double t = static_cast<double>(k) / kSteps;
      const double a = (1 - t) * (1 - t);
      const double b = 2 * (1 - t) * t;
      const double c = t * t;
      const Point cur = place({a * s[0].x + b * s[1].x + c * s[2].x, a * s[0].y + b * s[1].y + c * s[2].y});
      segments.emplace_back(prev, cur);
      prev = cur;
    }
  }
  std::vector<Point> dot_centres;
  for (const auto& d : dots) dot_centres.push_back(place(d));

  const double radius = 0.5 * width * static_cast<double>(canvas.target_height);
  const double dot_radius = 1.6 * radius;
  SubwordImage img(canvas.target_height, canvas.target_width);
  for (std::size_t r = 0; r < canvas.target_height; ++r) {
    for (std::size_t c = 0; c < canvas.target_width; ++c) {
      const Point p{static_cast<double>(c), static_cast<double>(r)};
      double coverage = 0.0;
      for (const auto& [a, b] : segments) {
        coverage = std::max(coverage, radius + 0.5 - segment_distance(p, a, b));
      }
      for (const auto& d : dot_centres) {
        coverage = std::max(coverage, dot_radius + 0.5 - std::hypot(p.x - d.x, p.y - d.y));
      }
      img.at(r, c) = std::clamp(coverage, 0.0, 1.0);
    }
  }
  return img;
}

void validate(const CorpusConfig& config) {
  check_rates(config.rates);
  validate_canvas(config.canvas);
  if (config.manuscripts < 1) throw ConfigError("corpus needs at least one manuscript");
  if (config.vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (config.lines < 1) throw ConfigError("corpus needs at least one line");
  if (config.min_tokens < 1 || config.min_tokens > config.max_tokens) {
    throw ConfigError("token range must satisfy 1 <= min_tokens <= max_tokens");
  }
  if (!(config.zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent must be >= 0");
}

ManuscriptCorpus synthesize_corpus(const CorpusConfig& config) {
  validate(config);
  const ZipfSampler zipf(config.vocab_size, config.zipf_exponent);
  Rng base_rng(derive_seed(config.seed, "base"));
  std::vector<std::vector<std::string>> base(config.lines);
  for (auto& line : base) {
    const std::size_t n = config.min_tokens + below(base_rng, config.max_tokens - config.min_tokens + 1);
    for (std::size_t i = 0; i < n; ++i) line.push_back(form_name(zipf(base_rng)));
  }

  std::map<std::pair<std::string, std::size_t>, std::shared_ptr<const SubwordImage>> images;
  std::vector<Document> docs;
  for (std::size_t m = 0; m < config.manuscripts; ++m) {
    Document doc;
    doc.manuscript_id = "m" + std::to_string(m + 1);
    for (std::size_t l = 0; l < config.lines; ++l) {
      Rng rng(derive_seed(config.seed, doc.manuscript_id + "/" + std::to_string(l)));
      auto fresh = [&](const std::string& avoid) {
        while (true) {
          std::string f = form_name(zipf(rng));
          if (f != avoid) return f;
        }
      };
      EditedLine edited = apply_edits(base[l], config.rates, rng, fresh);
      if (edited.right.empty()) edited.right = base[l];
      TextLine line = make_line(doc.manuscript_id, 0, l, edited.right);
      for (auto& tok : line.tokens) {
        auto& img = images[{tok.form_id, m}];
        if (!img) img = std::make_shared<const SubwordImage>(render_token(tok.form_id, m, config.canvas));
        tok.image = img;
        tok.image_path = "images/s" + std::to_string(m) + "/" + tok.form_id + ".png";
      }
      doc.lines.push_back(std::move(line));
    }
    docs.push_back(std::move(doc));
  }
  return make_corpus(std::move(docs));
}

fs::path write_corpus(const fs::path& dir, const ManuscriptCorpus& corpus) {
  fs::create_directories(dir);
  std::set<std::string> written;
  for (const auto& doc : corpus.manuscripts) {
    for (const auto& line : doc.lines) {
      for (const auto& tok : line.tokens) {
        if (!tok.image || tok.image_path.empty() || !written.insert(tok.image_path).second) continue;
        const fs::path target = dir / tok.image_path;
        fs::create_directories(target.parent_path());
        write_png(target, *tok.image);
      }
    }
  }
  const fs::path manifest = dir / "manifest.csv";
  write_manifest(manifest, corpus);
  return manifest;
}

}  // namespace scriptalign
