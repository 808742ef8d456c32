#include "scriptalign/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include "json.hpp"
#include <set>
#include <sstream>
#include <unordered_map>

#include "csv.hpp"
#include "scriptalign/error.hpp"
#include "scriptalign/image_io.hpp"
#include "scriptalign/log.hpp"
#include "scriptalign/rng.hpp"

namespace scriptalign {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::size_t parse_index(const std::string& field, const std::string& where, const char* name) {
  std::size_t value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ManifestError(where + ": " + name + " '" + field + "' is not a non-negative integer");
  }
  return value;
}

struct LineKey {
  std::size_t page;
  std::size_t line;
  auto operator<=>(const LineKey&) const = default;
};

void build_form_index(ManuscriptCorpus& corpus) {
  corpus.form_index.clear();
  const std::size_t n = corpus.manuscripts.size();
  for (std::size_t m = 0; m < n; ++m) {
    const auto& doc = corpus.manuscripts[m];
    for (std::size_t l = 0; l < doc.lines.size(); ++l) {
      for (std::size_t p = 0; p < doc.lines[l].tokens.size(); ++p) {
        auto& slot = corpus.form_index[doc.lines[l].tokens[p].form_id];
        if (slot.empty()) slot.resize(n);
        slot[m].push_back({m, l, p});
      }
    }
  }
}

// Picks a uniformly random token from `pool` accepted by `ok`, or nothing.
template <typename Pred>
std::optional<TokenLoc> draw_partner(const std::vector<TokenLoc>& pool, Rng& rng, Pred ok) {
  if (pool.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const TokenLoc& cand = pool[pick(rng)];
    if (ok(cand)) return cand;
  }
  std::vector<TokenLoc> eligible;
  for (const auto& cand : pool) {
    if (ok(cand)) eligible.push_back(cand);
  }
  if (eligible.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick_eligible(0, eligible.size() - 1);
  return eligible[pick_eligible(rng)];
}

// Distinct images of a pair list in first-appearance order.
std::vector<TokenLoc> distinct_images(const std::vector<std::pair<TokenLoc, TokenLoc>>& pairs) {
  std::vector<TokenLoc> out;
  std::set<TokenLoc> seen;
  for (const auto& [a, b] : pairs) {
    if (seen.insert(a).second) out.push_back(a);
    if (seen.insert(b).second) out.push_back(b);
  }
  return out;
}

PairSample make_pair(const ManuscriptCorpus& corpus, const TokenLoc& a, const TokenLoc& b, bool same) {
  return {corpus.token(a), corpus.token(b), same};
}

// Floyd's algorithm: k distinct values from [0, n), returned sorted.
std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::size_t k, Rng& rng) {
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = n - k; j < n; ++j) {
    std::uniform_int_distribution<std::uint64_t> dist(0, j);
    const std::uint64_t t = dist(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

std::string label_text(bool same) { return same ? "true-pair" : "false-pair"; }

}  // namespace

std::size_t ManuscriptCorpus::annotation_count() const {
  std::size_t n = 0;
  for (const auto& doc : manuscripts) {
    for (const auto& line : doc.lines) n += line.tokens.size();
  }
  return n;
}

std::vector<std::string> ManuscriptCorpus::manuscript_ids() const {
  std::vector<std::string> ids;
  for (const auto& doc : manuscripts) ids.push_back(doc.manuscript_id);
  return ids;
}

std::size_t ManuscriptCorpus::manuscript_index(const std::string& id) const {
  for (std::size_t i = 0; i < manuscripts.size(); ++i) {
    if (manuscripts[i].manuscript_id == id) return i;
  }
  throw ManifestError("unknown manuscript '" + id + "'");
}

ManuscriptCorpus make_corpus(std::vector<Document> documents) {
  std::sort(documents.begin(), documents.end(),
            [](const Document& a, const Document& b) { return a.manuscript_id < b.manuscript_id; });
  for (std::size_t i = 1; i < documents.size(); ++i) {
    if (documents[i].manuscript_id == documents[i - 1].manuscript_id) {
      throw ManifestError("duplicate manuscript id '" + documents[i].manuscript_id + "'");
    }
  }
  for (auto& doc : documents) {
    for (auto& line : doc.lines) {
      std::sort(line.tokens.begin(), line.tokens.end(),
                [](const SubwordAnnotation& a, const SubwordAnnotation& b) {
                  return a.position < b.position;
                });
      for (std::size_t i = 0; i < line.tokens.size(); ++i) {
        const auto& tok = line.tokens[i];
        if (tok.position != i) {
          throw ManifestError("manuscript '" + doc.manuscript_id + "' page " +
                              std::to_string(tok.page) + " line " + std::to_string(tok.line) +
                              ": positions must be unique and contiguous from 0 (found " +
                              std::to_string(tok.position) + " at slot " + std::to_string(i) + ")");
        }
        if (tok.form_id.empty()) throw ManifestError("empty form_id in '" + doc.manuscript_id + "'");
      }
    }
    std::erase_if(doc.lines, [](const TextLine& line) { return line.tokens.empty(); });
    std::stable_sort(doc.lines.begin(), doc.lines.end(), [](const TextLine& a, const TextLine& b) {
      const auto& ta = a.tokens.front();
      const auto& tb = b.tokens.front();
      return std::tie(ta.page, ta.line) < std::tie(tb.page, tb.line);
    });
  }
  ManuscriptCorpus corpus;
  corpus.manuscripts = std::move(documents);
  build_form_index(corpus);
  return corpus;
}

ManuscriptCorpus load_corpus(const fs::path& manifest_path, const CanvasSpec& canvas) {
  std::ifstream in(manifest_path);
  if (!in) throw ManifestError("cannot open manifest " + manifest_path.string());
  const fs::path base = manifest_path.parent_path();
  const std::string name = manifest_path.string();

  std::string row;
  if (!std::getline(in, row)) throw ManifestError(name + ": missing header row");
  csv::strip_cr(row);
  if (row.rfind("\xEF\xBB\xBF", 0) == 0) row.erase(0, 3);
  if (row != kManifestHeader) {
    throw ManifestError(name + ":1: header must be '" + std::string(kManifestHeader) + "'");
  }

  std::map<std::string, std::map<LineKey, TextLine>> grouped;
  std::unordered_map<std::string, std::shared_ptr<const SubwordImage>> images;
  std::vector<std::string> fields;
  std::size_t lineno = 1;
  while (std::getline(in, row)) {
    ++lineno;
    csv::strip_cr(row);
    if (row.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    if (!csv::split(row, fields) || fields.size() != 6) {
      throw ManifestError(where + ": malformed row, expected 6 fields");
    }
    SubwordAnnotation tok;
    tok.manuscript_id = fields[0];
    tok.page = parse_index(fields[1], where, "page");
    tok.line = parse_index(fields[2], where, "line");
    tok.position = parse_index(fields[3], where, "position");
    tok.form_id = fields[4];
    if (tok.manuscript_id.empty()) throw ManifestError(where + ": empty manuscript_id");
    if (tok.form_id.empty()) throw ManifestError(where + ": empty form_id");
    if (!fields[5].empty()) {
      fs::path img_path = fields[5];
      if (img_path.is_relative()) img_path = base / img_path;
      tok.image_path = img_path.lexically_normal().string();
      auto it = images.find(tok.image_path);
      if (it == images.end()) {
        if (!fs::exists(tok.image_path)) {
          throw ManifestError(where + ": image '" + tok.image_path + "' does not exist");
        }
        SubwordImage img;
        try {
          img = rescale_to_canvas(read_image(tok.image_path), canvas);
        } catch (const Error& e) {
          throw ManifestError(where + ": cannot load image '" + tok.image_path + "': " + e.what());
        }
        it = images.emplace(tok.image_path, std::make_shared<const SubwordImage>(std::move(img))).first;
      }
      tok.image = it->second;
    }
    auto& line = grouped[tok.manuscript_id][LineKey{tok.page, tok.line}];
    for (const auto& other : line.tokens) {
      if (other.position == tok.position) {
        throw ManifestError(where + ": duplicate position " + std::to_string(tok.position) +
                            " in manuscript '" + tok.manuscript_id + "' page " +
                            std::to_string(tok.page) + " line " + std::to_string(tok.line));
      }
    }
    line.tokens.push_back(std::move(tok));
  }

  std::vector<Document> docs;
  for (auto& [id, lines] : grouped) {
    Document doc{id, {}};
    for (auto& [key, line] : lines) doc.lines.push_back(std::move(line));
    docs.push_back(std::move(doc));
  }
  return make_corpus(std::move(docs));
}

void write_manifest(const fs::path& manifest_path, const ManuscriptCorpus& corpus) {
  std::ofstream out(manifest_path);
  if (!out) throw ManifestError("cannot write manifest " + manifest_path.string());
  out << kManifestHeader << '\n';
  for (const auto& doc : corpus.manuscripts) {
    for (const auto& line : doc.lines) {
      for (const auto& tok : line.tokens) {
        out << csv::escape(tok.manuscript_id) << ',' << tok.page << ',' << tok.line << ','
            << tok.position << ',' << csv::escape(tok.form_id) << ',' << csv::escape(tok.image_path)
            << '\n';
      }
    }
  }
}

std::vector<SplitPlan> enumerate_split_plans(const ManuscriptCorpus& corpus, std::uint64_t seed) {
  const std::size_t n = corpus.manuscripts.size();
  if (n < 3) {
    throw InsufficientManuscripts("cross-validation needs at least 3 manuscripts, corpus has " +
                                  std::to_string(n));
  }
  std::vector<SplitPlan> plans;
  plans.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      SplitPlan plan;
      plan.heldout = {corpus.manuscripts[i].manuscript_id, corpus.manuscripts[j].manuscript_id};
      for (std::size_t k = 0; k < n; ++k) {
        if (k != i && k != j) plan.training.push_back(corpus.manuscripts[k].manuscript_id);
      }
      plan.seed = derive_seed(seed, plans.size());
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

std::vector<PairSample> build_training_pairs(const ManuscriptCorpus& corpus, const SplitPlan& plan,
                                             const PairOptions& options, TrainingPairStats* stats) {
  if (options.cap_per_form == 0) throw ConfigError("cap_per_form must be >= 1");
  std::vector<std::size_t> training;
  for (const auto& id : plan.training) training.push_back(corpus.manuscript_index(id));
  std::vector<bool> is_training(corpus.manuscripts.size(), false);
  for (std::size_t m : training) is_training[m] = true;

  std::vector<TokenLoc> pool;
  for (std::size_t m : training) {
    const auto& doc = corpus.manuscripts[m];
    for (std::size_t l = 0; l < doc.lines.size(); ++l) {
      for (std::size_t p = 0; p < doc.lines[l].tokens.size(); ++p) pool.push_back({m, l, p});
    }
  }

  TrainingPairStats local;
  std::map<std::size_t, std::size_t> slots;
  std::vector<PairSample> out;

  for (const auto& [form, per_ms] : corpus.form_index) {
    struct Block {
      std::size_t a;
      std::size_t b;
      std::uint64_t size;
    };
    std::vector<Block> blocks;
    std::uint64_t total = 0;
    std::vector<std::size_t> contributing;
    for (std::size_t ia = 0; ia < training.size(); ++ia) {
      if (!per_ms[training[ia]].empty()) contributing.push_back(training[ia]);
      for (std::size_t ib = ia + 1; ib < training.size(); ++ib) {
        const std::uint64_t size = static_cast<std::uint64_t>(per_ms[training[ia]].size()) *
                                   per_ms[training[ib]].size();
        if (size == 0) continue;
        blocks.push_back({training[ia], training[ib], size});
        total += size;
      }
    }
    if (total == 0) {
      ++local.forms_skipped;
      continue;
    }
    ++local.forms_used;

    auto pair_at = [&](std::uint64_t index) {
      for (const auto& block : blocks) {
        if (index < block.size) {
          const auto& occ_b = per_ms[block.b];
          return std::pair{per_ms[block.a][index / occ_b.size()], occ_b[index % occ_b.size()]};
        }
        index -= block.size;
      }
      throw InternalError("pair index out of range");
    };

    Rng rng(derive_seed(plan.seed, "train:" + form));
    std::vector<std::pair<TokenLoc, TokenLoc>> kept;
    if (total <= options.cap_per_form) {
      for (std::uint64_t i = 0; i < total; ++i) kept.push_back(pair_at(i));
    } else {
      ++local.forms_capped;
      const double denom = 2.0 * static_cast<double>(options.cap_per_form);
      auto min_share = [&](const std::vector<std::uint64_t>& idx) {
        std::map<std::size_t, std::size_t> count;
        for (auto i : idx) {
          const auto [a, b] = pair_at(i);
          ++count[a.manuscript];
          ++count[b.manuscript];
        }
        double worst = 1.0;
        for (std::size_t m : contributing) worst = std::min(worst, count[m] / denom);
        return worst;
      };
      std::vector<std::uint64_t> best = sample_indices(total, options.cap_per_form, rng);
      double best_share = min_share(best);
      for (std::size_t attempt = 1; attempt <= options.share_retries && best_share < options.min_share;
           ++attempt) {
        auto draw = sample_indices(total, options.cap_per_form, rng);
        const double share = min_share(draw);
        if (share > best_share) {
          best = std::move(draw);
          best_share = share;
        }
      }
      if (best_share < options.min_share) {
        ++local.forms_share_unmet;
        spdlog::debug("form '{}': best manuscript share {:.3f} below {:.2f} after {} retries", form,
                      best_share, options.min_share, options.share_retries);
      }
      for (auto i : best) kept.push_back(pair_at(i));
    }

    for (const auto& [a, b] : kept) {
      out.push_back(make_pair(corpus, a, b, true));
      ++slots[a.manuscript];
      ++slots[b.manuscript];
    }
    local.true_pairs += kept.size();

    Rng false_rng(derive_seed(plan.seed, "train-false:" + form));
    for (const TokenLoc& img : distinct_images(kept)) {
      const auto partner = draw_partner(pool, false_rng, [&](const TokenLoc& cand) {
        return cand.manuscript != img.manuscript && corpus.token(cand).form_id != form;
      });
      if (!partner) {
        spdlog::debug("form '{}': no different-form partner available", form);
        continue;
      }
      out.push_back(make_pair(corpus, img, *partner, false));
      ++local.false_pairs;
    }
  }

  if (out.empty()) {
    throw EmptyTrainingSet("no training pairs for held-out " + plan.label() +
                           ": no form occurs in two training manuscripts");
  }
  if (local.forms_share_unmet > 0) {
    spdlog::warn("{} of {} capped forms could not meet the {:.0f}% per-manuscript share",
                 local.forms_share_unmet, local.forms_capped, options.min_share * 100.0);
  }
  const double total_slots = 2.0 * static_cast<double>(local.true_pairs);
  for (std::size_t m : training) {
    local.manuscript_share[corpus.manuscripts[m].manuscript_id] =
        total_slots > 0 ? slots[m] / total_slots : 0.0;
  }

  Rng shuffle_rng(derive_seed(plan.seed, "train-shuffle"));
  std::shuffle(out.begin(), out.end(), shuffle_rng);
  if (stats) *stats = std::move(local);
  return out;
}

HeldoutSets build_heldout_sets(const ManuscriptCorpus& corpus, const SplitPlan& plan) {
  const std::size_t ma = corpus.manuscript_index(plan.heldout.first);
  const std::size_t mb = corpus.manuscript_index(plan.heldout.second);
  if (ma == mb) throw ConfigError("held-out manuscripts must differ");

  std::vector<std::pair<TokenLoc, TokenLoc>> true_pairs;
  for (const auto& [form, per_ms] : corpus.form_index) {
    for (const auto& a : per_ms[ma]) {
      for (const auto& b : per_ms[mb]) true_pairs.emplace_back(a, b);
    }
  }
  if (true_pairs.empty()) {
    throw EmptyHeldoutSet("held-out manuscripts " + plan.label() + " share no forms");
  }

  std::vector<TokenLoc> pool_a;
  std::vector<TokenLoc> pool_b;
  for (std::size_t m : {ma, mb}) {
    auto& pool = m == ma ? pool_a : pool_b;
    const auto& doc = corpus.manuscripts[m];
    for (std::size_t l = 0; l < doc.lines.size(); ++l) {
      for (std::size_t p = 0; p < doc.lines[l].tokens.size(); ++p) pool.push_back({m, l, p});
    }
  }

  std::vector<PairSample> all;
  for (const auto& [a, b] : true_pairs) all.push_back(make_pair(corpus, a, b, true));
  Rng rng(derive_seed(plan.seed, "heldout-false"));
  for (const TokenLoc& img : distinct_images(true_pairs)) {
    const auto& other = img.manuscript == ma ? pool_b : pool_a;
    const std::string& form = corpus.token(img).form_id;
    const auto partner = draw_partner(other, rng, [&](const TokenLoc& cand) {
      return corpus.token(cand).form_id != form;
    });
    if (!partner) continue;
    all.push_back(make_pair(corpus, img, *partner, false));
  }

  Rng shuffle_rng(derive_seed(plan.seed, "heldout-shuffle"));
  std::shuffle(all.begin(), all.end(), shuffle_rng);
  const std::size_t half = (all.size() + 1) / 2;
  HeldoutSets sets;
  sets.validation.assign(std::make_move_iterator(all.begin()),
                         std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(half)));
  sets.test.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(half)),
                   std::make_move_iterator(all.end()));
  return sets;
}

DatasetBundle build_bundle(const ManuscriptCorpus& corpus, const SplitPlan& plan,
                           const PairOptions& options, TrainingPairStats* stats) {
  DatasetBundle bundle;
  bundle.plan = plan;
  bundle.train = build_training_pairs(corpus, plan, options, stats);
  auto heldout = build_heldout_sets(corpus, plan);
  bundle.validation = std::move(heldout.validation);
  bundle.test = std::move(heldout.test);
  return bundle;
}

namespace {

// Image paths are stored relative to the bundle directory.
std::string bundle_relative(const std::string& image_path, const fs::path& bundle_dir) {
  if (image_path.empty()) return image_path;
  return fs::absolute(image_path).lexically_normal().lexically_relative(fs::absolute(bundle_dir).lexically_normal()).generic_string();
}

void write_pairs(const fs::path& path, const std::vector<PairSample>& pairs, const fs::path& bundle_dir) {
  std::ofstream out(path);
  if (!out) throw ManifestError("cannot write " + path.string());
  out << "left_path,right_path,label,left_form,right_form\n";
  for (const auto& p : pairs) {
    out << csv::escape(bundle_relative(p.left.image_path, bundle_dir)) << ','
        << csv::escape(bundle_relative(p.right.image_path, bundle_dir)) << ','
        << label_text(p.same) << ',' << csv::escape(p.left.form_id) << ','
        << csv::escape(p.right.form_id) << '\n';
  }
}

std::vector<PairSample> read_pairs(
    const fs::path& path, const fs::path& bundle_dir, const CanvasSpec& canvas,
    std::unordered_map<std::string, std::shared_ptr<const SubwordImage>>& cache) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open " + path.string());
  std::string row;
  std::getline(in, row);
  csv::strip_cr(row);
  if (row != "left_path,right_path,label,left_form,right_form") {
    throw ManifestError(path.string() + ":1: unexpected header");
  }
  auto load = [&](std::string& p, const std::string& where) {
    if (p.empty()) return std::shared_ptr<const SubwordImage>{};
    if (fs::path(p).is_relative()) p = (bundle_dir / p).lexically_normal().string();
    auto it = cache.find(p);
    if (it == cache.end()) {
      if (!fs::exists(p)) throw ManifestError(where + ": image '" + p + "' does not exist");
      it = cache.emplace(p, std::make_shared<const SubwordImage>(rescale_to_canvas(read_image(p), canvas)))
               .first;
    }
    return it->second;
  };
  std::vector<PairSample> pairs;
  std::vector<std::string> fields;
  std::size_t lineno = 1;
  while (std::getline(in, row)) {
    ++lineno;
    csv::strip_cr(row);
    if (row.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!csv::split(row, fields) || fields.size() != 5) {
      throw ManifestError(where + ": malformed row, expected 5 fields");
    }
    if (fields[2] != "true-pair" && fields[2] != "false-pair") {
      throw ManifestError(where + ": label must be true-pair or false-pair");
    }
    PairSample s;
    s.same = fields[2] == "true-pair";
    s.left.form_id = fields[3];
    s.right.form_id = fields[4];
    s.left.image = load(fields[0], where);
    s.right.image = load(fields[1], where);
    s.left.image_path = fields[0];
    s.right.image_path = fields[1];
    pairs.push_back(std::move(s));
  }
  return pairs;
}

}  // namespace

void write_bundle(const fs::path& dir, const DatasetBundle& bundle, const PairOptions& options,
                  const TrainingPairStats& stats) {
  for (const char* part : {"train", "validation", "test"}) fs::create_directories(dir / part);
  write_pairs(dir / "train" / "pairs.csv", bundle.train, dir);
  write_pairs(dir / "validation" / "pairs.csv", bundle.validation, dir);
  write_pairs(dir / "test" / "pairs.csv", bundle.test, dir);

  auto count_true = [](const std::vector<PairSample>& v) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](const auto& p) { return p.same; }));
  };
  json meta;
  meta["plan"] = {{"heldout", {bundle.plan.heldout.first, bundle.plan.heldout.second}},
                  {"training", bundle.plan.training},
                  {"seed", bundle.plan.seed}};
  meta["cap_per_form"] = options.cap_per_form;
  meta["min_share"] = options.min_share;
  meta["share_retries"] = options.share_retries;
  meta["counts"] = {
      {"train", bundle.train.size()},
      {"train_true", count_true(bundle.train)},
      {"validation", bundle.validation.size()},
      {"validation_true", count_true(bundle.validation)},
      {"test", bundle.test.size()},
      {"test_true", count_true(bundle.test)},
  };
  meta["forms"] = {{"used", stats.forms_used},
                   {"skipped", stats.forms_skipped},
                   {"capped", stats.forms_capped},
                   {"share_unmet", stats.forms_share_unmet}};
  meta["manuscript_share"] = stats.manuscript_share;
  std::ofstream out(dir / "metadata.json");
  if (!out) throw ManifestError("cannot write " + (dir / "metadata.json").string());
  out << meta.dump(2) << '\n';
}

DatasetBundle load_bundle(const fs::path& dir, const CanvasSpec& canvas) {
  std::ifstream meta_in(dir / "metadata.json");
  if (!meta_in) throw ManifestError("bundle " + dir.string() + " has no metadata.json");
  DatasetBundle bundle;
  try {
    const json meta = json::parse(meta_in);
    const auto& plan = meta.at("plan");
    bundle.plan.heldout = {plan.at("heldout").at(0).get<std::string>(),
                           plan.at("heldout").at(1).get<std::string>()};
    bundle.plan.training = plan.at("training").get<std::vector<std::string>>();
    bundle.plan.seed = plan.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ManifestError(dir.string() + "/metadata.json: " + e.what());
  }
  std::unordered_map<std::string, std::shared_ptr<const SubwordImage>> cache;
  bundle.train = read_pairs(dir / "train" / "pairs.csv", dir, canvas, cache);
  bundle.validation = read_pairs(dir / "validation" / "pairs.csv", dir, canvas, cache);
  bundle.test = read_pairs(dir / "test" / "pairs.csv", dir, canvas, cache);
  return bundle;
}

}  // namespace scriptalign
