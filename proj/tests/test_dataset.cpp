#include <fstream>
#include <map>
#include <set>

#include "csv.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "scriptalign/dataset.hpp"
#include "scriptalign/error.hpp"
#include "scriptalign/synth.hpp"

using namespace scriptalign;

namespace {

// Manuscript with one line per entry of `lines`.
Document doc_of(const std::string& id, const std::vector<std::string>& lines) {
  Document d;
  d.manuscript_id = id;
  for (std::size_t l = 0; l < lines.size(); ++l) d.lines.push_back(testing::line_of(lines[l], id, l));
  return d;
}

std::string repeat(const std::string& form, int n, const std::string& filler = "") {
  std::string out;
  for (int i = 0; i < n; ++i) out += form + " ";
  return out + filler;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ManifestError& e) {
    return e.what();
  }
  return "";
}

SplitPlan plan_holding_out(const ManuscriptCorpus& corpus, const std::string& a, const std::string& b) {
  for (const auto& p : enumerate_split_plans(corpus, 11)) {
    if (p.heldout.first == a && p.heldout.second == b) return p;
  }
  FAIL("no such plan");
  return {};
}

std::uint64_t count_form(const std::vector<PairSample>& pairs, const std::string& form, bool same) {
  return static_cast<std::uint64_t>(std::count_if(pairs.begin(), pairs.end(), [&](const PairSample& p) {
    return p.same == same && p.left_form() == form;
  }));
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("load_corpus: empty and token-only manifests") {
    testing::TempDir dir("manifest");
    write_file(dir / "empty.csv", std::string(kManifestHeader) + "\n");
    const ManuscriptCorpus empty = load_corpus(dir / "empty.csv", {});
    CHECK(empty.annotation_count() == 0);
    CHECK(empty.form_index.empty());

    write_file(dir / "six.csv", std::string(kManifestHeader) +
                                    "\nA,0,0,0,x,\nA,0,0,1,y,\nA,0,0,2,z,\nB,0,0,0,x,\nB,0,0,2,z,\nB,0,0,1,w,\n");
    const ManuscriptCorpus six = load_corpus(dir / "six.csv", {});
    CHECK(six.annotation_count() == 6);
    CHECK(six.manuscript_ids() == std::vector<std::string>{"A", "B"});
    CHECK(six.manuscripts[1].lines[0].tokens[1].form_id == "w");
    CHECK(six.form_index.at("x")[0].size() == 1);
    CHECK(six.form_index.at("x")[1].size() == 1);
  }

  TEST_CASE("load_corpus: form_index totals equal manifest row counts") {
    testing::TempDir dir("synthcorpus");
    CorpusConfig cfg;
    cfg.canvas = {16, 12};
    cfg.seed = 4;
    const auto manifest = write_corpus(dir.path(), synthesize_corpus(cfg));
    const ManuscriptCorpus corpus = load_corpus(manifest, cfg.canvas);

    std::map<std::string, std::size_t> rows;
    std::ifstream in(manifest);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> fields;
    while (std::getline(in, line)) {
      REQUIRE(csv::split(line, fields));
      ++rows[fields[4]];
    }
    std::map<std::string, std::size_t> indexed;
    for (const auto& [form, per_ms] : corpus.form_index) {
      for (const auto& occ : per_ms) indexed[form] += occ.size();
    }
    CHECK(indexed == rows);
    CHECK(corpus.manuscripts.size() == 7);
    for (const auto& [form, per_ms] : corpus.form_index) {
      for (const auto& occ : per_ms) {
        for (const auto& loc : occ) CHECK(corpus.token(loc).form_id == form);
      }
    }
  }

  TEST_CASE("load_corpus diagnostics name the offending entry") {
    testing::TempDir dir("baddata");
    CHECK(error_of([&] { load_corpus(dir / "nope.csv", {}); }).find("cannot open") != std::string::npos);

    write_file(dir / "hdr.csv", "a,b,c\n");
    CHECK(error_of([&] { load_corpus(dir / "hdr.csv", {}); }).find("hdr.csv:1") != std::string::npos);

    write_file(dir / "short.csv", std::string(kManifestHeader) + "\nA,0,0,0,x,\nA,0,0,1\n");
    CHECK(error_of([&] { load_corpus(dir / "short.csv", {}); }).find("short.csv:3: malformed row") !=
          std::string::npos);

    write_file(dir / "dangling.csv", std::string(kManifestHeader) + "\nA,0,0,0,x,ghost.png\n");
    CHECK(error_of([&] { load_corpus(dir / "dangling.csv", {}); }).find("ghost.png") != std::string::npos);

    write_file(dir / "dup.csv", std::string(kManifestHeader) + "\nA,0,0,0,x,\nA,0,0,0,y,\n");
    CHECK(error_of([&] { load_corpus(dir / "dup.csv", {}); }).find("duplicate position") != std::string::npos);

    write_file(dir / "num.csv", std::string(kManifestHeader) + "\nA,zero,0,0,x,\n");
    CHECK(error_of([&] { load_corpus(dir / "num.csv", {}); }).find("num.csv:2") != std::string::npos);

    write_file(dir / "gap.csv", std::string(kManifestHeader) + "\nA,0,0,0,x,\nA,0,0,2,y,\n");
    CHECK_THROWS_AS(load_corpus(dir / "gap.csv", {}), ManifestError);
  }

  TEST_CASE("write_manifest round trips") {
    testing::TempDir dir("roundtrip");
    const ManuscriptCorpus corpus = make_corpus({doc_of("A", {"x y", "z"}), doc_of("B", {"x, \"q\""})});
    write_manifest(dir / "m.csv", corpus);
    const ManuscriptCorpus back = load_corpus(dir / "m.csv", {});
    REQUIRE(back.annotation_count() == corpus.annotation_count());
    CHECK(back.manuscripts[1].lines[0].tokens[0].form_id == "x,");
    CHECK(back.manuscripts[1].lines[0].tokens[1].form_id == "\"q\"");
  }

  TEST_CASE("enumerate_split_plans counts and order") {
    auto corpus_of = [](int n) {
      std::vector<Document> docs;
      for (int i = 0; i < n; ++i) docs.push_back(doc_of("m" + std::to_string(i + 1), {"a"}));
      return make_corpus(std::move(docs));
    };
    CHECK(enumerate_split_plans(corpus_of(7), 0).size() == 21);
    CHECK(enumerate_split_plans(corpus_of(3), 0).size() == 3);
    CHECK(enumerate_split_plans(corpus_of(5), 0).size() == 10);
    CHECK_THROWS_AS(enumerate_split_plans(corpus_of(2), 0), InsufficientManuscripts);

    const auto plans = enumerate_split_plans(corpus_of(7), 9);
    CHECK(plans.front().heldout == std::pair<std::string, std::string>{"m1", "m2"});
    CHECK(plans.back().heldout == std::pair<std::string, std::string>{"m6", "m7"});
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& p : plans) {
      CHECK(p.training.size() == 5);
      for (const auto& t : p.training) {
        CHECK(t != p.heldout.first);
        CHECK(t != p.heldout.second);
      }
      seen.insert(p.heldout);
    }
    CHECK(seen.size() == 21);
    const auto again = enumerate_split_plans(corpus_of(7), 9);
    for (std::size_t i = 0; i < plans.size(); ++i) CHECK(plans[i].seed == again[i].seed);
  }

  TEST_CASE("build_training_pairs: cap, small forms and false-pair recount") {
    // m1..m5 train, h1/h2 held out. Form "big" has 10 occurrences in each
    // training manuscript: C(5,2) * 10 * 10 = 1000 candidates.
    std::vector<Document> docs;
    for (int m = 1; m <= 5; ++m) {
      const std::string id = "m" + std::to_string(m);
      docs.push_back(doc_of(id, {repeat("big", 10, "small only" + id + " u" + id)}));
    }
    docs.push_back(doc_of("h1", {"big small hx"}));
    docs.push_back(doc_of("h2", {"big hy small"}));
    const ManuscriptCorpus corpus = make_corpus(std::move(docs));
    const SplitPlan plan = plan_holding_out(corpus, "h1", "h2");

    TrainingPairStats stats;
    const auto pairs = build_training_pairs(corpus, plan, {}, &stats);
    CHECK(count_form(pairs, "big", true) == 400);
    CHECK(count_form(pairs, "small", true) == 10);
    CHECK(stats.forms_capped == 1);
    CHECK(stats.forms_used == 2);
    CHECK(stats.forms_skipped > 0);  // onlyX and uX appear in one manuscript

    std::set<std::uint64_t> distinct;
    std::size_t false_pairs = 0;
    for (const auto& p : pairs) {
      CHECK(p.left.manuscript_id != "h1");
      CHECK(p.left.manuscript_id != "h2");
      CHECK(p.right.manuscript_id != "h1");
      CHECK(p.right.manuscript_id != "h2");
      CHECK(p.left.manuscript_id != p.right.manuscript_id);
      if (p.same) {
        CHECK(p.left_form() == p.right_form());
        distinct.insert(occurrence_key(p.left));
        distinct.insert(occurrence_key(p.right));
      } else {
        CHECK(p.left_form() != p.right_form());
        ++false_pairs;
      }
    }
    CHECK(false_pairs == distinct.size());
    CHECK(stats.false_pairs == false_pairs);

    double share_total = 0.0;
    for (const auto& [id, share] : stats.manuscript_share) share_total += share;
    CHECK(share_total == doctest::Approx(1.0));
  }

  TEST_CASE("build_training_pairs is deterministic and seed-sensitive") {
    CorpusConfig cfg;
    cfg.canvas = {16, 12};
    cfg.seed = 2;
    const ManuscriptCorpus corpus = synthesize_corpus(cfg);
    const auto plans = enumerate_split_plans(corpus, 5);
    PairOptions opts;
    opts.cap_per_form = 20;
    auto keys = [](const std::vector<PairSample>& v) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
      for (const auto& p : v) out.emplace_back(occurrence_key(p.left), occurrence_key(p.right));
      return out;
    };
    const auto a = build_training_pairs(corpus, plans[0], opts);
    CHECK(keys(a) == keys(build_training_pairs(corpus, plans[0], opts)));
    SplitPlan reseeded = plans[0];
    reseeded.seed += 1;
    CHECK(keys(a) != keys(build_training_pairs(corpus, reseeded, opts)));
  }

  TEST_CASE("build_training_pairs: no form shared by two training manuscripts") {
    const ManuscriptCorpus corpus =
        make_corpus({doc_of("a", {"p q"}), doc_of("b", {"r s"}), doc_of("c", {"t"}), doc_of("d", {"p"})});
    const SplitPlan plan = plan_holding_out(corpus, "a", "d");
    CHECK_THROWS_AS(build_training_pairs(corpus, plan), EmptyTrainingSet);
  }

  TEST_CASE("build_heldout_sets: 2 x 3 occurrences give 6 true and 5 false pairs") {
    const ManuscriptCorpus corpus = make_corpus({doc_of("A", {"x x a b"}), doc_of("B", {"x x x c"}),
                                                 doc_of("T1", {"x a"}), doc_of("T2", {"x c"})});
    const SplitPlan plan = plan_holding_out(corpus, "A", "B");
    const HeldoutSets sets = build_heldout_sets(corpus, plan);
    std::vector<PairSample> all = sets.validation;
    all.insert(all.end(), sets.test.begin(), sets.test.end());
    const auto trues = std::count_if(all.begin(), all.end(), [](const PairSample& p) { return p.same; });
    CHECK(trues == 6);
    CHECK(all.size() - static_cast<std::size_t>(trues) == 5);
    CHECK(sets.validation.size() == 6);
    CHECK(sets.test.size() == 5);
    for (const auto& p : all) {
      CHECK((p.left.manuscript_id == "A" || p.left.manuscript_id == "B"));
      CHECK((p.right.manuscript_id == "A" || p.right.manuscript_id == "B"));
      CHECK(p.left.manuscript_id != p.right.manuscript_id);
      CHECK((p.left_form() == p.right_form()) == p.same);
    }
  }

  TEST_CASE("build_heldout_sets: no shared forms") {
    const ManuscriptCorpus corpus =
        make_corpus({doc_of("A", {"a"}), doc_of("B", {"b"}), doc_of("C", {"a b"})});
    CHECK_THROWS_AS(build_heldout_sets(corpus, plan_holding_out(corpus, "A", "B")), EmptyHeldoutSet);
  }

  TEST_CASE("bundle write/load round trip") {
    testing::TempDir dir("bundle");
    CorpusConfig cfg;
    cfg.canvas = {16, 12};
    cfg.seed = 8;
    const auto manifest = write_corpus(dir / "corpus", synthesize_corpus(cfg));
    const ManuscriptCorpus corpus = load_corpus(manifest, cfg.canvas);
    const SplitPlan plan = enumerate_split_plans(corpus, 1)[3];
    PairOptions opts;
    opts.cap_per_form = 30;
    TrainingPairStats stats;
    const DatasetBundle bundle = build_bundle(corpus, plan, opts, &stats);
    write_bundle(dir / "b", bundle, opts, stats);
    const DatasetBundle back = load_bundle(dir / "b", cfg.canvas);
    CHECK(back.plan.heldout == plan.heldout);
    CHECK(back.plan.training == plan.training);
    CHECK(back.plan.seed == plan.seed);
    REQUIRE(back.train.size() == bundle.train.size());
    REQUIRE(back.validation.size() == bundle.validation.size());
    REQUIRE(back.test.size() == bundle.test.size());
    for (std::size_t i = 0; i < bundle.train.size(); ++i) {
      CHECK(back.train[i].same == bundle.train[i].same);
      CHECK(back.train[i].left_form() == bundle.train[i].left_form());
      CHECK(*back.train[i].left.image == *bundle.train[i].left.image);
    }
    const auto diff = static_cast<long>(bundle.validation.size()) - static_cast<long>(bundle.test.size());
    CHECK((diff >= -1 && diff <= 1));
  }
}
