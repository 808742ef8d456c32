#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "scriptalign/error.hpp"
#include "scriptalign/eval.hpp"
#include "scriptalign/synth.hpp"

using namespace scriptalign;

namespace {

ManuscriptCorpus small_corpus(std::size_t manuscripts, CanvasSpec canvas = {23, 19}) {
  CorpusConfig cc;
  cc.manuscripts = manuscripts;
  cc.vocab_size = 12;
  cc.lines = 2;
  cc.canvas = canvas;
  cc.seed = 8;
  return synthesize_corpus(cc);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("noise-free oracle scores every split perfectly") {
    const ManuscriptCorpus corpus = small_corpus(4);
    CrossValConfig cfg;
    cfg.canvas = {23, 19};
    cfg.scorer_override = "oracle:0";
    std::size_t seen = 0;
    const CrossValReport report =
        run_cross_validation(corpus, cfg, 5, [&](std::size_t, const CrossValRow&) { ++seen; });
    REQUIRE(report.rows.size() == 6);
    CHECK(seen == 6);
    std::set<std::pair<std::string, std::string>> heldout;
    for (const auto& r : report.rows) {
      CHECK(r.test_accuracy == 1.0);
      CHECK(r.validation_accuracy == 1.0);
      CHECK(r.train_size > 0);
      CHECK(r.test_size > 0);
      CHECK(r.heldout_a < r.heldout_b);
      heldout.insert({r.heldout_a, r.heldout_b});
    }
    CHECK(heldout.size() == 6);
    CHECK(report.mean_test_accuracy() == 1.0);
  }

  TEST_CASE("split count is n choose 2 and rows follow plan order") {
    const ManuscriptCorpus corpus = small_corpus(5);
    CrossValConfig cfg;
    cfg.scorer_override = "oracle:0.1";
    const CrossValReport a = run_cross_validation(corpus, cfg, 2);
    REQUIRE(a.rows.size() == 10);
    const auto plans = enumerate_split_plans(corpus, 2);
    for (std::size_t i = 0; i < plans.size(); ++i) {
      CHECK(a.rows[i].heldout_a == plans[i].heldout.first);
      CHECK(a.rows[i].seed == plans[i].seed);
    }
    cfg.workers = 3;
    const CrossValReport b = run_cross_validation(corpus, cfg, 2);
    CHECK(report_to_csv(a, false) == report_to_csv(b, false));
    CHECK(a.mean_test_accuracy() < 1.0);
  }

  TEST_CASE("report means and CSV layout") {
    CrossValReport report;
    CHECK_THROWS_AS(report.mean_test_accuracy(), EmptySet);
    CHECK_THROWS_AS(report.mean_validation_accuracy(), EmptySet);
    CrossValRow r1;
    r1.heldout_a = "m1";
    r1.heldout_b = "m2";
    r1.test_accuracy = 0.75;
    r1.validation_accuracy = 0.5;
    r1.train_size = 10;
    r1.validation_size = 3;
    r1.test_size = 2;
    r1.best_epoch = 1;
    r1.seed = 99;
    r1.seconds = 1.5;
    CrossValRow r2 = r1;
    r2.test_accuracy = 0.25;
    r2.validation_accuracy = 1.0;
    report.rows = {r1, r2};
    CHECK(report.mean_test_accuracy() == 0.5);
    CHECK(report.mean_validation_accuracy() == 0.75);

    const auto csv = lines_of(report_to_csv(report));
    REQUIRE(csv.size() == 3);
    CHECK(csv[0] ==
          "heldout,test_accuracy,validation_accuracy,train_size,validation_size,test_size,best_epoch,seed,seconds");
    CHECK(csv[1] == "\"m1,m2\",0.750000,0.500000,10,3,2,1,99,1.500");
    const auto bare = lines_of(report_to_csv(report, false));
    CHECK(bare[1] == "\"m1,m2\",0.750000,0.500000,10,3,2,1,99");

    CrossValConfig cfg;
    const auto summary = nlohmann::json::parse(report_summary_json(report, cfg, 3));
    CHECK(summary["splits"] == 2);
    CHECK(summary["mean_test_accuracy"].get<double>() == 0.5);
    CHECK(summary["fingerprint"] == config_fingerprint(cfg, 3));
    CHECK(config_fingerprint(cfg, 3) != config_fingerprint(cfg, 4));
    CHECK(config_fingerprint(cfg, 3).size() == 16);
  }

  TEST_CASE("evaluate_bundle uses both held-out halves") {
    const ManuscriptCorpus corpus = small_corpus(4);
    const DatasetBundle bundle = build_bundle(corpus, enumerate_split_plans(corpus, 1).front());
    const BundleScores s = evaluate_bundle(OracleScorer(0.0, 1), bundle);
    CHECK(s.validation_accuracy == 1.0);
    CHECK(s.test_accuracy == 1.0);
    const BundleScores inv = evaluate_bundle(OracleScorer(1.0, 1), bundle);
    CHECK(inv.validation_accuracy == 0.0);
    CHECK(inv.test_accuracy == 0.0);
  }

  TEST_CASE("training path fills best_epoch and is reproducible") {
    const ManuscriptCorpus corpus = small_corpus(4, CanvasSpec{});
    CrossValConfig cfg;
    cfg.multiplier = 1.0 / 16.0;
    cfg.train.epochs = 1;
    cfg.train.batch_size = 16;
    cfg.train.init_scheme = nn::InitScheme::FanInScaled;
    cfg.train.init_stddev = 1.0;
    const CrossValReport a = run_cross_validation(corpus, cfg, 3);
    const CrossValReport b = run_cross_validation(corpus, cfg, 3);
    REQUIRE(a.rows.size() == 6);
    CHECK(report_to_csv(a, false) == report_to_csv(b, false));
    for (const auto& r : a.rows) {
      CHECK(r.best_epoch == 0);
      CHECK(r.test_accuracy >= 0.0);
      CHECK(r.test_accuracy <= 1.0);
    }
    cfg.train.epochs = 0;
    CHECK_THROWS_AS(run_cross_validation(corpus, cfg, 3), ConfigError);
  }
}
