#include <cmath>
#include <fstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "helpers.hpp"
#include "scriptalign/error.hpp"
#include "scriptalign/siamese.hpp"
#include "scriptalign/synth.hpp"

using namespace scriptalign;

namespace {

const CanvasSpec kSmall{23, 19};

SiameseModel small_model(std::uint64_t seed) {
  auto m = make_siamese(testing::reduced_tower(1.0 / 16.0), kSmall, 1.0 / 16.0, 1.0, seed,
                        nn::InitScheme::FanInScaled);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  for (double& w : m.head_weights) w = normal(rng);
  m.head_bias = -0.2;
  return m;
}

SubwordAnnotation token(const std::string& ms, std::size_t pos, const std::string& form,
                        std::shared_ptr<const SubwordImage> img = nullptr) {
  SubwordAnnotation t;
  t.manuscript_id = ms;
  t.position = pos;
  t.form_id = form;
  t.image = std::move(img);
  return t;
}

class FixedScorer final : public SimilarityScorer {
 public:
  explicit FixedScorer(std::vector<double> values) : values_(std::move(values)) {}
  double score(const SubwordAnnotation& left, const SubwordAnnotation&) const override {
    return values_[left.position];
  }
  std::string describe() const override { return "fixed"; }

 private:
  std::vector<double> values_;
};

}  // namespace

TEST_SUITE("siamese") {
  TEST_CASE("score is symmetric and reflexive") {
    const SiameseModel m = small_model(1);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
      const auto a = testing::random_image(23, 19, rng);
      const auto b = testing::random_image(23, 19, rng);
      REQUIRE(siamese_score(m, a, b) == siamese_score(m, b, a));
      // Identical inputs give sigmoid(bias).
      REQUIRE(siamese_score(m, a, a) == doctest::Approx(sigmoid(m.head_bias)).epsilon(1e-12));
    }
  }

  TEST_CASE("head recomputed by hand") {
    const SiameseModel m = small_model(3);
    std::mt19937_64 rng(4);
    const auto a = testing::random_image(23, 19, rng);
    const auto b = testing::random_image(23, 19, rng);
    const auto ea = nn::embed(m.twin, m.specs, a);
    const auto eb = nn::embed(m.twin, m.specs, b);
    double z = m.head_bias;
    for (std::size_t i = 0; i < ea.size(); ++i) z += m.head_weights[i] * std::abs(ea[i] - eb[i]);
    CHECK(siamese_score(m, a, b) == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-12));
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(-1000.0) >= 0.0);
    CHECK(sigmoid(1000.0) <= 1.0);
  }

  TEST_CASE("make_siamese initialises the head like the tower") {
    nn::TrainConfig cfg;
    cfg.init_stddev = 0.0;
    const auto m = make_siamese(CanvasSpec{83, 69}, 1.0 / 16.0, cfg);
    CHECK(m.embedding_size() == 256);
    CHECK(m.head_bias == 0.0);
    for (double w : m.head_weights) REQUIRE(w == 0.0);
    std::mt19937_64 rng(1);
    const auto a = testing::random_image(83, 69, rng);
    const auto b = testing::random_image(83, 69, rng);
    CHECK(siamese_score(m, a, b) == 0.5);
    CHECK_THROWS_AS(siamese_score(m, a, testing::random_image(23, 19, rng)), IncompatibleGeometry);
  }

  TEST_CASE("checkpoint round trip preserves every score") {
    testing::TempDir dir("ckpt");
    const SiameseModel m = small_model(5);
    save_checkpoint(dir / "m.bin", m);
    const SiameseModel back = load_checkpoint(dir / "m.bin");
    CHECK(back == m);
    std::mt19937_64 rng(6);
    for (int i = 0; i < 100; ++i) {
      const auto a = testing::random_image(23, 19, rng);
      const auto b = testing::random_image(23, 19, rng);
      REQUIRE(siamese_score(back, a, b) == siamese_score(m, a, b));
    }

    std::ifstream in(dir / "m.bin", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    {
      std::ofstream out(dir / "short.bin", std::ios::binary);
      out << bytes.substr(0, bytes.size() / 2);
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "short.bin"), CheckpointError);
    {
      std::ofstream out(dir / "tail.bin", std::ios::binary);
      out << bytes << "x";
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "tail.bin"), CheckpointError);
    {
      std::ofstream out(dir / "junk.bin", std::ios::binary);
      out << "not a model at all";
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.bin"), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), CheckpointError);
  }

  TEST_CASE("SiameseScorer caches per image and checks tokens") {
    auto m = std::make_shared<const SiameseModel>(small_model(7));
    const SiameseScorer scorer(m, "mem");
    std::mt19937_64 rng(8);
    auto ia = std::make_shared<const SubwordImage>(testing::random_image(23, 19, rng));
    auto ib = std::make_shared<const SubwordImage>(testing::random_image(23, 19, rng));
    const auto a = token("x", 0, "f", ia);
    const auto b = token("y", 0, "g", ib);
    CHECK(scorer.score(a, b) == siamese_score(*m, *ia, *ib));
    CHECK(scorer.score(a, b) == scorer.score(b, a));
    CHECK_THROWS_AS(scorer.score(a, token("y", 1, "g")), InvalidImage);
    auto wrong = std::make_shared<const SubwordImage>(testing::random_image(10, 10, rng));
    CHECK_THROWS_AS(scorer.score(a, token("y", 2, "g", wrong)), IncompatibleGeometry);
  }

  TEST_CASE("evaluate counts thresholded agreement") {
    // Scores 0.9, 0.5, 0.49, 0.1 against labels 1, 1, 1, 0: three correct.
    const FixedScorer scorer({0.9, 0.5, 0.49, 0.1});
    std::vector<PairSample> pairs;
    const bool labels[] = {true, true, true, false};
    for (std::size_t i = 0; i < 4; ++i) pairs.push_back({token("a", i, "f"), token("b", i, "f"), labels[i]});
    CHECK(evaluate(scorer, pairs) == doctest::Approx(0.75));
    CHECK(evaluate(scorer, pairs, 0.45) == doctest::Approx(1.0));
    CHECK_THROWS_AS(evaluate(scorer, std::span<const PairSample>{}), EmptySet);
  }

  TEST_CASE("oracle scorer") {
    const auto a = token("a", 0, "f");
    const auto b = token("b", 3, "f");
    const auto c = token("b", 4, "g");
    CHECK(oracle_score(a, b, 0.0, 1) == 1.0);
    CHECK(oracle_score(a, c, 0.0, 1) == 0.0);
    CHECK(oracle_score(a, b, 1.0, 1) == 0.0);
    CHECK(oracle_score(a, c, 1.0, 1) == 1.0);

    std::size_t flipped = 0;
    const std::size_t n = 20000;
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = token("a", i, "f");
      const auto r = token("b", i, "f");
      const double s = oracle_score(l, r, 0.3, 9);
      REQUIRE(s == oracle_score(r, l, 0.3, 9));
      if (s == 0.0) ++flipped;
    }
    const double sigma = std::sqrt(n * 0.3 * 0.7);
    CHECK(std::abs(static_cast<double>(flipped) - 0.3 * n) <= 4.0 * sigma);
    CHECK_THROWS_AS(OracleScorer(1.5), ConfigError);
  }

  TEST_CASE("make_scorer parsing") {
    CHECK(make_scorer("oracle:0")->score(token("a", 0, "f"), token("b", 0, "f")) == 1.0);
    CHECK(make_scorer("oracle:0.25")->describe().rfind("oracle:0.25", 0) == 0);
    CHECK_THROWS_AS(make_scorer("oracle"), ConfigError);
    CHECK_THROWS_AS(make_scorer("oracle:abc"), ConfigError);
    CHECK_THROWS_AS(make_scorer("oracle:2"), ConfigError);
    CHECK_THROWS_AS(make_scorer("siamese:"), ConfigError);
    CHECK_THROWS_AS(make_scorer("nearest:3"), ConfigError);
    CHECK_THROWS_AS(make_scorer("siamese:/no/such/file.bin"), CheckpointError);

    testing::TempDir dir("mk");
    save_checkpoint(dir / "m.bin", small_model(1));
    const auto s = make_scorer("siamese:" + (dir / "m.bin").string());
    CHECK(dynamic_cast<const SiameseScorer*>(s.get()) != nullptr);
  }

  TEST_CASE("short training run is deterministic and reports every epoch") {
    CorpusConfig cc;
    cc.manuscripts = 4;
    cc.vocab_size = 12;
    cc.lines = 2;
    cc.canvas = kSmall;
    cc.seed = 11;
    const ManuscriptCorpus corpus = synthesize_corpus(cc);
    const auto plans = enumerate_split_plans(corpus, 3);
    const DatasetBundle bundle = build_bundle(corpus, plans.front());
    REQUIRE_FALSE(bundle.train.empty());

    nn::TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 8;
    tc.learning_rate = 0.01;
    tc.init_stddev = 1.0;
    tc.init_scheme = nn::InitScheme::FanInScaled;
    tc.seed = 4;
    const auto model = make_siamese(testing::reduced_tower(1.0 / 16.0), kSmall, 1.0 / 16.0, 1.0, 4,
                                    nn::InitScheme::FanInScaled);
    std::size_t callbacks = 0;
    const TrainResult r1 = train(model, bundle, tc, [&](std::size_t, const EpochStats&) { ++callbacks; });
    const TrainResult r2 = train(model, bundle, tc);
    CHECK(callbacks == 3);
    CHECK(r1.report.epochs.size() == 3);
    CHECK(r1.model == r2.model);
    CHECK(r1.report.best_epoch < 3);
    double best = 0.0;
    for (const auto& e : r1.report.epochs) {
      CHECK(std::isfinite(e.train_loss));
      CHECK(e.train_accuracy >= 0.0);
      CHECK(e.train_accuracy <= 1.0);
      best = std::max(best, e.validation_accuracy);
    }
    CHECK(r1.report.best_validation_accuracy == best);
    CHECK(r1.report.epochs[r1.report.best_epoch].validation_accuracy == best);
    CHECK(evaluate(SiameseScorer(std::make_shared<const SiameseModel>(r1.model)), bundle.validation) ==
          doctest::Approx(best));

    DatasetBundle empty = bundle;
    empty.train.clear();
    CHECK_THROWS_AS(train(model, empty, tc), EmptyTrainingSet);
  }
}
