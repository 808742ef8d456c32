#include "scriptalign/eval.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "scriptalign/error.hpp"
#include "scriptalign/log.hpp"
#include "scriptalign/rng.hpp"

namespace scriptalign {

namespace {

using nlohmann::ordered_json;

std::string fmt_double(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

ordered_json config_json(const CrossValConfig& c, std::uint64_t seed) {
  return ordered_json{
      {"seed", seed},
      {"canvas", {{"height", c.canvas.target_height}, {"width", c.canvas.target_width}}},
      {"multiplier", c.multiplier},
      {"pairs",
       {{"cap_per_form", c.pairs.cap_per_form},
        {"min_share", c.pairs.min_share},
        {"share_retries", c.pairs.share_retries}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"momentum", c.train.momentum},
        {"init_stddev", c.train.init_stddev},
        {"init_scheme", c.train.init_scheme == nn::InitScheme::Fixed ? "fixed" : "fan_in"}}},
      {"scorer_override", c.scorer_override},
  };
}

CrossValRow run_split(const ManuscriptCorpus& corpus, const SplitPlan& plan, const CrossValConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  const DatasetBundle bundle = build_bundle(corpus, plan, config.pairs);
  CrossValRow row;
  row.heldout_a = plan.heldout.first;
  row.heldout_b = plan.heldout.second;
  row.train_size = bundle.train.size();
  row.validation_size = bundle.validation.size();
  row.test_size = bundle.test.size();
  row.seed = plan.seed;

  BundleScores scores;
  if (!config.scorer_override.empty()) {
    scores = evaluate_bundle(*make_scorer(config.scorer_override, plan.seed), bundle);
  } else {
    nn::TrainConfig tc = config.train;
    tc.seed = derive_seed(plan.seed, "train");
    SiameseModel model = make_siamese(config.canvas, config.multiplier, tc);
    TrainResult result = train(std::move(model), bundle, tc);
    row.best_epoch = result.report.best_epoch;
    const SiameseScorer scorer(std::make_shared<const SiameseModel>(std::move(result.model)));
    scores = evaluate_bundle(scorer, bundle);
  }
  row.validation_accuracy = scores.validation_accuracy;
  row.test_accuracy = scores.test_accuracy;
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return row;
}

}  // namespace

double CrossValReport::mean_test_accuracy() const {
  if (rows.empty()) throw EmptySet("report has no rows");
  return std::accumulate(rows.begin(), rows.end(), 0.0,
                         [](double acc, const CrossValRow& r) { return acc + r.test_accuracy; }) /
         static_cast<double>(rows.size());
}

double CrossValReport::mean_validation_accuracy() const {
  if (rows.empty()) throw EmptySet("report has no rows");
  return std::accumulate(rows.begin(), rows.end(), 0.0,
                         [](double acc, const CrossValRow& r) { return acc + r.validation_accuracy; }) /
         static_cast<double>(rows.size());
}

BundleScores evaluate_bundle(const SimilarityScorer& scorer, const DatasetBundle& bundle) {
  return {evaluate(scorer, bundle.validation), evaluate(scorer, bundle.test)};
}

CrossValReport run_cross_validation(const ManuscriptCorpus& corpus, const CrossValConfig& config,
                                    std::uint64_t seed, const SplitCallback& on_split) {
  if (config.scorer_override.empty()) nn::validate(config.train);
  const std::vector<SplitPlan> plans = enumerate_split_plans(corpus, seed);
  CrossValReport report;
  report.rows.resize(plans.size());

  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  std::vector<std::exception_ptr> errors(plans.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < plans.size(); i = next++) {
      try {
        report.rows[i] = run_split(corpus, plans[i], config);
        spdlog::info("split {} ({}): test {:.4f} validation {:.4f}", i + 1, plans[i].label(),
                     report.rows[i].test_accuracy, report.rows[i].validation_accuracy);
        if (on_split) {
          std::lock_guard lock(callback_mutex);
          on_split(i, report.rows[i]);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.workers, plans.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return report;
}

std::string report_to_csv(const CrossValReport& report, bool with_timing) {
  std::ostringstream out;
  out << "heldout,test_accuracy,validation_accuracy,train_size,validation_size,test_size,best_epoch,seed";
  if (with_timing) out << ",seconds";
  out << '\n';
  for (const auto& r : report.rows) {
    out << '"' << r.heldout_a << ',' << r.heldout_b << "\"," << fmt_double(r.test_accuracy, 6) << ','
        << fmt_double(r.validation_accuracy, 6) << ',' << r.train_size << ',' << r.validation_size << ','
        << r.test_size << ',' << r.best_epoch << ',' << r.seed;
    if (with_timing) out << ',' << fmt_double(r.seconds, 3);
    out << '\n';
  }
  return out.str();
}

std::string config_fingerprint(const CrossValConfig& config, std::uint64_t seed) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_string(config_json(config, seed).dump())));
  return buf;
}

std::string report_summary_json(const CrossValReport& report, const CrossValConfig& config,
                                std::uint64_t seed) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"heldout", {r.heldout_a, r.heldout_b}},
                    {"test_accuracy", r.test_accuracy},
                    {"validation_accuracy", r.validation_accuracy}});
  }
  const ordered_json summary{
      {"splits", report.rows.size()},
      {"mean_test_accuracy", report.rows.empty() ? 0.0 : report.mean_test_accuracy()},
      {"mean_validation_accuracy", report.rows.empty() ? 0.0 : report.mean_validation_accuracy()},
      {"fingerprint", config_fingerprint(config, seed)},
      {"config", config_json(config, seed)},
      {"rows", rows},
  };
  return summary.dump(2) + "\n";
}

}  // namespace scriptalign
