#include "scriptalign/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "csv.hpp"
#include "scriptalign/align.hpp"
#include "scriptalign/assignment.hpp"
#include "scriptalign/dataset.hpp"
#include "scriptalign/error.hpp"
#include "scriptalign/eval.hpp"
#include "scriptalign/log.hpp"
#include "scriptalign/siamese.hpp"
#include "scriptalign/synth.hpp"

namespace scriptalign {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct SeedOption {
  std::uint64_t value = 0;
  CLI::Option* option = nullptr;

  void add(CLI::App* app) { option = app->add_option("--seed", value, "RNG seed (generated and recorded if omitted)"); }

  // Resolves the seed, drawing one when the flag was not given.
  std::uint64_t resolve(std::ostream& err) {
    if (option->count() == 0) {
      value = std::random_device{}();
      value = (value << 32) ^ std::random_device{}();
      err << "seed: " << value << " (generated)\n";
    }
    return value;
  }
};

struct CanvasOption {
  CanvasSpec canvas;

  void add(CLI::App* app) {
    app->add_option("--height", canvas.target_height, "canvas height in pixels")->capture_default_str();
    app->add_option("--width", canvas.target_width, "canvas width in pixels")->capture_default_str();
  }
};

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write " + path);
  file << text;
  if (!file) throw Error("failed writing " + path);
}

void add_train_options(CLI::App* app, nn::TrainConfig& tc, double& multiplier) {
  app->add_option("--epochs", tc.epochs, "training epochs")->capture_default_str();
  app->add_option("--batch-size", tc.batch_size, "mini-batch size")->capture_default_str();
  app->add_option("--lr", tc.learning_rate, "learning rate")->capture_default_str();
  app->add_option("--momentum", tc.momentum, "momentum")->capture_default_str();
  app->add_option("--init-stddev", tc.init_stddev, "stddev of the zero-mean normal initializer")
      ->capture_default_str();
  const std::map<std::string, nn::InitScheme> schemes{{"fixed", nn::InitScheme::Fixed},
                                                      {"fan-in", nn::InitScheme::FanInScaled}};
  app->add_option("--init", tc.init_scheme, "initializer: fixed (stddev) or fan-in (stddev*sqrt(2/fan_in))")
      ->transform(CLI::CheckedTransformer(schemes, CLI::ignore_case))
      ->default_str("fixed");
  app->add_option("--multiplier", multiplier, "channel multiplier in (0,1]")->capture_default_str();
  app->add_option("--workers", tc.workers, "worker threads per training run")->capture_default_str();
}

ordered_json train_config_json(const nn::TrainConfig& tc, double multiplier, const CanvasSpec& canvas) {
  return ordered_json{{"epochs", tc.epochs},
                      {"batch_size", tc.batch_size},
                      {"learning_rate", tc.learning_rate},
                      {"momentum", tc.momentum},
                      {"init_stddev", tc.init_stddev},
                      {"init_scheme", tc.init_scheme == nn::InitScheme::Fixed ? "fixed" : "fan-in"},
                      {"seed", tc.seed},
                      {"multiplier", multiplier},
                      {"canvas", {{"height", canvas.target_height}, {"width", canvas.target_width}}}};
}

const Document& pick_document(const ManuscriptCorpus& corpus, const std::string& id, const std::string& what) {
  if (!id.empty()) return corpus.manuscripts[corpus.manuscript_index(id)];
  if (corpus.manuscripts.size() != 1) {
    throw ManifestError(what + " manifest holds " + std::to_string(corpus.manuscripts.size()) +
                        " manuscripts; choose one with --" + what + "-id");
  }
  return corpus.manuscripts.front();
}

SimilarityMatrix read_matrix(std::istream& in) {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    csv::strip_cr(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    if (!csv::split(line, fields)) throw ConfigError("matrix row " + std::to_string(rows + 1) + ": unterminated quote");
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols) {
      throw ConfigError("matrix row " + std::to_string(rows + 1) + " has " + std::to_string(fields.size()) +
                        " values, expected " + std::to_string(cols));
    }
    for (const auto& f : fields) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(f, &used));
        if (used != f.size()) throw std::invalid_argument(f);
      } catch (const std::exception&) {
        throw ConfigError("matrix row " + std::to_string(rows + 1) + ": '" + f + "' is not a number");
      }
    }
    ++rows;
  }
  if (rows == 0) throw ConfigError("matrix is empty");
  return SimilarityMatrix(rows, cols, std::move(values));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  init_logging();
  CLI::App app{"Subword-level alignment of handwritten manuscript versions", "scriptalign"};
  app.set_config("--config", "", "INI-style config file; [section] per subcommand, flags take precedence");
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.require_subcommand(1);

  // synth
  CorpusConfig synth_cfg;
  std::string synth_out;
  SeedOption synth_seed;
  CanvasOption synth_canvas;
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-manuscript corpus");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--manuscripts", synth_cfg.manuscripts, "number of manuscripts")->capture_default_str();
  synth->add_option("--vocab", synth_cfg.vocab_size, "number of subword forms")->capture_default_str();
  synth->add_option("--lines", synth_cfg.lines, "lines per manuscript")->capture_default_str();
  synth->add_option("--min-tokens", synth_cfg.min_tokens, "minimum tokens per base line")->capture_default_str();
  synth->add_option("--max-tokens", synth_cfg.max_tokens, "maximum tokens per base line")->capture_default_str();
  synth->add_option("--zipf", synth_cfg.zipf_exponent, "Zipf exponent of form frequencies")->capture_default_str();
  synth->add_option("--p-swap", synth_cfg.rates.p_swap, "adjacent swap probability")->capture_default_str();
  synth->add_option("--p-insert", synth_cfg.rates.p_insert, "insertion probability")->capture_default_str();
  synth->add_option("--p-delete", synth_cfg.rates.p_delete, "deletion probability")->capture_default_str();
  synth->add_option("--p-replace", synth_cfg.rates.p_replace, "replacement probability")->capture_default_str();
  synth_canvas.add(synth);
  synth_seed.add(synth);

  // dataset
  std::string ds_corpus;
  std::string ds_out;
  std::string ds_heldout;
  PairOptions ds_pairs;
  SeedOption ds_seed;
  CanvasOption ds_canvas;
  auto* dataset = app.add_subcommand("dataset", "build leave-two-out pair datasets from a manifest");
  dataset->add_option("--corpus", ds_corpus, "manifest CSV")->required();
  dataset->add_option("--out", ds_out, "output directory")->required();
  dataset->add_option("--heldout", ds_heldout, "held-out pair 'a,b'; all pairs when omitted");
  dataset->add_option("--cap", ds_pairs.cap_per_form, "true pairs kept per form")->capture_default_str();
  dataset->add_option("--min-share", ds_pairs.min_share, "per-manuscript image share target")->capture_default_str();
  dataset->add_option("--retries", ds_pairs.share_retries, "redraws for the share target")->capture_default_str();
  ds_canvas.add(dataset);
  ds_seed.add(dataset);

  // train
  std::string tr_bundle;
  std::string tr_out;
  nn::TrainConfig tr_cfg;
  double tr_multiplier = 1.0;
  SeedOption tr_seed;
  CanvasOption tr_canvas;
  auto* train_cmd = app.add_subcommand("train", "train the twin network on a dataset bundle");
  train_cmd->add_option("--bundle", tr_bundle, "bundle directory")->required();
  train_cmd->add_option("--out", tr_out, "checkpoint path (a .json sidecar is written next to it)")->required();
  add_train_options(train_cmd, tr_cfg, tr_multiplier);
  tr_canvas.add(train_cmd);
  tr_seed.add(train_cmd);

  // eval
  std::string ev_bundle;
  std::string ev_scorer;
  bool ev_cv = false;
  std::string ev_corpus;
  std::string ev_out = "-";
  std::string ev_summary;
  bool ev_no_timing = false;
  CrossValConfig ev_cfg;
  SeedOption ev_seed;
  CanvasOption ev_canvas;
  auto* eval_cmd = app.add_subcommand("eval", "score a bundle or run full cross-validation");
  eval_cmd->add_option("--bundle", ev_bundle, "bundle directory to score with --scorer");
  eval_cmd->add_option("--scorer", ev_scorer,
                       "siamese:<checkpoint> or oracle:<flip>; with --cross-validation replaces training");
  eval_cmd->add_flag("--cross-validation", ev_cv, "train and test on every leave-two-out split");
  eval_cmd->add_option("--corpus", ev_corpus, "manifest CSV for --cross-validation");
  eval_cmd->add_option("--out", ev_out, "report CSV path ('-' for stdout)")->capture_default_str();
  eval_cmd->add_option("--summary", ev_summary, "JSON summary path");
  eval_cmd->add_flag("--no-timing", ev_no_timing, "omit the seconds column");
  eval_cmd->add_option("--split-workers", ev_cfg.workers, "splits run concurrently")->capture_default_str();
  eval_cmd->add_option("--cap", ev_cfg.pairs.cap_per_form, "true pairs kept per form")->capture_default_str();
  add_train_options(eval_cmd, ev_cfg.train, ev_cfg.multiplier);
  ev_canvas.add(eval_cmd);
  ev_seed.add(eval_cmd);

  // align
  std::string al_left;
  std::string al_right;
  std::string al_left_id;
  std::string al_right_id;
  std::string al_scorer;
  std::string al_format = "json";
  std::string al_out = "-";
  AlignConfig al_cfg;
  SeedOption al_seed;
  CanvasOption al_canvas;
  auto* align_cmd = app.add_subcommand("align", "align two manuscripts line by line");
  align_cmd->add_option("--left", al_left, "left manifest CSV")->required();
  align_cmd->add_option("--right", al_right, "right manifest CSV")->required();
  align_cmd->add_option("--left-id", al_left_id, "manuscript id inside the left manifest");
  align_cmd->add_option("--right-id", al_right_id, "manuscript id inside the right manifest");
  align_cmd->add_option("--scorer", al_scorer, "siamese:<checkpoint> or oracle:<flip>")->required();
  align_cmd->add_option("--min-window", al_cfg.min_window, "minimal window size")->capture_default_str();
  align_cmd->add_option("--threshold", al_cfg.threshold, "similarity threshold")->capture_default_str();
  align_cmd->add_option("--max-growth", al_cfg.max_growth, "cap on window growth")->capture_default_str();
  align_cmd->add_option("--format", al_format, "json, tsv or html")
      ->check(CLI::IsMember({"json", "tsv", "html"}))
      ->capture_default_str();
  align_cmd->add_option("--out", al_out, "output path ('-' for stdout)")->capture_default_str();
  al_canvas.add(align_cmd);
  al_seed.add(align_cmd);

  // assign
  std::string as_matrix = "-";
  auto* assign_cmd = app.add_subcommand("assign", "solve the assignment for a CSV similarity matrix");
  assign_cmd->add_option("--matrix", as_matrix, "CSV matrix path ('-' for stdin)")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const auto parsed = app.get_subcommands();
    const CLI::App* context = parsed.empty() ? &app : parsed.back();
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      out << context->help();
      return 0;
    }
    err << "error: " << e.what() << "\n" << context->help();
    return 2;
  }

  try {
    if (synth->parsed()) {
      synth_cfg.seed = synth_seed.resolve(err);
      synth_cfg.canvas = synth_canvas.canvas;
      const ManuscriptCorpus corpus = synthesize_corpus(synth_cfg);
      const fs::path manifest = write_corpus(synth_out, corpus);
      for (const auto& doc : corpus.manuscripts) {
        write_manifest(fs::path(synth_out) / (doc.manuscript_id + ".csv"), make_corpus({doc}));
      }
      const ordered_json meta{
          {"seed", synth_cfg.seed},
          {"manuscripts", synth_cfg.manuscripts},
          {"vocab_size", synth_cfg.vocab_size},
          {"lines", synth_cfg.lines},
          {"min_tokens", synth_cfg.min_tokens},
          {"max_tokens", synth_cfg.max_tokens},
          {"zipf_exponent", synth_cfg.zipf_exponent},
          {"rates",
           {{"swap", synth_cfg.rates.p_swap},
            {"insert", synth_cfg.rates.p_insert},
            {"delete", synth_cfg.rates.p_delete},
            {"replace", synth_cfg.rates.p_replace}}},
          {"canvas", {{"height", synth_cfg.canvas.target_height}, {"width", synth_cfg.canvas.target_width}}},
          {"annotations", corpus.annotation_count()},
          {"forms", corpus.form_index.size()}};
      write_text((fs::path(synth_out) / "synth.json").string(), meta.dump(2) + "\n", out);
      out << "wrote " << corpus.annotation_count() << " annotations to " << manifest.string() << "\n";
      return 0;
    }

    if (dataset->parsed()) {
      const std::uint64_t seed = ds_seed.resolve(err);
      const ManuscriptCorpus corpus = load_corpus(ds_corpus, ds_canvas.canvas);
      std::vector<SplitPlan> plans = enumerate_split_plans(corpus, seed);
      if (!ds_heldout.empty()) {
        std::vector<std::string> ids;
        if (!csv::split(ds_heldout, ids) || ids.size() != 2) throw ConfigError("--heldout expects two ids 'a,b'");
        const auto it = std::find_if(plans.begin(), plans.end(), [&](const SplitPlan& p) {
          return (p.heldout.first == ids[0] && p.heldout.second == ids[1]) ||
                 (p.heldout.first == ids[1] && p.heldout.second == ids[0]);
        });
        if (it == plans.end()) throw ConfigError("no split holds out '" + ds_heldout + "'");
        const SplitPlan plan = *it;
        TrainingPairStats stats;
        write_bundle(ds_out, build_bundle(corpus, plan, ds_pairs, &stats), ds_pairs, stats);
        out << "wrote bundle " << plan.label() << " to " << ds_out << "\n";
        return 0;
      }
      ordered_json index = ordered_json::array();
      for (std::size_t i = 0; i < plans.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "split_%02zu", i + 1);
        const std::string dir = std::string(name) + "_" + plans[i].heldout.first + "_" + plans[i].heldout.second;
        TrainingPairStats stats;
        write_bundle(fs::path(ds_out) / dir, build_bundle(corpus, plans[i], ds_pairs, &stats), ds_pairs, stats);
        index.push_back({{"directory", dir}, {"heldout", {plans[i].heldout.first, plans[i].heldout.second}}});
      }
      write_text((fs::path(ds_out) / "splits.json").string(),
                 ordered_json{{"seed", seed}, {"splits", index}}.dump(2) + "\n", out);
      out << "wrote " << plans.size() << " bundles to " << ds_out << "\n";
      return 0;
    }

    if (train_cmd->parsed()) {
      tr_cfg.seed = tr_seed.resolve(err);
      nn::validate(tr_cfg);
      const DatasetBundle bundle = load_bundle(tr_bundle, tr_canvas.canvas);
      SiameseModel model = make_siamese(tr_canvas.canvas, tr_multiplier, tr_cfg);
      TrainResult result = train(std::move(model), bundle, tr_cfg, [&](std::size_t epoch, const EpochStats& s) {
        spdlog::info("epoch {}/{} loss {:.5f} train {:.4f} validation {:.4f}", epoch + 1, tr_cfg.epochs,
                     s.train_loss, s.train_accuracy, s.validation_accuracy);
      });
      save_checkpoint(tr_out, result.model);
      const SiameseScorer scorer(std::make_shared<const SiameseModel>(result.model));
      const BundleScores scores = evaluate_bundle(scorer, bundle);
      ordered_json epochs = ordered_json::array();
      for (const auto& e : result.report.epochs) {
        epochs.push_back({{"train_loss", e.train_loss},
                          {"train_accuracy", e.train_accuracy},
                          {"validation_accuracy", e.validation_accuracy}});
      }
      const ordered_json sidecar{
          {"config", train_config_json(tr_cfg, tr_multiplier, tr_canvas.canvas)},
          {"bundle", {{"heldout", {bundle.plan.heldout.first, bundle.plan.heldout.second}},
                      {"train", bundle.train.size()},
                      {"validation", bundle.validation.size()},
                      {"test", bundle.test.size()}}},
          {"best_epoch", result.report.best_epoch},
          {"best_validation_accuracy", result.report.best_validation_accuracy},
          {"test_accuracy", scores.test_accuracy},
          {"epochs", epochs}};
      write_text(tr_out + ".json", sidecar.dump(2) + "\n", out);
      out << "best epoch " << result.report.best_epoch + 1 << ": validation "
          << result.report.best_validation_accuracy << ", test " << scores.test_accuracy << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      if (ev_cv) {
        if (ev_corpus.empty()) throw ConfigError("--cross-validation needs --corpus");
        const std::uint64_t seed = ev_seed.resolve(err);
        ev_cfg.canvas = ev_canvas.canvas;
        ev_cfg.scorer_override = ev_scorer;
        const ManuscriptCorpus corpus = load_corpus(ev_corpus, ev_cfg.canvas);
        const CrossValReport report = run_cross_validation(corpus, ev_cfg, seed);
        write_text(ev_out, report_to_csv(report, !ev_no_timing), out);
        if (!ev_summary.empty()) write_text(ev_summary, report_summary_json(report, ev_cfg, seed), out);
        return 0;
      }
      if (ev_bundle.empty() || ev_scorer.empty()) {
        throw ConfigError("eval needs --bundle and --scorer, or --cross-validation --corpus");
      }
      const std::uint64_t seed = ev_seed.option->count() ? ev_seed.value : 0;
      const auto scorer = make_scorer(ev_scorer, seed);
      CanvasSpec canvas = ev_canvas.canvas;
      if (const auto* s = dynamic_cast<const SiameseScorer*>(scorer.get())) canvas = s->model().canvas;
      const DatasetBundle bundle = load_bundle(ev_bundle, canvas);
      const BundleScores scores = evaluate_bundle(*scorer, bundle);
      const ordered_json result{{"scorer", scorer->describe()},
                                {"validation_accuracy", scores.validation_accuracy},
                                {"test_accuracy", scores.test_accuracy},
                                {"validation_size", bundle.validation.size()},
                                {"test_size", bundle.test.size()}};
      write_text(ev_out, result.dump(2) + "\n", out);
      return 0;
    }

    if (align_cmd->parsed()) {
      const std::uint64_t seed = al_seed.option->count() ? al_seed.value : 0;
      const auto scorer = make_scorer(al_scorer, seed);
      CanvasSpec canvas = al_canvas.canvas;
      if (const auto* s = dynamic_cast<const SiameseScorer*>(scorer.get())) canvas = s->model().canvas;
      al_cfg.scorer = scorer.get();
      validate(al_cfg);
      const ManuscriptCorpus left = load_corpus(al_left, canvas);
      const ManuscriptCorpus right = load_corpus(al_right, canvas);
      const Document& ldoc = pick_document(left, al_left_id, "left");
      const Document& rdoc = pick_document(right, al_right_id, "right");
      const auto results = align_documents(ldoc, rdoc, al_cfg);
      std::string text;
      if (al_format == "json") {
        text = alignment_to_json(ldoc, rdoc, results);
      } else if (al_format == "tsv") {
        text = alignment_to_tsv(ldoc, rdoc, results);
      } else {
        text = alignment_to_html(ldoc, rdoc, results);
      }
      write_text(al_out, text, out);
      return 0;
    }

    if (assign_cmd->parsed()) {
      SimilarityMatrix matrix = [&] {
        if (as_matrix == "-") return read_matrix(std::cin);
        std::ifstream in(as_matrix);
        if (!in) throw ConfigError("cannot open matrix file " + as_matrix);
        return read_matrix(in);
      }();
      const Assignment a = solve_assignment(matrix);
      ordered_json matches = ordered_json::array();
      for (const auto& m : a.matches) matches.push_back({m.left, m.right});
      out << ordered_json{{"matches", matches}, {"total_score", a.total_score}, {"inversions", a.inversions}}.dump(2)
          << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace scriptalign
