// promptbias: speaker-ablation bias analysis over two-speaker interview corpora.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <set>

#include "promptbias/analysis.hpp"
#include "promptbias/corpus.hpp"
#include "promptbias/error.hpp"
#include "promptbias/experiments.hpp"
#include "promptbias/io.hpp"
#include "promptbias/render.hpp"
#include "promptbias/synth.hpp"

namespace fs = std::filesystem;
using namespace promptbias;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Options {
  std::string corpus;
  std::string speaker = "interviewer";
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int trials = 100;
  int threads = 1;
  std::string half = "second";
  std::optional<std::size_t> bins;
  std::string spec;
  std::string run;
  std::string pred_a;
  std::string pred_b;
  std::vector<std::string> interviews;
};

fs::path output_dir(const Options& o, const std::string& command) {
  if (!o.out.empty()) return o.out;
  if (const char* root = std::getenv("PROMPTBIAS_OUT"); root != nullptr && *root != '\0') {
    return fs::path(root) / command;
  }
  throw UsageError(command + ": --out is required (or set PROMPTBIAS_OUT)");
}

/// A directory is a corpus manifest; a .json file is a synth spec generated
/// in memory.
Dataset load_source(const std::string& path) {
  if (path.empty()) throw UsageError("--corpus is required");
  if (!fs::exists(path)) throw DataError("corpus path '" + path + "' does not exist");
  if (fs::is_directory(path)) return load_dataset(path);
  return generate_corpus(parse_synth_spec(read_file(path))).data;
}

PipelineConfig resolve_config(const Options& o) {
  PipelineConfig cfg;
  if (!o.config.empty()) cfg = parse_pipeline_config(read_file(o.config));
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.bins) cfg.analysis.bins = *o.bins;
  return cfg;
}

class Manifest {
 public:
  Manifest(std::string command, const Options& o) : command_(std::move(command)) {
    args_["corpus"] = o.corpus;
    args_["speaker"] = o.speaker;
    args_["config"] = o.config;
    if (o.seed) args_["seed"] = *o.seed;
  }

  void arg(const std::string& key, const nlohmann::ordered_json& value) { args_[key] = value; }
  void config(const std::string& text) { config_ = text; }
  void artifact(const std::string& path) { artifacts_.insert(path); }

  void write(const fs::path& dir) const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["args"] = args_;
    if (!config_.empty()) {
      j["config"] = nlohmann::ordered_json::parse(config_);
      j["config_hash"] = hex64(fnv1a(config_));
    }
    j["artifacts"] = std::vector<std::string>(artifacts_.begin(), artifacts_.end());
    write_file(dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  nlohmann::ordered_json args_ = nlohmann::ordered_json::object();
  std::string config_;
  std::set<std::string> artifacts_;
};

void list_artifacts(Manifest& m, const fs::path& dir) {
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
      m.artifact(fs::relative(entry.path(), dir).generic_string());
    }
  }
}

int cmd_synth(const Options& o) {
  SynthSpec spec;
  if (!o.spec.empty()) spec = parse_synth_spec(read_file(o.spec));
  if (o.seed) spec.seed = *o.seed;
  const auto dir = output_dir(o, "synth");
  const auto corpus = generate_corpus(spec);
  write_dataset(corpus.data, dir);
  write_file(dir / "synth_descriptor.json", format_synth_descriptor(corpus.descriptor));
  write_file(dir / "synth_spec.json", format_synth_spec(spec));
  Manifest m("synth", o);
  m.arg("spec", o.spec);
  list_artifacts(m, dir);
  m.write(dir);
  std::cout << "wrote " << corpus.data.train.transcripts.size() << " train / "
            << corpus.data.eval.transcripts.size() << " eval interviews to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_ingest(const Options& o) {
  const auto data = load_source(o.corpus);
  nlohmann::ordered_json summary;
  std::printf("%-6s %-12s %5s %5s %5s %8s %10s %8s\n", "split", "speaker", "files", "C", "D", "vocab",
              "avg_words", "sd");
  for (const auto* corpus : {&data.train, &data.eval}) {
    const std::string split = corpus->split == Split::train ? "train" : "eval";
    std::size_t depressed = 0;
    for (const auto& t : corpus->transcripts) {
      depressed += corpus->labels.label(t.interview_id) == Label::depressed ? 1 : 0;
    }
    const std::size_t files = corpus->transcripts.size();
    for (const auto& view : {std::string("interviewer"), std::string("participant"), std::string("all")}) {
      const auto docs = speaker_views(*corpus, parse_speaker_view(view));
      std::set<std::string> vocab;
      double sum = 0.0, sq = 0.0;
      for (const auto& d : docs) {
        vocab.insert(d.tokens.begin(), d.tokens.end());
        sum += static_cast<double>(d.tokens.size());
        sq += static_cast<double>(d.tokens.size()) * static_cast<double>(d.tokens.size());
      }
      const double n = std::max<double>(1.0, static_cast<double>(docs.size()));
      const double mean = sum / n;
      const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
      std::printf("%-6s %-12s %5zu %5zu %5zu %8zu %10.1f %8.1f\n", split.c_str(), view.c_str(), files,
                  files - depressed, depressed, vocab.size(), mean, sd);
      summary[split][view] = {{"files", files}, {"control", files - depressed}, {"depressed", depressed},
                              {"vocab_size", vocab.size()}, {"avg_words", mean}, {"sd_words", sd}};
    }
  }
  if (!o.out.empty() || std::getenv("PROMPTBIAS_OUT") != nullptr) {
    const auto dir = output_dir(o, "ingest");
    write_file(dir / "corpus_summary.json", summary.dump(2) + "\n");
    Manifest m("ingest", o);
    list_artifacts(m, dir);
    m.write(dir);
  }
  return kExitOk;
}

ExperimentReport run_pipeline(const Options& o, const SliceRange& slice, Manifest& m) {
  const auto data = load_source(o.corpus);
  const auto cfg = resolve_config(o);
  m.config(format_pipeline_config(cfg));
  return run_ablation(data, parse_speaker_view(o.speaker), cfg, slice);
}

int cmd_ablate(const Options& o, const std::string& command, const SliceRange& slice) {
  const auto dir = output_dir(o, command);
  Manifest m(command, o);
  if (command == "half") m.arg("half", o.half);
  const auto report = run_pipeline(o, slice, m);
  write_report(report, dir);
  list_artifacts(m, dir);
  m.write(dir);
  std::cout << report.experiment_id << "\n" << format_metrics_table(report.metrics);
  return kExitOk;
}

int cmd_train(const Options& o) {
  const auto dir = output_dir(o, "train");
  Manifest m("train", o);
  const auto report = run_pipeline(o, {}, m);
  write_file(dir / "checkpoint.json", format_checkpoint(checkpoint_of(report)));
  write_graph(report.graph, dir / "graph");
  write_file(dir / "keywords.tsv", keywords_tsv(report.keywords));
  write_file(dir / "features.tsv", format_selection_tsv(report.full_vocabulary, report.selected));
  std::string loss = "epoch,loss\n";
  for (std::size_t e = 0; e < report.loss_history.size(); ++e) {
    loss += std::to_string(e + 1) + "," + nlohmann::json(report.loss_history[e]).dump() + "\n";
  }
  write_file(dir / "loss.csv", loss);
  list_artifacts(m, dir);
  m.write(dir);
  std::cout << "trained " << report.experiment_id << " (" << report.graph.n() << " nodes, fingerprint "
            << report.fingerprint << ")\n";
  return kExitOk;
}

int cmd_evaluate(const Options& o) {
  if (o.run.empty()) throw UsageError("evaluate: --run is required");
  const auto dir = output_dir(o, "evaluate");
  const auto replay = replay_run(o.run, load_source(o.corpus));
  write_file(dir / "predictions.json", format_predictions(replay.predictions));
  write_file(dir / "metrics.json", format_metrics(replay.metrics));
  Manifest m("evaluate", o);
  m.arg("run", o.run);
  list_artifacts(m, dir);
  m.write(dir);
  std::cout << format_metrics_table(replay.metrics);
  return kExitOk;
}

int cmd_ensemble(const Options& o) {
  if (o.pred_a.empty() || o.pred_b.empty()) throw UsageError("ensemble: --pred-a and --pred-b are required");
  const auto combined = ensemble_and(parse_predictions(read_file(o.pred_a)), parse_predictions(read_file(o.pred_b)));
  std::optional<Metrics> metrics;
  if (!o.corpus.empty()) metrics = evaluate_f1(combined, load_source(o.corpus).eval.labels);
  if (o.out.empty() && std::getenv("PROMPTBIAS_OUT") == nullptr) {
    std::cout << format_predictions(combined);
  } else {
    const auto dir = output_dir(o, "ensemble");
    write_file(dir / "predictions.json", format_predictions(combined));
    if (metrics) write_file(dir / "metrics.json", format_metrics(*metrics));
    Manifest m("ensemble", o);
    m.arg("pred_a", o.pred_a);
    m.arg("pred_b", o.pred_b);
    list_artifacts(m, dir);
    m.write(dir);
  }
  if (metrics) std::cout << format_metrics_table(*metrics);
  return kExitOk;
}

int cmd_search(const Options& o) {
  const auto dir = output_dir(o, "search");
  const auto data = load_source(o.corpus);
  const auto cfg = resolve_config(o);
  const auto seed = o.seed.value_or(cfg.train.seed);
  const auto result = hyperparam_search(data, parse_speaker_view(o.speaker), cfg, SearchSpace{}, o.trials, seed, o.threads);
  write_file(dir / "trials.csv", format_trials_csv(result.trials));
  nlohmann::ordered_json best{{"trial", result.best.trial},
                              {"gamma", result.best.learning_rate},
                              {"epochs", result.best.epochs},
                              {"feature_selection", result.best.features.name()},
                              {"macro_f1", result.best.macro_f1},
                              {"seed", result.best.seed}};
  write_file(dir / "best.json", best.dump(2) + "\n");
  Manifest m("search", o);
  m.config(format_pipeline_config(cfg));
  m.arg("trials", o.trials);
  list_artifacts(m, dir);
  m.write(dir);
  std::cout << "best trial " << result.best.trial << ": macro F1 " << result.best.macro_f1 << " (gamma "
            << result.best.learning_rate << ", " << result.best.epochs << " epochs, "
            << result.best.features.name() << ")\n";
  return kExitOk;
}

int cmd_keywords(const Options& o) {
  if (o.run.empty()) throw UsageError("keywords: --run is required");
  const auto dir = output_dir(o, "keywords");
  const auto checkpoint = parse_checkpoint(read_file(fs::path(o.run) / "checkpoint.json"));
  const auto graph = read_graph(fs::path(o.run) / "graph");
  if (hex64(graph_fingerprint(graph)) != checkpoint.graph_fingerprint) {
    throw DataError("keywords: graph fingerprint does not match the checkpoint");
  }
  const auto keywords = extract_keywords(checkpoint.model, graph);
  write_file(dir / "keywords.tsv", keywords_tsv(keywords));
  Manifest m("keywords", o);
  m.arg("run", o.run);
  list_artifacts(m, dir);
  m.write(dir);
  std::cout << keywords.size() << " keywords\n";
  return kExitOk;
}

int cmd_heatmap(const Options& o) {
  if (o.run.empty()) throw UsageError("heatmap: --run is required");
  const auto dir = output_dir(o, "heatmap");
  const auto data = load_source(o.corpus);
  const auto checkpoint = parse_checkpoint(read_file(fs::path(o.run) / "checkpoint.json"));
  const auto keywords = parse_keywords_tsv(read_file(fs::path(o.run) / "keywords.tsv"));
  auto analysis = checkpoint.config.analysis;
  if (o.bins) analysis.bins = *o.bins;
  const auto h = build_heatmap(data, checkpoint.speaker, keywords, analysis.bins, analysis.smoothing);
  write_file(dir / "heatmap.csv", heatmap_csv(h));
  write_file(dir / "heatmap.svg", heatmap_svg(h));
  write_file(dir / "heatmap.json", heatmap_metadata(h));
  write_file(dir / "localization.json", format_localization(localization_stats(h, analysis.split_frac)));
  for (const auto& id : o.interviews) {
    const Transcript* found = nullptr;
    for (const auto* corpus : {&data.train, &data.eval}) {
      for (const auto& t : corpus->transcripts) {
        if (t.interview_id == id) found = &t;
      }
    }
    if (found == nullptr) throw DataError("heatmap: unknown interview '" + id + "'");
    write_file(dir / ("turns_" + id + ".html"), turn_coloring_html(*found, keywords));
  }
  Manifest m("heatmap", o);
  m.arg("run", o.run);
  m.arg("bins", analysis.bins);
  list_artifacts(m, dir);
  m.write(dir);
  return kExitOk;
}

void add_data_flags(CLI::App* sub, Options& o) {
  sub->add_option("--corpus", o.corpus, "Corpus directory or synth spec JSON");
  sub->add_option("--speaker", o.speaker, "interviewer | participant | all")
      ->check(CLI::IsMember({"interviewer", "participant", "all"}));
  sub->add_option("--config", o.config, "Run config JSON");
  sub->add_option("--seed", o.seed, "Seed override");
  sub->add_option("--bins", o.bins, "Progression bins");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interviewer-prompt bias analysis with speaker-ablated text-graph GCNs"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--spec", o.spec, "Synth spec JSON");
  synth->add_option("--seed", o.seed, "Seed override");

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and print statistics");
  ingest->add_option("--corpus", o.corpus, "Corpus directory or synth spec JSON");

  auto* train = app.add_subcommand("train", "Train a GCN on one speaker view");
  add_data_flags(train, o);

  auto* evaluate = app.add_subcommand("evaluate", "Re-predict the eval split from a trained run");
  evaluate->add_option("--corpus", o.corpus, "Corpus directory or synth spec JSON");
  evaluate->add_option("--run", o.run, "Run directory with checkpoint.json and graph/");

  auto* ablate = app.add_subcommand("ablate", "Full speaker-ablation pipeline");
  add_data_flags(ablate, o);

  auto* ensemble = app.add_subcommand("ensemble", "AND-ensemble two prediction files");
  ensemble->add_option("--pred-a", o.pred_a, "First predictions.json");
  ensemble->add_option("--pred-b", o.pred_b, "Second predictions.json");
  ensemble->add_option("--corpus", o.corpus, "Corpus for evaluating the ensemble");

  auto* half = app.add_subcommand("half", "Pipeline on the first or second half of each interview");
  add_data_flags(half, o);
  half->add_option("--half", o.half, "first | second")->check(CLI::IsMember({"first", "second"}));

  auto* search = app.add_subcommand("search", "Seeded random hyperparameter search");
  add_data_flags(search, o);
  search->add_option("--trials", o.trials, "Number of trials")->check(CLI::PositiveNumber);
  search->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* keywords = app.add_subcommand("keywords", "Recompute keywords from a checkpoint");
  keywords->add_option("--run", o.run, "Run directory");

  auto* heatmap = app.add_subcommand("heatmap", "Keyword progression heatmap for a trained run");
  heatmap->add_option("--corpus", o.corpus, "Corpus directory or synth spec JSON");
  heatmap->add_option("--run", o.run, "Run directory");
  heatmap->add_option("--bins", o.bins, "Progression bins");
  heatmap->add_option("--interview", o.interviews, "Interview ids to render as coloured turns");

  for (auto* sub : app.get_subcommands({})) sub->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (ingest->parsed()) return cmd_ingest(o);
    if (train->parsed()) return cmd_train(o);
    if (evaluate->parsed()) return cmd_evaluate(o);
    if (ablate->parsed()) return cmd_ablate(o, "ablate", {});
    if (ensemble->parsed()) return cmd_ensemble(o);
    if (half->parsed()) return cmd_ablate(o, "half", half_range(parse_half(o.half)));
    if (search->parsed()) return cmd_search(o);
    if (keywords->parsed()) return cmd_keywords(o);
    if (heatmap->parsed()) return cmd_heatmap(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
