#include "promptbias/io.hpp"

#include <charconv>
#include <json.hpp>

#include "promptbias/render.hpp"

namespace promptbias {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

namespace {

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("config key '") + key + "': " + e.what());
  }
}

ordered matrix_json(const Matrix<double>& m) {
  ordered rows = ordered::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered row = ordered::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix<double> matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix<double> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("checkpoint: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

ordered config_json(const PipelineConfig& c) {
  ordered j;
  j["features"] = {{"selection", c.features.name()}, {"auto_l1_ratio", c.features.auto_l1_ratio}, {"min_df", c.min_df}};
  j["graph"] = {{"window", c.graph.window},
                {"damping", c.graph.damping},
                {"pagerank_tol", c.graph.pagerank_tol},
                {"pagerank_max_iter", c.graph.pagerank_max_iter},
                {"self_loop", c.graph.self_loop}};
  j["train"] = {{"learning_rate", c.train.learning_rate}, {"epochs", c.train.epochs},
                {"beta1", c.train.beta1},                 {"beta2", c.train.beta2},
                {"epsilon", c.train.epsilon},             {"weight_decay", c.train.weight_decay},
                {"hidden", c.train.hidden},               {"seed", c.train.seed}};
  j["analysis"] = {{"bins", c.analysis.bins}, {"smoothing", c.analysis.smoothing}, {"split_frac", c.analysis.split_frac}};
  return j;
}

PipelineConfig config_from(const json& j) {
  PipelineConfig c;
  if (j.contains("features")) {
    const auto& f = j.at("features");
    std::string selection = c.features.name();
    read_opt(f, "selection", selection);
    const double ratio = c.features.auto_l1_ratio;
    c.features = FeatureSelection::parse(selection);
    c.features.auto_l1_ratio = ratio;
    read_opt(f, "auto_l1_ratio", c.features.auto_l1_ratio);
    read_opt(f, "min_df", c.min_df);
  }
  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    read_opt(g, "window", c.graph.window);
    read_opt(g, "damping", c.graph.damping);
    read_opt(g, "pagerank_tol", c.graph.pagerank_tol);
    read_opt(g, "pagerank_max_iter", c.graph.pagerank_max_iter);
    read_opt(g, "self_loop", c.graph.self_loop);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    read_opt(t, "learning_rate", c.train.learning_rate);
    read_opt(t, "epochs", c.train.epochs);
    read_opt(t, "beta1", c.train.beta1);
    read_opt(t, "beta2", c.train.beta2);
    read_opt(t, "epsilon", c.train.epsilon);
    read_opt(t, "weight_decay", c.train.weight_decay);
    read_opt(t, "hidden", c.train.hidden);
    read_opt(t, "seed", c.train.seed);
  }
  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    read_opt(a, "bins", c.analysis.bins);
    read_opt(a, "smoothing", c.analysis.smoothing);
    read_opt(a, "split_frac", c.analysis.split_frac);
  }
  if (j.contains("seed")) read_opt(j, "seed", c.train.seed);
  c.train.validate();
  if (c.graph.window < 2) throw UsageError("run config: graph.window must be >= 2");
  if (!(c.graph.damping > 0.0 && c.graph.damping < 1.0)) throw UsageError("run config: graph.damping must lie in (0,1)");
  if (!(c.graph.self_loop > 0.0)) throw UsageError("run config: graph.self_loop must be positive");
  if (c.analysis.bins < 1 || c.analysis.smoothing < 1) {
    throw UsageError("run config: analysis.bins and analysis.smoothing must be >= 1");
  }
  if (!(c.analysis.split_frac > 0.0 && c.analysis.split_frac < 1.0)) {
    throw UsageError("run config: analysis.split_frac must lie in (0,1)");
  }
  return c;
}

std::string dump(const ordered& j) { return j.dump(2) + "\n"; }

}  // namespace

PipelineConfig parse_pipeline_config(std::string_view json_text) {
  return config_from(parse_json(json_text, "run config"));
}

std::string format_pipeline_config(const PipelineConfig& config) { return dump(config_json(config)); }

SynthSpec parse_synth_spec(std::string_view json_text) {
  const auto j = parse_json(json_text, "synth spec");
  SynthSpec s;
  read_opt(j, "seed", s.seed);
  read_opt(j, "n_train", s.n_train);
  read_opt(j, "n_eval", s.n_eval);
  read_opt(j, "depressed_fraction", s.depressed_fraction);
  read_opt(j, "interviewer_vocab", s.interviewer_vocab);
  read_opt(j, "prompt_repertoire", s.prompt_repertoire);
  read_opt(j, "participant_vocab", s.participant_vocab);
  read_opt(j, "class_vocab", s.class_vocab);
  read_opt(j, "turns_min", s.turns_min);
  read_opt(j, "turns_max", s.turns_max);
  read_opt(j, "tokens_min", s.tokens_min);
  read_opt(j, "tokens_max", s.tokens_max);
  read_opt(j, "probe_tokens", s.probe_tokens);
  read_opt(j, "probe_position", s.probe_position);
  read_opt(j, "bias_strength", s.bias_strength);
  read_opt(j, "class_signal", s.class_signal);
  return s;
}

std::string format_synth_spec(const SynthSpec& s) {
  ordered j;
  j["seed"] = s.seed;
  j["n_train"] = s.n_train;
  j["n_eval"] = s.n_eval;
  j["depressed_fraction"] = s.depressed_fraction;
  j["interviewer_vocab"] = s.interviewer_vocab;
  j["prompt_repertoire"] = s.prompt_repertoire;
  j["participant_vocab"] = s.participant_vocab;
  j["class_vocab"] = s.class_vocab;
  j["turns_min"] = s.turns_min;
  j["turns_max"] = s.turns_max;
  j["tokens_min"] = s.tokens_min;
  j["tokens_max"] = s.tokens_max;
  j["probe_tokens"] = s.probe_tokens;
  j["probe_position"] = s.probe_position;
  j["bias_strength"] = s.bias_strength;
  j["class_signal"] = s.class_signal;
  return dump(j);
}

std::string format_synth_descriptor(const SynthDescriptor& d) {
  ordered j;
  j["probe_tokens"] = d.probe_tokens;
  j["probe_position"] = d.probe_position;
  auto rows = ordered::array();
  for (const auto& r : d.interviews) {
    ordered row{{"id", r.interview_id},
                {"split", r.split == Split::train ? "train" : "eval"},
                {"label", std::string(to_string(r.label))},
                {"probed", r.probed}};
    if (r.probed) {
      row["probe_turn"] = r.probe_turn;
      row["probe_progression"] = r.probe_progression;
    }
    rows.push_back(std::move(row));
  }
  j["interviews"] = std::move(rows);
  return dump(j);
}

std::string format_metrics(const Metrics& m) {
  ordered j;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  j["tn"] = m.tn;
  j["precision_depressed"] = m.precision_depressed;
  j["recall_depressed"] = m.recall_depressed;
  j["f1_depressed"] = m.f1_depressed;
  j["precision_control"] = m.precision_control;
  j["recall_control"] = m.recall_control;
  j["f1_control"] = m.f1_control;
  j["f1_macro"] = m.f1_macro;
  return dump(j);
}

Metrics parse_metrics(std::string_view json_text) {
  const auto j = parse_json(json_text, "metrics");
  Metrics m;
  read_opt(j, "tp", m.tp);
  read_opt(j, "fp", m.fp);
  read_opt(j, "fn", m.fn);
  read_opt(j, "tn", m.tn);
  read_opt(j, "precision_depressed", m.precision_depressed);
  read_opt(j, "recall_depressed", m.recall_depressed);
  read_opt(j, "f1_depressed", m.f1_depressed);
  read_opt(j, "precision_control", m.precision_control);
  read_opt(j, "recall_control", m.recall_control);
  read_opt(j, "f1_control", m.f1_control);
  read_opt(j, "f1_macro", m.f1_macro);
  return m;
}

std::string format_predictions(const std::vector<Prediction>& predictions) {
  ordered j;
  auto rows = ordered::array();
  for (const auto& p : predictions) {
    rows.push_back({{"id", p.id}, {"p_depressed", p.p_depressed}, {"label", std::string(to_string(p.label))}});
  }
  j["predictions"] = std::move(rows);
  return dump(j);
}

std::vector<Prediction> parse_predictions(std::string_view json_text) {
  const auto j = parse_json(json_text, "predictions");
  std::vector<Prediction> out;
  try {
    for (const auto& row : j.at("predictions")) {
      Prediction p;
      p.id = row.at("id").get<std::string>();
      p.p_depressed = row.value("p_depressed", 0.0);
      const auto label = row.at("label").get<std::string>();
      if (label != "depressed" && label != "control") throw DataError("predictions: unknown label '" + label + "'");
      p.label = label == "depressed" ? Label::depressed : Label::control;
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("predictions: ") + e.what());
  }
  return out;
}

std::string format_checkpoint(const Checkpoint& c) {
  ordered j;
  j["format"] = "promptbias-gcn-checkpoint";
  j["version"] = 1;
  j["activation"] = c.model.activation;
  j["k"] = c.model.k();
  j["n"] = c.model.n();
  j["speaker"] = c.speaker.name();
  j["slice"] = {c.slice.from, c.slice.to};
  j["graph_fingerprint"] = c.graph_fingerprint;
  j["config"] = config_json(c.config);
  j["vocabulary"] = {{"n_docs", c.vocabulary.n_docs()}, {"words", c.vocabulary.words()}, {"df", c.vocabulary.dfs()}};
  j["doc_ids"] = c.doc_ids;
  j["w0"] = matrix_json(c.model.w0);
  j["w1"] = matrix_json(c.model.w1);
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view json_text) {
  const auto j = parse_json(json_text, "checkpoint");
  try {
    if (j.at("format").get<std::string>() != "promptbias-gcn-checkpoint" || j.at("version").get<int>() != 1) {
      throw DataError("checkpoint: unsupported format or version");
    }
    Checkpoint c;
    c.model.activation = j.at("activation").get<std::string>();
    if (c.model.activation != "relu") throw DataError("checkpoint: unsupported activation '" + c.model.activation + "'");
    c.model.w0 = matrix_from(j.at("w0"));
    c.model.w1 = matrix_from(j.at("w1"));
    if (c.model.k() != j.at("k").get<Eigen::Index>() || c.model.n() != j.at("n").get<Eigen::Index>()) {
      throw DataError("checkpoint: weight shapes disagree with header");
    }
    const auto speaker = j.at("speaker").get<std::string>();
    c.speaker = speaker == "all" ? SpeakerFilter::all() : SpeakerFilter::only(speaker);
    c.slice = {j.at("slice").at(0).get<double>(), j.at("slice").at(1).get<double>()};
    c.graph_fingerprint = j.at("graph_fingerprint").get<std::string>();
    c.config = config_from(j.at("config"));
    const auto& v = j.at("vocabulary");
    c.vocabulary = Vocabulary(v.at("words").get<std::vector<std::string>>(), v.at("df").get<std::vector<std::size_t>>(),
                              v.at("n_docs").get<std::size_t>());
    c.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

Checkpoint checkpoint_of(const ExperimentReport& r) {
  return {r.model, r.vocabulary, r.graph.doc_ids, r.config, r.speaker, r.slice, r.fingerprint};
}

std::string format_localization(const LocalizationStats& stats) {
  ordered j;
  j["split_frac"] = stats.split_frac;
  for (const auto& [label, g] : stats.groups) {
    j["groups"][std::string(to_string(label))] = {{"rows", g.rows},
                                                  {"zero_rows", g.zero_rows},
                                                  {"after_fraction", g.after_fraction},
                                                  {"mean_entropy", g.mean_entropy}};
  }
  auto rows = ordered::array();
  for (const auto& r : stats.rows) {
    rows.push_back({{"after_fraction", r.after_fraction}, {"entropy", r.entropy}, {"all_zero", r.all_zero}});
  }
  j["rows"] = std::move(rows);
  return dump(j);
}

void write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "metrics.json", format_metrics(r.metrics));
  write_file(dir / "predictions.json", format_predictions(r.predictions));
  write_file(dir / "keywords.tsv", keywords_tsv(r.keywords));
  write_file(dir / "features.tsv", format_selection_tsv(r.full_vocabulary, r.selected));
  write_file(dir / "heatmap.csv", heatmap_csv(r.heatmap));
  write_file(dir / "heatmap.svg", heatmap_svg(r.heatmap));
  write_file(dir / "heatmap.json", heatmap_metadata(r.heatmap));
  write_file(dir / "localization.json", format_localization(r.localization));
  std::string loss = "epoch,loss\n";
  for (std::size_t e = 0; e < r.loss_history.size(); ++e) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), r.loss_history[e]);
    loss += std::to_string(e + 1) + "," + std::string(buf, ptr) + "\n";
  }
  write_file(dir / "loss.csv", loss);
  write_file(dir / "checkpoint.json", format_checkpoint(checkpoint_of(r)));
  write_graph(r.graph, dir / "graph");
}

Replay replay_run(const std::filesystem::path& dir, const Dataset& data) {
  Replay out;
  out.checkpoint = parse_checkpoint(read_file(dir / "checkpoint.json"));
  out.graph = read_graph(dir / "graph");
  if (hex64(graph_fingerprint(out.graph)) != out.checkpoint.graph_fingerprint) {
    throw DataError("replay: graph fingerprint does not match the checkpoint");
  }
  if (out.graph.words != out.checkpoint.vocabulary.words()) {
    throw DataError("replay: checkpoint vocabulary does not match the graph");
  }
  const auto sliced = slice_dataset(data, out.checkpoint.slice);
  const auto eval_docs = speaker_views(sliced.eval, out.checkpoint.speaker);
  const auto ext = extend_for_inference(out.graph, eval_docs, out.checkpoint.vocabulary,
                                        out.checkpoint.config.graph.self_loop);
  out.predictions = predict(out.checkpoint.model, out.graph, ext);
  out.metrics = evaluate_f1(out.predictions, sliced.eval.labels);
  out.keywords = extract_keywords(out.checkpoint.model, out.graph);
  return out;
}

}  // namespace promptbias
