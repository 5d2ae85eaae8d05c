#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "promptbias/experiments.hpp"
#include "promptbias/synth.hpp"

namespace promptbias {

/// Parses a JSON run config; absent keys keep their defaults. Recognised
/// sections: features, graph, train, analysis, plus top-level seed/speaker.
PipelineConfig parse_pipeline_config(std::string_view json_text);
std::string format_pipeline_config(const PipelineConfig& config);

SynthSpec parse_synth_spec(std::string_view json_text);
std::string format_synth_spec(const SynthSpec& spec);
std::string format_synth_descriptor(const SynthDescriptor& descriptor);

/// Keys: tp, fp, fn, tn, f1_depressed, f1_control, f1_macro (+ precision and
/// recall per class).
std::string format_metrics(const Metrics& m);
Metrics parse_metrics(std::string_view json_text);

std::string format_predictions(const std::vector<Prediction>& predictions);
std::vector<Prediction> parse_predictions(std::string_view json_text);

/// Everything needed to rebuild predictions and keywords for a trained run.
struct Checkpoint {
  Model model;
  Vocabulary vocabulary;
  std::vector<std::string> doc_ids;
  PipelineConfig config;
  SpeakerFilter speaker;
  SliceRange slice;
  std::string graph_fingerprint;
};

std::string format_checkpoint(const Checkpoint& c);
Checkpoint parse_checkpoint(std::string_view json_text);

Checkpoint checkpoint_of(const ExperimentReport& r);

/// Writes metrics.json, predictions.json, keywords.tsv, features.tsv,
/// heatmap.{csv,svg,json}, localization.json, loss.csv, checkpoint.json
/// and graph/ under `dir`.
void write_report(const ExperimentReport& r, const std::filesystem::path& dir);

struct Replay {
  Checkpoint checkpoint;
  TextGraph graph;
  std::vector<Prediction> predictions;
  Metrics metrics;
  KeywordSet keywords;
};

/// Reloads checkpoint + graph from a run directory and recomputes eval
/// predictions, metrics and keywords against `data`.
Replay replay_run(const std::filesystem::path& dir, const Dataset& data);

std::string format_localization(const LocalizationStats& stats);

}  // namespace promptbias
