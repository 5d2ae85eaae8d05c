#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "promptbias/analysis.hpp"
#include "promptbias/corpus.hpp"
#include "promptbias/features.hpp"
#include "promptbias/gcn.hpp"
#include "promptbias/graph.hpp"

namespace promptbias {

/// Confusion counts with depressed as the positive class.
struct Metrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision_depressed = 0.0, recall_depressed = 0.0, f1_depressed = 0.0;
  double precision_control = 0.0, recall_control = 0.0, f1_control = 0.0;
  double f1_macro = 0.0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const Metrics&) const = default;
};

using LabelMap = std::map<std::string, Label>;

Metrics evaluate_f1(const LabelMap& predicted, const LabelMap& truth);
Metrics evaluate_f1(const std::vector<Prediction>& predictions, const LabelTable& truth);

LabelMap to_label_map(const std::vector<Prediction>& predictions);

/// Positive only when both inputs are positive; p_depressed is the minimum.
std::vector<Prediction> ensemble_and(const std::vector<Prediction>& a, const std::vector<Prediction>& b);

std::string format_metrics_table(const Metrics& m);

struct AnalysisParams {
  std::size_t bins = 100;
  std::size_t smoothing = 1;
  double split_frac = 0.5;
  bool operator==(const AnalysisParams&) const = default;
};

struct PipelineConfig {
  FeatureSelection features;
  std::size_t min_df = 1;
  GraphParams graph;
  TrainConfig train;
  AnalysisParams analysis;
};

/// Progression window applied to every transcript before the pipeline.
struct SliceRange {
  double from = 0.0;
  double to = 1.0;
  bool is_identity() const { return from <= 0.0 && to >= 1.0; }
};

struct ExperimentReport {
  std::string experiment_id;
  SpeakerFilter speaker;
  SliceRange slice;
  PipelineConfig config;
  Vocabulary full_vocabulary;
  std::vector<RankedWord> selected;
  Vocabulary vocabulary;
  TextGraph graph;
  Model model;
  std::vector<double> loss_history;
  std::vector<Prediction> predictions;
  Metrics metrics;
  KeywordSet keywords;
  HeatmapMatrix heatmap;
  LocalizationStats localization;
  std::string fingerprint;
};

/// speaker view -> feature selection -> graph -> train -> predict ->
/// evaluate -> keywords -> heatmap. Errors carry the failing stage name.
ExperimentReport run_ablation(const Dataset& data, const SpeakerFilter& speaker,
                              const PipelineConfig& config, const SliceRange& slice = {});

enum class Half { first, second };
Half parse_half(std::string_view name);
SliceRange half_range(Half half);

Dataset slice_dataset(const Dataset& data, const SliceRange& slice);

ExperimentReport half_interview_experiment(const Dataset& data, Half half, const SpeakerFilter& speaker,
                                           const PipelineConfig& config);

struct SearchSpace {
  double lr_min = 1e-7;
  double lr_max = 1e-3;
  int epochs_min = 1;
  int epochs_max = 10;
  std::vector<FeatureSelection> features{
      FeatureSelection::parse("auto"),     FeatureSelection::parse("top-100"),
      FeatureSelection::parse("top-250"),  FeatureSelection::parse("top-500"),
      FeatureSelection::parse("top-1000"), FeatureSelection::parse("top-1500"),
      FeatureSelection::parse("none")};
};

struct TrialRecord {
  int trial = 0;
  double learning_rate = 0.0;
  int epochs = 0;
  FeatureSelection features;
  double macro_f1 = -1.0;
  std::uint64_t seed = 0;
  std::string error;
  bool operator==(const TrialRecord&) const = default;
};

/// Configuration drawn for one trial from its derived seed.
TrialRecord sample_trial(const SearchSpace& space, int trial, std::uint64_t seed);

struct SearchResult {
  TrialRecord best;
  std::vector<TrialRecord> trials;
};

/// Seeded random search maximising macro F1. Trial i draws from seed + i;
/// failed trials score -1. Results are merged in trial order.
SearchResult hyperparam_search(const Dataset& data, const SpeakerFilter& speaker,
                               const PipelineConfig& base, const SearchSpace& space, int n_trials,
                               std::uint64_t seed, int threads = 1);

std::string format_trials_csv(const std::vector<TrialRecord>& trials);

}  // namespace promptbias
