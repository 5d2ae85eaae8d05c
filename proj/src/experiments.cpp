#include "promptbias/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include "promptbias/random.hpp"

namespace promptbias {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1(double precision, double recall) { return ratio(2.0 * precision * recall, precision + recall); }

template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw DataError(std::string(stage) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(std::string(stage) + ": " + e.what());
  } catch (const UsageError& e) {
    throw UsageError(std::string(stage) + ": " + e.what());
  }
}

std::string id_difference(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::vector<std::string> diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  std::string out;
  for (const auto& id : diff) out += (out.empty() ? "" : ", ") + id;
  return out;
}

template <typename Map>
std::set<std::string> keys_of(const Map& m) {
  std::set<std::string> out;
  for (const auto& [k, v] : m) out.insert(k);
  return out;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Metrics evaluate_f1(const LabelMap& predicted, const LabelMap& truth) {
  const auto pk = keys_of(predicted);
  const auto tk = keys_of(truth);
  if (pk != tk) throw DataError("evaluate_f1: id sets differ: " + id_difference(pk, tk));

  Metrics m;
  for (const auto& [id, actual] : truth) {
    const bool pred_pos = predicted.at(id) == Label::depressed;
    const bool true_pos = actual == Label::depressed;
    if (pred_pos && true_pos) ++m.tp;
    else if (pred_pos) ++m.fp;
    else if (true_pos) ++m.fn;
    else ++m.tn;
  }
  const auto tp = static_cast<double>(m.tp), fp = static_cast<double>(m.fp);
  const auto fn = static_cast<double>(m.fn), tn = static_cast<double>(m.tn);
  m.precision_depressed = ratio(tp, tp + fp);
  m.recall_depressed = ratio(tp, tp + fn);
  m.f1_depressed = f1(m.precision_depressed, m.recall_depressed);
  m.precision_control = ratio(tn, tn + fn);
  m.recall_control = ratio(tn, tn + fp);
  m.f1_control = f1(m.precision_control, m.recall_control);
  m.f1_macro = 0.5 * (m.f1_depressed + m.f1_control);
  return m;
}

LabelMap to_label_map(const std::vector<Prediction>& predictions) {
  LabelMap out;
  for (const auto& p : predictions) {
    if (!out.emplace(p.id, p.label).second) throw DataError("duplicate prediction for id '" + p.id + "'");
  }
  return out;
}

Metrics evaluate_f1(const std::vector<Prediction>& predictions, const LabelTable& truth) {
  LabelMap t;
  for (const auto& [id, entry] : truth.entries()) t.emplace(id, entry.label);
  return evaluate_f1(to_label_map(predictions), t);
}

std::vector<Prediction> ensemble_and(const std::vector<Prediction>& a, const std::vector<Prediction>& b) {
  const auto ma = to_label_map(a);
  std::map<std::string, const Prediction*> mb;
  for (const auto& p : b) {
    if (!mb.emplace(p.id, &p).second) throw DataError("duplicate prediction for id '" + p.id + "'");
  }
  const auto ka = keys_of(ma);
  const auto kb = keys_of(mb);
  if (ka != kb) throw DataError("ensemble_and: id sets differ: " + id_difference(ka, kb));

  std::vector<Prediction> out;
  out.reserve(a.size());
  for (const auto& p : a) {
    const auto& q = *mb.at(p.id);
    const bool both = p.label == Label::depressed && q.label == Label::depressed;
    out.push_back({p.id, std::min(p.p_depressed, q.p_depressed), both ? Label::depressed : Label::control});
  }
  return out;
}

std::string format_metrics_table(const Metrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "class       precision  recall  f1\n"
                "depressed   %9.4f  %6.4f  %6.4f\n"
                "control     %9.4f  %6.4f  %6.4f\n"
                "macro                          %6.4f\n"
                "tp=%zu fp=%zu fn=%zu tn=%zu\n",
                m.precision_depressed, m.recall_depressed, m.f1_depressed, m.precision_control,
                m.recall_control, m.f1_control, m.f1_macro, m.tp, m.fp, m.fn, m.tn);
  return buf;
}

Half parse_half(std::string_view name) {
  if (name == "first") return Half::first;
  if (name == "second") return Half::second;
  throw UsageError("unknown half '" + std::string(name) + "' (expected first or second)");
}

SliceRange half_range(Half half) { return half == Half::first ? SliceRange{0.0, 0.5} : SliceRange{0.5, 1.0}; }

Dataset slice_dataset(const Dataset& data, const SliceRange& slice) {
  Dataset out = data;
  if (slice.is_identity()) return out;
  for (auto* corpus : {&out.train, &out.eval}) {
    for (auto& t : corpus->transcripts) t = slice_by_progression(t, slice.from, slice.to);
  }
  return out;
}

ExperimentReport run_ablation(const Dataset& input, const SpeakerFilter& speaker,
                              const PipelineConfig& config, const SliceRange& slice) {
  ExperimentReport r;
  r.speaker = speaker;
  r.slice = slice;
  r.config = config;
  r.experiment_id = speaker.name() + "-" + config.features.name();
  if (!slice.is_identity()) r.experiment_id += "-" + shortest(slice.from) + "-" + shortest(slice.to);

  const Dataset data = slice_dataset(input, slice);
  std::vector<Document> train_docs, eval_docs;
  std::vector<Label> train_labels;
  staged("speaker view", [&] {
    train_docs = speaker_views(data.train, speaker);
    eval_docs = speaker_views(data.eval, speaker);
    for (const auto& t : data.train.transcripts) train_labels.push_back(data.train.labels.label(t.interview_id));
    return 0;
  });

  staged("feature selection", [&] {
    r.full_vocabulary = build_vocabulary(train_docs, config.min_df);
    const auto m = tfidf_matrix(train_docs, r.full_vocabulary);
    r.selected = select_features(m, train_labels, config.features);
    if (r.selected.empty()) throw DataError("no words selected");
    std::vector<std::size_t> keep;
    for (const auto& s : r.selected) keep.push_back(s.index);
    r.vocabulary = r.full_vocabulary.restrict_to(keep);
    return 0;
  });

  staged("graph", [&] {
    r.graph = build_text_graph(train_docs, r.vocabulary, config.graph);
    r.fingerprint = hex64(graph_fingerprint(r.graph));
    return 0;
  });

  staged("train", [&] {
    auto trained = train(r.graph, train_labels, config.train);
    r.model = std::move(trained.model);
    r.loss_history = std::move(trained.loss_history);
    return 0;
  });

  staged("predict", [&] {
    const auto ext = extend_for_inference(r.graph, eval_docs, r.vocabulary, config.graph.self_loop);
    r.predictions = predict(r.model, r.graph, ext);
    return 0;
  });

  staged("evaluate", [&] {
    r.metrics = evaluate_f1(r.predictions, data.eval.labels);
    return 0;
  });

  staged("analysis", [&] {
    r.keywords = extract_keywords(r.model, r.graph);
    r.heatmap = build_heatmap(input, speaker, r.keywords, config.analysis.bins, config.analysis.smoothing);
    r.localization = localization_stats(r.heatmap, config.analysis.split_frac);
    return 0;
  });
  return r;
}

ExperimentReport half_interview_experiment(const Dataset& data, Half half, const SpeakerFilter& speaker,
                                           const PipelineConfig& config) {
  return run_ablation(data, speaker, config, half_range(half));
}

TrialRecord sample_trial(const SearchSpace& space, int trial, std::uint64_t seed) {
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = seed + static_cast<std::uint64_t>(trial);
  Rng rng(rec.seed);
  rec.learning_rate = std::exp(rng.uniform(std::log(space.lr_min), std::log(space.lr_max)));
  rec.epochs = static_cast<int>(rng.between(space.epochs_min, space.epochs_max));
  rec.features = space.features.at(rng.index(space.features.size()));
  return rec;
}

SearchResult hyperparam_search(const Dataset& data, const SpeakerFilter& speaker,
                               const PipelineConfig& base, const SearchSpace& space, int n_trials,
                               std::uint64_t seed, int threads) {
  if (n_trials < 1) throw UsageError("hyperparam_search: n_trials must be >= 1");
  if (space.features.empty() || !(space.lr_min > 0.0 && space.lr_min <= space.lr_max) ||
      space.epochs_min > space.epochs_max) {
    throw UsageError("hyperparam_search: empty search space");
  }
  SearchResult result;
  result.trials.resize(static_cast<std::size_t>(n_trials));

  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int i = next++; i < n_trials; i = next++) {
      auto rec = sample_trial(space, i, seed);
      PipelineConfig cfg = base;
      cfg.features = rec.features;
      cfg.train.learning_rate = rec.learning_rate;
      cfg.train.epochs = rec.epochs;
      cfg.train.seed = rec.seed;
      try {
        rec.macro_f1 = run_ablation(data, speaker, cfg).metrics.f1_macro;
      } catch (const std::exception& e) {
        rec.macro_f1 = -1.0;
        rec.error = e.what();
      }
      result.trials[static_cast<std::size_t>(i)] = std::move(rec);
    }
  };
  const int n_threads = std::clamp(threads, 1, n_trials);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  const TrialRecord* best = nullptr;
  for (const auto& rec : result.trials) {
    if (rec.error.empty() && (best == nullptr || rec.macro_f1 > best->macro_f1)) best = &rec;
  }
  if (best == nullptr) throw NumericError("hyperparam_search: every trial failed");
  result.best = *best;
  return result;
}

std::string format_trials_csv(const std::vector<TrialRecord>& trials) {
  std::string out = "trial,gamma,epochs,feature_selection,macro_f1,seed\n";
  for (const auto& t : trials) {
    out += std::to_string(t.trial) + "," + shortest(t.learning_rate) + "," + std::to_string(t.epochs) + "," +
           t.features.name() + "," + shortest(t.macro_f1) + "," + std::to_string(t.seed) + "\n";
  }
  return out;
}

}  // namespace promptbias
