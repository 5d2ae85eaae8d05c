#include "promptbias/gcn.hpp"

#include <cmath>

#include "promptbias/random.hpp"

namespace promptbias {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("train config: learning_rate must be positive");
  }
  if (epochs < 1 || epochs > 10) throw UsageError("train config: epochs must lie in [1, 10]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw UsageError("train config: betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw UsageError("train config: epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw UsageError("train config: weight_decay must be >= 0");
  if (hidden < 1) throw UsageError("train config: hidden width must be >= 1");
}

Model init_model(std::uint64_t seed, Eigen::Index n, Eigen::Index k, Eigen::Index n_classes) {
  if (n < 1 || k < 1 || n_classes < 1) throw UsageError("init_model: dimensions must be >= 1");
  Rng rng(seed);
  const auto fill = [&rng](Eigen::Index rows, Eigen::Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix<double> m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    }
    return m;
  };
  Model model;
  model.w0 = fill(n, k);
  model.w1 = fill(k, n_classes);
  return model;
}

std::vector<NodeTarget> document_targets(const TextGraph& graph, std::span<const Label> doc_labels) {
  if (doc_labels.size() != graph.n_docs()) {
    throw DataError("train: label count does not match graph documents");
  }
  std::vector<NodeTarget> targets;
  targets.reserve(doc_labels.size());
  for (std::size_t d = 0; d < doc_labels.size(); ++d) {
    targets.push_back({static_cast<Eigen::Index>(graph.n_words() + d), static_cast<int>(doc_labels[d])});
  }
  return targets;
}

TrainResult train(const TextGraph& graph, std::span<const Label> doc_labels, const TrainConfig& cfg) {
  cfg.validate();
  const auto targets = document_targets(graph, doc_labels);
  TrainResult result;
  result.model = init_model(cfg.seed, static_cast<Eigen::Index>(graph.n()), cfg.hidden);
  AdamMoments<double> m0, m1;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto state = forward(result.model, graph.normalized);
    const auto grads = loss_and_grads(result.model, graph.normalized, state,
                                      std::span<const NodeTarget>(targets));
    if (!std::isfinite(grads.loss)) {
      throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1));
    }
    result.loss_history.push_back(grads.loss);
    adamw_step(result.model.w0, grads.w0, m0, epoch + 1, cfg);
    adamw_step(result.model.w1, grads.w1, m1, epoch + 1, cfg);
    if (!result.model.w0.allFinite() || !result.model.w1.allFinite()) {
      throw NumericError("train: non-finite weights after epoch " + std::to_string(epoch + 1));
    }
  }
  return result;
}

SparseMatrix extended_features(const ExtendedGraph& ext) {
  const auto base = static_cast<Eigen::Index>(ext.base_n);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(ext.base_n + static_cast<std::size_t>(ext.eval_features.nonZeros()));
  for (Eigen::Index i = 0; i < base; ++i) triplets.emplace_back(i, i, 1.0);
  for (Eigen::Index e = 0; e < ext.eval_features.outerSize(); ++e) {
    double total = 0.0;
    for (DocTermMatrix::InnerIterator it(ext.eval_features, e); it; ++it) total += it.value();
    for (DocTermMatrix::InnerIterator it(ext.eval_features, e); it; ++it) {
      triplets.emplace_back(base + e, it.col(), it.value() / total);
    }
  }
  SparseMatrix h0(static_cast<Eigen::Index>(ext.n()), base);
  h0.setFromTriplets(triplets.begin(), triplets.end());
  return h0;
}

Label decide(double p_depressed) { return p_depressed > 0.5 ? Label::depressed : Label::control; }

std::vector<Prediction> predict(const Model& model, const TextGraph& base, const ExtendedGraph& ext) {
  if (model.n() != static_cast<Eigen::Index>(base.n()) || ext.base_n != base.n()) {
    throw DataError("predict: model size does not match the base graph");
  }
  const auto state = forward(model, ext.normalized, extended_features(ext));
  std::vector<Prediction> out;
  out.reserve(ext.eval_ids.size());
  for (std::size_t e = 0; e < ext.eval_ids.size(); ++e) {
    const double p = state.z(static_cast<Eigen::Index>(ext.base_n + e), kDepressedClass);
    out.push_back({ext.eval_ids[e], p, decide(p)});
  }
  return out;
}

Matrix<double> node_probabilities(const Model& model, const TextGraph& graph) {
  return forward(model, graph.normalized).z;
}

}  // namespace promptbias
