#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "promptbias/corpus.hpp"
#include "promptbias/error.hpp"
#include "promptbias/graph.hpp"

namespace promptbias {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr int kClasses = 2;
inline constexpr int kDepressedClass = static_cast<int>(Label::depressed);

/// Two-layer GCN weights: w0 is the n x k node embedding table, w1 the
/// k x 2 class projection.
template <typename Scalar>
struct GcnModel {
  Matrix<Scalar> w0;
  Matrix<Scalar> w1;
  std::string activation = "relu";

  Eigen::Index n() const { return w0.rows(); }
  Eigen::Index k() const { return w0.cols(); }
};

template <typename Scalar>
struct ForwardState {
  SparseMat<Scalar> propagated;  // Ã H0
  Matrix<Scalar> pre;            // Ã H0 W0
  Matrix<Scalar> h1;
  Matrix<Scalar> mixed;          // Ã H1
  Matrix<Scalar> logits;
  Matrix<Scalar> z;
};

template <typename Scalar>
struct Gradients {
  Scalar loss{};
  Matrix<Scalar> w0;
  Matrix<Scalar> w1;
};

struct NodeTarget {
  Eigen::Index node = 0;
  int label = 0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
  int hidden = 64;
  std::uint64_t seed = 0;

  /// Throws UsageError when a field is outside its allowed range.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Scalar>
Matrix<Scalar> row_softmax(const Matrix<Scalar>& logits) {
  Matrix<Scalar> z(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar top = logits.row(r).maxCoeff();
    Scalar total(0);
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      using std::exp;
      z(r, c) = exp(logits(r, c) - top);
      total += z(r, c);
    }
    z.row(r) /= total;
  }
  return z;
}

template <typename Scalar>
ForwardState<Scalar> forward_from(SparseMat<Scalar> propagated, const GcnModel<Scalar>& model,
                                  const SparseMat<Scalar>& a_norm) {
  if (propagated.cols() != model.n() || a_norm.rows() != propagated.rows() ||
      model.w1.rows() != model.k()) {
    throw UsageError("gcn forward: dimension mismatch");
  }
  ForwardState<Scalar> s;
  s.propagated = std::move(propagated);
  s.pre = s.propagated * model.w0;
  s.h1 = s.pre.cwiseMax(Scalar(0));
  if (!all_finite(s.h1)) throw NumericError("gcn forward: non-finite value in layer 1");
  s.mixed = a_norm * s.h1;
  s.logits = s.mixed * model.w1;
  if (!all_finite(s.logits)) throw NumericError("gcn forward: non-finite value in layer 2");
  s.z = row_softmax<Scalar>(s.logits);
  return s;
}

}  // namespace detail

/// Forward pass with H0 = I, so Ã H0 W0 reduces to Ã W0.
template <typename Scalar>
ForwardState<Scalar> forward(const GcnModel<Scalar>& model, const SparseMat<Scalar>& a_norm) {
  return detail::forward_from<Scalar>(a_norm, model, a_norm);
}

/// Forward pass with explicit input features H0 (rows = graph nodes,
/// columns = model embedding rows).
template <typename Scalar>
ForwardState<Scalar> forward(const GcnModel<Scalar>& model, const SparseMat<Scalar>& a_norm,
                             const SparseMat<Scalar>& h0) {
  if (h0.rows() != a_norm.cols()) throw UsageError("gcn forward: H0 rows must match graph size");
  SparseMat<Scalar> propagated = a_norm * h0;
  return detail::forward_from<Scalar>(std::move(propagated), model, a_norm);
}

/// Mean cross-entropy over the target nodes and its analytic gradients.
template <typename Scalar>
Gradients<Scalar> loss_and_grads(const GcnModel<Scalar>& model, const SparseMat<Scalar>& a_norm,
                                 const ForwardState<Scalar>& state,
                                 std::span<const NodeTarget> targets) {
  if (targets.empty()) throw UsageError("loss_and_grads: empty training mask");
  const Scalar scale = Scalar(1) / Scalar(static_cast<double>(targets.size()));

  Gradients<Scalar> g;
  Matrix<Scalar> d_logits = Matrix<Scalar>::Zero(state.z.rows(), state.z.cols());
  g.loss = Scalar(0);
  for (const auto& t : targets) {
    using std::log;
    g.loss -= log(state.z(t.node, t.label));
    d_logits.row(t.node) += state.z.row(t.node) * scale;
    d_logits(t.node, t.label) -= scale;
  }
  g.loss *= scale;

  g.w1 = state.mixed.transpose() * d_logits;
  const Matrix<Scalar> d_mixed = d_logits * model.w1.transpose();
  Matrix<Scalar> d_pre = a_norm.transpose() * d_mixed;
  d_pre.array() *= (state.pre.array() > Scalar(0)).template cast<Scalar>();
  g.w0 = state.propagated.transpose() * d_pre;
  return g;
}

/// Moment estimates for one parameter matrix.
template <typename Scalar>
struct AdamMoments {
  Matrix<Scalar> first;
  Matrix<Scalar> second;
};

/// One AdamW update with decoupled weight decay; `step` counts from 1.
template <typename Scalar>
void adamw_step(Matrix<Scalar>& param, const Matrix<Scalar>& grad, AdamMoments<Scalar>& moments,
                int step, const TrainConfig& cfg) {
  if (moments.first.size() == 0) {
    moments.first = Matrix<Scalar>::Zero(param.rows(), param.cols());
    moments.second = Matrix<Scalar>::Zero(param.rows(), param.cols());
  }
  const Scalar lr(cfg.learning_rate);
  const Scalar b1(cfg.beta1);
  const Scalar b2(cfg.beta2);
  param *= Scalar(1) - lr * Scalar(cfg.weight_decay);
  moments.first = b1 * moments.first + (Scalar(1) - b1) * grad;
  moments.second = b2 * moments.second + (Scalar(1) - b2) * grad.cwiseProduct(grad);
  using std::pow;
  const Scalar c1 = Scalar(1) - pow(b1, step);
  const Scalar c2 = Scalar(1) - pow(b2, step);
  param.array() -= lr * (moments.first.array() / c1) /
                   ((moments.second.array() / c2).sqrt() + Scalar(cfg.epsilon));
}

using Model = GcnModel<double>;

/// Glorot-uniform weights from a seeded generator.
Model init_model(std::uint64_t seed, Eigen::Index n, Eigen::Index k, Eigen::Index n_classes = kClasses);

struct TrainResult {
  Model model;
  std::vector<double> loss_history;
};

/// Full-batch AdamW on the training documents of `graph`. `doc_labels` is
/// indexed like graph.doc_ids.
TrainResult train(const TextGraph& graph, std::span<const Label> doc_labels, const TrainConfig& cfg);

/// Targets for the document nodes of a graph (words excluded).
std::vector<NodeTarget> document_targets(const TextGraph& graph, std::span<const Label> doc_labels);

/// H0 for an extended graph: identity over base nodes, tf-idf rows for the
/// appended evaluation documents.
SparseMatrix extended_features(const ExtendedGraph& ext);

struct Prediction {
  std::string id;
  double p_depressed = 0.0;
  Label label = Label::control;
};

/// Argmax with an exact 0.5 tie going to control.
Label decide(double p_depressed);

std::vector<Prediction> predict(const Model& model, const TextGraph& base, const ExtendedGraph& ext);

/// Forward pass over the training graph returning Z (n x 2).
Matrix<double> node_probabilities(const Model& model, const TextGraph& graph);

}  // namespace promptbias
