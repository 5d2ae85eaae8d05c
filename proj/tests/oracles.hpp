#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "promptbias/gcn.hpp"
#include "promptbias/graph.hpp"
#include "promptbias/random.hpp"

namespace oracle {

using promptbias::Model;
using promptbias::NodeTarget;

/// Dense two-layer forward pass, written independently of the library.
inline Eigen::MatrixXd dense_forward(const Eigen::MatrixXd& a_norm, const Eigen::MatrixXd& h0,
                                     const Eigen::MatrixXd& w0, const Eigen::MatrixXd& w1) {
  Eigen::MatrixXd h1 = a_norm * h0 * w0;
  for (Eigen::Index i = 0; i < h1.size(); ++i) h1.data()[i] = std::max(0.0, h1.data()[i]);
  Eigen::MatrixXd logits = a_norm * h1 * w1;
  Eigen::MatrixXd z(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double m = logits.row(r).maxCoeff();
    double s = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) s += std::exp(logits(r, c) - m);
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z(r, c) = std::exp(logits(r, c) - m) / s;
  }
  return z;
}

inline double dense_loss(const Eigen::MatrixXd& a_norm, const Eigen::MatrixXd& w0, const Eigen::MatrixXd& w1,
                         const std::vector<NodeTarget>& targets) {
  const Eigen::MatrixXd z = dense_forward(a_norm, Eigen::MatrixXd::Identity(a_norm.rows(), a_norm.rows()), w0, w1);
  double loss = 0;
  for (const auto& t : targets) loss -= std::log(z(t.node, t.label));
  return loss / static_cast<double>(targets.size());
}

/// Random weighted graph of `words` word nodes and `docs` document nodes
/// shaped like a text graph: word-word and word-doc edges plus a positive
/// word diagonal.
struct Instance {
  promptbias::SparseMatrix a_norm;
  Model model;
  std::vector<NodeTarget> targets;
};

inline Instance random_instance(std::uint64_t seed, int words = 3, int docs = 3, int hidden = 4) {
  promptbias::Rng rng(promptbias::derive_seed(seed, 99));
  const int n = words + docs;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < words; ++i) {
    a(i, i) = rng.uniform(0.05, 0.5);
    for (int j = i + 1; j < words; ++j) {
      if (rng.bernoulli(0.6)) a(i, j) = a(j, i) = rng.uniform(0.1, 2.0);
    }
  }
  for (int d = 0; d < docs; ++d) {
    const int row = words + d;
    a(row, static_cast<int>(rng.index(static_cast<std::size_t>(words)))) = 1.0;
    for (int w = 0; w < words; ++w) {
      if (rng.bernoulli(0.5)) a(row, w) = rng.uniform(0.1, 3.0);
    }
    for (int w = 0; w < words; ++w) a(w, row) = a(row, w);
  }
  Instance inst;
  inst.a_norm = promptbias::normalize_adjacency<double>(promptbias::SparseMatrix(a.sparseView())).first;
  inst.model.w0 = Eigen::MatrixXd(n, hidden);
  inst.model.w1 = Eigen::MatrixXd(hidden, 2);
  for (Eigen::Index i = 0; i < inst.model.w0.size(); ++i) inst.model.w0.data()[i] = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < inst.model.w1.size(); ++i) inst.model.w1.data()[i] = rng.uniform(-1.0, 1.0);
  for (int d = 0; d < docs; ++d) inst.targets.push_back({words + d, static_cast<int>(rng.index(2))});
  return inst;
}

/// Max relative error between analytic and central-difference gradients.
inline double gradient_check(const Instance& inst, double h = 1e-5) {
  const Eigen::MatrixXd a = inst.a_norm;
  const auto state = promptbias::forward(inst.model, inst.a_norm);
  const auto g = promptbias::loss_and_grads<double>(inst.model, inst.a_norm, state, inst.targets);
  double worst = 0;
  auto check = [&](const Eigen::MatrixXd& analytic, bool first) {
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
      Eigen::MatrixXd w0 = inst.model.w0, w1 = inst.model.w1;
      double& p = first ? w0.data()[i] : w1.data()[i];
      const double base = p;
      p = base + h;
      const double up = dense_loss(a, w0, w1, inst.targets);
      p = base - h;
      const double down = dense_loss(a, w0, w1, inst.targets);
      const double numeric = (up - down) / (2 * h);
      const double an = analytic.data()[i];
      const double scale = std::max({std::abs(an), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(an - numeric) / scale);
    }
  };
  check(g.w0, true);
  check(g.w1, false);
  return worst;
}

}  // namespace oracle
