#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "promptbias/error.hpp"
#include "promptbias/features.hpp"

namespace promptbias {

template <typename Scalar>
using SparseMat = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

/// Positive word-pair PMI, keyed (i, j) with i < j over vocabulary indices.
struct WordPair {
  std::size_t i = 0;
  std::size_t j = 0;
  double score = 0.0;
  bool operator==(const WordPair&) const = default;
};
using PairScores = std::vector<WordPair>;

/// Sliding-window PMI over documents restricted to `vocab` (tokens outside
/// the vocabulary are removed before windowing). A document shorter than
/// the window forms a single window.
PairScores pmi_scores(std::span<const Document> docs, const Vocabulary& vocab, std::size_t window);

struct PageRankResult {
  Eigen::VectorXd scores;
  int iterations = 0;
  bool converged = false;
};

/// Weighted PageRank by power iteration; dangling nodes spread uniformly.
PageRankResult pagerank(std::size_t n, const PairScores& edges, double damping = 0.85,
                        double tol = 1e-9, int max_iter = 200);

struct GraphParams {
  std::size_t window = 10;
  double damping = 0.85;
  double pagerank_tol = 1e-9;
  int pagerank_max_iter = 200;
  double self_loop = 1e-6;
};

/// D^{-1/2} A D^{-1/2} with D the row sums of A.
template <typename Scalar>
std::pair<SparseMat<Scalar>, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> normalize_adjacency(
    const SparseMat<Scalar>& a) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector degree = Vector::Zero(a.rows());
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    for (typename SparseMat<Scalar>::InnerIterator it(a, r); it; ++it) degree[r] += it.value();
  }
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (!(degree[r] > Scalar(0))) {
      throw NumericError("normalize_adjacency: node " + std::to_string(r) + " has zero degree");
    }
  }
  SparseMat<Scalar> out = a;
  for (Eigen::Index r = 0; r < out.outerSize(); ++r) {
    for (typename SparseMat<Scalar>::InnerIterator it(out, r); it; ++it) {
      using std::sqrt;
      it.valueRef() = it.value() / sqrt(degree[r] * degree[it.col()]);
    }
  }
  return {std::move(out), std::move(degree)};
}

/// Word and training-document graph. Nodes are words (vocabulary order)
/// followed by training documents (corpus order).
struct TextGraph {
  std::vector<std::string> words;
  std::vector<std::string> doc_ids;
  SparseMatrix adjacency;
  SparseMatrix normalized;
  Eigen::VectorXd degree;

  std::size_t n_words() const { return words.size(); }
  std::size_t n_docs() const { return doc_ids.size(); }
  std::size_t n() const { return words.size() + doc_ids.size(); }
};

TextGraph assemble_adjacency(const PairScores& pmi, const Eigen::VectorXd& pagerank,
                             const DocTermMatrix& tfidf, std::vector<std::string> words,
                             std::vector<std::string> doc_ids, double self_loop = 1e-6);

/// pmi -> pagerank -> tf-idf -> assembly over the given (already selected)
/// vocabulary.
TextGraph build_text_graph(std::span<const Document> train_docs, const Vocabulary& vocab,
                           const GraphParams& params = {});

/// Base graph plus one appended node per evaluation document.
struct ExtendedGraph {
  std::size_t base_n = 0;
  std::size_t n_words = 0;
  std::vector<std::string> eval_ids;
  /// Eval rows of tf-idf against the training vocabulary and idf.
  DocTermMatrix eval_features;
  SparseMatrix adjacency;
  SparseMatrix normalized;
  Eigen::VectorXd degree;

  std::size_t n() const { return base_n + eval_ids.size(); }
};

ExtendedGraph extend_for_inference(const TextGraph& g, std::span<const Document> eval_docs,
                                   const Vocabulary& vocab, double self_loop = 1e-6);

/// `i<TAB>j<TAB>weight` for every stored entry, row-major order.
std::string format_triplets(const SparseMatrix& m);
SparseMatrix parse_triplets(std::string_view raw, Eigen::Index n);

/// `index<TAB>kind<TAB>name` with kind in {word, doc}.
std::string format_node_manifest(const TextGraph& g);

void write_graph(const TextGraph& g, const std::filesystem::path& dir);
TextGraph read_graph(const std::filesystem::path& dir);

/// 64-bit FNV-1a over the exported graph bytes.
std::uint64_t graph_fingerprint(const TextGraph& g);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t value);

}  // namespace promptbias
