#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "promptbias/corpus.hpp"

namespace promptbias {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Rows are documents, columns vocabulary indices, values tf-idf weights.
using DocTermMatrix = SparseMatrix;

/// Word <-> index bijection over the training documents, with document
/// frequencies. Indices follow lexicographic word order.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> words, std::vector<std::size_t> df, std::size_t n_docs);

  std::size_t size() const { return words_.size(); }
  std::size_t n_docs() const { return n_docs_; }
  const std::string& word(std::size_t i) const { return words_[i]; }
  const std::vector<std::string>& words() const { return words_; }
  std::size_t df(std::size_t i) const { return df_[i]; }
  const std::vector<std::size_t>& dfs() const { return df_; }
  std::optional<std::size_t> find(std::string_view word) const;

  /// ln(N_train / df(w)), unsmoothed.
  double idf(std::size_t i) const;
  Eigen::VectorXd idf() const;

  /// Sub-vocabulary keeping the given indices; the result is re-indexed in
  /// lexicographic order and keeps the original df and document count.
  Vocabulary restrict_to(std::span<const std::size_t> keep) const;

 private:
  std::vector<std::string> words_;
  std::vector<std::size_t> df_;
  std::size_t n_docs_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

Vocabulary build_vocabulary(std::span<const Document> docs, std::size_t min_df = 1);

/// tf * idf with raw counts; out-of-vocabulary tokens are dropped.
DocTermMatrix tfidf_matrix(std::span<const Document> docs, const Vocabulary& vocab);

/// One-way ANOVA F statistic per column between the two label groups.
/// +inf marks zero within-group spread with nonzero between-group spread.
Eigen::VectorXd anova_f_scores(const DocTermMatrix& m, std::span<const Label> labels);

struct RankedWord {
  std::size_t index = 0;
  double score = 0.0;
};

/// Highest scores first; ties resolved by lexicographic word order (the
/// vocabulary index order).
std::vector<RankedWord> select_top_k(const Eigen::VectorXd& scores, std::size_t k);

struct LogisticFit {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

/// L1-penalised binary logistic regression by proximal gradient descent
/// with backtracking. Depressed is the positive class.
LogisticFit fit_l1_logistic(const DocTermMatrix& m, std::span<const Label> labels,
                            double l1_strength, int iterations = 500);

/// Smallest L1 strength at which every coefficient is zero.
double l1_strength_max(const DocTermMatrix& m, std::span<const Label> labels);

/// Words with a nonzero L1-logistic coefficient, ranked by |coefficient|.
std::vector<RankedWord> auto_select(const DocTermMatrix& m, std::span<const Label> labels,
                                    double l1_strength);

struct FeatureSelection {
  enum class Mode { none, top_k, automatic };

  Mode mode = Mode::none;
  std::size_t k = 0;
  /// "auto" uses l1 strength = ratio * l1_strength_max.
  double auto_l1_ratio = 0.1;

  static FeatureSelection parse(std::string_view name);
  std::string name() const;
  bool operator==(const FeatureSelection&) const = default;
};

/// Selected words with their scores, in rank order. Mode::none returns
/// every word in vocabulary order with score 0.
std::vector<RankedWord> select_features(const DocTermMatrix& m, std::span<const Label> labels,
                                        const FeatureSelection& selection);

/// TSV `word<TAB>score`, one line per ranked word.
std::string format_selection_tsv(const Vocabulary& vocab, std::span<const RankedWord> ranked);

}  // namespace promptbias
