#include "promptbias/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "promptbias/error.hpp"

namespace promptbias {

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::size_t> df,
                       std::size_t n_docs)
    : words_(std::move(words)), df_(std::move(df)), n_docs_(n_docs) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double Vocabulary::idf(std::size_t i) const {
  return std::log(static_cast<double>(n_docs_) / static_cast<double>(df_[i]));
}

Eigen::VectorXd Vocabulary::idf() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) out[static_cast<Eigen::Index>(i)] = idf(i);
  return out;
}

Vocabulary Vocabulary::restrict_to(std::span<const std::size_t> keep) const {
  std::vector<std::size_t> sorted(keep.begin(), keep.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::string> words;
  std::vector<std::size_t> df;
  for (auto i : sorted) {
    words.push_back(words_.at(i));
    df.push_back(df_.at(i));
  }
  return Vocabulary(std::move(words), std::move(df), n_docs_);
}

Vocabulary build_vocabulary(std::span<const Document> docs, std::size_t min_df) {
  if (docs.empty()) throw DataError("empty corpus");
  std::map<std::string, std::size_t> counts;
  bool any_tokens = false;
  for (const auto& doc : docs) {
    std::vector<std::string> unique = doc.tokens;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (auto& w : unique) ++counts[w];
    any_tokens = any_tokens || !doc.tokens.empty();
  }
  if (!any_tokens) throw DataError("empty corpus");

  std::vector<std::string> words;
  std::vector<std::size_t> df;
  for (auto& [w, c] : counts) {
    if (c < std::max<std::size_t>(min_df, 1)) continue;
    words.push_back(w);
    df.push_back(c);
  }
  if (words.empty()) throw DataError("empty corpus: no word reaches min_df");
  return Vocabulary(std::move(words), std::move(df), docs.size());
}

DocTermMatrix tfidf_matrix(std::span<const Document> docs, const Vocabulary& vocab) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::map<std::size_t, double> tf;
    for (const auto& token : docs[d].tokens) {
      if (const auto idx = vocab.find(token)) tf[*idx] += 1.0;
    }
    for (const auto& [j, count] : tf) {
      const double value = count * vocab.idf(j);
      if (value != 0.0) {
        triplets.emplace_back(static_cast<int>(d), static_cast<int>(j), value);
      }
    }
  }
  DocTermMatrix m(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(vocab.size()));
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

Eigen::VectorXd anova_f_scores(const DocTermMatrix& m, std::span<const Label> labels) {
  if (static_cast<std::size_t>(m.rows()) != labels.size()) {
    throw UsageError("anova_f_scores: label count does not match document count");
  }
  double n_pos = 0.0;
  for (auto l : labels) n_pos += l == Label::depressed ? 1.0 : 0.0;
  const double n = static_cast<double>(labels.size());
  const double n_neg = n - n_pos;
  if (n_pos < 1.0 || n_neg < 1.0) throw DataError("anova_f_scores: both classes need samples");

  const Eigen::Index cols = m.cols();
  Eigen::VectorXd sum_pos = Eigen::VectorXd::Zero(cols), sum_neg = Eigen::VectorXd::Zero(cols);
  Eigen::VectorXd sq_pos = Eigen::VectorXd::Zero(cols), sq_neg = Eigen::VectorXd::Zero(cols);
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    const bool pos = labels[static_cast<std::size_t>(r)] == Label::depressed;
    for (DocTermMatrix::InnerIterator it(m, r); it; ++it) {
      (pos ? sum_pos : sum_neg)[it.col()] += it.value();
      (pos ? sq_pos : sq_neg)[it.col()] += it.value() * it.value();
    }
  }

  Eigen::VectorXd scores(cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const double mean_pos = sum_pos[j] / n_pos;
    const double mean_neg = sum_neg[j] / n_neg;
    const double mean = (sum_pos[j] + sum_neg[j]) / n;
    const double between = n_pos * (mean_pos - mean) * (mean_pos - mean) +
                           n_neg * (mean_neg - mean) * (mean_neg - mean);
    double within = (sq_pos[j] - n_pos * mean_pos * mean_pos) +
                    (sq_neg[j] - n_neg * mean_neg * mean_neg);
    // Cancellation can leave tiny negative residue for constant groups.
    const double scale = sq_pos[j] + sq_neg[j];
    if (within <= 1e-12 * scale) within = 0.0;
    if (within == 0.0) {
      scores[j] = between > 1e-12 * scale ? std::numeric_limits<double>::infinity() : 0.0;
    } else {
      scores[j] = between / (within / (n - 2.0));
    }
  }
  return scores;
}

std::vector<RankedWord> select_top_k(const Eigen::VectorXd& scores, std::size_t k) {
  std::vector<RankedWord> ranked;
  ranked.reserve(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    ranked.push_back({static_cast<std::size_t>(j), scores[j]});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedWord& a, const RankedWord& b) { return a.score > b.score; });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

namespace {

Eigen::VectorXd targets(std::span<const Label> labels) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[static_cast<Eigen::Index>(i)] = labels[i] == Label::depressed ? 1.0 : 0.0;
  }
  return y;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_loss(const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z[i]) - y[i] * z[i];
  return total / static_cast<double>(z.size());
}

void check_classes(const Eigen::VectorXd& y) {
  const double pos = y.sum();
  if (pos < 1.0 || pos > static_cast<double>(y.size()) - 1.0) {
    throw DataError("logistic selection: both classes need samples");
  }
}

}  // namespace

double l1_strength_max(const DocTermMatrix& m, std::span<const Label> labels) {
  const Eigen::VectorXd y = targets(labels);
  check_classes(y);
  const double p = y.mean();
  const Eigen::VectorXd residual = Eigen::VectorXd::Constant(y.size(), p) - y;
  const Eigen::VectorXd grad = (m.transpose() * residual) / static_cast<double>(y.size());
  return grad.size() == 0 ? 0.0 : grad.cwiseAbs().maxCoeff();
}

LogisticFit fit_l1_logistic(const DocTermMatrix& m, std::span<const Label> labels,
                            double l1_strength, int iterations) {
  if (static_cast<std::size_t>(m.rows()) != labels.size()) {
    throw UsageError("fit_l1_logistic: label count does not match document count");
  }
  if (!(l1_strength >= 0.0)) throw UsageError("fit_l1_logistic: l1_strength must be >= 0");
  const Eigen::VectorXd y = targets(labels);
  check_classes(y);
  const double n = static_cast<double>(y.size());

  LogisticFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(m.cols());
  double step = 1.0;

  const auto smooth = [&](const Eigen::VectorXd& w, double b) {
    Eigen::VectorXd z = m * w;
    z.array() += b;
    return logistic_loss(z, y);
  };

  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd z = m * fit.coefficients;
    z.array() += fit.intercept;
    const double f = logistic_loss(z, y);
    if (!std::isfinite(f)) throw NumericError("logistic selection diverged at iteration " + std::to_string(it));
    Eigen::VectorXd residual(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) residual[i] = sigmoid(z[i]) - y[i];
    const Eigen::VectorXd grad_w = (m.transpose() * residual) / n;
    const double grad_b = residual.sum() / n;

    Eigen::VectorXd w_next;
    double b_next = 0.0;
    for (int shrink = 0; shrink < 60; ++shrink) {
      const Eigen::VectorXd u = fit.coefficients - step * grad_w;
      const double threshold = step * l1_strength;
      w_next = u.unaryExpr([threshold](double v) {
        return v > threshold ? v - threshold : (v < -threshold ? v + threshold : 0.0);
      });
      b_next = fit.intercept - step * grad_b;
      const Eigen::VectorXd dw = w_next - fit.coefficients;
      const double db = b_next - fit.intercept;
      const double bound = f + grad_w.dot(dw) + grad_b * db + (dw.squaredNorm() + db * db) / (2.0 * step);
      if (smooth(w_next, b_next) <= bound + 1e-15) break;
      step *= 0.5;
    }
    fit.coefficients = std::move(w_next);
    fit.intercept = b_next;
    fit.iterations = it + 1;
  }
  fit.objective = smooth(fit.coefficients, fit.intercept) + l1_strength * fit.coefficients.lpNorm<1>();
  if (!std::isfinite(fit.objective)) throw NumericError("logistic selection diverged");
  return fit;
}

std::vector<RankedWord> auto_select(const DocTermMatrix& m, std::span<const Label> labels,
                                    double l1_strength) {
  const auto fit = fit_l1_logistic(m, labels, l1_strength);
  std::vector<RankedWord> ranked;
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
    if (fit.coefficients[j] != 0.0) {
      ranked.push_back({static_cast<std::size_t>(j), std::abs(fit.coefficients[j])});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedWord& a, const RankedWord& b) { return a.score > b.score; });
  return ranked;
}

FeatureSelection FeatureSelection::parse(std::string_view name) {
  FeatureSelection s;
  if (name == "none") return s;
  if (name == "auto") {
    s.mode = Mode::automatic;
    return s;
  }
  constexpr std::string_view prefix = "top-";
  if (name.starts_with(prefix)) {
    const auto digits = name.substr(prefix.size());
    std::size_t k = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && k >= 1) {
      s.mode = Mode::top_k;
      s.k = k;
      return s;
    }
  }
  throw UsageError("unknown feature selection '" + std::string(name) +
                   "' (expected none, auto or top-<k>)");
}

std::string FeatureSelection::name() const {
  switch (mode) {
    case Mode::none: return "none";
    case Mode::automatic: return "auto";
    case Mode::top_k: return "top-" + std::to_string(k);
  }
  return "none";
}

std::vector<RankedWord> select_features(const DocTermMatrix& m, std::span<const Label> labels,
                                        const FeatureSelection& selection) {
  switch (selection.mode) {
    case FeatureSelection::Mode::top_k:
      return select_top_k(anova_f_scores(m, labels), selection.k);
    case FeatureSelection::Mode::automatic:
      return auto_select(m, labels, selection.auto_l1_ratio * l1_strength_max(m, labels));
    case FeatureSelection::Mode::none:
      break;
  }
  std::vector<RankedWord> all(static_cast<std::size_t>(m.cols()));
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = {j, 0.0};
  return all;
}

std::string format_selection_tsv(const Vocabulary& vocab, std::span<const RankedWord> ranked) {
  std::string out;
  char buf[64];
  for (const auto& r : ranked) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), r.score);
    out += vocab.word(r.index);
    out += '\t';
    out.append(buf, ptr);
    out += '\n';
  }
  return out;
}

}  // namespace promptbias
