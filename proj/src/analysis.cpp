#include "promptbias/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace promptbias {

KeywordSet::KeywordSet(std::vector<Keyword> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end(), [](const Keyword& a, const Keyword& b) {
    return a.p_depressed != b.p_depressed ? a.p_depressed > b.p_depressed : a.word < b.word;
  });
  for (const auto& k : items_) lookup_.insert(k.word);
}

KeywordSet keywords_from_probabilities(const std::vector<std::string>& words, const Matrix<double>& z) {
  if (z.rows() < static_cast<Eigen::Index>(words.size())) {
    throw UsageError("keywords: output matrix smaller than the word list");
  }
  std::vector<Keyword> items;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const double p = z(static_cast<Eigen::Index>(i), kDepressedClass);
    if (p > 0.5) items.push_back({words[i], p});
  }
  return KeywordSet(std::move(items));
}

KeywordSet extract_keywords(const Model& model, const TextGraph& graph) {
  return keywords_from_probabilities(graph.words, node_probabilities(model, graph));
}

BinProfile keyword_progression(const Transcript& t, const SpeakerFilter& filter,
                               const KeywordSet& keywords, std::size_t bins) {
  if (bins < 1) throw UsageError("keyword_progression: bins must be >= 1");
  BinProfile profile{std::vector<double>(bins, 0.0), std::vector<std::size_t>(bins, 0),
                     std::vector<std::size_t>(bins, 0)};
  const auto progression = token_progressions(t);
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    if (!filter.accepts(t.turns[i].speaker)) continue;
    const auto tokens = tokenize(t.turns[i].text);
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      auto bin = static_cast<std::size_t>(std::floor(progression[i][j] * static_cast<double>(bins)));
      bin = std::min(bin, bins - 1);
      ++profile.tokens[bin];
      if (keywords.contains(tokens[j])) ++profile.keyword_tokens[bin];
    }
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (profile.tokens[b] > 0) {
      profile.proportion[b] =
          static_cast<double>(profile.keyword_tokens[b]) / static_cast<double>(profile.tokens[b]);
    }
  }
  return profile;
}

std::vector<double> smooth_bins(const std::vector<double>& values, std::size_t width) {
  if (width <= 1) return values;
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  const auto half_lo = static_cast<std::ptrdiff_t>((width - 1) / 2);
  const auto half_hi = static_cast<std::ptrdiff_t>(width / 2);
  std::vector<double> out(values.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto lo = std::max<std::ptrdiff_t>(0, i - half_lo);
    const auto hi = std::min<std::ptrdiff_t>(n - 1, i + half_hi);
    double total = 0.0;
    for (auto j = lo; j <= hi; ++j) total += values[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = total / static_cast<double>(hi - lo + 1);
  }
  return out;
}

HeatmapMatrix build_heatmap(const Dataset& data, const SpeakerFilter& filter,
                            const KeywordSet& keywords, std::size_t bins, std::size_t smoothing) {
  if (bins < 1) throw UsageError("build_heatmap: bins must be >= 1");
  HeatmapMatrix h;
  h.bins = bins;
  h.smoothing = std::max<std::size_t>(smoothing, 1);
  h.speaker = filter.name();

  std::vector<const Transcript*> order;
  for (const auto* corpus : {&data.train, &data.eval}) {
    if (corpus == &data.eval) h.split_row = order.size();
    for (const auto want : {Label::depressed, Label::control}) {
      for (const auto& t : corpus->transcripts) {
        if (corpus->labels.label(t.interview_id) == want) order.push_back(&t);
      }
    }
  }

  h.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(bins));
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& t = *order[r];
    const auto profile = keyword_progression(t, filter, keywords, bins);
    const auto row = smooth_bins(profile.proportion, h.smoothing);
    for (std::size_t b = 0; b < bins; ++b) {
      h.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(b)) = row[b];
    }
    h.row_ids.push_back(t.interview_id);
    const bool is_train = r < h.split_row;
    h.row_labels.push_back((is_train ? data.train : data.eval).labels.label(t.interview_id));
    std::size_t total = 0;
    for (auto c : profile.tokens) total += c;
    h.row_tokens.push_back(total);
  }
  return h;
}

std::vector<TurnColor> turn_coloring(const Transcript& t, const KeywordSet& keywords) {
  std::vector<TurnColor> out;
  out.reserve(t.turns.size());
  for (const auto& turn : t.turns) {
    TurnColor c;
    c.speaker = turn.speaker;
    const auto tokens = tokenize(turn.text);
    c.tokens = tokens.size();
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      if (keywords.contains(tokens[j])) c.keyword_positions.push_back(j);
    }
    if (c.tokens > 0) {
      c.proportion = static_cast<double>(c.keyword_positions.size()) / static_cast<double>(c.tokens);
    }
    out.push_back(std::move(c));
  }
  return out;
}

RowLocalization localize_row(const Eigen::Ref<const Eigen::VectorXd>& row, double split_frac) {
  RowLocalization out;
  const double total = row.sum();
  if (!(total > 0.0)) {
    out.all_zero = true;
    return out;
  }
  const auto bins = row.size();
  const double width = 1.0 / static_cast<double>(bins);
  double after = 0.0;
  double entropy = 0.0;
  for (Eigen::Index b = 0; b < bins; ++b) {
    const double hi = static_cast<double>(b + 1) * width;
    const double share = std::clamp((hi - split_frac) / width, 0.0, 1.0);
    after += share * row[b];
    const double p = row[b] / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  out.after_fraction = after / total;
  out.entropy = bins > 1 ? entropy / std::log(static_cast<double>(bins)) : 0.0;
  return out;
}

LocalizationStats localization_stats(const HeatmapMatrix& h, double split_frac) {
  if (!(split_frac > 0.0 && split_frac < 1.0)) {
    throw UsageError("localization_stats: split_frac must lie in (0,1)");
  }
  LocalizationStats stats;
  stats.split_frac = split_frac;
  std::map<Label, std::pair<double, double>> mass;  // after, total
  for (Eigen::Index r = 0; r < h.values.rows(); ++r) {
    const Eigen::VectorXd row = h.values.row(r).transpose();
    const auto loc = localize_row(row, split_frac);
    stats.rows.push_back(loc);
    const auto label = h.row_labels[static_cast<std::size_t>(r)];
    auto& group = stats.groups[label];
    ++group.rows;
    group.zero_rows += loc.all_zero ? 1 : 0;
    group.mean_entropy += loc.entropy;
    mass[label].first += loc.after_fraction * row.sum();
    mass[label].second += row.sum();
  }
  for (auto& [label, group] : stats.groups) {
    group.mean_entropy /= static_cast<double>(group.rows);
    const auto [after, total] = mass[label];
    group.after_fraction = total > 0.0 ? after / total : 0.0;
  }
  return stats;
}

}  // namespace promptbias
