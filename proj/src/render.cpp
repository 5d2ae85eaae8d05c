#include "promptbias/render.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <json.hpp>

namespace promptbias {

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

struct Rgb {
  double r, g, b;
};

// Five-stop sequential ramp (dark blue -> yellow).
constexpr std::array<Rgb, 5> kRamp{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};

std::string ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * static_cast<double>(kRamp.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), kRamp.size() - 2);
  const double f = pos - static_cast<double>(i);
  const auto lerp = [f](double a, double b) { return static_cast<int>(std::lround(a + (b - a) * f)); };
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", lerp(kRamp[i].r, kRamp[i + 1].r),
                lerp(kRamp[i].g, kRamp[i + 1].g), lerp(kRamp[i].b, kRamp[i + 1].b));
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string heatmap_csv(const HeatmapMatrix& h) {
  std::string out = "interview";
  for (std::size_t b = 0; b < h.bins; ++b) out += ",bin_" + std::to_string(b);
  out += '\n';
  for (Eigen::Index r = 0; r < h.values.rows(); ++r) {
    out += h.row_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index b = 0; b < h.values.cols(); ++b) out += "," + shortest(h.values(r, b));
    out += '\n';
  }
  return out;
}

std::string heatmap_metadata(const HeatmapMatrix& h) {
  nlohmann::ordered_json meta;
  meta["speaker"] = h.speaker;
  meta["bins"] = h.bins;
  meta["smoothing"] = h.smoothing;
  meta["split_row"] = h.split_row;
  meta["rows"] = h.row_ids.size();
  meta["color_scale"] = "per-plot maximum";
  meta["color_max"] = h.values.size() > 0 ? h.values.maxCoeff() : 0.0;
  auto groups = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < h.row_ids.size(); ++r) {
    groups.push_back({{"id", h.row_ids[r]},
                      {"split", r < h.split_row ? "train" : "eval"},
                      {"label", std::string(to_string(h.row_labels[r]))},
                      {"tokens", h.row_tokens[r]}});
  }
  meta["row_groups"] = std::move(groups);
  return meta.dump(2) + "\n";
}

std::string heatmap_svg(const HeatmapMatrix& h) {
  constexpr int cell_w = 6;
  constexpr int cell_h = 4;
  constexpr int margin = 40;
  const auto cols = static_cast<int>(h.values.rows());
  const auto rows = static_cast<int>(h.values.cols());
  const int width = cols * cell_w + 2 * margin;
  const int height = rows * cell_h + 2 * margin;
  const double top = h.values.size() > 0 ? h.values.maxCoeff() : 0.0;

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"#ffffff\"/>\n";
  out += "<text x=\"" + std::to_string(margin) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"12\">" +
         escape_xml(h.speaker) + " keywords by interview progression</text>\n";
  out += "<g shape-rendering=\"crispEdges\">\n";
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      const double v = h.values(c, r);
      const double t = top > 0.0 ? v / top : 0.0;
      out += "<rect x=\"" + std::to_string(margin + c * cell_w) + "\" y=\"" +
             std::to_string(margin + r * cell_h) + "\" width=\"" + std::to_string(cell_w) +
             "\" height=\"" + std::to_string(cell_h) + "\" fill=\"" + ramp_color(t) + "\"/>\n";
    }
  }
  out += "</g>\n";
  if (h.split_row > 0 && static_cast<int>(h.split_row) < cols) {
    const int x = margin + static_cast<int>(h.split_row) * cell_w;
    out += "<line x1=\"" + std::to_string(x) + "\" y1=\"" + std::to_string(margin) + "\" x2=\"" +
           std::to_string(x) + "\" y2=\"" + std::to_string(margin + rows * cell_h) +
           "\" stroke=\"#ffffff\" stroke-width=\"2\"/>\n";
  }
  out += "<text x=\"4\" y=\"" + std::to_string(margin + 10) +
         "\" font-family=\"sans-serif\" font-size=\"10\">0%</text>\n";
  out += "<text x=\"4\" y=\"" + std::to_string(margin + rows * cell_h) +
         "\" font-family=\"sans-serif\" font-size=\"10\">100%</text>\n";
  out += "<text x=\"" + std::to_string(margin) + "\" y=\"" + std::to_string(height - 12) +
         "\" font-family=\"sans-serif\" font-size=\"10\">interviews (train | eval), max=" + fixed(top, 4) +
         "</text>\n";
  out += "</svg>\n";
  return out;
}

std::string keywords_tsv(const KeywordSet& keywords) {
  std::string out;
  for (const auto& k : keywords.items()) out += k.word + "\t" + shortest(k.p_depressed) + "\n";
  return out;
}

KeywordSet parse_keywords_tsv(std::string_view raw) {
  std::vector<Keyword> items;
  while (!raw.empty()) {
    const auto eol = raw.find('\n');
    const auto line = raw.substr(0, eol);
    raw = eol == std::string_view::npos ? std::string_view{} : raw.substr(eol + 1);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    double p = 0.0;
    const auto value = line.substr(tab == std::string_view::npos ? line.size() : tab + 1);
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), p);
    if (tab == std::string_view::npos || ec != std::errc{} || !(p > 0.5)) {
      throw DataError("keyword file: malformed line '" + std::string(line) + "'");
    }
    items.push_back({std::string(line.substr(0, tab)), p});
  }
  return KeywordSet(std::move(items));
}

std::string turn_coloring_html(const Transcript& t, const KeywordSet& keywords) {
  const auto colors = turn_coloring(t, keywords);
  std::string out = "<div class=\"transcript\" data-interview=\"" + escape_xml(t.interview_id) + "\">\n";
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const auto& c = colors[i];
    out += "<div class=\"turn\" style=\"background-color: rgba(220, 50, 47, " + fixed(c.proportion, 3) +
           ")\"><b>" + escape_xml(c.speaker) + ":</b>";
    // Walk raw words so punctuation survives; a word is underlined when its
    // normalised token is a keyword.
    std::string_view text = t.turns[i].text;
    std::size_t pos = 0;
    while (pos < text.size()) {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
      const auto begin = pos;
      while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
      if (pos == begin) break;
      const auto word = text.substr(begin, pos - begin);
      const auto token = normalize_word(word);
      out += ' ';
      if (!token.empty() && keywords.contains(token)) {
        out += "<u>" + escape_xml(word) + "</u>";
      } else {
        out += escape_xml(word);
      }
    }
    out += "</div>\n";
  }
  out += "</div>\n";
  return out;
}

}  // namespace promptbias
