#pragma once

#include <string>

#include "promptbias/analysis.hpp"

namespace promptbias {

/// Header `interview,bin_0,...`, then one row per interview.
std::string heatmap_csv(const HeatmapMatrix& h);

/// Sidecar JSON: split boundary, row groups, bins, smoothing, colour scaling.
std::string heatmap_metadata(const HeatmapMatrix& h);

/// Interviews along x, progression (0% top) along y, white split line.
/// Colour ramp normalised to the plot maximum.
std::string heatmap_svg(const HeatmapMatrix& h);

/// `word<TAB>probability`, descending probability.
std::string keywords_tsv(const KeywordSet& keywords);
KeywordSet parse_keywords_tsv(std::string_view raw);

/// Turns as <div> blocks shaded by keyword proportion, keywords underlined.
std::string turn_coloring_html(const Transcript& t, const KeywordSet& keywords);

}  // namespace promptbias
