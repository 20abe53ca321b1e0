#ifndef CHARTEX_SYNTH_HPP_
#define CHARTEX_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "chartex/core.hpp"

namespace chartex {
namespace synth {

// Desk-scale chart generator. It covers the four chart types whose text
// annotation density supports role-classification experiments, and records
// pixel-exact ground truth for every rendered text span.
struct SyntheticSpec {
  std::vector<ChartType> chart_types = {ChartType::kHorizontalBar, ChartType::kVerticalBar,
                                        ChartType::kLine, ChartType::kScatter};
  int count = 1;
  int image_h = 200;
  int image_w = 200;
  int font_min = 5;   // pixels, >= 5
  int font_max = 18;  // pixels
  uint64_t seed = 0;
};

// Renders `spec.count` charts, allocated uniformly over chart_types
// (round-robin, so count=100 over 4 types yields 25 each). Byte-identical
// output for identical specs. Throws DataError for invalid specs or when
// mandatory elements cannot be placed ("layout infeasible").
std::vector<LabeledImage> generate_synthetic(const SyntheticSpec& spec);

struct TextStyle {
  int px_height = 7;
  double r = 0, g = 0, b = 0;
};

// Deterministic raster-text drawing; the generator's ground truth is exactly
// the glyph pixels this produces. Returns the tight text box (exclusive max
// edges). Does not clip: the caller keeps text inside the canvas.
BBox render_text(Image& img, const std::string& text, int x, int y, const TextStyle& style);

// Tight box of render_text output without drawing.
BBox measure_text(const std::string& text, int x, int y, int px_height);

// Paired training data for the super-resolution stage: each transcript is
// rendered at native_scale times a random base size (HR), then box-filtered
// down by native_scale (LR).
struct SrPair {
  Image lr;
  Image hr;
};
std::vector<SrPair> make_sr_pairs(const std::vector<std::string>& transcripts, int native_scale,
                                  int base_font_min, int base_font_max, uint64_t seed);

// The documented word pool used for titles, axis names, legend entries and
// footnotes.
const std::vector<std::string>& word_pool();

}  // namespace synth
}  // namespace chartex

#endif  // CHARTEX_SYNTH_HPP_
