#ifndef CHARTEX_CORE_HPP_
#define CHARTEX_CORE_HPP_

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chartex {

// Error taxonomy used for CLI exit codes: DataError -> 2, ModelError -> 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// The 15 chart categories. Integer codes are stable and used as classifier
// head indices; do not reorder.
enum class ChartType : int {
  kHorizontalBar = 0,
  kVerticalBar = 1,
  kLine = 2,
  kScatter = 3,
  kScatterLine = 4,
  kVerticalBox = 5,
  kArea = 6,
  kHeatmap = 7,
  kHorizontalInterval = 8,
  kManhattan = 9,
  kMap = 10,
  kPie = 11,
  kSurface = 12,
  kVenn = 13,
  kVerticalInterval = 14,
};
constexpr int kNumChartTypes = 15;

// The nine text roles. Codes are stable classifier indices; do not reorder.
enum class TextRole : int {
  kChartTitle = 0,
  kMarkLabel = 1,
  kLegendTitle = 2,
  kLegendLabel = 3,
  kAxisTitle = 4,
  kTickLabel = 5,
  kTickGrouping = 6,
  kValueLabel = 7,
  kOther = 8,
};
constexpr int kNumTextRoles = 9;

const std::string& chart_type_name(ChartType t);
const std::string& text_role_name(TextRole r);
// Strict lookups over the closed vocabularies; unknown strings throw DataError.
ChartType chart_type_from_name(const std::string& name);
TextRole text_role_from_name(const std::string& name);

// Axis-aligned box in continuous pixel coordinates, origin top-left.
// Max edges are exclusive when boxes are rasterized.
struct BBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  bool valid() const;
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
};

double box_area(const BBox& a);
double iou(const BBox& a, const BBox& b);

// RGB image, interleaved row-major, values normalized to [0,1].
struct Image {
  int h = 0, w = 0;
  std::vector<double> px;  // size h*w*3

  static Image filled(int h, int w, double r, double g, double b);
  double& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  double at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

// One detected/annotated text region. Optional fields are filled in as the
// block moves through the pipeline stages.
struct TextBlock {
  BBox box;
  std::optional<TextRole> role;
  std::optional<std::string> transcript;
  std::optional<double> confidence;  // in [0,1] when present
};

struct LabeledImage {
  Image pixels;
  std::optional<ChartType> chart_type;
  std::vector<TextBlock> blocks;
  std::string source_id;
};

struct ResultBlock {
  BBox box;
  TextRole role = TextRole::kOther;
  double role_confidence = 0.0;
  std::string transcript;
  double text_confidence = 0.0;
};

// Final structured output of the five-stage pipeline.
struct ExtractionResult {
  ChartType chart_type = ChartType::kLine;
  double chart_type_confidence = 0.0;
  std::vector<ResultBlock> blocks;
  // Stage name -> wall-clock seconds. Diagnostic only; excluded from
  // determinism comparisons.
  std::map<std::string, double> timings;
};

// Pixel sub-array of `box` clipped to the image and rounded outward to
// integer bounds. Throws DataError when the box misses the image entirely.
Image crop(const Image& img, const BBox& box);

// Bilinear resample to (out_h, out_w) with clamp-to-edge sampling. This is
// the one sampler shared by all stages (input resize, TPS, SR delivery).
Image resize_bilinear(const Image& img, int out_h, int out_w);

}  // namespace chartex

#endif  // CHARTEX_CORE_HPP_
