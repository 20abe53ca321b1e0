#include "chartex/core.hpp"

#include <algorithm>
#include <cmath>

namespace chartex {

namespace {

const std::array<std::string, kNumChartTypes> kChartTypeNames = {
    "horizontal-bar", "vertical-bar", "line", "scatter", "scatter-line",
    "vertical-box", "area", "heatmap", "horizontal-interval", "manhattan",
    "map", "pie", "surface", "venn", "vertical-interval"};

const std::array<std::string, kNumTextRoles> kTextRoleNames = {
    "chart-title", "mark-label", "legend-title", "legend-label", "axis-title",
    "tick-label", "tick-grouping", "value-label", "other"};

}  // namespace

const std::string& chart_type_name(ChartType t) {
  return kChartTypeNames[static_cast<int>(t)];
}

const std::string& text_role_name(TextRole r) {
  return kTextRoleNames[static_cast<int>(r)];
}

ChartType chart_type_from_name(const std::string& name) {
  for (int i = 0; i < kNumChartTypes; ++i)
    if (kChartTypeNames[i] == name) return static_cast<ChartType>(i);
  throw DataError("unknown chart type: \"" + name + "\"");
}

TextRole text_role_from_name(const std::string& name) {
  for (int i = 0; i < kNumTextRoles; ++i)
    if (kTextRoleNames[i] == name) return static_cast<TextRole>(i);
  throw DataError("unknown text role: \"" + name + "\"");
}

bool BBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max;
}

double box_area(const BBox& a) { return a.width() * a.height(); }

double iou(const BBox& a, const BBox& b) {
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (box_area(a) + box_area(b) - inter);
}

Image Image::filled(int h, int w, double r, double g, double b) {
  Image img;
  img.h = h;
  img.w = w;
  img.px.resize(static_cast<size_t>(h) * w * 3);
  for (size_t i = 0; i < img.px.size(); i += 3) {
    img.px[i] = r;
    img.px[i + 1] = g;
    img.px[i + 2] = b;
  }
  return img;
}

Image crop(const Image& img, const BBox& box) {
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x_min)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y_min)));
  const int x1 = std::min(img.w, static_cast<int>(std::ceil(box.x_max)));
  const int y1 = std::min(img.h, static_cast<int>(std::ceil(box.y_max)));
  if (x0 >= x1 || y0 >= y1) throw DataError("box outside image");
  Image out;
  out.h = y1 - y0;
  out.w = x1 - x0;
  out.px.resize(static_cast<size_t>(out.h) * out.w * 3);
  for (int y = y0; y < y1; ++y) {
    const double* src = &img.px[(static_cast<size_t>(y) * img.w + x0) * 3];
    double* dst = &out.px[(static_cast<size_t>(y - y0) * out.w) * 3];
    std::copy(src, src + static_cast<size_t>(out.w) * 3, dst);
  }
  return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  Image out;
  out.h = out_h;
  out.w = out_w;
  out.px.resize(static_cast<size_t>(out_h) * out_w * 3);
  for (int y = 0; y < out_h; ++y) {
    // Sample at pixel centers via normalized coordinates. The grouping
    // ((i+0.5)/out)*in-0.5 is shared bit-for-bit with the TPS sampler.
    double fy = ((y + 0.5) / out_h) * img.h - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(img.h - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = ((x + 0.5) / out_w) * img.w - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(img.w - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.w - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

}  // namespace chartex
