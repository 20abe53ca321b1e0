#include "chartex/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "chartex/font5x7.hpp"
#include "chartex/tensor.hpp"

namespace chartex {
namespace synth {

namespace {

struct Color {
  double r, g, b;
};

constexpr Color kBlack{0.0, 0.0, 0.0};
constexpr Color kGray{0.45, 0.45, 0.45};
const Color kPalette[] = {{0.13, 0.29, 0.68},
                          {0.80, 0.15, 0.13},
                          {0.05, 0.48, 0.22},
                          {0.55, 0.14, 0.60},
                          {0.88, 0.49, 0.06}};

void put_px(Image& img, int x, int y, const Color& c) {
  if (x < 0 || y < 0 || x >= img.w || y >= img.h) return;
  img.at(y, x, 0) = c.r;
  img.at(y, x, 1) = c.g;
  img.at(y, x, 2) = c.b;
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, const Color& c) {
  for (int y = std::max(0, y0); y < std::min(img.h, y1); ++y)
    for (int x = std::max(0, x0); x < std::min(img.w, x1); ++x) put_px(img, x, y, c);
}

void draw_line(Image& img, int x0, int y0, int x1, int y1, const Color& c) {
  // Bresenham.
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  int x = x0, y = y0;
  while (true) {
    put_px(img, x, y, c);
    if (x == x1 && y == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

struct GlyphScale {
  int char_w;
  int advance;
};

GlyphScale glyph_scale(int px_height) {
  GlyphScale s;
  s.char_w = std::max(1, static_cast<int>(std::lround(5.0 * px_height / 7.0)));
  s.advance = s.char_w + std::max(1, static_cast<int>(std::lround(px_height / 7.0)));
  return s;
}

}  // namespace

BBox measure_text(const std::string& text, int x, int y, int px_height) {
  const GlyphScale s = glyph_scale(px_height);
  const int n = static_cast<int>(text.size());
  const int w = n == 0 ? 0 : (n - 1) * s.advance + s.char_w;
  return BBox{static_cast<double>(x), static_cast<double>(y), static_cast<double>(x + w),
              static_cast<double>(y + px_height)};
}

BBox render_text(Image& img, const std::string& text, int x, int y, const TextStyle& style) {
  const GlyphScale s = glyph_scale(style.px_height);
  const Color c{style.r, style.g, style.b};
  int cx = x;
  for (char ch : text) {
    const font::Glyph* g = font::find_glyph(ch);
    if (g == nullptr) throw DataError(std::string("no glyph for character '") + ch + "'");
    for (int ty = 0; ty < style.px_height; ++ty) {
      const int my = ty * font::kGlyphH / style.px_height;
      for (int tx = 0; tx < s.char_w; ++tx) {
        const int mx = tx * font::kGlyphW / s.char_w;
        if (g->rows[my] & (1 << (font::kGlyphW - 1 - mx))) put_px(img, cx + tx, y + ty, c);
      }
    }
    cx += s.advance;
  }
  return measure_text(text, x, y, style.px_height);
}

const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> kWords = {
      "Total",  "Average", "Count",  "Rate",   "Index",  "Score", "Time",  "Value",
      "Sales",  "Energy",  "Growth", "Speed",  "Mass",   "Depth", "Area",  "Cost",
      "Price",  "Load",    "Power",  "Phase",  "Group",  "Series", "Model", "Trial",
      "Range",  "Level",   "Density", "Volume", "Output", "Input", "Yield", "Error",
      "Gain",   "Flow",    "Temp",   "Units",  "Year",   "Month", "Day",   "Ratio"};
  return kWords;
}

namespace {

struct TextPlan {
  std::string text;
  int x = 0, y = 0;
  TextStyle style;
  TextRole role = TextRole::kOther;
};

bool boxes_touch(const BBox& a, const BBox& b, double margin) {
  return !(a.x_max + margin <= b.x_min || b.x_max + margin <= a.x_min ||
           a.y_max + margin <= b.y_min || b.y_max + margin <= a.y_min);
}

class ChartBuilder {
 public:
  ChartBuilder(const SyntheticSpec& spec, ChartType type, RandomSource& rng)
      : spec_(spec), type_(type), rng_(rng) {}

  LabeledImage build(const std::string& source_id);

 private:
  // Tries to register a text plan; returns false when it would overlap an
  // already planned text or leave the canvas.
  bool plan_text(const std::string& text, int x, int y, int px, const Color& c, TextRole role,
                 bool mandatory = false);
  std::string rand_word() {
    return word_pool()[static_cast<size_t>(rng_.below(static_cast<int64_t>(word_pool().size())))];
  }
  std::string rand_words(int lo, int hi) {
    const int n = lo + static_cast<int>(rng_.below(hi - lo + 1));
    std::string s;
    for (int i = 0; i < n; ++i) {
      if (i) s += ' ';
      s += rand_word();
    }
    return s;
  }
  int rand_px(int lo, int hi) {
    lo = std::clamp(lo, spec_.font_min, spec_.font_max);
    hi = std::clamp(hi, lo, spec_.font_max);
    return lo + static_cast<int>(rng_.below(hi - lo + 1));
  }

  const SyntheticSpec& spec_;
  ChartType type_;
  RandomSource& rng_;
  std::vector<TextPlan> plans_;
  std::vector<BBox> placed_;
  Image canvas_;
};

bool ChartBuilder::plan_text(const std::string& text, int x, int y, int px, const Color& c,
                             TextRole role, bool mandatory) {
  const BBox box = measure_text(text, x, y, px);
  if (box.x_min < 0 || box.y_min < 0 || box.x_max > spec_.image_w || box.y_max > spec_.image_h) {
    if (mandatory) throw DataError("layout infeasible");
    return false;
  }
  for (const BBox& other : placed_)
    if (boxes_touch(box, other, 1.0)) {
      if (mandatory) throw DataError("layout infeasible");
      return false;
    }
  plans_.push_back(TextPlan{text, x, y, TextStyle{px, c.r, c.g, c.b}, role});
  placed_.push_back(box);
  return true;
}

LabeledImage ChartBuilder::build(const std::string& source_id) {
  const int W = spec_.image_w, H = spec_.image_h;
  const int margin = 4;
  canvas_ = Image::filled(H, W, 1.0, 1.0, 1.0);

  const int title_px = rand_px(11, 16);
  const int axis_px = rand_px(7, 10);
  const int tick_px = rand_px(spec_.font_min, 8);
  const int value_px = rand_px(spec_.font_min, 7);
  const int legend_px = rand_px(spec_.font_min, 8);
  const int foot_px = rand_px(spec_.font_min, 7);

  // Title: shrink the word count until it fits.
  std::string title = rand_words(2, 3);
  while (measure_text(title, 0, 0, title_px).width() > W - 2 * margin) {
    const size_t sp = title.rfind(' ');
    if (sp == std::string::npos) throw DataError("layout infeasible");
    title.resize(sp);
  }
  const int title_w = static_cast<int>(measure_text(title, 0, 0, title_px).width());
  plan_text(title, (W - title_w) / 2, margin, title_px, kBlack, TextRole::kChartTitle, true);
  int top_cursor = margin + title_px + 3;

  const std::string y_title = rand_word();
  plan_text(y_title, margin, top_cursor, axis_px, kBlack, TextRole::kAxisTitle, true);
  top_cursor += axis_px + 4;

  const bool with_footnote = rng_.uniform() < 0.5;
  int bottom_cursor = H - margin;
  int foot_y = 0;
  if (with_footnote) {
    foot_y = bottom_cursor - foot_px;
    bottom_cursor = foot_y - 3;
  }
  const int xtitle_y = bottom_cursor - axis_px;
  bottom_cursor = xtitle_y - 3;
  const int xtick_y = bottom_cursor - tick_px;
  const int plot_bottom = xtick_y - 3;
  const int plot_top = top_cursor;

  // Value axis scale.
  const int vmax_choices[] = {10, 20, 50, 100, 200, 500};
  const int vmax = vmax_choices[rng_.below(6)];
  const int n_vticks = 3 + static_cast<int>(rng_.below(3));  // 3..5 on the value axis

  const bool horizontal = type_ == ChartType::kHorizontalBar;
  // Category labels (bars) or numeric labels (everything else) on each axis.
  const int n_items = 3 + static_cast<int>(rng_.below(5));  // bars or points anchor count
  std::vector<std::string> cat_labels;
  for (int i = 0; i < n_items; ++i) cat_labels.push_back(std::string(1, static_cast<char>('A' + i)));

  // Left margin is driven by the widest y-axis tick label.
  std::vector<std::string> ytick_texts;
  if (horizontal) {
    ytick_texts = cat_labels;
  } else {
    for (int i = 0; i < n_vticks; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%d", vmax * i / (n_vticks - 1));
      ytick_texts.emplace_back(buf);
    }
  }
  int max_ylabel_w = 0;
  for (const auto& s : ytick_texts)
    max_ylabel_w = std::max(max_ylabel_w, static_cast<int>(measure_text(s, 0, 0, tick_px).width()));
  const int plot_left = margin + max_ylabel_w + 4;
  const int plot_right = W - margin - 2;

  if (plot_right - plot_left < 36 || plot_bottom - plot_top < 28)
    throw DataError("layout infeasible");

  // Axes.
  draw_line(canvas_, plot_left, plot_top, plot_left, plot_bottom, kBlack);
  draw_line(canvas_, plot_left, plot_bottom, plot_right, plot_bottom, kBlack);

  // Y tick labels and marks.
  const int n_yticks = static_cast<int>(ytick_texts.size());
  std::vector<int> ytick_pos(static_cast<size_t>(n_yticks));
  for (int i = 0; i < n_yticks; ++i) {
    int y;
    if (horizontal) {
      y = plot_bottom - (plot_bottom - plot_top) * (2 * i + 1) / (2 * n_yticks);
    } else {
      y = plot_bottom - (plot_bottom - plot_top - 4) * i / (n_yticks - 1);
    }
    ytick_pos[static_cast<size_t>(i)] = y;
    draw_line(canvas_, plot_left - 2, y, plot_left, y, kBlack);
    const int lw = static_cast<int>(measure_text(ytick_texts[static_cast<size_t>(i)], 0, 0, tick_px).width());
    plan_text(ytick_texts[static_cast<size_t>(i)], plot_left - 4 - lw,
              std::clamp(y - tick_px / 2, 0, H - tick_px), tick_px, kBlack, TextRole::kTickLabel);
  }

  // X tick labels and marks.
  std::vector<std::string> xtick_texts;
  std::vector<int> xtick_pos;
  if (horizontal) {
    for (int i = 0; i < n_vticks; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%d", vmax * i / (n_vticks - 1));
      xtick_texts.emplace_back(buf);
      xtick_pos.push_back(plot_left + (plot_right - plot_left - 4) * i / (n_vticks - 1));
    }
  } else if (type_ == ChartType::kVerticalBar) {
    xtick_texts = cat_labels;
    for (int i = 0; i < n_items; ++i)
      xtick_pos.push_back(plot_left + (plot_right - plot_left) * (2 * i + 1) / (2 * n_items));
  } else {
    // Numeric x axis for line / scatter.
    const int xmax = 10 * n_items;
    for (int i = 0; i < n_items; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%d", xmax * i / std::max(1, n_items - 1));
      xtick_texts.emplace_back(buf);
      xtick_pos.push_back(plot_left + (plot_right - plot_left - 4) * i / std::max(1, n_items - 1));
    }
  }
  int placed_xticks = 0;
  for (size_t i = 0; i < xtick_texts.size(); ++i) {
    const int lw = static_cast<int>(measure_text(xtick_texts[i], 0, 0, tick_px).width());
    const int x = std::clamp(xtick_pos[i] - lw / 2, 0, W - lw);
    draw_line(canvas_, xtick_pos[i], plot_bottom, xtick_pos[i], plot_bottom + 2, kBlack);
    if (plan_text(xtick_texts[i], x, xtick_y, tick_px, kBlack, TextRole::kTickLabel))
      ++placed_xticks;
  }
  if (placed_xticks == 0) throw DataError("layout infeasible");

  // X axis title.
  const std::string x_title = rand_word();
  const int xtitle_w = static_cast<int>(measure_text(x_title, 0, 0, axis_px).width());
  plan_text(x_title, std::clamp(plot_left + (plot_right - plot_left - xtitle_w) / 2, 0, W - xtitle_w),
            xtitle_y, axis_px, kBlack, TextRole::kAxisTitle, true);

  if (with_footnote) {
    const std::string note = rand_words(1, 3);
    plan_text(note, margin, foot_y, foot_px, kGray, TextRole::kOther);
  }

  // Series setup.
  const int n_series =
      (type_ == ChartType::kLine) ? 1 + static_cast<int>(rng_.below(3))
      : (type_ == ChartType::kScatter) ? 1 + static_cast<int>(rng_.below(2))
                                       : 1;
  const int palette_off = static_cast<int>(rng_.below(5));
  const auto series_color = [&](int s) { return kPalette[(palette_off + s) % 5]; };

  // Legend (planned before value labels so value labels dodge it).
  if (rng_.uniform() < 0.75) {
    std::vector<std::string> labels;
    int max_w = 0;
    for (int s = 0; s < n_series; ++s) {
      labels.push_back(rand_word());
      max_w = std::max(max_w,
                       static_cast<int>(measure_text(labels.back(), 0, 0, legend_px).width()));
    }
    const int patch_w = 7, gap = 3;
    const int lx = plot_right - max_w - 2;
    int ly = plot_top + 2;
    bool fits = lx - patch_w - gap > plot_left + 8;
    for (int s = 0; fits && s < n_series; ++s) {
      if (plan_text(labels[static_cast<size_t>(s)], lx, ly, legend_px, series_color(s),
                    TextRole::kLegendLabel)) {
        fill_rect(canvas_, lx - patch_w - gap, ly + legend_px / 2 - 2, lx - gap,
                  ly + legend_px / 2 + 2, series_color(s));
      }
      ly += legend_px + 3;
    }
  }

  const bool with_values = rng_.uniform() < 0.65;
  const auto value_text = [&](double frac) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(std::lround(frac * vmax)));
    return std::string(buf);
  };

  // Chart body.
  if (type_ == ChartType::kVerticalBar) {
    const int slot = (plot_right - plot_left) / n_items;
    const int bar_w = std::max(3, slot * 3 / 5);
    for (int i = 0; i < n_items; ++i) {
      const double frac = rng_.uniform(0.2, 0.95);
      const int top = plot_bottom - static_cast<int>(frac * (plot_bottom - plot_top - 6));
      const int cx = xtick_pos[static_cast<size_t>(i)];
      fill_rect(canvas_, cx - bar_w / 2, top, cx - bar_w / 2 + bar_w, plot_bottom, series_color(0));
      if (with_values) {
        const std::string v = value_text(frac);
        const int vw = static_cast<int>(measure_text(v, 0, 0, value_px).width());
        plan_text(v, std::clamp(cx - vw / 2, 0, W - vw), top - value_px - 2, value_px,
                  series_color(0), TextRole::kValueLabel);
      }
    }
  } else if (type_ == ChartType::kHorizontalBar) {
    const int bar_h = std::max(3, (plot_bottom - plot_top) / n_items * 3 / 5);
    for (int i = 0; i < n_items; ++i) {
      const double frac = rng_.uniform(0.2, 0.95);
      const int cy = ytick_pos[static_cast<size_t>(i)];
      const int right = plot_left + static_cast<int>(frac * (plot_right - plot_left - 8));
      fill_rect(canvas_, plot_left + 1, cy - bar_h / 2, right, cy - bar_h / 2 + bar_h,
                series_color(0));
      if (with_values) {
        const std::string v = value_text(frac);
        plan_text(v, right + 2, std::clamp(cy - value_px / 2, 0, H - value_px), value_px,
                  series_color(0), TextRole::kValueLabel);
      }
    }
  } else if (type_ == ChartType::kLine) {
    for (int s = 0; s < n_series; ++s) {
      int prev_x = 0, prev_y = 0;
      for (int i = 0; i < n_items; ++i) {
        const double frac = rng_.uniform(0.1, 0.9);
        const int x = xtick_pos[static_cast<size_t>(i)];
        const int y = plot_bottom - 2 - static_cast<int>(frac * (plot_bottom - plot_top - 8));
        if (i > 0) draw_line(canvas_, prev_x, prev_y, x, y, series_color(s));
        if (with_values && rng_.uniform() < 0.25) {
          const std::string v = value_text(frac);
          plan_text(v, x + 2, y - value_px - 1, value_px, series_color(s), TextRole::kValueLabel);
        }
        prev_x = x;
        prev_y = y;
      }
    }
  } else {  // scatter
    for (int s = 0; s < n_series; ++s) {
      const int n_pts = 6 + static_cast<int>(rng_.below(8));
      for (int i = 0; i < n_pts; ++i) {
        const int x = plot_left + 3 + static_cast<int>(rng_.below(plot_right - plot_left - 6));
        const double frac = rng_.uniform(0.05, 0.95);
        const int y = plot_bottom - 3 - static_cast<int>(frac * (plot_bottom - plot_top - 8));
        fill_rect(canvas_, x - 1, y - 1, x + 2, y + 2, series_color(s));
        if (with_values && rng_.uniform() < 0.2) {
          const std::string v = value_text(frac);
          plan_text(v, x + 3, y - value_px / 2, value_px, series_color(s), TextRole::kValueLabel);
        }
      }
    }
  }

  // Render all planned text over the graphics, recording ground truth.
  LabeledImage out;
  out.chart_type = type_;
  out.source_id = source_id;
  for (const TextPlan& p : plans_) {
    const BBox box = render_text(canvas_, p.text, p.x, p.y, p.style);
    TextBlock block;
    block.box = box;
    block.role = p.role;
    block.transcript = p.text;
    out.blocks.push_back(block);
  }
  out.pixels = std::move(canvas_);
  return out;
}

}  // namespace

std::vector<LabeledImage> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.count < 1) throw DataError("synthetic spec: count must be >= 1");
  if (spec.chart_types.empty()) throw DataError("synthetic spec: chart_types empty");
  if (spec.font_min < 5) throw DataError("synthetic spec: font_min must be >= 5");
  if (spec.font_max < spec.font_min) throw DataError("synthetic spec: font range empty");
  if (spec.image_h < 1 || spec.image_w < 1) throw DataError("synthetic spec: bad image size");
  const std::vector<ChartType> kSupported = {ChartType::kHorizontalBar, ChartType::kVerticalBar,
                                             ChartType::kLine, ChartType::kScatter};
  for (ChartType t : spec.chart_types)
    if (std::find(kSupported.begin(), kSupported.end(), t) == kSupported.end())
      throw DataError("synthetic spec: unsupported chart type " + chart_type_name(t));

  std::vector<LabeledImage> out;
  out.reserve(static_cast<size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    const ChartType type = spec.chart_types[static_cast<size_t>(i) % spec.chart_types.size()];
    RandomSource rng(RandomSource::derive(spec.seed, static_cast<uint64_t>(i)));
    ChartBuilder builder(spec, type, rng);
    char sid[64];
    std::snprintf(sid, sizeof(sid), "synth-%llu-%05d", static_cast<unsigned long long>(spec.seed),
                  i);
    out.push_back(builder.build(sid));
  }
  return out;
}

std::vector<SrPair> make_sr_pairs(const std::vector<std::string>& transcripts, int native_scale,
                                  int base_font_min, int base_font_max, uint64_t seed) {
  if (native_scale != 2 && native_scale != 4) throw DataError("native_scale must be 2 or 4");
  std::vector<SrPair> pairs;
  pairs.reserve(transcripts.size());
  RandomSource rng(seed);
  for (const std::string& text : transcripts) {
    if (text.empty()) continue;
    const int base = base_font_min + static_cast<int>(rng.below(base_font_max - base_font_min + 1));
    const int hr_px = base * native_scale;
    const BBox m = measure_text(text, 0, 0, hr_px);
    const int pad = 2 * native_scale;
    int hr_w = static_cast<int>(m.width()) + 2 * pad;
    int hr_h = hr_px + 2 * pad;
    // Round up so the box downsample is exact.
    hr_w = (hr_w + native_scale - 1) / native_scale * native_scale;
    hr_h = (hr_h + native_scale - 1) / native_scale * native_scale;
    Image hr = Image::filled(hr_h, hr_w, 1.0, 1.0, 1.0);
    render_text(hr, text, pad, pad, TextStyle{hr_px, 0.0, 0.0, 0.0});
    Image lr = Image::filled(hr_h / native_scale, hr_w / native_scale, 0, 0, 0);
    const double inv = 1.0 / (native_scale * native_scale);
    for (int y = 0; y < lr.h; ++y)
      for (int x = 0; x < lr.w; ++x)
        for (int c = 0; c < 3; ++c) {
          double acc = 0;
          for (int dy = 0; dy < native_scale; ++dy)
            for (int dx = 0; dx < native_scale; ++dx)
              acc += hr.at(y * native_scale + dy, x * native_scale + dx, c);
          lr.at(y, x, c) = acc * inv;
        }
    pairs.push_back(SrPair{std::move(lr), std::move(hr)});
  }
  return pairs;
}

}  // namespace synth
}  // namespace chartex
