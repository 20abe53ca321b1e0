#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "chartex/core.hpp"
#include "chartex/tensor.hpp"

using namespace chartex;

namespace {

BBox random_box(RandomSource& rng, double span = 20.0) {
  const double x0 = rng.uniform(-span, span);
  const double y0 = rng.uniform(-span, span);
  return BBox{x0, y0, x0 + rng.uniform(0.05, span), y0 + rng.uniform(0.05, span)};
}

}  // namespace

TEST_CASE("iou on known boxes") {
  CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 1, 1}, {5, 5, 6, 6}) == doctest::Approx(0.0));
  CHECK(iou({0, 0, 2, 2}, {1, 0, 3, 2}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("box area") {
  CHECK(box_area({0, 0, 2, 3}) == doctest::Approx(6.0));
  CHECK(box_area({1, 1, 2, 2}) == doctest::Approx(1.0));
  CHECK(box_area({0, 0, 1.5, 2}) == doctest::Approx(3.0));
}

TEST_CASE("iou symmetry, identity, and bounds over random boxes") {
  RandomSource rng(12345);
  for (int i = 0; i < 10000; ++i) {
    const BBox a = random_box(rng), b = random_box(rng);
    const double ab = iou(a, b), ba = iou(b, a);
    CHECK(ab == ba);
    CHECK(ab >= 0.0);
    const double bound = std::min(box_area(a), box_area(b)) / std::max(box_area(a), box_area(b));
    CHECK(ab <= bound + 1e-12);
    CHECK(iou(a, a) == 1.0);
  }
}

TEST_CASE("crop respects clipping contract") {
  Image img = Image::filled(100, 100, 0.5, 0.25, 0.75);
  SUBCASE("interior box") {
    const Image c = crop(img, {10, 10, 20, 30});
    CHECK(c.h == 20);
    CHECK(c.w == 10);
  }
  SUBCASE("full-image box is identity") {
    const Image c = crop(img, {0, 0, 100, 100});
    CHECK(c.h == 100);
    CHECK(c.w == 100);
    CHECK(c.px == img.px);
  }
  SUBCASE("partial overlap clips") {
    const Image c = crop(img, {-5, -5, 10, 10});
    CHECK(c.h == 10);
    CHECK(c.w == 10);
  }
  SUBCASE("no overlap errors") {
    CHECK_THROWS_AS(crop(img, {200, 200, 210, 210}), DataError);
  }
  SUBCASE("fractional bounds round outward") {
    const Image c = crop(img, {10.2, 10.7, 19.1, 29.5});
    CHECK(c.w == 10);  // floor(10.2)=10 .. ceil(19.1)=20
    CHECK(c.h == 20);  // floor(10.7)=10 .. ceil(29.5)=30
  }
}

TEST_CASE("chart type and role vocabularies are closed") {
  CHECK(chart_type_from_name("line") == ChartType::kLine);
  CHECK(chart_type_from_name("vertical-interval") == ChartType::kVerticalInterval);
  CHECK(text_role_from_name("tick-label") == TextRole::kTickLabel);
  CHECK_THROWS_AS(text_role_from_name("subtitle"), DataError);
  CHECK_THROWS_AS(chart_type_from_name("donut"), DataError);
  for (int i = 0; i < kNumChartTypes; ++i)
    CHECK(chart_type_from_name(chart_type_name(static_cast<ChartType>(i))) ==
          static_cast<ChartType>(i));
  for (int i = 0; i < kNumTextRoles; ++i)
    CHECK(text_role_from_name(text_role_name(static_cast<TextRole>(i))) ==
          static_cast<TextRole>(i));
}

TEST_CASE("bilinear resize identity at same size") {
  RandomSource rng(7);
  Image img = Image::filled(13, 9, 0, 0, 0);
  for (auto& v : img.px) v = rng.uniform();
  const Image out = resize_bilinear(img, 13, 9);
  for (size_t i = 0; i < img.px.size(); ++i) CHECK(out.px[i] == doctest::Approx(img.px[i]));
}
