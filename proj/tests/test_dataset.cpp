#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "chartex/dataset.hpp"
#include "chartex/font5x7.hpp"
#include "chartex/image_io.hpp"
#include "chartex/synth.hpp"

using namespace chartex;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("chartex_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

synth::SyntheticSpec small_spec(int count, uint64_t seed) {
  synth::SyntheticSpec spec;
  spec.count = count;
  spec.seed = seed;
  spec.image_h = 180;
  spec.image_w = 180;
  return spec;
}

}  // namespace

TEST_CASE("generator: uniform allocation and determinism") {
  synth::SyntheticSpec spec = small_spec(20, 7);
  const auto a = synth::generate_synthetic(spec);
  const auto b = synth::generate_synthetic(spec);
  REQUIRE(a.size() == 20);
  std::map<ChartType, int> per_type;
  for (const auto& img : a) per_type[*img.chart_type]++;
  for (const auto& [type, n] : per_type) CHECK(n == 5);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pixels.px == b[i].pixels.px);
    REQUIRE(a[i].blocks.size() == b[i].blocks.size());
    for (size_t j = 0; j < a[i].blocks.size(); ++j) {
      CHECK(a[i].blocks[j].transcript == b[i].blocks[j].transcript);
      CHECK(a[i].blocks[j].box.x_min == b[i].blocks[j].box.x_min);
      CHECK(a[i].blocks[j].box.y_max == b[i].blocks[j].box.y_max);
    }
  }
}

TEST_CASE("generator: blocks stay inside image bounds and carry full labels") {
  const auto imgs = synth::generate_synthetic(small_spec(12, 99));
  for (const auto& img : imgs) {
    CHECK(!img.blocks.empty());
    for (const auto& b : img.blocks) {
      CHECK(b.box.x_min >= 0);
      CHECK(b.box.y_min >= 0);
      CHECK(b.box.x_max <= img.pixels.w);
      CHECK(b.box.y_max <= img.pixels.h);
      CHECK(b.role.has_value());
      CHECK(b.transcript.has_value());
      CHECK(!b.transcript->empty());
    }
  }
}

TEST_CASE("generator: ground truth is pixel-faithful") {
  const auto imgs = synth::generate_synthetic(small_spec(6, 3));
  for (const auto& img : imgs) {
    for (const auto& block : img.blocks) {
      // Re-render only this block's text into a blank canvas at its recorded
      // box; every glyph pixel must match the chart exactly.
      Image blank = Image::filled(img.pixels.h, img.pixels.w, 1, 1, 1);
      synth::TextStyle style;
      style.px_height = static_cast<int>(block.box.height());
      // Recover the color from the chart itself at any glyph pixel.
      const int bx = static_cast<int>(block.box.x_min);
      const int by = static_cast<int>(block.box.y_min);
      synth::render_text(blank, *block.transcript, bx, by, style);
      bool color_found = false;
      double cr = 0, cg = 0, cb = 0;
      for (int y = by; y < static_cast<int>(block.box.y_max) && !color_found; ++y)
        for (int x = bx; x < static_cast<int>(block.box.x_max) && !color_found; ++x)
          if (blank.at(y, x, 0) == 0.0) {  // glyph pixel (drawn black on blank)
            cr = img.pixels.at(y, x, 0);
            cg = img.pixels.at(y, x, 1);
            cb = img.pixels.at(y, x, 2);
            color_found = true;
          }
      REQUIRE(color_found);
      for (int y = by; y < static_cast<int>(block.box.y_max); ++y)
        for (int x = bx; x < static_cast<int>(block.box.x_max); ++x)
          if (blank.at(y, x, 0) == 0.0) {
            CHECK(img.pixels.at(y, x, 0) == cr);
            CHECK(img.pixels.at(y, x, 1) == cg);
            CHECK(img.pixels.at(y, x, 2) == cb);
          }
    }
  }
}

TEST_CASE("generator: infeasible layout errors") {
  synth::SyntheticSpec spec = small_spec(1, 1);
  spec.image_h = 40;
  spec.image_w = 40;
  CHECK_THROWS_WITH_AS(static_cast<void>(synth::generate_synthetic(spec)), "layout infeasible",
                       DataError);
}

TEST_CASE("generator: tick-label is the majority role on line charts") {
  synth::SyntheticSpec spec = small_spec(40, 17);
  spec.chart_types = {ChartType::kLine};
  const auto imgs = synth::generate_synthetic(spec);
  const auto crops = dataset::role_crops_from_labeled(imgs);
  const int64_t ticks = crops.counts[static_cast<size_t>(static_cast<int>(TextRole::kTickLabel))];
  for (size_t r = 0; r < crops.counts.size(); ++r) {
    if (r == static_cast<size_t>(static_cast<int>(TextRole::kTickLabel))) continue;
    CHECK(ticks > crops.counts[r]);
  }
}

TEST_CASE("annotation round trip through disk") {
  const fs::path dir = temp_dir("roundtrip");
  const auto imgs = synth::generate_synthetic(small_spec(4, 21));
  const auto written = dataset::write_dataset(imgs, dir.string());
  const dataset::LoadReport report = dataset::load_annotations(dir.string());
  CHECK(report.errors.empty());
  REQUIRE(report.records.size() == 4);
  for (size_t i = 0; i < written.size(); ++i) {
    const auto& w = written[i];
    const auto& r = report.records[i];
    CHECK(w.source_id == r.source_id);
    CHECK(w.chart_type == r.chart_type);
    REQUIRE(w.blocks.size() == r.blocks.size());
    for (size_t j = 0; j < w.blocks.size(); ++j) {
      CHECK(*w.blocks[j].role == *r.blocks[j].role);
      CHECK(*w.blocks[j].transcript == *r.blocks[j].transcript);
      CHECK(w.blocks[j].box.x_min == doctest::Approx(r.blocks[j].box.x_min));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("annotation loading rejects bad files with per-file errors") {
  const fs::path dir = temp_dir("badfiles");
  // Valid image for each annotation.
  const Image img = Image::filled(10, 10, 1, 1, 1);
  save_png(img, (dir / "a.png").string());
  save_png(img, (dir / "b.png").string());
  save_png(img, (dir / "c.png").string());
  {
    std::ofstream f(dir / "a.json");
    f << R"({"chart_type": "line", "blocks": [{"box": [1,1,5,5], "role": "tick-label", "text": "7"}]})";
  }
  {
    std::ofstream f(dir / "b.json");  // unknown role
    f << R"({"chart_type": "line", "blocks": [{"box": [1,1,5,5], "role": "subtitle", "text": "x"}]})";
  }
  {
    std::ofstream f(dir / "c.json");  // malformed
    f << R"({"chart_type": "line", )";
  }
  {
    std::ofstream f(dir / "d.json");  // no image sibling
    f << R"({"chart_type": "line", "blocks": []})";
  }
  const dataset::LoadReport report = dataset::load_annotations(dir.string());
  REQUIRE(report.records.size() == 1);
  CHECK(report.records[0].source_id == "a");
  CHECK(report.records[0].blocks.size() == 1);
  CHECK(*report.records[0].blocks[0].role == TextRole::kTickLabel);
  REQUIRE(report.errors.size() == 3);
  CHECK(report.errors[0].second.find("unknown text role") != std::string::npos);
  CHECK(report.errors[1].second.find("malformed JSON") != std::string::npos);
  CHECK(report.errors[2].second.find("missing image") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("stratified split") {
  std::vector<dataset::AnnotationRecord> records;
  const auto make = [&](ChartType t, int i) {
    dataset::AnnotationRecord r;
    r.chart_type = t;
    r.source_id = chart_type_name(t) + "_" + std::to_string(i);
    return r;
  };
  SUBCASE("100 of one type at 0.8 gives 80/20") {
    for (int i = 0; i < 100; ++i) records.push_back(make(ChartType::kLine, i));
    const auto split = dataset::stratified_split(records, 0.8, 5);
    CHECK(split.train.size() == 80);
    CHECK(split.test.size() == 20);
  }
  SUBCASE("two strata keep per-type proportions") {
    for (int i = 0; i < 50; ++i) records.push_back(make(ChartType::kLine, i));
    for (int i = 0; i < 50; ++i) records.push_back(make(ChartType::kScatter, i));
    const auto split = dataset::stratified_split(records, 0.8, 5);
    int line_train = 0, scatter_train = 0;
    for (const auto& r : split.train)
      (r.chart_type == ChartType::kLine ? line_train : scatter_train)++;
    CHECK(line_train == 40);
    CHECK(scatter_train == 40);
    CHECK(split.test.size() == 20);
  }
  SUBCASE("determinism and no leakage") {
    for (int i = 0; i < 37; ++i) records.push_back(make(ChartType::kVerticalBar, i));
    for (int i = 0; i < 23; ++i) records.push_back(make(ChartType::kLine, i));
    const auto a = dataset::stratified_split(records, 0.8, 11);
    const auto b = dataset::stratified_split(records, 0.8, 11);
    REQUIRE(a.train.size() == b.train.size());
    for (size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].source_id == b.train[i].source_id);
    for (size_t i = 0; i < a.test.size(); ++i) CHECK(a.test[i].source_id == b.test[i].source_id);
    std::set<std::string> train_ids, test_ids;
    for (const auto& r : a.train) train_ids.insert(r.source_id);
    for (const auto& r : a.test) test_ids.insert(r.source_id);
    for (const auto& id : test_ids) CHECK(train_ids.count(id) == 0);
    const auto c = dataset::stratified_split(records, 0.8, 12);
    bool any_diff = c.train.size() != a.train.size();
    for (size_t i = 0; !any_diff && i < a.train.size(); ++i)
      any_diff = a.train[i].source_id != c.train[i].source_id;
    CHECK(any_diff);  // different seed shuffles differently
  }
  SUBCASE("tiny stratum goes to train with warning") {
    records.push_back(make(ChartType::kPie, 0));
    for (int i = 0; i < 10; ++i) records.push_back(make(ChartType::kLine, i));
    const auto split = dataset::stratified_split(records, 0.8, 3);
    CHECK(split.warnings.size() == 1);
    int pie = 0;
    for (const auto& r : split.train) pie += r.chart_type == ChartType::kPie;
    CHECK(pie == 1);
  }
  SUBCASE("invalid ratio") {
    CHECK_THROWS_AS(dataset::stratified_split(records, 1.0, 1), DataError);
  }
}

TEST_CASE("role crops cardinality and degenerate-box guard") {
  const auto imgs = synth::generate_synthetic(small_spec(4, 33));
  size_t blocks = 0;
  for (const auto& i : imgs) blocks += i.blocks.size();
  auto crops = dataset::role_crops_from_labeled(imgs);
  CHECK(crops.samples.size() == blocks);
  CHECK(crops.skipped == 0);

  // Inject a block fully outside the canvas; it must be skipped and counted.
  auto broken = imgs;
  TextBlock bad;
  bad.box = BBox{-20, -20, -1, -1};
  bad.role = TextRole::kOther;
  bad.transcript = "x";
  broken[0].blocks.push_back(bad);
  crops = dataset::role_crops_from_labeled(broken);
  CHECK(crops.samples.size() == blocks);
  CHECK(crops.skipped == 1);
}

TEST_CASE("sr pairs have exact scale relation") {
  const auto pairs = synth::make_sr_pairs({"125", "Total", "3.5%"}, 2, 6, 9, 5);
  REQUIRE(pairs.size() == 3);
  for (const auto& p : pairs) {
    CHECK(p.hr.h == 2 * p.lr.h);
    CHECK(p.hr.w == 2 * p.lr.w);
  }
  const auto again = synth::make_sr_pairs({"125", "Total", "3.5%"}, 2, 6, 9, 5);
  for (size_t i = 0; i < pairs.size(); ++i) CHECK(pairs[i].hr.px == again[i].hr.px);
}

TEST_CASE("png save/load round trip is exact for quantized pixels") {
  const fs::path dir = temp_dir("png");
  const auto imgs = synth::generate_synthetic(small_spec(1, 2));
  const std::string path = (dir / "x.png").string();
  save_png(imgs[0].pixels, path);
  const Image back = load_image(path);
  REQUIRE(back.h == imgs[0].pixels.h);
  REQUIRE(back.w == imgs[0].pixels.w);
  size_t diff = 0;
  for (size_t i = 0; i < back.px.size(); ++i) {
    // Generator colors are arbitrary doubles; after one quantization the
    // round trip must be stable.
    const double q = std::round(imgs[0].pixels.px[i] * 255.0) / 255.0;
    if (std::fabs(back.px[i] - q) > 1e-9) ++diff;
  }
  CHECK(diff == 0);
  fs::remove_all(dir);
}
