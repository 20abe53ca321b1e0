#include "chartex/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "chartex/image_io.hpp"
#include "chartex/tensor.hpp"

namespace chartex {
namespace dataset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string find_sibling_image(const fs::path& json_path) {
  for (const char* ext : {".png", ".jpg", ".jpeg"}) {
    fs::path p = json_path;
    p.replace_extension(ext);
    if (fs::exists(p)) return p.string();
  }
  return {};
}

AnnotationRecord parse_annotation(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open annotation: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed JSON: " + std::string(e.what()));
  }
  AnnotationRecord rec;
  if (!j.contains("chart_type") || !j["chart_type"].is_string())
    throw DataError("missing chart_type");
  rec.chart_type = chart_type_from_name(j["chart_type"].get<std::string>());
  rec.source_id = path.stem().string();
  rec.image_path = find_sibling_image(path);
  if (rec.image_path.empty()) throw DataError("missing image file for " + path.string());
  if (!j.contains("blocks") || !j["blocks"].is_array()) throw DataError("missing blocks array");
  for (const json& jb : j["blocks"]) {
    TextBlock b;
    const auto& box = jb.at("box");
    if (!box.is_array() || box.size() != 4) throw DataError("block box must be [x0,y0,x1,y1]");
    b.box = BBox{box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
                 box[3].get<double>()};
    if (!b.box.valid()) throw DataError("invalid block box");
    b.role = text_role_from_name(jb.at("role").get<std::string>());
    b.transcript = jb.at("text").get<std::string>();
    rec.blocks.push_back(std::move(b));
  }
  return rec;
}

}  // namespace

LoadReport load_annotations(const std::string& root) {
  if (!fs::is_directory(root)) throw DataError("annotation root is not a directory: " + root);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  LoadReport report;
  for (const fs::path& p : files) {
    try {
      report.records.push_back(parse_annotation(p));
    } catch (const std::exception& e) {
      report.errors.emplace_back(p.string(), e.what());
    }
  }
  return report;
}

void save_annotation(const AnnotationRecord& rec, const std::string& path) {
  json j;
  j["chart_type"] = chart_type_name(rec.chart_type);
  j["blocks"] = json::array();
  for (const TextBlock& b : rec.blocks) {
    json jb;
    jb["box"] = {b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max};
    jb["role"] = text_role_name(b.role.value_or(TextRole::kOther));
    jb["text"] = b.transcript.value_or("");
    j["blocks"].push_back(jb);
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write annotation: " + path);
  f << j.dump(2) << "\n";
}

std::vector<AnnotationRecord> write_dataset(const std::vector<LabeledImage>& images,
                                            const std::string& dir) {
  fs::create_directories(dir);
  std::vector<AnnotationRecord> records;
  for (const LabeledImage& img : images) {
    AnnotationRecord rec;
    rec.chart_type = img.chart_type.value_or(ChartType::kLine);
    rec.blocks = img.blocks;
    rec.source_id = img.source_id;
    const fs::path png = fs::path(dir) / (img.source_id + ".png");
    const fs::path ann = fs::path(dir) / (img.source_id + ".json");
    save_png(img.pixels, png.string());
    rec.image_path = png.string();
    save_annotation(rec, ann.string());
    records.push_back(std::move(rec));
  }
  return records;
}

DatasetSplit stratified_split(const std::vector<AnnotationRecord>& records, double ratio,
                              uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("split ratio must be in (0,1)");
  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;
  for (int code = 0; code < kNumChartTypes; ++code) {
    std::vector<int> idx;
    for (size_t i = 0; i < records.size(); ++i)
      if (static_cast<int>(records[i].chart_type) == code) idx.push_back(static_cast<int>(i));
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      split.warnings.push_back("stratum " + chart_type_name(static_cast<ChartType>(code)) +
                               " has fewer than 2 items; assigned to train");
      for (int i : idx) split.train.push_back(records[static_cast<size_t>(i)]);
      continue;
    }
    RandomSource rng(RandomSource::derive(seed, static_cast<uint64_t>(code)));
    rng.shuffle(idx);
    const auto n_train = static_cast<size_t>(
        std::llround(ratio * static_cast<double>(idx.size())));
    for (size_t i = 0; i < idx.size(); ++i) {
      const AnnotationRecord& r = records[static_cast<size_t>(idx[i])];
      (i < n_train ? split.train : split.test).push_back(r);
    }
  }
  return split;
}

namespace {

void append_crops(RoleCrops& out, const Image& pixels, const std::vector<TextBlock>& blocks) {
  for (const TextBlock& b : blocks) {
    if (!b.role.has_value()) {
      ++out.skipped;
      continue;
    }
    const BBox clipped{std::max(0.0, b.box.x_min), std::max(0.0, b.box.y_min),
                       std::min(static_cast<double>(pixels.w), b.box.x_max),
                       std::min(static_cast<double>(pixels.h), b.box.y_max)};
    if (!(clipped.x_min < clipped.x_max && clipped.y_min < clipped.y_max)) {
      ++out.skipped;
      continue;
    }
    out.samples.emplace_back(crop(pixels, clipped), *b.role);
    out.transcripts.push_back(b.transcript.value_or(""));
    ++out.counts[static_cast<size_t>(static_cast<int>(*b.role))];
  }
}

}  // namespace

RoleCrops role_crop_dataset(const std::vector<AnnotationRecord>& records) {
  RoleCrops out;
  for (const AnnotationRecord& rec : records) {
    Image img;
    try {
      img = load_image(rec.image_path);
    } catch (const std::exception&) {
      out.skipped += static_cast<int64_t>(rec.blocks.size());
      continue;
    }
    append_crops(out, img, rec.blocks);
  }
  return out;
}

RoleCrops role_crops_from_labeled(const std::vector<LabeledImage>& images) {
  RoleCrops out;
  for (const LabeledImage& img : images) append_crops(out, img.pixels, img.blocks);
  return out;
}

}  // namespace dataset
}  // namespace chartex
