#ifndef CHARTEX_DATASET_HPP_
#define CHARTEX_DATASET_HPP_

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "chartex/core.hpp"

namespace chartex {
namespace dataset {

// One annotated chart image. The annotation file is a JSON sibling of the
// image (same stem, .png/.jpg/.jpeg):
//   {"chart_type": "<name>", "blocks":
//     [{"box": [x_min, y_min, x_max, y_max], "role": "<name>", "text": "..."}]}
// Box max edges are exclusive. Role and chart-type vocabularies are closed;
// unknown strings reject the whole file with a per-file error.
struct AnnotationRecord {
  std::string image_path;
  ChartType chart_type = ChartType::kLine;
  std::vector<TextBlock> blocks;
  std::string source_id;
};

struct LoadReport {
  std::vector<AnnotationRecord> records;
  std::vector<std::pair<std::string, std::string>> errors;  // (file, message)
};

// Scans root (non-recursive) for *.json annotation files, sorted by name.
// Files that fail to parse, reference a missing image, or use unknown
// chart-type/role strings land in `errors` instead of `records`.
LoadReport load_annotations(const std::string& root);

// Writes the annotation JSON for one record (used by the generator CLI).
void save_annotation(const AnnotationRecord& rec, const std::string& path);

// Writes images + annotations for generated charts into `dir` and returns
// the records pointing at them.
std::vector<AnnotationRecord> write_dataset(const std::vector<LabeledImage>& images,
                                            const std::string& dir);

struct DatasetSplit {
  std::vector<AnnotationRecord> train;
  std::vector<AnnotationRecord> test;
  uint64_t seed = 0;
  double ratio = 0.8;
  std::vector<std::string> warnings;
};

// Deterministic stratified split: per chart type the train share is
// round(ratio * n). Strata with fewer than 2 items go to train with a
// warning.
DatasetSplit stratified_split(const std::vector<AnnotationRecord>& records, double ratio,
                              uint64_t seed);

struct RoleCrops {
  std::vector<std::pair<Image, TextRole>> samples;
  std::vector<std::string> transcripts;  // aligned with samples
  std::array<int64_t, kNumTextRoles> counts{};
  int64_t skipped = 0;  // unreadable images / degenerate boxes
};

// One cropped sample per ground-truth block; loads images from disk.
RoleCrops role_crop_dataset(const std::vector<AnnotationRecord>& records);
// Same, over in-memory generated charts.
RoleCrops role_crops_from_labeled(const std::vector<LabeledImage>& images);

}  // namespace dataset
}  // namespace chartex

#endif  // CHARTEX_DATASET_HPP_
