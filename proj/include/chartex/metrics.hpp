#ifndef CHARTEX_METRICS_HPP_
#define CHARTEX_METRICS_HPP_

#include <string>
#include <vector>

#include "chartex/core.hpp"

namespace chartex {
namespace metrics {

struct ConfusionCounts {
  int64_t tp = 0, tn = 0, fp = 0, fn = 0;
};

// Zero-denominator metrics are defined as 0 with the degenerate flag set so
// report tables always aggregate.
struct MetricValue {
  double value = 0.0;
  bool degenerate = false;
};

MetricValue accuracy(const ConfusionCounts& c);
MetricValue precision(const ConfusionCounts& c);
MetricValue recall(const ConfusionCounts& c);
// Count form 2TP/(2TP+FP+FN); agrees with the harmonic-mean form whenever
// both are defined.
MetricValue f1(const ConfusionCounts& c);

struct MatchResult {
  // Predictions in descending-score order (stable over the input order).
  std::vector<int> order;        // original prediction index per rank
  std::vector<double> scores;    // score per rank
  std::vector<bool> tp;          // per rank: matched a ground truth
  int64_t fn = 0;                // ground truths left unmatched
};

// Greedy one-to-one matching: each ranked prediction takes the
// highest-IoU unmatched ground truth with IoU >= threshold.
MatchResult match_detections(const std::vector<std::pair<BBox, double>>& preds,
                             const std::vector<BBox>& gts, double iou_threshold);

// Average precision with all-point interpolation (precision envelope).
// Entries are (score, is_tp); total_gt must be >= 1.
double average_precision(const std::vector<std::pair<double, bool>>& scored, int64_t total_gt);

struct DetectionInstance {
  std::vector<std::pair<BBox, double>> preds;
  std::vector<BBox> gts;
};

// Single-class AP at IoU 0.5 pooled over the whole set.
double map50(const std::vector<DetectionInstance>& instances);

struct PRPoint {
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.0;
};

// PR points over descending score thresholds (one point per distinct score).
std::vector<PRPoint> pr_curve(const std::vector<std::pair<double, bool>>& scored,
                              int64_t total_gt);
void write_pr_csv(const std::vector<PRPoint>& points, const std::string& path);

struct ClassRow {
  std::string name;
  ConfusionCounts counts;
  MetricValue precision, recall, f1;
  int64_t support = 0;  // ground-truth occurrences
};

struct ClassificationReport {
  std::vector<ClassRow> rows;
  double accuracy = 0.0;
  // Macro averages are unweighted means over classes with support > 0;
  // unsupported classes stay in the table flagged degenerate.
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  int64_t total = 0;
};

ClassificationReport per_class_report(const std::vector<int>& truth, const std::vector<int>& pred,
                                      const std::vector<std::string>& class_names);

std::string report_to_json(const ClassificationReport& r);
std::string report_to_table(const ClassificationReport& r);

int64_t levenshtein(const std::string& a, const std::string& b);

struct RecognitionScore {
  double exact_match = 0.0;
  double mean_norm_edit = 0.0;  // Levenshtein / max(len), averaged
};

// Lists must be the same length (DataError otherwise).
RecognitionScore recognition_score(const std::vector<std::string>& pred,
                                   const std::vector<std::string>& gt);

}  // namespace metrics
}  // namespace chartex

#endif  // CHARTEX_METRICS_HPP_
