#include "chartex/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace chartex {
namespace metrics {

namespace {

MetricValue ratio(int64_t num, int64_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

MetricValue accuracy(const ConfusionCounts& c) {
  return ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
}

MetricValue precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }

MetricValue recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

MetricValue f1(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }

MatchResult match_detections(const std::vector<std::pair<BBox, double>>& preds,
                             const std::vector<BBox>& gts, double iou_threshold) {
  MatchResult res;
  res.order.resize(preds.size());
  std::iota(res.order.begin(), res.order.end(), 0);
  std::stable_sort(res.order.begin(), res.order.end(),
                   [&](int a, int b) { return preds[static_cast<size_t>(a)].second >
                                              preds[static_cast<size_t>(b)].second; });
  std::vector<bool> taken(gts.size(), false);
  res.scores.reserve(preds.size());
  res.tp.reserve(preds.size());
  for (int idx : res.order) {
    const BBox& p = preds[static_cast<size_t>(idx)].first;
    res.scores.push_back(preds[static_cast<size_t>(idx)].second);
    int best = -1;
    double best_iou = 0.0;
    for (size_t j = 0; j < gts.size(); ++j) {
      if (taken[j]) continue;
      const double v = iou(p, gts[j]);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      taken[static_cast<size_t>(best)] = true;
      res.tp.push_back(true);
    } else {
      res.tp.push_back(false);
    }
  }
  res.fn = static_cast<int64_t>(std::count(taken.begin(), taken.end(), false));
  return res;
}

double average_precision(const std::vector<std::pair<double, bool>>& scored, int64_t total_gt) {
  if (total_gt < 1) throw DataError("average_precision: no ground truth");
  if (scored.empty()) return 0.0;
  std::vector<int> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scored[static_cast<size_t>(a)].first > scored[static_cast<size_t>(b)].first;
  });
  const size_t n = scored.size();
  std::vector<double> prec(n), rec(n);
  int64_t tp = 0;
  for (size_t i = 0; i < n; ++i) {
    if (scored[static_cast<size_t>(order[i])].second) ++tp;
    prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(tp) / static_cast<double>(total_gt);
  }
  // Precision envelope from the right, then sum recall increments.
  for (size_t i = n - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0, prev_rec = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ap += (rec[i] - prev_rec) * prec[i];
    prev_rec = rec[i];
  }
  return ap;
}

double map50(const std::vector<DetectionInstance>& instances) {
  std::vector<std::pair<double, bool>> pooled;
  int64_t total_gt = 0;
  for (const auto& inst : instances) {
    total_gt += static_cast<int64_t>(inst.gts.size());
    const MatchResult m = match_detections(inst.preds, inst.gts, 0.5);
    for (size_t i = 0; i < m.tp.size(); ++i) pooled.emplace_back(m.scores[i], m.tp[i]);
  }
  if (total_gt < 1) throw DataError("map50: empty evaluation set");
  return average_precision(pooled, total_gt);
}

std::vector<PRPoint> pr_curve(const std::vector<std::pair<double, bool>>& scored,
                              int64_t total_gt) {
  if (total_gt < 1) throw DataError("pr_curve: no ground truth");
  std::vector<std::pair<double, bool>> s = scored;
  std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<PRPoint> out;
  int64_t tp = 0, fp = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i].second) ++tp; else ++fp;
    const bool last_of_threshold = (i + 1 == s.size()) || (s[i + 1].first != s[i].first);
    if (!last_of_threshold) continue;
    PRPoint p;
    p.threshold = s[i].first;
    p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    p.recall = static_cast<double>(tp) / static_cast<double>(total_gt);
    out.push_back(p);
  }
  return out;
}

void write_pr_csv(const std::vector<PRPoint>& points, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write PR csv: " + path);
  f << "threshold,precision,recall\n";
  char buf[96];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", p.threshold, p.precision, p.recall);
    f << buf;
  }
}

ClassificationReport per_class_report(const std::vector<int>& truth, const std::vector<int>& pred,
                                      const std::vector<std::string>& class_names) {
  if (truth.size() != pred.size()) throw DataError("per_class_report: label list size mismatch");
  const int k = static_cast<int>(class_names.size());
  ClassificationReport rep;
  rep.total = static_cast<int64_t>(truth.size());
  int64_t correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k || pred[i] < 0 || pred[i] >= k)
      throw DataError("per_class_report: label outside class set");
    if (truth[i] == pred[i]) ++correct;
  }
  rep.accuracy = rep.total ? static_cast<double>(correct) / static_cast<double>(rep.total) : 0.0;
  double sp = 0, sr = 0, sf = 0;
  int64_t supported = 0;
  for (int c = 0; c < k; ++c) {
    ClassRow row;
    row.name = class_names[static_cast<size_t>(c)];
    for (size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == c, p = pred[i] == c;
      if (t && p) ++row.counts.tp;
      else if (!t && p) ++row.counts.fp;
      else if (t && !p) ++row.counts.fn;
      else ++row.counts.tn;
    }
    row.support = row.counts.tp + row.counts.fn;
    row.precision = precision(row.counts);
    row.recall = recall(row.counts);
    row.f1 = f1(row.counts);
    if (row.support > 0) {
      ++supported;
      sp += row.precision.value;
      sr += row.recall.value;
      sf += row.f1.value;
    }
    rep.rows.push_back(row);
  }
  if (supported > 0) {
    rep.macro_precision = sp / static_cast<double>(supported);
    rep.macro_recall = sr / static_cast<double>(supported);
    rep.macro_f1 = sf / static_cast<double>(supported);
  }
  return rep;
}

std::string report_to_json(const ClassificationReport& r) {
  std::ostringstream os;
  os.precision(12);
  os << "{\"accuracy\":" << r.accuracy << ",\"macro_precision\":" << r.macro_precision
     << ",\"macro_recall\":" << r.macro_recall << ",\"macro_f1\":" << r.macro_f1
     << ",\"total\":" << r.total << ",\"classes\":[";
  for (size_t i = 0; i < r.rows.size(); ++i) {
    const ClassRow& c = r.rows[i];
    if (i) os << ",";
    os << "{\"name\":\"" << c.name << "\",\"support\":" << c.support
       << ",\"precision\":" << c.precision.value << ",\"recall\":" << c.recall.value
       << ",\"f1\":" << c.f1.value << ",\"degenerate\":" << (c.precision.degenerate ? "true" : "false")
       << "}";
  }
  os << "]}";
  return os.str();
}

std::string report_to_table(const ClassificationReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-16s %8s %10s %10s %10s\n", "class", "support", "precision",
                "recall", "f1");
  os << buf;
  for (const ClassRow& c : r.rows) {
    std::snprintf(buf, sizeof(buf), "%-16s %8lld %10.4f %10.4f %10.4f%s\n", c.name.c_str(),
                  static_cast<long long>(c.support), c.precision.value, c.recall.value,
                  c.f1.value, c.support == 0 ? "  (no support)" : "");
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-16s %8lld %10.4f %10.4f %10.4f\n", "macro",
                static_cast<long long>(r.total), r.macro_precision, r.macro_recall, r.macro_f1);
  os << buf;
  std::snprintf(buf, sizeof(buf), "accuracy: %.4f\n", r.accuracy);
  os << buf;
  return os.str();
}

int64_t levenshtein(const std::string& a, const std::string& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

RecognitionScore recognition_score(const std::vector<std::string>& pred,
                                   const std::vector<std::string>& gt) {
  if (pred.size() != gt.size()) throw DataError("recognition_score: list length mismatch");
  RecognitionScore s;
  if (pred.empty()) return s;
  int64_t exact = 0;
  double ned = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == gt[i]) ++exact;
    const size_t mx = std::max(pred[i].size(), gt[i].size());
    ned += mx == 0 ? 0.0 : static_cast<double>(levenshtein(pred[i], gt[i])) / static_cast<double>(mx);
  }
  s.exact_match = static_cast<double>(exact) / static_cast<double>(pred.size());
  s.mean_norm_edit = ned / static_cast<double>(pred.size());
  return s;
}

}  // namespace metrics
}  // namespace chartex
