#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "chartex/metrics.hpp"
#include "chartex/tensor.hpp"

using namespace chartex;
using namespace chartex::metrics;

namespace {

// Independent direct-substitution oracle for the four confusion metrics.
struct DirectMetrics {
  double acc, prec, rec, f1_harm;
  bool acc_ok, prec_ok, rec_ok, f1_ok;
};

DirectMetrics direct_oracle(const ConfusionCounts& c) {
  DirectMetrics d{};
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  d.acc_ok = tp + tn + fp + fn > 0;
  if (d.acc_ok) d.acc = (tp + tn) / (tp + tn + fp + fn);
  d.prec_ok = tp + fp > 0;
  if (d.prec_ok) d.prec = tp / (tp + fp);
  d.rec_ok = tp + fn > 0;
  if (d.rec_ok) d.rec = tp / (tp + fn);
  d.f1_ok = 2 * tp + fp + fn > 0;
  if (d.prec_ok && d.rec_ok && d.prec + d.rec > 0)
    d.f1_harm = 2 * d.prec * d.rec / (d.prec + d.rec);
  return d;
}

// Brute-force AP oracle: interpolated precision at each achieved recall
// level found by a full rescan (independent of the envelope-from-right
// implementation route).
double ap_oracle(std::vector<std::pair<double, bool>> scored, int64_t total_gt) {
  std::vector<int> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scored[static_cast<size_t>(a)].first > scored[static_cast<size_t>(b)].first;
  });
  std::vector<double> prec, rec;
  int64_t tp = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    if (scored[static_cast<size_t>(order[i])].second) ++tp;
    prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    rec.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }
  double ap = 0.0, prev = 0.0;
  for (size_t i = 0; i < rec.size(); ++i) {
    if (rec[i] <= prev) continue;
    double best = 0.0;
    for (size_t j = 0; j < rec.size(); ++j)
      if (rec[j] >= rec[i]) best = std::max(best, prec[j]);
    ap += (rec[i] - prev) * best;
    prev = rec[i];
  }
  return ap;
}

// Second, independent edit-distance implementation (full DP matrix).
int64_t lev_oracle(const std::string& a, const std::string& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<std::vector<int64_t>> d(n + 1, std::vector<int64_t>(m + 1));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int64_t>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[n][m];
}

}  // namespace

TEST_CASE("confusion metrics on pinned examples") {
  CHECK(accuracy({50, 40, 5, 5}).value == doctest::Approx(0.9));
  CHECK(precision({8, 0, 2, 0}).value == doctest::Approx(0.8));
  CHECK(recall({8, 0, 0, 8}).value == doctest::Approx(0.5));
  CHECK(f1({2, 0, 1, 1}).value == doctest::Approx(2.0 / 3.0));
  CHECK(precision({0, 5, 0, 3}).degenerate);
}

TEST_CASE("confusion metrics match direct-substitution oracle on 1000 random counts") {
  RandomSource rng(99);
  for (int i = 0; i < 1000; ++i) {
    ConfusionCounts c{rng.below(200), rng.below(200), rng.below(200), rng.below(200)};
    const DirectMetrics d = direct_oracle(c);
    if (d.acc_ok) CHECK(std::fabs(accuracy(c).value - d.acc) < 1e-12);
    if (d.prec_ok) CHECK(std::fabs(precision(c).value - d.prec) < 1e-12);
    if (d.rec_ok) CHECK(std::fabs(recall(c).value - d.rec) < 1e-12);
    // The two algebraic f1 forms agree whenever the harmonic form is defined.
    if (d.prec_ok && d.rec_ok && d.prec + d.rec > 0)
      CHECK(std::fabs(f1(c).value - d.f1_harm) < 1e-12);
  }
}

TEST_CASE("match_detections contracts") {
  std::vector<BBox> gts = {{0, 0, 10, 10}, {20, 20, 30, 30}};
  SUBCASE("perfect predictions all TP") {
    std::vector<std::pair<BBox, double>> preds = {{gts[0], 0.3}, {gts[1], 0.9}};
    const MatchResult m = match_detections(preds, gts, 0.5);
    CHECK(m.fn == 0);
    CHECK(std::count(m.tp.begin(), m.tp.end(), true) == 2);
  }
  SUBCASE("no predictions leaves all gts unmatched") {
    const MatchResult m = match_detections({}, gts, 0.5);
    CHECK(m.fn == 2);
  }
  SUBCASE("one-to-one matching: second prediction on same gt is FP") {
    std::vector<std::pair<BBox, double>> preds = {{{0, 0, 10, 10}, 0.9}, {{0, 0, 10, 9}, 0.8}};
    const MatchResult m = match_detections(preds, {gts[0]}, 0.5);
    CHECK(m.tp[0]);
    CHECK_FALSE(m.tp[1]);
    CHECK(m.fn == 0);
  }
}

TEST_CASE("average precision basics and oracle agreement") {
  SUBCASE("all TP covering all gts") {
    std::vector<std::pair<double, bool>> s = {{0.9, true}, {0.8, true}, {0.7, true}};
    CHECK(average_precision(s, 3) == doctest::Approx(1.0));
  }
  SUBCASE("no predictions") { CHECK(average_precision({}, 4) == doctest::Approx(0.0)); }
  SUBCASE("zero gts errors") {
    CHECK_THROWS_AS(average_precision({{0.5, true}}, 0), DataError);
  }
  SUBCASE("200 random instances match the brute-force envelope oracle") {
    RandomSource rng(424242);
    for (int rep = 0; rep < 200; ++rep) {
      const int n = 1 + static_cast<int>(rng.below(40));
      const int64_t gt = 1 + rng.below(30);
      std::vector<std::pair<double, bool>> s;
      for (int i = 0; i < n; ++i) s.emplace_back(rng.uniform(), rng.uniform() < 0.5);
      CHECK(std::fabs(average_precision(s, gt) - ap_oracle(s, gt)) < 1e-9);
    }
  }
  SUBCASE("AP invariant under strictly monotone score rescaling") {
    RandomSource rng(5);
    std::vector<std::pair<double, bool>> s, s2;
    for (int i = 0; i < 30; ++i) {
      const double sc = rng.uniform();
      const bool tp = rng.uniform() < 0.4;
      s.emplace_back(sc, tp);
      s2.emplace_back(std::exp(3.0 * sc) + 1.0, tp);
    }
    CHECK(average_precision(s, 12) == doctest::Approx(average_precision(s2, 12)).epsilon(1e-12));
  }
}

TEST_CASE("map50 on constructed instance matches hand-computed value") {
  // Image 1: 2 gts, one matched TP at 0.9, one FP at 0.8.
  // Image 2: 1 gt, matched TP at 0.7.
  // Pooled ranking: TP(0.9), FP(0.8), TP(0.7); total gt 3.
  // prec/rec: (1, 1/3), (0.5, 1/3), (2/3, 2/3).
  // Envelope: AP = 1/3 * 1 + 1/3 * 2/3 = 5/9.
  DetectionInstance a, b;
  a.gts = {{0, 0, 10, 10}, {50, 50, 60, 60}};
  a.preds = {{{0, 0, 10, 10}, 0.9}, {{100, 100, 110, 110}, 0.8}};
  b.gts = {{0, 0, 20, 20}};
  b.preds = {{{0, 0, 20, 21}, 0.7}};
  CHECK(map50({a, b}) == doctest::Approx(5.0 / 9.0));
  CHECK(map50({DetectionInstance{{}, {{0, 0, 1, 1}}}}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(map50({DetectionInstance{}}), DataError);
}

TEST_CASE("per-class report") {
  SUBCASE("perfect predictions") {
    const ClassificationReport r = per_class_report({0, 1, 2, 1}, {0, 1, 2, 1}, {"a", "b", "c"});
    CHECK(r.accuracy == doctest::Approx(1.0));
    CHECK(r.macro_f1 == doctest::Approx(1.0));
  }
  SUBCASE("single-class degenerate input") {
    const ClassificationReport r = per_class_report({0, 0}, {0, 0}, {"a", "b"});
    CHECK(r.accuracy == doctest::Approx(1.0));
    CHECK(r.rows[1].precision.degenerate);
    CHECK(r.rows[1].support == 0);
  }
  SUBCASE("3-class 12-sample hand-built confusion") {
    // truth:  a a a a b b b b c c c c
    // pred:   a a b c b b a b c c c a
    // class a: tp=2 fp=2 fn=2 -> P=0.5 R=0.5 F1=0.5
    // class b: tp=3 fp=1 fn=1 -> P=0.75 R=0.75 F1=0.75
    // class c: tp=3 fp=1 fn=1 -> P=0.75 R=0.75 F1=0.75
    // accuracy = 8/12
    const std::vector<int> t = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
    const std::vector<int> p = {0, 0, 1, 2, 1, 1, 0, 1, 2, 2, 2, 0};
    const ClassificationReport r = per_class_report(t, p, {"a", "b", "c"});
    CHECK(r.accuracy == doctest::Approx(8.0 / 12.0));
    CHECK(r.rows[0].f1.value == doctest::Approx(0.5));
    CHECK(r.rows[1].f1.value == doctest::Approx(0.75));
    CHECK(r.rows[2].f1.value == doctest::Approx(0.75));
    CHECK(r.macro_f1 == doctest::Approx((0.5 + 0.75 + 0.75) / 3.0));
    // Micro accuracy equals diagonal-sum over total of the full matrix.
    int64_t diag = 0;
    for (size_t i = 0; i < t.size(); ++i) diag += t[i] == p[i];
    CHECK(r.accuracy == doctest::Approx(static_cast<double>(diag) / static_cast<double>(t.size())));
  }
}

TEST_CASE("recognition score") {
  SUBCASE("identical lists") {
    const RecognitionScore s = recognition_score({"ab", "cd"}, {"ab", "cd"});
    CHECK(s.exact_match == doctest::Approx(1.0));
    CHECK(s.mean_norm_edit == doctest::Approx(0.0));
  }
  SUBCASE("single substitution") {
    const RecognitionScore s = recognition_score({"abc"}, {"abd"});
    CHECK(s.exact_match == doctest::Approx(0.0));
    CHECK(s.mean_norm_edit == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("length mismatch errors") {
    CHECK_THROWS_AS(recognition_score({"a"}, {"a", "b"}), DataError);
  }
  SUBCASE("random 20-pair sample matches independent DP oracle") {
    RandomSource rng(31);
    const std::string alphabet = "abc01";
    std::vector<std::string> xs, ys;
    double oracle_sum = 0.0;
    for (int i = 0; i < 20; ++i) {
      std::string a, b;
      for (int64_t k = rng.below(8); k > 0; --k) a += alphabet[static_cast<size_t>(rng.below(5))];
      for (int64_t k = rng.below(8); k > 0; --k) b += alphabet[static_cast<size_t>(rng.below(5))];
      xs.push_back(a);
      ys.push_back(b);
      const size_t mx = std::max(a.size(), b.size());
      oracle_sum += mx == 0 ? 0.0 : static_cast<double>(lev_oracle(a, b)) / static_cast<double>(mx);
    }
    const RecognitionScore s = recognition_score(xs, ys);
    CHECK(s.mean_norm_edit == doctest::Approx(oracle_sum / 20.0).epsilon(1e-12));
  }
}

TEST_CASE("pr curve is monotone in threshold sweep bookkeeping") {
  RandomSource rng(8);
  std::vector<std::pair<double, bool>> s;
  for (int i = 0; i < 50; ++i) s.emplace_back(rng.uniform(), rng.uniform() < 0.5);
  const auto pts = pr_curve(s, 25);
  double prev_recall = -1.0;
  for (const auto& p : pts) {
    CHECK(p.recall >= prev_recall);
    prev_recall = p.recall;
    CHECK(p.precision >= 0.0);
    CHECK(p.precision <= 1.0);
  }
}
