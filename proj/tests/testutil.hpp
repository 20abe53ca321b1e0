#ifndef CHARTEX_TESTS_TESTUTIL_HPP_
#define CHARTEX_TESTS_TESTUTIL_HPP_

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "chartex/nn.hpp"

namespace chartex {
namespace testutil {

// Central finite differences against analytic gradients over a ParamSet.
// `loss` must be a pure function of the parameters. When `sample_stride` > 1
// only every stride-th coordinate is checked (large models).
// Returns the maximum relative error, rel = |a-n| / max(|a|,|n|,1e-6).
inline double fd_max_rel_error(nn::ParamSet params,
                               const std::function<double(const nn::ParamSet&)>& loss,
                               const nn::GradMap& analytic, double step = 1e-5,
                               int sample_stride = 1) {
  double worst = 0.0;
  int64_t coord = 0;
  for (auto& [name, p] : params) {
    auto it = analytic.find(name);
    for (int64_t i = 0; i < p.numel(); ++i, ++coord) {
      if (sample_stride > 1 && coord % sample_stride != 0) continue;
      const double keep = p[i];
      p[i] = keep + step;
      const double up = loss(params);
      p[i] = keep - step;
      const double dn = loss(params);
      p[i] = keep;
      const double numeric = (up - dn) / (2.0 * step);
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace testutil
}  // namespace chartex

#endif  // CHARTEX_TESTS_TESTUTIL_HPP_
