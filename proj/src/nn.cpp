#include "chartex/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace chartex {
namespace nn {

Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, RandomSource& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

Tensor gaussian(std::vector<int> shape, double stddev, RandomSource& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0.0, stddev);
  return t;
}

ad::Value Bound::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  auto pit = params_->find(name);
  if (pit == params_->end()) throw std::logic_error("unknown parameter: " + name);
  const ad::Value v = track_ ? tape_->param(pit->second) : tape_->constant(pit->second);
  bound_.emplace(name, v);
  return v;
}

void Bound::collect_grads(GradMap& out) const {
  for (const auto& [name, v] : bound_) {
    const Tensor& g = tape_->grad(v);
    if (g.data.empty()) continue;
    auto it = out.find(name);
    if (it == out.end()) {
      out.emplace(name, g);
    } else {
      for (int64_t i = 0; i < g.numel(); ++i) it->second[i] += g[i];
    }
  }
}

void accumulate(GradMap& into, const GradMap& grads) {
  for (const auto& [name, g] : grads) {
    auto it = into.find(name);
    if (it == into.end()) {
      into.emplace(name, g);
    } else {
      for (int64_t i = 0; i < g.numel(); ++i) it->second[i] += g[i];
    }
  }
}

void grad_scale(GradMap& grads, double c) {
  for (auto& [name, g] : grads)
    for (auto& v : g.data) v *= c;
}

void Adam::step(ParamSet& params, const GradMap& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    Tensor& m = m_.try_emplace(name, Tensor::zeros(p.shape)).first->second;
    Tensor& v = v_.try_emplace(name, Tensor::zeros(p.shape)).first->second;
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double gi = g[i] + weight_decay_ * p[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      p[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

LstmState lstm_step(ad::Tape& t, ad::Value x, LstmState prev, ad::Value w, ad::Value b, int hidden) {
  using namespace ad;
  const Value xs = concat_cols(t, x, prev.h);
  const Value gates = linear(t, xs, w, b);  // [1,4H]
  const Value i = sigmoid(t, slice_cols(t, gates, 0, hidden));
  const Value f = sigmoid(t, slice_cols(t, gates, hidden, 2 * hidden));
  const Value g = tanh_v(t, slice_cols(t, gates, 2 * hidden, 3 * hidden));
  const Value o = sigmoid(t, slice_cols(t, gates, 3 * hidden, 4 * hidden));
  LstmState next;
  next.c = add(t, mul(t, f, prev.c), mul(t, i, g));
  next.h = mul(t, o, tanh_v(t, next.c));
  return next;
}

void init_lstm(ParamSet& ps, const std::string& prefix, int input, int hidden, RandomSource& rng) {
  ps[prefix + ".w"] = glorot({input + hidden, 4 * hidden}, input + hidden, 4 * hidden, rng);
  Tensor b = Tensor::zeros({4 * hidden});
  for (int i = hidden; i < 2 * hidden; ++i) b[i] = 1.0;  // forget gate bias
  ps[prefix + ".b"] = b;
}

void quantize_f32(ParamSet& params) {
  for (auto& [name, p] : params)
    for (auto& v : p.data) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace nn
}  // namespace chartex
