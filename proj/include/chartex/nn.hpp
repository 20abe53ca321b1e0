#ifndef CHARTEX_NN_HPP_
#define CHARTEX_NN_HPP_

#include <map>
#include <string>
#include <vector>

#include "chartex/autodiff.hpp"
#include "chartex/tensor.hpp"

namespace chartex {
namespace nn {

// Named parameter collection. std::map keeps iteration order stable, which
// the optimizer and serializer rely on for determinism.
using ParamSet = std::map<std::string, Tensor>;
using GradMap = std::map<std::string, Tensor>;

// Uniform(-limit, limit) with limit = sqrt(6/(fan_in+fan_out)).
Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, RandomSource& rng);
// Normal(0, std).
Tensor gaussian(std::vector<int> shape, double stddev, RandomSource& rng);

// Lazily binds parameters of a ParamSet onto one tape as gradient leaves.
class Bound {
 public:
  Bound(ad::Tape& tape, const ParamSet& params, bool track_grads = true)
      : tape_(&tape), params_(&params), track_(track_grads) {}

  ad::Value operator()(const std::string& name);
  // Harvests accumulated gradients for every parameter bound so far by this
  // object (zeros for parameters never touched are omitted).
  void collect_grads(GradMap& out) const;

 private:
  ad::Tape* tape_;
  const ParamSet* params_;
  bool track_;
  std::map<std::string, ad::Value> bound_;
};

void accumulate(GradMap& into, const GradMap& grads);
void grad_scale(GradMap& grads, double c);

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                double weight_decay = 0.0)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

  void step(ParamSet& params, const GradMap& grads);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  int64_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

struct LstmState {
  ad::Value h;  // [1,H]
  ad::Value c;  // [1,H]
};

// One LSTM step. x [1,D]; weights w [(D+H),4H] with gate order i,f,g,o and
// bias b [4H].
LstmState lstm_step(ad::Tape& t, ad::Value x, LstmState prev, ad::Value w, ad::Value b, int hidden);

// Initializes LSTM parameters (single fused weight + bias, forget bias 1).
void init_lstm(ParamSet& ps, const std::string& prefix, int input, int hidden, RandomSource& rng);

// Quantizes every parameter through float32. Bundles store f32 blobs, so
// doing this after training makes save/load round trips bit-exact.
void quantize_f32(ParamSet& params);

}  // namespace nn
}  // namespace chartex

#endif  // CHARTEX_NN_HPP_
