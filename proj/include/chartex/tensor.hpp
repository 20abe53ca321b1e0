#ifndef CHARTEX_TENSOR_HPP_
#define CHARTEX_TENSOR_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace chartex {

// Dense row-major tensor of doubles. All model math runs in 64-bit so the
// finite-difference gradient suites are meaningful; bundles quantize to f32
// at save time.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) { data.resize(numel_of(shape)); }
  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }
  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Deterministic RNG. mt19937_64 plus hand-rolled transforms so streams are
// identical across standard library implementations.
class RandomSource {
 public:
  explicit RandomSource(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }
  // Uniform in [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller; caches the spare deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Uniform integer in [0, n).
  int64_t below(int64_t n) { return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n)); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i)
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(below(i + 1))]);
  }

  // Stable derivation of per-item sub-streams from one master seed.
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL + stream * 0xBF58476D1CE4E5B9ULL);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace chartex

#endif  // CHARTEX_TENSOR_HPP_
