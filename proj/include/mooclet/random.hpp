#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace mooclet {

// Seedable pseudo-random stream. Same seed and same call sequence give the
// same outputs; the engine never shares one instance across threads without
// holding a lock.
class RandomSource {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit RandomSource(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  // Independent stream derived from a base seed and a stream label.
  static RandomSource derived(std::uint64_t base_seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(base_seed),
                      static_cast<std::uint32_t>(base_seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    RandomSource out(base_seed);
    out.engine_.seed(seq);
    return out;
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  std::uint64_t seed() const noexcept { return seed_; }

  // Uniform on [0, 1).
  double uniform() {
    return std::generate_canonical<double, 53>(engine_);
  }

  double beta(double alpha, double beta) {
    std::gamma_distribution<double> ga(alpha, 1.0);
    std::gamma_distribution<double> gb(beta, 1.0);
    const double x = ga(engine_);
    const double y = gb(engine_);
    if (x + y == 0.0) return 0.5;
    return x / (x + y);
  }

  // Laplace(0, scale) by inverse CDF.
  double laplace(double scale) {
    double u = uniform() - 0.5;
    while (u == -0.5) u = uniform() - 0.5;
    const double mag = -scale * std::log1p(-2.0 * std::abs(u));
    return u < 0 ? -mag : mag;
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void restore(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace mooclet
