// Shared aliases, error types, and the deterministic RNG used everywhere.
//
// All randomness in the library flows through Rng, which layers explicit
// uniform/gaussian transforms on top of mt19937_64. The standard library's
// distribution objects are implementation-defined, so they would break the
// replay contract (same seed -> bit-identical streams) across toolchains.

#ifndef FGD_COMMON_HPP
#define FGD_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace fgd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

struct PreconditionError : std::runtime_error {
  explicit PreconditionError(const std::string& msg)
      : std::runtime_error("precondition violated: " + msg) {}
};

struct UnsupportedOracleError : std::runtime_error {
  explicit UnsupportedOracleError(const std::string& msg)
      : std::runtime_error("unsupported oracle: " + msg) {}
};

// splitmix64 step; used to derive independent sub-seeds from (seed, stream id)
// so that e.g. round t's batch never shares state with round t+1's.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream_id) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(gen_() % static_cast<uint64_t>(hi - lo + 1));
  }

  // Box-Muller; consumes two uniforms per pair, second value cached
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  Vec gaussian_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = gaussian();
    return v;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace fgd

#endif  // FGD_COMMON_HPP
