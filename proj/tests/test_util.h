#ifndef LSVG_TESTS_TEST_UTIL_H_
#define LSVG_TESTS_TEST_UTIL_H_

#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string>

#include "lsvg/numerics/diff_array.h"
#include "lsvg/numerics/ops.h"
#include "lsvg/numerics/parameters.h"

namespace lsvg::testing {

inline DiffArray RandomParam(ParameterSet& ps, const std::string& name, Shape s,
                             std::mt19937_64& rng, double scale = 1.0) {
  DiffArray p = ps.CreateUniform(name, s, 1, rng);
  for (double& v : p.mutable_values()) v *= scale;
  return p;
}

inline DiffArray RandomConstant(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(s.size());
  for (double& x : v) x = u(rng);
  return DiffArray::Constant(s, std::move(v));
}

// Deterministic random readout so scalar objectives touch every output entry.
inline DiffArray Readout(const DiffArray& x, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(x.size());
  for (double& v : w) v = u(rng);
  return ops::Sum(ops::Mul(x, DiffArray::Constant(x.shape(), std::move(w))));
}

inline uint64_t Fnv1a(std::span<const double> v) {
  uint64_t h = 1469598103934665603ull;
  for (double d : v) {
    uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace lsvg::testing

#endif  // LSVG_TESTS_TEST_UTIL_H_
