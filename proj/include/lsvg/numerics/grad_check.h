#ifndef LSVG_NUMERICS_GRAD_CHECK_H_
#define LSVG_NUMERICS_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <string>

#include "lsvg/numerics/diff_array.h"
#include "lsvg/numerics/parameters.h"

namespace lsvg {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;  // "name[index]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  size_t checked = 0;

  bool Passed(double tol) const { return max_rel_err < tol; }
};

struct GradCheckOptions {
  double eps = 1e-6;
  // Check at most this many entries per parameter (0 = all), chosen with a
  // seeded shuffle.
  size_t max_entries_per_param = 0;
  uint64_t seed = 0;
};

// Compares analytic gradients of the scalar `f` with central differences
// (f(p+eps) - f(p-eps)) / (2 eps). Relative error is
// |a - n| / max(1, |a|, |n|). `f` must rebuild its graph from the current
// parameter values on every call.
GradCheckReport GradCheck(const std::function<DiffArray()>& f,
                          ParameterSet& params,
                          const GradCheckOptions& options = {});

}  // namespace lsvg

#endif  // LSVG_NUMERICS_GRAD_CHECK_H_
