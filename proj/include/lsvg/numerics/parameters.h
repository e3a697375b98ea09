#ifndef LSVG_NUMERICS_PARAMETERS_H_
#define LSVG_NUMERICS_PARAMETERS_H_

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "lsvg/numerics/diff_array.h"

namespace lsvg {

// Named trainable arrays, ordered by name so that iteration (and therefore
// checkpoints and optimizer updates) is deterministic.
class ParameterSet {
 public:
  // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
  DiffArray CreateUniform(const std::string& name, Shape shape, size_t fan_in,
                          std::mt19937_64& rng);
  DiffArray CreateConstant(const std::string& name, Shape shape, double value);

  const DiffArray& Get(const std::string& name) const;
  bool Contains(const std::string& name) const;
  const std::map<std::string, DiffArray>& all() const { return params_; }
  size_t TotalSize() const;

  void ZeroGrad();
  // Overwrites values from another set with identical names and shapes.
  void CopyValuesFrom(const ParameterSet& other);

 private:
  DiffArray Insert(const std::string& name, DiffArray p);

  std::map<std::string, DiffArray> params_;
};

// Adam with bias correction.
class Adam {
 public:
  struct Options {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Global gradient-norm clip; <= 0 disables.
    double clip_norm = 0.0;
  };

  Adam(const ParameterSet& params, Options options);

  // Applies one update using the accumulated gradients scaled by grad_scale.
  void Step(double lr, double grad_scale = 1.0);
  int64_t steps() const { return t_; }

 private:
  const ParameterSet& params_;
  Options options_;
  std::map<std::string, std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace lsvg

#endif  // LSVG_NUMERICS_PARAMETERS_H_
