#ifndef LSVG_NUMERICS_MLP_H_
#define LSVG_NUMERICS_MLP_H_

#include <random>
#include <string>
#include <vector>

#include "lsvg/numerics/diff_array.h"
#include "lsvg/numerics/parameters.h"

namespace lsvg {

enum class Activation { kRelu, kLeakyRelu, kNone };

// leaky_relu slope used everywhere a leaky activation appears.
inline constexpr double kLeakySlope = 0.2;

DiffArray Activate(const DiffArray& x, Activation act);

struct MlpSpec {
  size_t input_width = 0;
  std::vector<size_t> widths;  // output width of each layer
  Activation activation = Activation::kRelu;
  bool bias = true;
  // Apply the activation after the last layer too.
  bool activate_output = false;

  void Validate() const;
};

// y = x W (+ b), W is [in x out].
struct Linear {
  DiffArray weight;
  DiffArray bias;  // undefined when the layer has no bias

  static Linear Create(ParameterSet& params, const std::string& name,
                       size_t in, size_t out, bool with_bias,
                       std::mt19937_64& rng);
  DiffArray Forward(const DiffArray& x) const;
  size_t in() const { return weight.rows(); }
  size_t out() const { return weight.cols(); }
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterSet& params, const std::string& name, MlpSpec spec,
      std::mt19937_64& rng);

  // Throws on input width mismatch.
  DiffArray Forward(const DiffArray& x) const;

  const MlpSpec& spec() const { return spec_; }
  const std::vector<Linear>& layers() const { return layers_; }
  size_t output_width() const { return spec_.widths.back(); }

 private:
  MlpSpec spec_;
  std::vector<Linear> layers_;
};

// Linear map from a feature row to class logits.
class ClassHead {
 public:
  ClassHead() = default;
  ClassHead(ParameterSet& params, const std::string& name, size_t in,
            size_t num_classes, std::mt19937_64& rng)
      : linear_(Linear::Create(params, name, in, num_classes, true, rng)) {}
  DiffArray Forward(const DiffArray& x) const { return linear_.Forward(x); }
  size_t num_classes() const { return linear_.out(); }

 private:
  Linear linear_;
};

}  // namespace lsvg

#endif  // LSVG_NUMERICS_MLP_H_
