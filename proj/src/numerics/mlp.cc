#include "lsvg/numerics/mlp.h"

#include "lsvg/common/error.h"
#include "lsvg/numerics/ops.h"

namespace lsvg {

DiffArray Activate(const DiffArray& x, Activation act) {
  switch (act) {
    case Activation::kRelu:
      return ops::Relu(x);
    case Activation::kLeakyRelu:
      return ops::LeakyRelu(x, kLeakySlope);
    case Activation::kNone:
      return x;
  }
  return x;
}

void MlpSpec::Validate() const {
  LSVG_CHECK(input_width > 0, "MlpSpec: input width must be positive");
  LSVG_CHECK(!widths.empty(), "MlpSpec: at least one layer required");
  for (size_t w : widths) LSVG_CHECK(w > 0, "MlpSpec: widths must be positive");
}

Linear Linear::Create(ParameterSet& params, const std::string& name, size_t in,
                      size_t out, bool with_bias, std::mt19937_64& rng) {
  Linear l;
  l.weight = params.CreateUniform(name + ".weight", {in, out}, in, rng);
  if (with_bias) l.bias = params.CreateUniform(name + ".bias", {1, out}, in, rng);
  return l;
}

DiffArray Linear::Forward(const DiffArray& x) const {
  DiffArray y = ops::MatMul(x, weight);
  return bias.defined() ? ops::AddRowBroadcast(y, bias) : y;
}

Mlp::Mlp(ParameterSet& params, const std::string& name, MlpSpec spec,
         std::mt19937_64& rng)
    : spec_(std::move(spec)) {
  spec_.Validate();
  size_t in = spec_.input_width;
  for (size_t i = 0; i < spec_.widths.size(); ++i) {
    layers_.push_back(Linear::Create(params, name + "." + std::to_string(i), in,
                                     spec_.widths[i], spec_.bias, rng));
    in = spec_.widths[i];
  }
}

DiffArray Mlp::Forward(const DiffArray& x) const {
  LSVG_CHECK(x.cols() == spec_.input_width,
             "Mlp: input width " + std::to_string(x.cols()) + " != " +
                 std::to_string(spec_.input_width));
  DiffArray h = x;
  for (size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].Forward(h);
    if (i + 1 < layers_.size() || spec_.activate_output)
      h = Activate(h, spec_.activation);
  }
  return h;
}

}  // namespace lsvg
