#include "lsvg/numerics/parameters.h"

#include <cmath>

#include "lsvg/common/error.h"

namespace lsvg {

DiffArray ParameterSet::CreateUniform(const std::string& name, Shape shape,
                                      size_t fan_in, std::mt19937_64& rng) {
  LSVG_CHECK(fan_in > 0, "CreateUniform: fan_in must be positive for " + name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape.size());
  for (double& x : v) x = dist(rng);
  return Insert(name, DiffArray::Parameter(shape, std::move(v)));
}

DiffArray ParameterSet::CreateConstant(const std::string& name, Shape shape,
                                       double value) {
  return Insert(name, DiffArray::Parameter(
                          shape, std::vector<double>(shape.size(), value)));
}

DiffArray ParameterSet::Insert(const std::string& name, DiffArray p) {
  auto [it, inserted] = params_.emplace(name, p);
  LSVG_CHECK(inserted, "duplicate parameter name " + name);
  return p;
}

const DiffArray& ParameterSet::Get(const std::string& name) const {
  auto it = params_.find(name);
  LSVG_CHECK(it != params_.end(), "unknown parameter " + name);
  return it->second;
}

bool ParameterSet::Contains(const std::string& name) const {
  return params_.count(name) > 0;
}

size_t ParameterSet::TotalSize() const {
  size_t n = 0;
  for (const auto& [_, p] : params_) n += p.size();
  return n;
}

void ParameterSet::ZeroGrad() {
  for (auto& [_, p] : params_) {
    DiffArray q = p;
    q.ZeroGrad();
  }
}

void ParameterSet::CopyValuesFrom(const ParameterSet& other) {
  LSVG_CHECK(other.params_.size() == params_.size(),
             "CopyValuesFrom: parameter count mismatch");
  for (auto& [name, p] : params_) {
    const DiffArray& src = other.Get(name);
    LSVG_CHECK(src.shape() == p.shape(), "CopyValuesFrom: shape mismatch for " + name);
    DiffArray dst = p;
    std::copy(src.values().begin(), src.values().end(),
              dst.mutable_values().begin());
  }
}

Adam::Adam(const ParameterSet& params, Options options)
    : params_(params), options_(options) {
  for (const auto& [name, p] : params_.all()) {
    m_[name].assign(p.size(), 0.0);
    v_[name].assign(p.size(), 0.0);
  }
}

void Adam::Step(double lr, double grad_scale) {
  ++t_;
  double scale = grad_scale;
  if (options_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [_, p] : params_.all())
      for (double g : p.grad()) sq += g * g * grad_scale * grad_scale;
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) scale *= options_.clip_norm / norm;
  }
  const double b1t = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double b2t = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (const auto& [name, p] : params_.all()) {
    DiffArray q = p;
    auto values = q.mutable_values();
    auto grad = p.grad();
    auto& m = m_.at(name);
    auto& v = v_.at(name);
    for (size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i] * scale;
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double mhat = m[i] / b1t;
      const double vhat = v[i] / b2t;
      values[i] -= lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

}  // namespace lsvg
