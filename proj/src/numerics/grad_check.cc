#include "lsvg/numerics/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lsvg/common/error.h"

namespace lsvg {
namespace {

double Evaluate(const std::function<DiffArray()>& f) {
  const double v = f().item();
  if (!std::isfinite(v)) throw Error("GradCheck: objective is not finite");
  return v;
}

}  // namespace

GradCheckReport GradCheck(const std::function<DiffArray()>& f,
                          ParameterSet& params,
                          const GradCheckOptions& options) {
  LSVG_CHECK(options.eps >= 1e-7 && options.eps <= 1e-3,
             "GradCheck: eps must lie in [1e-7, 1e-3]");
  params.ZeroGrad();
  DiffArray loss = f();
  if (!std::isfinite(loss.item())) throw Error("GradCheck: objective is not finite");
  loss.Backward();

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (const auto& [name, p] : params.all()) {
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    std::vector<size_t> entries(p.size());
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_param > 0 &&
        entries.size() > options.max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_param);
      std::sort(entries.begin(), entries.end());
    }
    DiffArray q = p;
    auto values = q.mutable_values();
    for (size_t idx : entries) {
      const double saved = values[idx];
      values[idx] = saved + options.eps;
      const double up = Evaluate(f);
      values[idx] = saved - options.eps;
      const double down = Evaluate(f);
      values[idx] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[idx];
      const double rel = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
      ++report.checked;
      if (rel > report.max_rel_err || report.worst_param.empty()) {
        report.max_rel_err = rel;
        report.worst_param = name + "[" + std::to_string(idx) + "]";
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  params.ZeroGrad();
  return report;
}

}  // namespace lsvg
