#include "lsvg/numerics/diff_array.h"

#include <cmath>
#include <unordered_set>
#include <utility>

#include "lsvg/common/error.h"

namespace lsvg {

std::string Shape::ToString() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

DiffArray DiffArray::Constant(Shape shape, std::vector<double> values) {
  LSVG_CHECK(values.size() == shape.size(),
             "DiffArray::Constant: value count does not match " +
                 shape.ToString());
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  return DiffArray(std::move(node));
}

DiffArray DiffArray::Zeros(Shape shape) {
  return Constant(shape, std::vector<double>(shape.size(), 0.0));
}

DiffArray DiffArray::Scalar(double v) { return Constant({1, 1}, {v}); }

DiffArray DiffArray::RowVector(std::vector<double> values) {
  Shape s{1, values.size()};
  return Constant(s, std::move(values));
}

DiffArray DiffArray::Parameter(Shape shape, std::vector<double> values) {
  DiffArray a = Constant(shape, std::move(values));
  a.node_->requires_grad = true;
  a.node_->grad.assign(shape.size(), 0.0);
  return a;
}

DiffArray DiffArray::FromOp(Shape shape, std::vector<double> values,
                            std::vector<DiffArray> parents) {
  DiffArray out = Constant(shape, std::move(values));
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    out.node_->requires_grad = true;
    out.node_->grad.assign(shape.size(), 0.0);
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
  }
  return out;
}

double DiffArray::item() const {
  LSVG_CHECK(size() == 1, "DiffArray::item on non-scalar " + shape().ToString());
  return node_->value[0];
}

void DiffArray::SetBackward(std::function<void()> fn) {
  if (node_->requires_grad) node_->backward = std::move(fn);
}

void DiffArray::Backward() {
  LSVG_CHECK(size() == 1, "Backward requires a scalar, got " +
                              shape().ToString());
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward();
  }
}

void DiffArray::ZeroGrad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void DiffArray::CheckFinite(const std::string& where) const {
  for (double v : node_->value) {
    if (!std::isfinite(v)) throw Error("non-finite value in " + where);
  }
}

}  // namespace lsvg
