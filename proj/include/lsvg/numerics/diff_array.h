#ifndef LSVG_NUMERICS_DIFF_ARRAY_H_
#define LSVG_NUMERICS_DIFF_ARRAY_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lsvg {

// Row-major matrix extents. Vectors are 1 x n rows.
struct Shape {
  size_t rows = 0;
  size_t cols = 0;

  size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string ToString() const;
};

// Dense float array with a value buffer and, when it participates in
// backprop, a same-shape gradient buffer.
//
// A DiffArray is a cheap handle: copies share the underlying node. Every op
// in ops.h allocates a fresh node that remembers its inputs and a backward
// rule; Backward() on a scalar walks those nodes in reverse topological order
// and accumulates gradients. Leaves created with Parameter() keep their
// gradients until ZeroGrad().
class DiffArray {
 public:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty iff !requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward;
  };

  DiffArray() = default;

  // Non-differentiable input.
  static DiffArray Constant(Shape shape, std::vector<double> values);
  static DiffArray Zeros(Shape shape);
  static DiffArray Scalar(double v);
  static DiffArray RowVector(std::vector<double> values);
  // Trainable leaf.
  static DiffArray Parameter(Shape shape, std::vector<double> values);

  // Creates an op output whose gradient is tracked iff any parent's is.
  static DiffArray FromOp(Shape shape, std::vector<double> values,
                          std::vector<DiffArray> parents);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  size_t rows() const { return node_->shape.rows; }
  size_t cols() const { return node_->shape.cols; }
  size_t size() const { return node_->shape.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  double at(size_t r, size_t c) const {
    return node_->value[r * node_->shape.cols + c];
  }
  // Value of a 1 x 1 array.
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }

  // Installs the backward rule of an op output. No-op when the output does
  // not require grad.
  void SetBackward(std::function<void()> fn);

  // Reverse-mode sweep from a 1 x 1 array with seed gradient 1.
  void Backward();
  void ZeroGrad();

  // Throws if any value is NaN or Inf.
  void CheckFinite(const std::string& where) const;

  Node* node() const { return node_.get(); }

 private:
  explicit DiffArray(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;
};

}  // namespace lsvg

#endif  // LSVG_NUMERICS_DIFF_ARRAY_H_
