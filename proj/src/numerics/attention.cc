#include "lsvg/numerics/attention.h"

#include <cmath>

#include "lsvg/common/error.h"
#include "lsvg/numerics/ops.h"

namespace lsvg {

DiffArray MultiHeadAttention(const DiffArray& q, const DiffArray& k,
                             const DiffArray& v, size_t heads,
                             std::vector<DiffArray>* weights) {
  LSVG_CHECK(k.rows() > 0, "attention over zero keys");
  LSVG_CHECK(heads > 0 && q.cols() % heads == 0,
             "attention: width " + std::to_string(q.cols()) +
                 " not divisible by " + std::to_string(heads) + " heads");
  LSVG_CHECK(k.cols() == q.cols() && v.cols() == q.cols() && k.rows() == v.rows(),
             "attention: Q/K/V shape mismatch");
  const size_t dk = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<DiffArray> outs;
  outs.reserve(heads);
  for (size_t h = 0; h < heads; ++h) {
    DiffArray qh = heads == 1 ? q : ops::SliceCols(q, h * dk, dk);
    DiffArray kh = heads == 1 ? k : ops::SliceCols(k, h * dk, dk);
    DiffArray vh = heads == 1 ? v : ops::SliceCols(v, h * dk, dk);
    DiffArray alpha = ops::SoftmaxRows(ops::Scale(ops::MatMulNT(qh, kh), scale));
    if (weights) weights->push_back(alpha);
    outs.push_back(ops::MatMul(alpha, vh));
  }
  return heads == 1 ? outs[0] : ops::ConcatCols(outs);
}

}  // namespace lsvg
