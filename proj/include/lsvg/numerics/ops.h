#ifndef LSVG_NUMERICS_OPS_H_
#define LSVG_NUMERICS_OPS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "lsvg/numerics/diff_array.h"

// Differentiable ops over DiffArray. Each op has an explicit backward rule;
// shapes are validated eagerly and mismatches throw lsvg::Error.
namespace lsvg::ops {

// a[n x k] * b[k x m]
DiffArray MatMul(const DiffArray& a, const DiffArray& b);
// a[n x k] * b[m x k]^T
DiffArray MatMulNT(const DiffArray& a, const DiffArray& b);
DiffArray Transpose(const DiffArray& a);

DiffArray Add(const DiffArray& a, const DiffArray& b);
DiffArray Sub(const DiffArray& a, const DiffArray& b);
DiffArray Mul(const DiffArray& a, const DiffArray& b);
// a[n x m] + row[1 x m] on every row.
DiffArray AddRowBroadcast(const DiffArray& a, const DiffArray& row);
DiffArray Scale(const DiffArray& a, double s);
// a * s where s is a differentiable 1 x 1 array.
DiffArray ScaleBy(const DiffArray& a, const DiffArray& s);

DiffArray Relu(const DiffArray& a);
DiffArray LeakyRelu(const DiffArray& a, double slope);
DiffArray Exp(const DiffArray& a);

DiffArray SoftmaxRows(const DiffArray& a);
DiffArray LogSoftmaxRows(const DiffArray& a);
// Softmax over the entries of each row where mask is nonzero. Masked entries
// are 0; rows with an empty mask are all zero.
DiffArray MaskedSoftmaxRows(const DiffArray& a, std::span<const uint8_t> mask);

// Mean over rows of -log softmax(logits)[row, targets[row]].
DiffArray CrossEntropy(const DiffArray& logits, std::span<const size_t> targets);

DiffArray Sum(const DiffArray& a);
DiffArray Mean(const DiffArray& a);
// Column-wise mean: [n x m] -> [1 x m].
DiffArray MeanRows(const DiffArray& a);

DiffArray ConcatCols(const std::vector<DiffArray>& parts);
DiffArray ConcatRows(const std::vector<DiffArray>& parts);
DiffArray SliceCols(const DiffArray& a, size_t begin, size_t count);
DiffArray SliceRows(const DiffArray& a, size_t begin, size_t count);

// out[i] = a[index[i]]; indices may repeat.
DiffArray GatherRows(const DiffArray& a, std::span<const size_t> index);
// Copy of base with rows index[i] replaced by rows[i]. Indices must be unique.
DiffArray ReplaceRows(const DiffArray& base, std::span<const size_t> index,
                      const DiffArray& rows);

// Group g covers a[members[offsets[g] .. offsets[g+1])]; out[g] is the
// column-wise max over the group. Ties route the gradient to the first
// maximal member.
DiffArray MaxPoolGroups(const DiffArray& a, std::span<const size_t> offsets,
                        std::span<const size_t> members);

// out[i][j] = u[i] + v[j] for column vectors u[n x 1], v[m x 1].
DiffArray PairwiseAdd(const DiffArray& u, const DiffArray& v);

DiffArray L2NormalizeRows(const DiffArray& a, double eps = 1e-12);
DiffArray LayerNormRows(const DiffArray& a, const DiffArray& gain,
                        const DiffArray& bias, double eps = 1e-5);

}  // namespace lsvg::ops

#endif  // LSVG_NUMERICS_OPS_H_
