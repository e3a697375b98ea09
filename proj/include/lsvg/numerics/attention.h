#ifndef LSVG_NUMERICS_ATTENTION_H_
#define LSVG_NUMERICS_ATTENTION_H_

#include <vector>

#include "lsvg/numerics/diff_array.h"

namespace lsvg {

// Scaled dot-product attention split into `heads` column blocks:
// per head softmax(Q_h K_h^T / sqrt(d_k)) V_h, heads concatenated.
// Q is [n x d], K and V are [t x d]; d must be divisible by heads.
// When `weights` is non-null it receives the per-head [n x t] attention rows.
DiffArray MultiHeadAttention(const DiffArray& q, const DiffArray& k,
                             const DiffArray& v, size_t heads,
                             std::vector<DiffArray>* weights = nullptr);

}  // namespace lsvg

#endif  // LSVG_NUMERICS_ATTENTION_H_
