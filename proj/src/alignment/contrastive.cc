#include "lsvg/alignment/contrastive.h"

#include <cmath>
#include <numeric>

#include "lsvg/common/error.h"
#include "lsvg/numerics/ops.h"

namespace lsvg {

DiffArray ContrastiveLoss(const DiffArray& x, const DiffArray& y) {
  LSVG_CHECK(x.rows() <= y.rows(), "contrastive_loss: C1 = " + std::to_string(x.rows()) +
                                       " exceeds C2 = " + std::to_string(y.rows()));
  LSVG_CHECK(x.cols() == y.cols(), "contrastive_loss: feature width mismatch " +
                                       x.shape().ToString() + " vs " + y.shape().ToString());
  std::vector<size_t> diag(x.rows());
  std::iota(diag.begin(), diag.end(), 0);
  return ops::CrossEntropy(ops::MatMulNT(x, y), diag);
}

AlignmentTerms AlignmentLoss(const DiffArray& f_p, const DiffArray& f_t,
                             const DiffArray& f_i_star, const DiffArray& f_t_star,
                             const DiffArray& scale) {
  const size_t d = f_p.cols();
  LSVG_CHECK(f_t.cols() == d && f_i_star.cols() == d && f_t_star.cols() == d,
             "alignment_loss: all features must share one width");
  const DiffArray p = ops::L2NormalizeRows(f_p);
  const DiffArray t = ops::L2NormalizeRows(f_t);
  const DiffArray i = ops::L2NormalizeRows(f_i_star);
  const DiffArray ts = ops::L2NormalizeRows(f_t_star);
  const DiffArray sp = ops::ScaleBy(p, scale);
  const DiffArray st = ops::ScaleBy(t, scale);
  const DiffArray si = ops::ScaleBy(i, scale);
  AlignmentTerms out;
  out.terms = {ContrastiveLoss(sp, t), ContrastiveLoss(sp, i), ContrastiveLoss(st, ts),
               ContrastiveLoss(sp, ts), ContrastiveLoss(si, t)};
  out.total = out.terms[0];
  for (size_t k = 1; k < out.terms.size(); ++k) out.total = ops::Add(out.total, out.terms[k]);
  return out;
}

AlignmentHead::AlignmentHead(ParameterSet& params, const std::string& name,
                             size_t object_dim, size_t text_dim, size_t teacher_dim,
                             std::mt19937_64& rng)
    : object_proj_(Linear::Create(params, name + ".object_proj", object_dim, teacher_dim,
                                  true, rng)),
      text_proj_(Linear::Create(params, name + ".text_proj", text_dim, teacher_dim, true,
                                rng)),
      log_inv_tau_(params.CreateConstant(name + ".log_inv_tau", {1, 1},
                                         -std::log(kInitTemperature))) {}

DiffArray AlignmentHead::Scale() const { return ops::Exp(log_inv_tau_); }

}  // namespace lsvg
