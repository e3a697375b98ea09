#ifndef LSVG_ALIGNMENT_CONTRASTIVE_H_
#define LSVG_ALIGNMENT_CONTRASTIVE_H_

#include <array>
#include <random>
#include <string>

#include "lsvg/numerics/diff_array.h"
#include "lsvg/numerics/mlp.h"
#include "lsvg/numerics/parameters.h"

namespace lsvg {

// (1/C1) sum_i -log(exp(x_i . y_i) / sum_j exp(x_i . y_j)) for X [C1 x d],
// Y [C2 x d]. Applied to its inputs as given; throws when C1 > C2 or the
// widths differ.
DiffArray ContrastiveLoss(const DiffArray& x, const DiffArray& y);

struct AlignmentTerms {
  // L_c(P,T), L_c(P,I*), L_c(T,T*), L_c(P,T*), L_c(I*,T)
  std::array<DiffArray, 5> terms;
  DiffArray total;
};

// Rows of all four inputs correspond to the same objects. Every input is
// L2-normalized per row and the first argument of each pair is multiplied by
// `scale` (the inverse temperature, 1 x 1) before ContrastiveLoss.
AlignmentTerms AlignmentLoss(const DiffArray& f_p, const DiffArray& f_t,
                             const DiffArray& f_i_star, const DiffArray& f_t_star,
                             const DiffArray& scale);

// Learnable maps of object and text features into the teacher space plus the
// log inverse temperature.
class AlignmentHead {
 public:
  static constexpr double kInitTemperature = 0.07;

  AlignmentHead() = default;
  AlignmentHead(ParameterSet& params, const std::string& name, size_t object_dim,
                size_t text_dim, size_t teacher_dim, std::mt19937_64& rng);

  DiffArray ProjectObjects(const DiffArray& f_p) const { return object_proj_.Forward(f_p); }
  DiffArray ProjectText(const DiffArray& f_t) const { return text_proj_.Forward(f_t); }
  // exp(log_inv_tau), 1 x 1.
  DiffArray Scale() const;

 private:
  Linear object_proj_;
  Linear text_proj_;
  DiffArray log_inv_tau_;
};

}  // namespace lsvg

#endif  // LSVG_ALIGNMENT_CONTRASTIVE_H_
