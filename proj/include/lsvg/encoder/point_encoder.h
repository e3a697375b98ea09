#ifndef LSVG_ENCODER_POINT_ENCODER_H_
#define LSVG_ENCODER_POINT_ENCODER_H_

#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsvg/geometry/geometry.h"
#include "lsvg/numerics/diff_array.h"
#include "lsvg/numerics/mlp.h"
#include "lsvg/numerics/parameters.h"

namespace lsvg {

struct SaLayerConfig {
  // 0 marks the final global layer, which pools every point into one vector.
  size_t num_seeds = 0;
  double radius = 0.0;
  size_t max_neighbors = 0;
  std::vector<size_t> widths;
};

struct EncoderConfig {
  size_t points_per_object = 128;
  std::vector<SaLayerConfig> layers;
  // 1-based index of the layer whose input receives the teacher feature.
  size_t fuse_layer = 2;
  size_t teacher_dim = 32;

  static EncoderConfig Desk();
  static EncoderConfig Paper();

  // Per-point input channels: centered xyz + rgb.
  static constexpr size_t kPointChannels = 6;
  size_t out_dim() const { return layers.back().widths.back(); }
  // Width of the input features of `layer` (1-based); this is the projected
  // teacher width d when fusing there.
  size_t InputWidth(size_t layer) const;
  void Validate() const;

  nlohmann::json ToJson() const;
  static EncoderConfig FromJson(const nlohmann::json& j);
};

// Geometry-only preprocessing of one object: canonical point order,
// resampling, and the per-layer seed/neighborhood indices.
struct PreparedObject {
  struct Level {
    std::vector<Vec3> seeds;  // empty for the global layer
    // For every grouped row: source point index and offset to its seed.
    std::vector<size_t> members;
    std::vector<size_t> offsets;  // group g spans members[offsets[g]..offsets[g+1])
    std::vector<double> rel;      // [rows x 3]
  };
  std::vector<Vec3> positions;
  std::vector<double> feats;  // [points_per_object x 6]
  std::vector<Level> levels;
};

// Points are sorted lexicographically (so input order never matters),
// centered on the box center, resampled to points_per_object with a
// generator seeded by `sample_seed` (with replacement only when the cloud is
// smaller), then grouped per layer with FPS from index 0.
PreparedObject PrepareObject(const PointCloud& cloud, const Vec3& center,
                             const EncoderConfig& cfg, uint64_t sample_seed);

struct ObjectEncodings {
  DiffArray f_p;  // [n x out_dim], geometry branch
  DiffArray f_m;  // [n x out_dim], teacher-fused branch
  DiffArray f_o;  // f_p + f_m
};

// Per-layer outputs of both branches, for inspection.
struct EncoderTrace {
  std::vector<DiffArray> pure;
  std::vector<DiffArray> fused;
};

// F_att = F_layer + Proj(teacher)[owner(row)]: each row of `feats` receives
// the projected teacher vector of the object that owns it.
DiffArray FuseTeacher(const DiffArray& feats, const std::vector<size_t>& row_owner,
                      const DiffArray& teacher, const Linear& proj);

class PointEncoder {
 public:
  PointEncoder() = default;
  PointEncoder(ParameterSet& params, const std::string& name,
               const EncoderConfig& cfg, std::mt19937_64& rng);

  // Encodes a batch of objects. `teacher` is [n x teacher_dim] (one row per
  // object, constants). Throws on an empty batch or dim mismatch.
  ObjectEncodings Encode(const std::vector<const PreparedObject*>& objects,
                         const DiffArray& teacher, EncoderTrace* trace = nullptr) const;

  const EncoderConfig& config() const { return cfg_; }
  const Linear& teacher_proj() const { return proj_; }

 private:
  DiffArray RunLayer(size_t layer, const Mlp& mlp, const DiffArray& feats,
                     const std::vector<const PreparedObject*>& objects,
                     const std::vector<size_t>& feat_base) const;

  EncoderConfig cfg_;
  std::vector<Mlp> shared_;
  std::vector<Mlp> pure_;
  std::vector<Mlp> fused_;
  Linear proj_;
};

}  // namespace lsvg

#endif  // LSVG_ENCODER_POINT_ENCODER_H_
