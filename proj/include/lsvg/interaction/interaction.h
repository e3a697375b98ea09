#ifndef LSVG_INTERACTION_INTERACTION_H_
#define LSVG_INTERACTION_INTERACTION_H_

#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsvg/geometry/geometry.h"
#include "lsvg/language/text_encoder.h"
#include "lsvg/numerics/diff_array.h"
#include "lsvg/numerics/mlp.h"
#include "lsvg/numerics/parameters.h"
#include "lsvg/scenegraph/scene_graph.h"

namespace lsvg {

struct InteractionConfig {
  size_t d_model = 64;
  size_t heads = 8;
  size_t iterations = 2;
  std::vector<double> angles = DefaultAngles();
  // false removes the graph-attention layers (ablation).
  bool use_graph = true;
  Activation graph_activation = Activation::kLeakyRelu;

  static std::vector<double> DefaultAngles();
  void Validate() const;
  nlohmann::json ToJson() const;
  static InteractionConfig FromJson(const nlohmann::json& j);
};

// Per-box input row for one rotation: centered+rotated center (3), size (3),
// sin/cos yaw (2), scene half-extent of the rotated centers (3).
inline constexpr size_t kBoxInputWidth = 11;
std::vector<double> BoxInputs(const std::vector<Box3D>& boxes, double angle);

class BoxEncoder {
 public:
  BoxEncoder() = default;
  BoxEncoder(ParameterSet& params, const std::string& name, size_t d_model,
             std::mt19937_64& rng);

  // One [n x d] encoding per angle. Boxes are centered on the mean of their
  // centers before rotation.
  std::vector<DiffArray> EncodeViews(const std::vector<Box3D>& boxes,
                                     const std::vector<double>& angles) const;
  // Mean over angles.
  DiffArray EncodeMean(const std::vector<Box3D>& boxes, const std::vector<double>& angles) const;
  const Mlp& mlp() const { return mlp_; }

 private:
  Mlp mlp_;
};

// X + concat_h softmax(Q_h K_h^T / sqrt(d_k)) V_h with Q = LN(X) W_q,
// K = T W_k, V = T W_v.
class CrossAttention {
 public:
  CrossAttention() = default;
  CrossAttention(ParameterSet& params, const std::string& name, size_t d_model,
                 size_t heads, std::mt19937_64& rng);
  DiffArray Forward(const DiffArray& x, const DiffArray& tokens,
                    std::vector<DiffArray>* weights = nullptr) const;

 private:
  size_t heads_ = 1;
  DiffArray ln_gain_, ln_bias_;
  Linear wq_, wk_, wv_;
};

// Row-major (views * n)^2 mask: the graph's edges replicated inside every
// view block, no edges across views.
std::vector<uint8_t> StackedMask(const SceneGraph& graph, size_t objects, size_t views);

struct InteractionOutput {
  DiffArray features;  // [views * n x d], view-major
  size_t views = 0;
  size_t objects = 0;
  // Per-head attention of the last graph layer, [views * n]^2 each.
  std::vector<DiffArray> last_graph_alphas;
};

struct AttentionPair {
  int from_id = 0;
  int to_id = 0;
  double weight = 0.0;
};

struct GroundingResult {
  DiffArray scores;  // [1 x n]
  int predicted_index = 0;
  int predicted_id = 0;
  std::vector<AttentionPair> top_pairs;
  nlohmann::json ToJson(const std::vector<int>& object_ids) const;
};

class InteractionModule {
 public:
  InteractionModule() = default;
  InteractionModule(ParameterSet& params, const std::string& name,
                    const InteractionConfig& cfg, std::mt19937_64& rng);

  // f_o is [n x d]. Geometry is encoded from `boxes` for every configured
  // angle; graph.node_ids index into the same n objects.
  InteractionOutput Interact(const DiffArray& f_o, const std::vector<Box3D>& boxes,
                             const SceneGraph& graph, const TextEncoding& text) const;
  // score_i = mean over views of MLP([x_i || sentence_emb]); [1 x n].
  DiffArray Scores(const InteractionOutput& out, const DiffArray& sentence_emb) const;
  // Argmax with ties to the lowest index, plus the top attended node pairs.
  static GroundingResult Ground(const DiffArray& scores, const InteractionOutput& out,
                                const std::vector<int>& object_ids, size_t top_k = 10);

  const InteractionConfig& config() const { return cfg_; }
  const BoxEncoder& box_encoder() const { return boxes_; }

 private:
  struct Iteration {
    CrossAttention cross;
    DiffArray ln_gain, ln_bias;
    GraphAttention graph;
  };

  InteractionConfig cfg_;
  BoxEncoder boxes_;
  std::vector<Iteration> iterations_;
  Mlp head_;
};

}  // namespace lsvg

#endif  // LSVG_INTERACTION_INTERACTION_H_
