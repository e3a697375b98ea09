#ifndef LSVG_SCENEGRAPH_SCENE_GRAPH_H_
#define LSVG_SCENEGRAPH_SCENE_GRAPH_H_

#include <cstdint>
#include <optional>
#include <span>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lsvg/numerics/diff_array.h"
#include "lsvg/numerics/mlp.h"
#include "lsvg/numerics/parameters.h"

namespace lsvg {

// Cosine argmax of each object row against each prompt row; ties go to the
// lowest class id. Throws on an empty prompt table or width mismatch.
std::vector<int> PredictObjectClasses(std::span<const double> object_feats, size_t dim,
                                      std::span<const double> prompt_feats);
std::vector<int> PredictObjectClasses(const DiffArray& object_feats, const DiffArray& prompt_feats);

enum class EdgeRule {
  kComplete,     // every pair of candidates
  kTargetAnchor  // only pairs where exactly one end has the target class
};

struct SceneGraph {
  // Indices (into the scene's object list) of candidate nodes, ascending.
  std::vector<size_t> node_ids;
  // |V| x |V| row-major, symmetric, zero diagonal.
  std::vector<uint8_t> adjacency;

  size_t size() const { return node_ids.size(); }
  bool empty() const { return node_ids.empty(); }
  bool edge(size_t i, size_t j) const { return adjacency[i * size() + j] != 0; }
  // Undirected edges (i < j) as pairs of node positions.
  std::vector<std::pair<size_t, size_t>> Edges() const;
};

// Nodes are the objects whose predicted class is among `matched`.
SceneGraph BuildGraph(const std::vector<int>& predicted_classes, const std::set<int>& matched,
                      EdgeRule rule = EdgeRule::kComplete,
                      std::optional<int> target_class = std::nullopt);

// {"nodes":[object ids], "edges":[[id, id]...], "matched_classes":[names]}
nlohmann::json GraphToJson(const SceneGraph& g, const std::vector<int>& object_ids,
                           const std::vector<std::string>& matched_class_names);

struct GraphAttentionConfig {
  size_t d_model = 64;
  size_t heads = 8;
  Activation activation = Activation::kLeakyRelu;
};

// Masked multi-head graph attention:
//   v_i' = v_i + concat_k (1/sqrt(d_k)) sigma(sum_j A_ij alpha^k_ij W^k v_j)
// with alpha^k_i. = softmax over N(i) of leaky_relu(a_k^T [W^k v_i || W^k v_j]).
class GraphAttention {
 public:
  GraphAttention() = default;
  GraphAttention(ParameterSet& params, const std::string& name,
                 const GraphAttentionConfig& cfg, std::mt19937_64& rng);

  // The concatenated messages without the residual. x is [n x d_model],
  // mask is n x n row-major. `alphas`, when given, receives per-head n x n
  // attention weights.
  DiffArray Messages(const DiffArray& x, std::span<const uint8_t> mask,
                     std::vector<DiffArray>* alphas = nullptr) const;
  // x + Messages(x).
  DiffArray Forward(const DiffArray& x, std::span<const uint8_t> mask,
                    std::vector<DiffArray>* alphas = nullptr) const;

  const GraphAttentionConfig& config() const { return cfg_; }
  const Linear& projection() const { return w_; }

 private:
  GraphAttentionConfig cfg_;
  Linear w_;            // d x d, head k owns columns [k dk, (k+1) dk)
  DiffArray a_dst_;     // dk x heads, scores the receiving node
  DiffArray a_src_;     // dk x heads, scores the neighbor
};

}  // namespace lsvg

#endif  // LSVG_SCENEGRAPH_SCENE_GRAPH_H_
