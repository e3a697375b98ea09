#include "lsvg/scenegraph/scene_graph.h"

#include <cmath>
#include <limits>

#include "lsvg/common/error.h"
#include "lsvg/numerics/ops.h"

namespace lsvg {

std::vector<int> PredictObjectClasses(std::span<const double> object_feats, size_t dim,
                                      std::span<const double> prompt_feats) {
  LSVG_CHECK(dim > 0 && !prompt_feats.empty(), "predict_object_classes: empty prompt table");
  LSVG_CHECK(object_feats.size() % dim == 0 && prompt_feats.size() % dim == 0,
             "predict_object_classes: width mismatch");
  const size_t n = object_feats.size() / dim, c = prompt_feats.size() / dim;
  auto norm = [dim](std::span<const double> v, size_t r) {
    double s = 0.0;
    for (size_t k = 0; k < dim; ++k) s += v[r * dim + k] * v[r * dim + k];
    return std::sqrt(s);
  };
  std::vector<double> prompt_norm(c);
  for (size_t j = 0; j < c; ++j) prompt_norm[j] = norm(prompt_feats, j);
  std::vector<int> out(n, 0);
  for (size_t i = 0; i < n; ++i) {
    const double ni = norm(object_feats, i);
    double best = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < c; ++j) {
      double dot = 0.0;
      for (size_t k = 0; k < dim; ++k) dot += object_feats[i * dim + k] * prompt_feats[j * dim + k];
      const double denom = ni * prompt_norm[j];
      const double cos = denom > 0 ? dot / denom : 0.0;
      if (cos > best) {
        best = cos;
        out[i] = static_cast<int>(j);
      }
    }
  }
  return out;
}

std::vector<int> PredictObjectClasses(const DiffArray& object_feats,
                                      const DiffArray& prompt_feats) {
  LSVG_CHECK(prompt_feats.rows() > 0, "predict_object_classes: empty prompt table");
  LSVG_CHECK(object_feats.cols() == prompt_feats.cols(), "predict_object_classes: width mismatch");
  return PredictObjectClasses(object_feats.values(), object_feats.cols(), prompt_feats.values());
}

std::vector<std::pair<size_t, size_t>> SceneGraph::Edges() const {
  std::vector<std::pair<size_t, size_t>> e;
  for (size_t i = 0; i < size(); ++i)
    for (size_t j = i + 1; j < size(); ++j)
      if (edge(i, j)) e.emplace_back(i, j);
  return e;
}

SceneGraph BuildGraph(const std::vector<int>& predicted_classes, const std::set<int>& matched,
                      EdgeRule rule, std::optional<int> target_class) {
  SceneGraph g;
  for (size_t i = 0; i < predicted_classes.size(); ++i)
    if (matched.count(predicted_classes[i])) g.node_ids.push_back(i);
  const size_t n = g.size();
  g.adjacency.assign(n * n, 0);
  for (size_t a = 0; a < n; ++a) {
    for (size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      bool connect = true;
      if (rule == EdgeRule::kTargetAnchor && target_class) {
        const bool ta = predicted_classes[g.node_ids[a]] == *target_class;
        const bool tb = predicted_classes[g.node_ids[b]] == *target_class;
        connect = ta != tb;
      }
      g.adjacency[a * n + b] = connect ? 1 : 0;
    }
  }
  return g;
}

nlohmann::json GraphToJson(const SceneGraph& g, const std::vector<int>& object_ids,
                           const std::vector<std::string>& matched_class_names) {
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (size_t v : g.node_ids) nodes.push_back(object_ids.at(v));
  for (const auto& [a, b] : g.Edges())
    edges.push_back({object_ids.at(g.node_ids[a]), object_ids.at(g.node_ids[b])});
  return {{"nodes", nodes}, {"edges", edges}, {"matched_classes", matched_class_names}};
}

GraphAttention::GraphAttention(ParameterSet& params, const std::string& name,
                               const GraphAttentionConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  LSVG_CHECK(cfg.heads > 0 && cfg.d_model % cfg.heads == 0,
             "graph_attention: d_model must be divisible by heads");
  const size_t dk = cfg.d_model / cfg.heads;
  w_ = Linear::Create(params, name + ".w", cfg.d_model, cfg.d_model, false, rng);
  a_dst_ = params.CreateUniform(name + ".a_dst", {dk, cfg.heads}, dk, rng);
  a_src_ = params.CreateUniform(name + ".a_src", {dk, cfg.heads}, dk, rng);
}

DiffArray GraphAttention::Messages(const DiffArray& x, std::span<const uint8_t> mask,
                                   std::vector<DiffArray>* alphas) const {
  const size_t n = x.rows();
  LSVG_CHECK(x.cols() == cfg_.d_model, "graph_attention: feature width " +
                                           std::to_string(x.cols()) + " != d_model " +
                                           std::to_string(cfg_.d_model));
  LSVG_CHECK(mask.size() == n * n, "graph_attention: adjacency is not " + std::to_string(n) +
                                       " x " + std::to_string(n));
  const size_t dk = cfg_.d_model / cfg_.heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  DiffArray h = w_.Forward(x);
  std::vector<DiffArray> heads;
  for (size_t k = 0; k < cfg_.heads; ++k) {
    DiffArray hk = ops::SliceCols(h, k * dk, dk);
    DiffArray s_dst = ops::MatMul(hk, ops::SliceCols(a_dst_, k, 1));
    DiffArray s_src = ops::MatMul(hk, ops::SliceCols(a_src_, k, 1));
    DiffArray e = ops::LeakyRelu(ops::PairwiseAdd(s_dst, s_src), kLeakySlope);
    DiffArray alpha = ops::MaskedSoftmaxRows(e, mask);
    if (alphas) alphas->push_back(alpha);
    heads.push_back(ops::Scale(Activate(ops::MatMul(alpha, hk), cfg_.activation), inv_sqrt_dk));
  }
  return cfg_.heads == 1 ? heads[0] : ops::ConcatCols(heads);
}

DiffArray GraphAttention::Forward(const DiffArray& x, std::span<const uint8_t> mask,
                                  std::vector<DiffArray>* alphas) const {
  return ops::Add(x, Messages(x, mask, alphas));
}

}  // namespace lsvg
