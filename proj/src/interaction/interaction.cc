#include "lsvg/interaction/interaction.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lsvg/common/error.h"
#include "lsvg/numerics/attention.h"
#include "lsvg/numerics/ops.h"

namespace lsvg {

std::vector<double> InteractionConfig::DefaultAngles() {
  constexpr double kHalfPi = std::numbers::pi / 2;
  return {0.0, kHalfPi, 2 * kHalfPi, 3 * kHalfPi};
}

void InteractionConfig::Validate() const {
  LSVG_VALIDATE(d_model > 0 && heads > 0 && d_model % heads == 0,
                "interaction: d_model must be divisible by heads");
  LSVG_VALIDATE(!angles.empty(), "interaction: angle list must be non-empty");
}

nlohmann::json InteractionConfig::ToJson() const {
  return {{"d_model", d_model}, {"heads", heads}, {"iterations", iterations},
          {"angles", angles}, {"use_graph", use_graph},
          {"graph_activation", graph_activation == Activation::kRelu        ? "relu"
                               : graph_activation == Activation::kLeakyRelu ? "leaky_relu"
                                                                            : "none"}};
}

InteractionConfig InteractionConfig::FromJson(const nlohmann::json& j) {
  InteractionConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.iterations = j.value("iterations", c.iterations);
  c.angles = j.value("angles", c.angles);
  c.use_graph = j.value("use_graph", c.use_graph);
  const std::string act = j.value("graph_activation", std::string("leaky_relu"));
  LSVG_VALIDATE(act == "relu" || act == "leaky_relu" || act == "none",
                "interaction: unknown graph_activation '" + act + "'");
  c.graph_activation = act == "relu"         ? Activation::kRelu
                       : act == "leaky_relu" ? Activation::kLeakyRelu
                                             : Activation::kNone;
  c.Validate();
  return c;
}

std::vector<double> BoxInputs(const std::vector<Box3D>& boxes, double angle) {
  const size_t n = boxes.size();
  Vec3 centroid;
  for (const auto& b : boxes) {
    centroid.x += b.center.x / n;
    centroid.y += b.center.y / n;
    centroid.z += b.center.z / n;
  }
  std::vector<Box3D> rotated;
  rotated.reserve(n);
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const auto& b : boxes) {
    Box3D c = b;
    c.center = {b.center.x - centroid.x, b.center.y - centroid.y, b.center.z - centroid.z};
    c = RotateBox(c, angle);
    lo = {std::min(lo.x, c.center.x), std::min(lo.y, c.center.y), std::min(lo.z, c.center.z)};
    hi = {std::max(hi.x, c.center.x), std::max(hi.y, c.center.y), std::max(hi.z, c.center.z)};
    rotated.push_back(c);
  }
  const Vec3 extent{(hi.x - lo.x) / 2, (hi.y - lo.y) / 2, (hi.z - lo.z) / 2};
  std::vector<double> rows;
  rows.reserve(n * kBoxInputWidth);
  for (const auto& c : rotated) {
    rows.insert(rows.end(), {c.center.x, c.center.y, c.center.z, c.size.x, c.size.y, c.size.z,
                             std::sin(c.yaw), std::cos(c.yaw), extent.x, extent.y, extent.z});
  }
  return rows;
}

BoxEncoder::BoxEncoder(ParameterSet& params, const std::string& name, size_t d_model,
                       std::mt19937_64& rng)
    : mlp_(params, name, MlpSpec{kBoxInputWidth, {d_model, d_model}, Activation::kRelu, true, false},
           rng) {}

std::vector<DiffArray> BoxEncoder::EncodeViews(const std::vector<Box3D>& boxes,
                                               const std::vector<double>& angles) const {
  LSVG_CHECK(!boxes.empty(), "encode_boxes_multiview: no boxes");
  std::vector<DiffArray> out;
  for (double a : angles)
    out.push_back(mlp_.Forward(DiffArray::Constant({boxes.size(), kBoxInputWidth}, BoxInputs(boxes, a))));
  return out;
}

DiffArray BoxEncoder::EncodeMean(const std::vector<Box3D>& boxes,
                                 const std::vector<double>& angles) const {
  auto views = EncodeViews(boxes, angles);
  DiffArray sum = views[0];
  for (size_t v = 1; v < views.size(); ++v) sum = ops::Add(sum, views[v]);
  return ops::Scale(sum, 1.0 / views.size());
}

CrossAttention::CrossAttention(ParameterSet& params, const std::string& name, size_t d_model,
                               size_t heads, std::mt19937_64& rng)
    : heads_(heads),
      ln_gain_(params.CreateConstant(name + ".ln.gain", {1, d_model}, 1.0)),
      ln_bias_(params.CreateConstant(name + ".ln.bias", {1, d_model}, 0.0)),
      wq_(Linear::Create(params, name + ".wq", d_model, d_model, true, rng)),
      wk_(Linear::Create(params, name + ".wk", d_model, d_model, true, rng)),
      wv_(Linear::Create(params, name + ".wv", d_model, d_model, true, rng)) {}

DiffArray CrossAttention::Forward(const DiffArray& x, const DiffArray& tokens,
                                  std::vector<DiffArray>* weights) const {
  LSVG_CHECK(tokens.rows() > 0, "cross_attention: zero text tokens");
  DiffArray q = wq_.Forward(ops::LayerNormRows(x, ln_gain_, ln_bias_));
  return ops::Add(x, MultiHeadAttention(q, wk_.Forward(tokens), wv_.Forward(tokens), heads_, weights));
}

std::vector<uint8_t> StackedMask(const SceneGraph& graph, size_t objects, size_t views) {
  const size_t total = objects * views;
  std::vector<uint8_t> mask(total * total, 0);
  for (size_t v = 0; v < views; ++v) {
    const size_t base = v * objects;
    for (size_t a = 0; a < graph.size(); ++a) {
      for (size_t b = 0; b < graph.size(); ++b) {
        if (!graph.edge(a, b)) continue;
        mask[(base + graph.node_ids[a]) * total + base + graph.node_ids[b]] = 1;
      }
    }
  }
  return mask;
}

nlohmann::json GroundingResult::ToJson(const std::vector<int>& object_ids) const {
  nlohmann::json s = nlohmann::json::object();
  for (size_t i = 0; i < object_ids.size(); ++i)
    s[std::to_string(object_ids[i])] = scores.at(0, i);
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : top_pairs)
    pairs.push_back({{"from", p.from_id}, {"to", p.to_id}, {"weight", p.weight}});
  return {{"predicted_id", predicted_id}, {"scores", s}, {"top_attention_pairs", pairs}};
}

InteractionModule::InteractionModule(ParameterSet& params, const std::string& name,
                                     const InteractionConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg_.Validate();
  const size_t d = cfg_.d_model;
  boxes_ = BoxEncoder(params, name + ".box", d, rng);
  for (size_t it = 0; it < cfg_.iterations; ++it) {
    const std::string p = name + ".iter" + std::to_string(it);
    Iteration iter;
    iter.cross = CrossAttention(params, p + ".cross", d, cfg_.heads, rng);
    if (cfg_.use_graph) {
      iter.ln_gain = params.CreateConstant(p + ".graph_ln.gain", {1, d}, 1.0);
      iter.ln_bias = params.CreateConstant(p + ".graph_ln.bias", {1, d}, 0.0);
      iter.graph = GraphAttention(params, p + ".graph", {d, cfg_.heads, cfg_.graph_activation}, rng);
    }
    iterations_.push_back(std::move(iter));
  }
  head_ = Mlp(params, name + ".ground", MlpSpec{2 * d, {d, 1}, Activation::kRelu, true, false}, rng);
}

InteractionOutput InteractionModule::Interact(const DiffArray& f_o, const std::vector<Box3D>& boxes,
                                              const SceneGraph& graph,
                                              const TextEncoding& text) const {
  const size_t n = f_o.rows();
  LSVG_CHECK(n > 0 && boxes.size() == n, "interact: feature/box count mismatch");
  LSVG_CHECK(f_o.cols() == cfg_.d_model, "interact: feature width != d_model");
  for (size_t v : graph.node_ids) LSVG_CHECK(v < n, "interact: graph node out of range");
  const size_t views = cfg_.angles.size();
  const auto geometry = boxes_.EncodeViews(boxes, cfg_.angles);
  const DiffArray geo = ops::ConcatRows(geometry);
  std::vector<DiffArray> tiled(views, f_o);
  InteractionOutput out;
  out.views = views;
  out.objects = n;
  DiffArray x = ops::Add(ops::ConcatRows(tiled), geo);
  const bool run_graph = cfg_.use_graph && !graph.Edges().empty();
  const auto mask = run_graph ? StackedMask(graph, n, views) : std::vector<uint8_t>{};
  for (const auto& iter : iterations_) {
    x = ops::Add(iter.cross.Forward(x, text.token_embs), geo);
    if (!run_graph) continue;
    out.last_graph_alphas.clear();
    x = ops::Add(x, iter.graph.Messages(ops::LayerNormRows(x, iter.ln_gain, iter.ln_bias), mask,
                                        &out.last_graph_alphas));
  }
  out.features = x;
  return out;
}

DiffArray InteractionModule::Scores(const InteractionOutput& out,
                                    const DiffArray& sentence_emb) const {
  const size_t rows = out.views * out.objects;
  LSVG_CHECK(out.objects > 0, "ground: no objects");
  LSVG_CHECK(sentence_emb.rows() == 1, "ground: sentence embedding must be one row");
  std::vector<size_t> zeros(rows, 0);
  DiffArray per_view = head_.Forward(
      ops::ConcatCols({out.features, ops::GatherRows(sentence_emb, zeros)}));  // [rows x 1]
  std::vector<double> avg(out.objects * rows, 0.0);
  for (size_t v = 0; v < out.views; ++v)
    for (size_t i = 0; i < out.objects; ++i)
      avg[i * rows + v * out.objects + i] = 1.0 / out.views;
  return ops::Transpose(ops::MatMul(DiffArray::Constant({out.objects, rows}, std::move(avg)), per_view));
}

GroundingResult InteractionModule::Ground(const DiffArray& scores, const InteractionOutput& out,
                                          const std::vector<int>& object_ids, size_t top_k) {
  LSVG_CHECK(scores.rows() == 1 && scores.cols() > 0, "ground: no objects");
  LSVG_CHECK(object_ids.size() == scores.cols(), "ground: id count mismatch");
  GroundingResult r;
  r.scores = scores;
  for (size_t i = 1; i < scores.cols(); ++i)
    if (scores.at(0, i) > scores.at(0, r.predicted_index)) r.predicted_index = static_cast<int>(i);
  r.predicted_id = object_ids[r.predicted_index];
  if (!out.last_graph_alphas.empty()) {
    // Average over heads and views.
    const size_t n = out.objects, total = out.views * n;
    std::vector<double> w(n * n, 0.0);
    for (const auto& a : out.last_graph_alphas)
      for (size_t v = 0; v < out.views; ++v)
        for (size_t i = 0; i < n; ++i)
          for (size_t j = 0; j < n; ++j)
            w[i * n + j] += a.values()[(v * n + i) * total + v * n + j] /
                            (out.views * out.last_graph_alphas.size());
    std::vector<AttentionPair> pairs;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        if (w[i * n + j] > 0) pairs.push_back({object_ids[i], object_ids[j], w[i * n + j]});
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const AttentionPair& a, const AttentionPair& b) { return a.weight > b.weight; });
    if (pairs.size() > top_k) pairs.resize(top_k);
    r.top_pairs = std::move(pairs);
  }
  return r;
}

}  // namespace lsvg
