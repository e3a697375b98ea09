#include "lsvg/language/text_encoder.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "lsvg/common/error.h"
#include "lsvg/numerics/attention.h"
#include "lsvg/numerics/ops.h"

namespace lsvg {

TokenVocabulary::TokenVocabulary() {
  tokens_.push_back(kUnknownToken);
  index_[kUnknownToken] = kUnknown;
}

TokenVocabulary TokenVocabulary::Build(
    const std::vector<std::vector<std::string>>& corpus) {
  std::set<std::string> all;
  for (const auto& sentence : corpus) all.insert(sentence.begin(), sentence.end());
  all.erase(kUnknownToken);
  TokenVocabulary v;
  for (const auto& t : all) {
    v.index_[t] = v.tokens_.size();
    v.tokens_.push_back(t);
  }
  return v;
}

TokenVocabulary TokenVocabulary::FromJson(const nlohmann::json& j) {
  LSVG_VALIDATE(j.is_array() && !j.empty() && j[0] == kUnknownToken,
                "token vocabulary must be an array starting with <unk>");
  TokenVocabulary v;
  for (size_t i = 1; i < j.size(); ++i) {
    LSVG_VALIDATE(j[i].is_string(), "token vocabulary entry " + std::to_string(i) +
                                        " is not a string");
    const auto t = j[i].get<std::string>();
    LSVG_VALIDATE(v.index_.emplace(t, v.tokens_.size()).second,
                  "duplicate token '" + t + "'");
    v.tokens_.push_back(t);
  }
  return v;
}

nlohmann::json TokenVocabulary::ToJson() const { return tokens_; }

size_t TokenVocabulary::IdOf(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnknown : it->second;
}

std::vector<size_t> TokenVocabulary::Encode(const std::vector<std::string>& tokens) const {
  std::vector<size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(IdOf(t));
  return ids;
}

nlohmann::json TextEncoderConfig::ToJson() const {
  return {{"d_model", d_model}, {"heads", heads}, {"blocks", blocks},
          {"ffn_multiplier", ffn_multiplier}};
}

TextEncoderConfig TextEncoderConfig::FromJson(const nlohmann::json& j) {
  TextEncoderConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.blocks = j.value("blocks", c.blocks);
  c.ffn_multiplier = j.value("ffn_multiplier", c.ffn_multiplier);
  return c;
}

DiffArray SinusoidalPositions(size_t length, size_t d) {
  std::vector<double> v(length * d);
  for (size_t p = 0; p < length; ++p) {
    for (size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / d);
      v[p * d + i] = (i % 2 == 0) ? std::sin(p * freq) : std::cos(p * freq);
    }
  }
  return DiffArray::Constant({length, d}, std::move(v));
}

TextEncoder::TextEncoder(ParameterSet& params, const std::string& name,
                         size_t vocab_size, const TextEncoderConfig& cfg,
                         std::mt19937_64& rng)
    : cfg_(cfg) {
  const size_t d = cfg.d_model;
  LSVG_CHECK(d > 0 && cfg.heads > 0 && d % cfg.heads == 0,
             "text encoder: d_model must be divisible by heads");
  LSVG_CHECK(vocab_size > 0, "text encoder: empty vocabulary");
  embedding_ = params.CreateUniform(name + ".embedding", {vocab_size, d}, d, rng);
  for (size_t b = 0; b < cfg.blocks; ++b) {
    const std::string p = name + ".block" + std::to_string(b);
    Block blk;
    blk.ln1_gain = params.CreateConstant(p + ".ln1.gain", {1, d}, 1.0);
    blk.ln1_bias = params.CreateConstant(p + ".ln1.bias", {1, d}, 0.0);
    blk.ln2_gain = params.CreateConstant(p + ".ln2.gain", {1, d}, 1.0);
    blk.ln2_bias = params.CreateConstant(p + ".ln2.bias", {1, d}, 0.0);
    blk.wq = Linear::Create(params, p + ".wq", d, d, true, rng);
    blk.wk = Linear::Create(params, p + ".wk", d, d, true, rng);
    blk.wv = Linear::Create(params, p + ".wv", d, d, true, rng);
    blk.wo = Linear::Create(params, p + ".wo", d, d, true, rng);
    blk.ffn = Mlp(params, p + ".ffn",
                  MlpSpec{d, {cfg.ffn_multiplier * d, d}, Activation::kRelu, true, false},
                  rng);
    blocks_.push_back(std::move(blk));
  }
  final_gain_ = params.CreateConstant(name + ".final_ln.gain", {1, d}, 1.0);
  final_bias_ = params.CreateConstant(name + ".final_ln.bias", {1, d}, 0.0);
}

TextEncoding TextEncoder::Encode(const std::vector<size_t>& ids) const {
  LSVG_CHECK(!ids.empty(), "encode_text: empty token sequence");
  for (size_t id : ids)
    LSVG_CHECK(id < embedding_.rows(), "encode_text: token id out of range");
  DiffArray x = ops::Add(ops::GatherRows(embedding_, ids),
                         SinusoidalPositions(ids.size(), cfg_.d_model));
  for (const auto& blk : blocks_) {
    DiffArray h = ops::LayerNormRows(x, blk.ln1_gain, blk.ln1_bias);
    DiffArray att = MultiHeadAttention(blk.wq.Forward(h), blk.wk.Forward(h),
                                       blk.wv.Forward(h), cfg_.heads);
    x = ops::Add(x, blk.wo.Forward(att));
    h = ops::LayerNormRows(x, blk.ln2_gain, blk.ln2_bias);
    x = ops::Add(x, blk.ffn.Forward(h));
  }
  TextEncoding out;
  out.token_embs = ops::LayerNormRows(x, final_gain_, final_bias_);
  out.sentence_emb = ops::MeanRows(out.token_embs);
  return out;
}

}  // namespace lsvg
