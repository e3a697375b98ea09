#ifndef LSVG_LANGUAGE_TEXT_ENCODER_H_
#define LSVG_LANGUAGE_TEXT_ENCODER_H_

#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsvg/numerics/diff_array.h"
#include "lsvg/numerics/mlp.h"
#include "lsvg/numerics/parameters.h"

namespace lsvg {

// Token string <-> id. Id 0 is reserved for unknown tokens.
class TokenVocabulary {
 public:
  static constexpr size_t kUnknown = 0;
  static constexpr const char* kUnknownToken = "<unk>";

  TokenVocabulary();
  // Sorted, de-duplicated tokens from all given token lists.
  static TokenVocabulary Build(const std::vector<std::vector<std::string>>& corpus);
  static TokenVocabulary FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;

  size_t size() const { return tokens_.size(); }
  size_t IdOf(const std::string& token) const;
  std::vector<size_t> Encode(const std::vector<std::string>& tokens) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool operator==(const TokenVocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, size_t> index_;
};

struct TextEncoderConfig {
  size_t d_model = 64;
  size_t heads = 8;
  size_t blocks = 2;
  size_t ffn_multiplier = 2;

  nlohmann::json ToJson() const;
  static TextEncoderConfig FromJson(const nlohmann::json& j);
};

struct TextEncoding {
  DiffArray token_embs;    // [T x d]
  DiffArray sentence_emb;  // [1 x d]
};

// [T x d] sinusoidal position table.
DiffArray SinusoidalPositions(size_t length, size_t d);

// Token embeddings + positions, pre-norm self-attention blocks, final norm.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(ParameterSet& params, const std::string& name, size_t vocab_size,
              const TextEncoderConfig& cfg, std::mt19937_64& rng);

  // Throws on an empty sequence or out-of-range ids.
  TextEncoding Encode(const std::vector<size_t>& ids) const;
  const TextEncoderConfig& config() const { return cfg_; }

 private:
  struct Block {
    DiffArray ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    Linear wq, wk, wv, wo;
    Mlp ffn;
  };

  TextEncoderConfig cfg_;
  DiffArray embedding_;
  std::vector<Block> blocks_;
  DiffArray final_gain_, final_bias_;
};

}  // namespace lsvg

#endif  // LSVG_LANGUAGE_TEXT_ENCODER_H_
