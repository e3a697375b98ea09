#ifndef LSVG_PIPELINE_MODEL_H_
#define LSVG_PIPELINE_MODEL_H_

#include <cstdint>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsvg/alignment/contrastive.h"
#include "lsvg/alignment/teacher.h"
#include "lsvg/encoder/point_encoder.h"
#include "lsvg/interaction/interaction.h"
#include "lsvg/language/text.h"
#include "lsvg/language/text_encoder.h"
#include "lsvg/numerics/parameters.h"
#include "lsvg/scenegraph/scene_graph.h"

namespace lsvg {

struct ModelConfig {
  ClassVocabulary vocab;
  TokenVocabulary tokens;
  EncoderConfig encoder = EncoderConfig::Desk();
  TextEncoderConfig text;
  InteractionConfig interaction;
  uint64_t seed = 7;

  // d_model 64, SA widths (32, 64), 128 points per object.
  static ModelConfig Desk(ClassVocabulary vocab, TokenVocabulary tokens);
  void Validate() const;
  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);
};

// Every sample's utterance tokens plus all class prompts.
TokenVocabulary BuildTokenVocabulary(const std::vector<std::string>& utterances,
                                     const ClassVocabulary& vocab);

struct LossTerms {
  DiffArray l_ot, l_ref, l_t, l_of;
  DiffArray total;
};

// lambda1 * l_ot + l_ref + lambda2 * l_t + lambda3 * l_of
double TotalLoss(double l_ot, double l_ref, double l_t, double l_of, double lambda1,
                 double lambda2, double lambda3);
DiffArray TotalLoss(const DiffArray& l_ot, const DiffArray& l_ref, const DiffArray& l_t,
                    const DiffArray& l_of, double lambda1, double lambda2, double lambda3);

// One scene ready for the network: the object set to encode (GT or
// perturbed), and one frozen teacher row per object.
struct SceneBatch {
  std::string scene_id;
  std::vector<ObjectProposal> objects;
  DiffArray teacher;  // [n x d_teacher]
  std::vector<PreparedObject> prepared;
};

struct UtteranceInput {
  std::vector<size_t> token_ids;
  std::set<int> matched_classes;
  int target_index = 0;  // into SceneBatch::objects
  int target_class = 0;
};

struct SceneForward {
  ObjectEncodings enc;
  DiffArray projected_objects;  // F_P in teacher space
  std::vector<int> predicted_classes;
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  UtteranceInput PrepareUtterance(const std::string& text) const;
  // [C x d] sentence embeddings of "The object is <class>" for every class.
  DiffArray EncodePrompts() const;
  SceneForward EncodeScene(const SceneBatch& batch, const DiffArray& prompt_embs) const;

  // Grounding for one utterance. `graph_classes` decide graph membership.
  struct Grounding {
    TextEncoding text;
    SceneGraph graph;
    InteractionOutput interaction;
    DiffArray scores;  // [1 x n]
  };
  Grounding GroundUtterance(const SceneForward& scene, const SceneBatch& batch,
                            const UtteranceInput& u, const std::vector<int>& graph_classes) const;

  DiffArray ObjectLogits(const DiffArray& f_o) const { return object_head_.Forward(f_o); }
  DiffArray TextLogits(const DiffArray& sentence) const { return text_head_.Forward(sentence); }
  const AlignmentHead& align() const { return align_; }

 private:
  ModelConfig cfg_;
  ParameterSet params_;
  TextEncoder text_;
  PointEncoder encoder_;
  AlignmentHead align_;
  ClassHead object_head_;
  ClassHead text_head_;
  InteractionModule interaction_;
};

// Teacher row for an object: the requested view, else any stored view of the
// object, else zeros.
std::vector<double> TeacherRow(const TeacherStore* store, size_t dim, const std::string& scene,
                               int object, int view);

// Max-coverage views, GT geometry, deterministic resampling seeds.
SceneBatch MakeEvalBatch(const Scene& scene, const EncoderConfig& cfg,
                         const TeacherStore* teacher);

// Versioned container: "LSVG1" magic, config JSON, named little-endian f32
// parameter blobs, RNG state.
struct Checkpoint {
  nlohmann::json config;  // {"model": ..., "train": ..., "config_hash": ...}
  std::string rng_state;
};
void SaveCheckpoint(const std::string& path, const Model& model, const nlohmann::json& train_cfg,
                    const std::string& rng_state);
// Rebuilds the model from the stored config and loads the parameters.
std::unique_ptr<Model> LoadCheckpoint(const std::string& path, Checkpoint* meta = nullptr);
// FNV-1a 64 of the file bytes, as 16 hex digits.
std::string FileHash(const std::string& path);

}  // namespace lsvg

#endif  // LSVG_PIPELINE_MODEL_H_
