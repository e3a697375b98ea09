#ifndef LSVG_PIPELINE_TRAINING_H_
#define LSVG_PIPELINE_TRAINING_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsvg/alignment/teacher.h"
#include "lsvg/pipeline/dataset.h"
#include "lsvg/pipeline/model.h"

namespace lsvg {

struct TrainConfig {
  double lambda1 = 0.5;
  double lambda2 = 0.1;
  double lambda3 = 0.5;
  size_t batch_size = 16;
  double lr = 5e-4;
  double decay = 0.65;
  int decay_first = 30;
  int decay_last = 80;
  int decay_every = 10;
  int epochs = 20;
  uint64_t seed = 7;
  double hybrid_gt_prob = 0.5;
  double jitter_sigma = 0.05;
  double drop_fraction = 0.1;
  bool use_graph = true;
  std::string profile = "desk";  // desk | paper

  void Validate() const;
  nlohmann::json ToJson() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig FromJson(const nlohmann::json& j);
  static TrainConfig Load(const std::string& path);
};

// lr * decay^(number of milestones m in {first, first+every, ..., last} with
// m < epoch). Epochs count from 1.
double LrAt(const TrainConfig& cfg, int epoch);

// Segmentation stand-in: box center jittered by N(0, sigma) per axis and the
// cloud shifted with it, then `drop_fraction` of the points removed (at
// least one point kept).
ObjectProposal PerturbObject(const ObjectProposal& o, double sigma, double drop_fraction,
                             std::mt19937_64& rng);

// Per object: GT with probability p, else the perturbed twin. `from_gt`
// (optional) records the choice.
std::vector<ObjectProposal> HybridSample(const std::vector<ObjectProposal>& gt,
                                         const std::vector<ObjectProposal>& perturbed, double p,
                                         std::mt19937_64& rng, std::vector<bool>* from_gt = nullptr);

// Builds the model config for a training set: profile dimensions, token
// vocabulary from the training utterances, graph switch, seed.
ModelConfig MakeModelConfig(const TrainConfig& cfg, const Dataset& train,
                            const ClassVocabulary& vocab);

// Loss of one minibatch of (scene, sample indices) groups. Training graphs
// use GT classes. `rng` drives hybrid sampling, view choice and resampling.
LossTerms BatchLoss(const Model& model, const TrainConfig& cfg, const Dataset& data,
                    const std::vector<std::pair<size_t, std::vector<size_t>>>& groups,
                    const TeacherStore* teacher, std::mt19937_64& rng);

struct TrainStats {
  int epoch = 0;
  int64_t step = 0;
  double lr = 0;
  double loss = 0;
  double l_ot = 0, l_ref = 0, l_t = 0, l_of = 0;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::string rng_state;
  std::vector<double> step_losses;
};

// Deterministic single-threaded training. Throws Error with a snapshot of
// the offending step when the loss goes non-finite.
TrainResult Train(const TrainConfig& cfg, const Dataset& train, const ClassVocabulary& vocab,
                  const TeacherStore* teacher,
                  const std::function<void(const TrainStats&)>& on_epoch = nullptr);
// Same, with an explicit model config instead of the profile's.
TrainResult Train(const TrainConfig& cfg, const ModelConfig& model_cfg, const Dataset& train,
                  const TeacherStore* teacher,
                  const std::function<void(const TrainStats&)>& on_epoch = nullptr);

struct Bucket {
  size_t correct = 0;
  size_t count = 0;
  double accuracy() const { return count ? static_cast<double>(correct) / count : 0.0; }
};

struct EvalReport {
  Bucket overall, easy, hard, view_dep, view_indep;
  double chance = 0;
  Bucket object_class;  // predicted vs GT class over every object
  Bucket text_class;    // text head vs target class
  nlohmann::json ToJson() const;
};

// GT boxes as candidates, max-coverage teacher views, graphs from predicted
// classes. Throws ValidationError when the dataset's classes are not the
// checkpoint's.
EvalReport Evaluate(const Model& model, const Dataset& data, const ClassVocabulary& data_vocab,
                    const TeacherStore* teacher);

}  // namespace lsvg

#endif  // LSVG_PIPELINE_TRAINING_H_
