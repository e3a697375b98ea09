#ifndef LSVG_PIPELINE_DATASET_H_
#define LSVG_PIPELINE_DATASET_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "lsvg/geometry/geometry.h"
#include "lsvg/language/text.h"

namespace lsvg {

struct SampleTags {
  bool hard = false;            // more than kEasyMaxDistractors distractors
  bool view_dependent = false;  // left/right relations
  std::string relation;
};

struct GroundingSample {
  size_t scene_index = 0;
  std::string utterance;
  int target_id = 0;
  SampleTags tags;
};

struct Dataset {
  std::vector<Scene> scenes;
  std::vector<GroundingSample> samples;

  const Scene& scene_of(const GroundingSample& s) const { return scenes.at(s.scene_index); }

  // One sample per line. A line whose scene_id was already defined may omit
  // "objects" and "views". Class names must belong to `vocab`; difficulty
  // is recomputed from the scene. Throws ValidationError with the line number.
  static Dataset LoadJsonl(const std::string& path, const ClassVocabulary& vocab);
  static Dataset ParseJsonl(std::istream& in, const ClassVocabulary& vocab,
                            const std::string& source = "<stream>");
  // The first sample of every scene carries the full scene; later samples
  // reference it by scene_id.
  void WriteJsonl(std::ostream& out, const ClassVocabulary& vocab) const;
  void SaveJsonl(const std::string& path, const ClassVocabulary& vocab) const;

  // Samples whose scene index is in [begin, end).
  Dataset SliceScenes(size_t begin, size_t end) const;
};

nlohmann::json SceneToJson(const Scene& scene, const ClassVocabulary& vocab);
Scene SceneFromJson(const nlohmann::json& j, const ClassVocabulary& vocab);

// Mean over samples of 1 / (objects in the sample's scene).
double ChanceAccuracy(const Dataset& d);

}  // namespace lsvg

#endif  // LSVG_PIPELINE_DATASET_H_
