#ifndef LSVG_PIPELINE_GENERATOR_H_
#define LSVG_PIPELINE_GENERATOR_H_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lsvg/geometry/geometry.h"
#include "lsvg/language/text.h"
#include "lsvg/pipeline/dataset.h"

namespace lsvg {

struct ClassPrior {
  std::string name;
  Vec3 size;                    // mean extents in meters
  std::array<double, 3> color;  // mean rgb
  std::vector<std::string> synonyms;
};

// Ten indoor classes; the first K are used for a K-class dataset.
const std::vector<ClassPrior>& ClassCatalog();
ClassVocabulary CatalogVocabulary(size_t num_classes);

enum class Relation { kClosest, kFarthest, kBetween, kLeft, kRight };
inline constexpr std::array<Relation, 5> kAllRelations = {
    Relation::kClosest, Relation::kFarthest, Relation::kBetween, Relation::kLeft, Relation::kRight};
std::string RelationName(Relation r);
bool IsViewDependent(Relation r);

struct GenConfig {
  size_t num_scenes = 500;
  size_t num_classes = 5;
  size_t min_objects = 6;
  size_t max_objects = 14;
  size_t utterances_per_scene = 4;
  size_t points_per_object = 128;
  // Required gap between the best and second-best candidate, meters.
  double margin = 0.3;
  uint64_t seed = 7;
};

struct RelationQuery {
  Relation relation = Relation::kClosest;
  int target_class = 0;
  std::vector<int> anchor_ids;  // one anchor, two for kBetween
};

// Geometric verifier. Distances are measured between box centers on the
// floor plane. Left/right are judged by an observer standing at the scene
// centroid and facing the anchor. Returns the unique answer, or nullopt when
// the best candidate does not beat the runner-up by `margin`.
std::optional<int> ResolveRelation(const Scene& scene, const RelationQuery& q, double margin);

// Procedural scenes with non-overlapping boxes, class-specific point clouds,
// twelve synthetic views, and template utterances each verified to have a
// unique answer. Byte-identical for equal configs.
Dataset GenerateScenes(const GenConfig& cfg);

struct PlacedObject {
  int class_id = 0;
  double x = 0.0, y = 0.0, yaw = 0.0;
};

// Hand-placed scene: catalog sizes and colors, floor positions as given,
// object ids in order, views computed.
Scene ComposeScene(const std::string& id, const std::vector<PlacedObject>& objects,
                   size_t points_per_object, uint64_t seed);

}  // namespace lsvg

#endif  // LSVG_PIPELINE_GENERATOR_H_
