#include "lsvg/pipeline/generator.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "lsvg/common/error.h"

namespace lsvg {
namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;
constexpr int kMaxPlacementTries = 400;
constexpr int kMaxQueryTries = 60;
constexpr int kMaxSceneTries = 50;

double Round4(double v) { return std::round(v * 1e4) / 1e4; }

double FloorDistance(const Vec3& a, const Vec3& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Picks the extreme candidate by `key` (larger is better) and checks the gap.
std::optional<int> UniqueBest(const std::vector<std::pair<double, int>>& scored, double margin) {
  if (scored.empty()) return std::nullopt;
  auto sorted = scored;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (sorted.size() > 1 && sorted[0].first - sorted[1].first < margin) return std::nullopt;
  return sorted[0].second;
}

std::vector<const ObjectProposal*> OfClass(const Scene& s, int cls) {
  std::vector<const ObjectProposal*> out;
  for (const auto& o : s.objects)
    if (o.class_id && *o.class_id == cls) out.push_back(&o);
  return out;
}

PointCloud SampleSurface(const Box3D& box, const std::array<double, 3>& color, size_t n,
                         std::mt19937_64& rng) {
  // Five faces (no bottom), area weighted.
  const double sx = box.size.x, sy = box.size.y, sz = box.size.z;
  const std::array<double, 5> area = {sx * sy, sx * sz, sx * sz, sy * sz, sy * sz};
  std::discrete_distribution<int> face(area.begin(), area.end());
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::normal_distribution<double> tint(0.0, 0.02);
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  PointCloud pc;
  for (size_t i = 0; i < n; ++i) {
    double x = u(rng) * sx, y = u(rng) * sy, z = u(rng) * sz;
    switch (face(rng)) {
      case 0: z = sz / 2; break;
      case 1: y = -sy / 2; break;
      case 2: y = sy / 2; break;
      case 3: x = -sx / 2; break;
      default: x = sx / 2; break;
    }
    Point p;
    p.xyz = {Round4(box.center.x + c * x - s * y), Round4(box.center.y + s * x + c * y),
             Round4(box.center.z + z)};
    for (int k = 0; k < 3; ++k) p.rgb[k] = Round4(std::clamp(color[k] + tint(rng), 0.0, 1.0));
    pc.points.push_back(p);
  }
  return pc;
}

std::string Surface(const ClassPrior& c, std::mt19937_64& rng) {
  if (c.synonyms.empty() || std::bernoulli_distribution(0.7)(rng)) return c.name;
  return c.synonyms[std::uniform_int_distribution<size_t>(0, c.synonyms.size() - 1)(rng)];
}

std::string Phrase(Relation r, const std::string& t, const std::string& a, const std::string& b,
                   std::mt19937_64& rng) {
  auto pick = [&rng](std::initializer_list<std::string> options) {
    std::vector<std::string> v(options);
    return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
  };
  switch (r) {
    case Relation::kClosest:
      return pick({"the " + t + " closest to the " + a, "the " + t + " nearest to the " + a,
                   "find the " + t + " that is closest to the " + a});
    case Relation::kFarthest:
      return pick({"the " + t + " farthest from the " + a,
                   "the " + t + " that is farthest from the " + a,
                   "find the " + t + " farthest away from the " + a});
    case Relation::kBetween:
      return pick({"the " + t + " between the " + a + " and the " + b,
                   "the " + t + " that is between the " + a + " and the " + b});
    case Relation::kLeft:
      return pick({"facing the " + a + ", the " + t + " on the left",
                   "the " + t + " on the left of the " + a + " when facing it"});
    case Relation::kRight:
      return pick({"facing the " + a + ", the " + t + " on the right",
                   "the " + t + " on the right of the " + a + " when facing it"});
  }
  return {};
}

std::optional<Scene> PlaceScene(const std::string& id, const GenConfig& cfg, std::mt19937_64& rng) {
  const auto& catalog = ClassCatalog();
  const size_t n = std::uniform_int_distribution<size_t>(cfg.min_objects, cfg.max_objects)(rng);
  // One crowded class populates the hard bucket; the rest are drawn uniformly.
  std::vector<int> classes;
  const int crowded = std::uniform_int_distribution<int>(0, cfg.num_classes - 1)(rng);
  const size_t crowd = std::uniform_int_distribution<size_t>(2, std::min<size_t>(7, n - 2))(rng);
  classes.assign(crowd, crowded);
  std::uniform_int_distribution<int> any(0, cfg.num_classes - 1);
  while (classes.size() < n) {
    const int c = any(rng);
    if (c != crowded) classes.push_back(c);
  }
  std::shuffle(classes.begin(), classes.end(), rng);

  const double half = (2.2 * std::sqrt(static_cast<double>(n)) + 1.0) / 2;
  std::uniform_real_distribution<double> pos(-half, half), jitter(0.85, 1.15), yaw(0.0, kTwoPi);
  std::normal_distribution<double> tint(0.0, 0.05);
  Scene s;
  s.id = id;
  std::vector<std::pair<Vec3, double>> footprints;
  for (size_t i = 0; i < n; ++i) {
    const ClassPrior& prior = catalog[classes[i]];
    ObjectProposal o;
    o.id = static_cast<int>(i);
    o.class_id = classes[i];
    o.box.size = {Round4(prior.size.x * jitter(rng)), Round4(prior.size.y * jitter(rng)),
                  Round4(prior.size.z * jitter(rng))};
    o.box.yaw = Round4(yaw(rng));
    if (o.box.yaw >= kTwoPi) o.box.yaw = 0.0;
    const double radius = 0.5 * std::hypot(o.box.size.x, o.box.size.y) + 0.1;
    bool placed = false;
    for (int t = 0; t < kMaxPlacementTries && !placed; ++t) {
      const Vec3 c{Round4(pos(rng)), Round4(pos(rng)), Round4(o.box.size.z / 2)};
      placed = true;
      for (const auto& [fc, fr] : footprints)
        if (FloorDistance(c, fc) < radius + fr) placed = false;
      if (placed) o.box.center = c;
    }
    if (!placed) return std::nullopt;
    footprints.emplace_back(o.box.center, radius);
    std::array<double, 3> color = prior.color;
    for (double& ch : color) ch = std::clamp(ch + tint(rng), 0.0, 1.0);
    o.cloud = SampleSurface(o.box, color, cfg.points_per_object, rng);
    s.objects.push_back(std::move(o));
  }
  s.views = ComputeViews(s);
  return s;
}

}  // namespace

const std::vector<ClassPrior>& ClassCatalog() {
  static const auto* catalog = new std::vector<ClassPrior>{
      {"chair", {0.5, 0.5, 0.9}, {0.55, 0.35, 0.2}, {}},
      {"table", {1.4, 0.8, 0.75}, {0.85, 0.75, 0.55}, {"desk"}},
      {"trash can", {0.35, 0.35, 0.5}, {0.3, 0.3, 0.3}, {"bin", "trash bin"}},
      {"shelf", {1.0, 0.35, 1.8}, {0.9, 0.9, 0.85}, {"bookshelf"}},
      {"sofa", {2.0, 0.9, 0.8}, {0.2, 0.3, 0.65}, {"couch"}},
      {"lamp", {0.3, 0.3, 1.5}, {0.95, 0.85, 0.3}, {}},
      {"cabinet", {0.8, 0.5, 1.0}, {0.6, 0.2, 0.2}, {"cupboard"}},
      {"bed", {2.0, 1.5, 0.5}, {0.7, 0.7, 0.9}, {}},
      {"door", {0.9, 0.1, 2.0}, {0.5, 0.3, 0.1}, {}},
      {"plant", {0.4, 0.4, 0.8}, {0.2, 0.6, 0.2}, {}}};
  return *catalog;
}

ClassVocabulary CatalogVocabulary(size_t num_classes) {
  const auto& catalog = ClassCatalog();
  LSVG_VALIDATE(num_classes >= 1 && num_classes <= catalog.size(),
                "number of classes must be in [1, " + std::to_string(catalog.size()) + "]");
  std::vector<std::string> names;
  std::map<std::string, std::string> synonyms;
  for (size_t c = 0; c < num_classes; ++c) {
    names.push_back(catalog[c].name);
    for (const auto& s : catalog[c].synonyms) synonyms[s] = catalog[c].name;
  }
  return ClassVocabulary(std::move(names), std::move(synonyms));
}

std::string RelationName(Relation r) {
  switch (r) {
    case Relation::kClosest: return "closest";
    case Relation::kFarthest: return "farthest";
    case Relation::kBetween: return "between";
    case Relation::kLeft: return "left";
    case Relation::kRight: return "right";
  }
  return "";
}

bool IsViewDependent(Relation r) { return r == Relation::kLeft || r == Relation::kRight; }

std::optional<int> ResolveRelation(const Scene& scene, const RelationQuery& q, double margin) {
  const auto cands = OfClass(scene, q.target_class);
  if (cands.empty()) return std::nullopt;
  const size_t anchors_needed = q.relation == Relation::kBetween ? 2 : 1;
  LSVG_CHECK(q.anchor_ids.size() == anchors_needed, "relation: wrong anchor count");
  for (int a : q.anchor_ids) {
    const auto& ao = scene.object(a);
    if (ao.class_id && *ao.class_id == q.target_class) return std::nullopt;
  }
  const Vec3 a = scene.object(q.anchor_ids[0]).box.center;
  std::vector<std::pair<double, int>> scored;
  switch (q.relation) {
    case Relation::kClosest:
      for (const auto* c : cands) scored.emplace_back(-FloorDistance(c->box.center, a), c->id);
      return UniqueBest(scored, margin);
    case Relation::kFarthest:
      for (const auto* c : cands) scored.emplace_back(FloorDistance(c->box.center, a), c->id);
      return UniqueBest(scored, margin);
    case Relation::kBetween: {
      const Vec3 b = scene.object(q.anchor_ids[1]).box.center;
      const double ex = b.x - a.x, ey = b.y - a.y, len2 = ex * ex + ey * ey;
      if (len2 < 1e-6) return std::nullopt;
      for (const auto* c : cands) {
        const double t = ((c->box.center.x - a.x) * ex + (c->box.center.y - a.y) * ey) / len2;
        const double px = a.x + t * ex, py = a.y + t * ey;
        const double d = std::hypot(c->box.center.x - px, c->box.center.y - py);
        // Candidates projecting outside the segment are never "between".
        scored.emplace_back(t > 0.0 && t < 1.0 ? -d : -1e6, c->id);
      }
      auto best = UniqueBest(scored, margin);
      if (!best) return std::nullopt;
      for (const auto& [s, id] : scored)
        if (id == *best && s < -1.0) return std::nullopt;
      return best;
    }
    case Relation::kLeft:
    case Relation::kRight: {
      const Vec3 o = scene.Centroid();
      double fx = a.x - o.x, fy = a.y - o.y;
      const double norm = std::hypot(fx, fy);
      if (norm < 0.5) return std::nullopt;
      fx /= norm;
      fy /= norm;
      const double sign = q.relation == Relation::kLeft ? 1.0 : -1.0;
      for (const auto* c : cands) {
        const double lateral = (c->box.center.x - a.x) * -fy + (c->box.center.y - a.y) * fx;
        scored.emplace_back(sign * lateral, c->id);
      }
      auto best = UniqueBest(scored, margin);
      if (!best) return std::nullopt;
      for (const auto& [s, id] : scored)
        if (id == *best && s < margin) return std::nullopt;
      return best;
    }
  }
  return std::nullopt;
}

Dataset GenerateScenes(const GenConfig& cfg) {
  LSVG_VALIDATE(cfg.num_classes >= 2 && cfg.num_classes <= ClassCatalog().size(),
                "gen-scenes: classes must be in [2, " + std::to_string(ClassCatalog().size()) + "]");
  LSVG_VALIDATE(cfg.min_objects >= 4 && cfg.min_objects <= cfg.max_objects,
                "gen-scenes: need 4 <= min_objects <= max_objects");
  LSVG_VALIDATE(cfg.points_per_object > 0 && cfg.utterances_per_scene > 0,
                "gen-scenes: points and utterances per scene must be positive");
  const auto& catalog = ClassCatalog();
  std::mt19937_64 rng(cfg.seed);
  Dataset d;
  for (size_t si = 0; si < cfg.num_scenes; ++si) {
    const std::string id = "scene" + std::to_string(si);
    std::vector<GroundingSample> samples;
    std::optional<Scene> scene;
    for (int attempt = 0; attempt < kMaxSceneTries && samples.empty(); ++attempt) {
      scene = PlaceScene(id, cfg, rng);
      if (!scene) continue;
      std::set<std::tuple<int, int, std::vector<int>>> used;
      size_t rel_cursor = std::uniform_int_distribution<size_t>(0, kAllRelations.size() - 1)(rng);
      for (int t = 0; t < kMaxQueryTries && samples.size() < cfg.utterances_per_scene; ++t) {
        const Relation rel = kAllRelations[rel_cursor % kAllRelations.size()];
        // Anchors must be the only instance of their class.
        std::map<int, std::vector<int>> by_class;
        for (const auto& o : scene->objects) by_class[*o.class_id].push_back(o.id);
        std::vector<int> unique_anchors, target_classes;
        for (const auto& [c, ids] : by_class) {
          if (ids.size() == 1) unique_anchors.push_back(ids[0]);
          target_classes.push_back(c);
        }
        const size_t need = rel == Relation::kBetween ? 2 : 1;
        if (unique_anchors.size() < need) {
          ++rel_cursor;
          continue;
        }
        // Favor targets with distractors.
        std::vector<double> w;
        for (int c : target_classes) w.push_back(static_cast<double>(by_class[c].size()));
        const int tcls = target_classes[std::discrete_distribution<size_t>(w.begin(), w.end())(rng)];
        std::shuffle(unique_anchors.begin(), unique_anchors.end(), rng);
        RelationQuery q{rel, tcls, {}};
        for (int a : unique_anchors) {
          if (q.anchor_ids.size() == need) break;
          if (*scene->object(a).class_id != tcls) q.anchor_ids.push_back(a);
        }
        if (q.anchor_ids.size() < need) continue;
        auto target = ResolveRelation(*scene, q, cfg.margin);
        if (!target) continue;
        auto key = std::make_tuple(static_cast<int>(rel), tcls, q.anchor_ids);
        if (!used.insert(key).second) continue;
        GroundingSample s;
        s.scene_index = d.scenes.size();
        s.target_id = *target;
        const std::string a = Surface(catalog[*scene->object(q.anchor_ids[0]).class_id], rng);
        const std::string b = need == 2 ? Surface(catalog[*scene->object(q.anchor_ids[1]).class_id], rng) : "";
        s.utterance = Phrase(rel, Surface(catalog[tcls], rng), a, b, rng);
        s.tags.relation = RelationName(rel);
        s.tags.view_dependent = IsViewDependent(rel);
        s.tags.hard = CountDistractors(*scene, *target) > kEasyMaxDistractors;
        samples.push_back(std::move(s));
        ++rel_cursor;
      }
    }
    LSVG_CHECK(scene && !samples.empty(),
               "gen-scenes: could not build a satisfiable scene for " + id);
    d.scenes.push_back(std::move(*scene));
    for (auto& s : samples) d.samples.push_back(std::move(s));
  }
  return d;
}

Scene ComposeScene(const std::string& id, const std::vector<PlacedObject>& objects,
                   size_t points_per_object, uint64_t seed) {
  const auto& catalog = ClassCatalog();
  LSVG_VALIDATE(points_per_object > 0, "compose: points_per_object must be positive");
  std::mt19937_64 rng(seed);
  Scene s;
  s.id = id;
  for (size_t i = 0; i < objects.size(); ++i) {
    const PlacedObject& p = objects[i];
    LSVG_VALIDATE(p.class_id >= 0 && static_cast<size_t>(p.class_id) < catalog.size(),
                  "compose: class id out of range");
    const ClassPrior& prior = catalog[p.class_id];
    ObjectProposal o;
    o.id = static_cast<int>(i);
    o.class_id = p.class_id;
    o.box.size = prior.size;
    o.box.yaw = WrapAngle(p.yaw);
    o.box.center = {p.x, p.y, prior.size.z / 2};
    o.cloud = SampleSurface(o.box, prior.color, points_per_object, rng);
    s.objects.push_back(std::move(o));
  }
  s.views = ComputeViews(s);
  return s;
}

}  // namespace lsvg
