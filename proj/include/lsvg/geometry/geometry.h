#ifndef LSVG_GEOMETRY_GEOMETRY_H_
#define LSVG_GEOMETRY_GEOMETRY_H_

#include <array>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace lsvg {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline double SquaredDistance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// x, y, z in meters; r, g, b in [0, 1].
struct Point {
  Vec3 xyz;
  std::array<double, 3> rgb{};
};

struct PointCloud {
  std::vector<Point> points;

  size_t size() const { return points.size(); }
  // Throws ValidationError when empty or a color leaves [0, 1].
  void Validate() const;
};

struct Box3D {
  Vec3 center;
  Vec3 size;         // strictly positive
  double yaw = 0.0;  // radians in [0, 2 pi)
};

struct ViewMeta {
  int view_id = 0;
  std::map<int, int> visible_point_count;  // object id -> count
};

struct ObjectProposal {
  int id = 0;
  std::optional<int> class_id;
  Box3D box;
  PointCloud cloud;
};

struct Scene {
  std::string id;
  std::vector<ObjectProposal> objects;
  std::vector<ViewMeta> views;

  const ObjectProposal& object(int object_id) const;
  // Mean of the box centers.
  Vec3 Centroid() const;
};

// Greedy max-min sampling starting at `start`: each further pick maximizes
// the distance to the already chosen set. Ties go to the lowest index.
// Throws if k is 0 or exceeds the cloud size.
std::vector<size_t> FarthestPointSample(std::span<const Vec3> points, size_t k,
                                        size_t start = 0);
std::vector<size_t> FarthestPointSample(const PointCloud& pc, size_t k,
                                        size_t start = 0);

// For every center, the indices of points within `radius` ordered nearest
// first (ties by index) and truncated to max_neighbors. A center whose ball is
// empty gets its single nearest point.
std::vector<std::vector<size_t>> BallGroup(std::span<const Vec3> points,
                                           std::span<const Vec3> centers,
                                           double radius, size_t max_neighbors);

// Rotates the center about the z axis through the origin and advances yaw
// modulo 2 pi.
Box3D RotateBox(const Box3D& box, double angle);

double WrapAngle(double angle);

enum class ViewSelection { kMaxCoverage, kRandom };

// kMaxCoverage: argmax visible count, ties to the lowest view id.
// kRandom: uniform over views where the object is visible, falling back to
// max coverage when it is visible nowhere.
int SelectView(int object_id, std::span<const ViewMeta> views,
               ViewSelection mode, std::mt19937_64* rng = nullptr);

// Other objects in the scene sharing the target's class.
int CountDistractors(const Scene& scene, int target_id);

// Samples with more than this many distractors are "hard".
inline constexpr int kEasyMaxDistractors = 2;

// Twelve cameras on a ring around the scene looking at its centroid. An
// object's count in a view is the number of its points that fall inside the
// horizontal field of view and are the nearest object in their angular bin.
std::vector<ViewMeta> ComputeViews(const Scene& scene, int num_views = 12);

}  // namespace lsvg

#endif  // LSVG_GEOMETRY_GEOMETRY_H_
