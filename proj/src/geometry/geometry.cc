#include "lsvg/geometry/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lsvg/common/error.h"

namespace lsvg {

void PointCloud::Validate() const {
  LSVG_VALIDATE(!points.empty(), "point cloud is empty");
  for (const Point& p : points) {
    for (double c : p.rgb) {
      LSVG_VALIDATE(c >= 0.0 && c <= 1.0, "point color outside [0, 1]");
    }
    LSVG_VALIDATE(std::isfinite(p.xyz.x) && std::isfinite(p.xyz.y) &&
                      std::isfinite(p.xyz.z),
                  "non-finite point coordinate");
  }
}

const ObjectProposal& Scene::object(int object_id) const {
  for (const auto& o : objects)
    if (o.id == object_id) return o;
  throw ValidationError("scene " + id + " has no object " +
                        std::to_string(object_id));
}

Vec3 Scene::Centroid() const {
  Vec3 c;
  if (objects.empty()) return c;
  for (const auto& o : objects) {
    c.x += o.box.center.x;
    c.y += o.box.center.y;
    c.z += o.box.center.z;
  }
  const double n = static_cast<double>(objects.size());
  return {c.x / n, c.y / n, c.z / n};
}

std::vector<size_t> FarthestPointSample(std::span<const Vec3> points, size_t k,
                                        size_t start) {
  const size_t n = points.size();
  LSVG_CHECK(k >= 1, "FarthestPointSample: k must be at least 1");
  LSVG_CHECK(k <= n, "FarthestPointSample: k=" + std::to_string(k) +
                         " exceeds point count " + std::to_string(n));
  LSVG_CHECK(start < n, "FarthestPointSample: start index out of range");
  std::vector<size_t> chosen;
  chosen.reserve(k);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<uint8_t> taken(n, 0);
  size_t current = start;
  for (size_t step = 0; step < k; ++step) {
    chosen.push_back(current);
    taken[current] = 1;
    if (step + 1 == k) break;
    size_t best = n;
    double best_dist = -1.0;
    for (size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d = SquaredDistance(points[i], points[current]);
      if (d < min_dist[i]) min_dist[i] = d;
      if (min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = i;
      }
    }
    current = best;
  }
  return chosen;
}

std::vector<size_t> FarthestPointSample(const PointCloud& pc, size_t k,
                                        size_t start) {
  std::vector<Vec3> xyz;
  xyz.reserve(pc.size());
  for (const Point& p : pc.points) xyz.push_back(p.xyz);
  return FarthestPointSample(xyz, k, start);
}

std::vector<std::vector<size_t>> BallGroup(std::span<const Vec3> points,
                                           std::span<const Vec3> centers,
                                           double radius, size_t max_neighbors) {
  LSVG_CHECK(radius > 0.0, "BallGroup: radius must be positive");
  LSVG_CHECK(max_neighbors >= 1, "BallGroup: max_neighbors must be positive");
  LSVG_CHECK(!points.empty(), "BallGroup: no points");
  const double r2 = radius * radius;
  std::vector<std::vector<size_t>> groups;
  groups.reserve(centers.size());
  std::vector<std::pair<double, size_t>> inside;
  for (const Vec3& c : centers) {
    inside.clear();
    size_t nearest = 0;
    double nearest_d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < points.size(); ++i) {
      const double d = SquaredDistance(points[i], c);
      if (d <= r2) inside.emplace_back(d, i);
      if (d < nearest_d) {
        nearest_d = d;
        nearest = i;
      }
    }
    std::vector<size_t> g;
    if (inside.empty()) {
      g.push_back(nearest);
    } else {
      const size_t keep = std::min(max_neighbors, inside.size());
      std::partial_sort(inside.begin(), inside.begin() + keep, inside.end());
      for (size_t t = 0; t < keep; ++t) g.push_back(inside[t].second);
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

double WrapAngle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a -= kTwoPi;
  return a;
}

Box3D RotateBox(const Box3D& box, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Box3D out = box;
  out.center.x = c * box.center.x - s * box.center.y;
  out.center.y = s * box.center.x + c * box.center.y;
  out.yaw = WrapAngle(box.yaw + angle);
  return out;
}

int SelectView(int object_id, std::span<const ViewMeta> views,
               ViewSelection mode, std::mt19937_64* rng) {
  LSVG_CHECK(!views.empty(), "SelectView: no views");
  auto count_of = [object_id](const ViewMeta& v) {
    auto it = v.visible_point_count.find(object_id);
    return it == v.visible_point_count.end() ? 0 : it->second;
  };
  if (mode == ViewSelection::kRandom) {
    LSVG_CHECK(rng != nullptr, "SelectView: random mode needs an rng");
    std::vector<int> visible;
    for (const auto& v : views)
      if (count_of(v) > 0) visible.push_back(v.view_id);
    std::sort(visible.begin(), visible.end());
    if (!visible.empty()) {
      std::uniform_int_distribution<size_t> pick(0, visible.size() - 1);
      return visible[pick(*rng)];
    }
  }
  int best_id = views.front().view_id;
  int best_count = -1;
  for (const auto& v : views) {
    const int c = count_of(v);
    if (c > best_count || (c == best_count && v.view_id < best_id)) {
      best_count = c;
      best_id = v.view_id;
    }
  }
  return best_id;
}

int CountDistractors(const Scene& scene, int target_id) {
  const ObjectProposal& target = scene.object(target_id);
  LSVG_VALIDATE(target.class_id.has_value(),
                "CountDistractors: target " + std::to_string(target_id) +
                    " has no class label");
  int count = 0;
  for (const auto& o : scene.objects) {
    if (o.id != target_id && o.class_id == target.class_id) ++count;
  }
  return count;
}

std::vector<ViewMeta> ComputeViews(const Scene& scene, int num_views) {
  constexpr double kHalfFov = std::numbers::pi / 4.0;  // 90 degree horizontal
  constexpr double kHalfVFov = std::numbers::pi / 6.0;
  constexpr int kAzBins = 96;
  constexpr int kElBins = 48;
  constexpr double kCameraHeight = 1.6;

  const Vec3 centroid = scene.Centroid();
  double reach = 0.0;
  for (const auto& o : scene.objects) {
    const double dx = o.box.center.x - centroid.x;
    const double dy = o.box.center.y - centroid.y;
    reach = std::max(reach, std::sqrt(dx * dx + dy * dy));
  }
  const double ring = reach + 3.0;

  std::vector<ViewMeta> views;
  for (int v = 0; v < num_views; ++v) {
    const double theta = 2.0 * std::numbers::pi * v / num_views;
    const Vec3 cam{centroid.x + ring * std::cos(theta),
                   centroid.y + ring * std::sin(theta), kCameraHeight};
    const double forward = std::atan2(centroid.y - cam.y, centroid.x - cam.x);

    struct Hit {
      int bin;
      double depth;
      int object;
    };
    std::vector<Hit> hits;
    std::vector<double> bin_depth(kAzBins * kElBins,
                                  std::numeric_limits<double>::infinity());
    std::vector<int> bin_owner(kAzBins * kElBins, -1);
    for (const auto& o : scene.objects) {
      for (const Point& p : o.cloud.points) {
        const double dx = p.xyz.x - cam.x, dy = p.xyz.y - cam.y,
                     dz = p.xyz.z - cam.z;
        const double horiz = std::sqrt(dx * dx + dy * dy);
        double az = std::atan2(dy, dx) - forward;
        az = std::remainder(az, 2.0 * std::numbers::pi);
        const double el = std::atan2(dz, horiz);
        if (std::abs(az) >= kHalfFov || std::abs(el) >= kHalfVFov) continue;
        const int ab = static_cast<int>((az + kHalfFov) / (2 * kHalfFov) * kAzBins);
        const int eb = static_cast<int>((el + kHalfVFov) / (2 * kHalfVFov) * kElBins);
        const int bin = std::clamp(ab, 0, kAzBins - 1) * kElBins +
                        std::clamp(eb, 0, kElBins - 1);
        const double depth = std::sqrt(horiz * horiz + dz * dz);
        hits.push_back({bin, depth, o.id});
        if (depth < bin_depth[bin]) {
          bin_depth[bin] = depth;
          bin_owner[bin] = o.id;
        }
      }
    }
    ViewMeta meta;
    meta.view_id = v;
    for (const auto& o : scene.objects) meta.visible_point_count[o.id] = 0;
    for (const Hit& h : hits) {
      if (bin_owner[h.bin] == h.object) ++meta.visible_point_count[h.object];
    }
    views.push_back(std::move(meta));
  }
  return views;
}

}  // namespace lsvg
