#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "lsvg/common/error.h"
#include "lsvg/geometry/geometry.h"

namespace lsvg {
namespace {

constexpr double kPi = std::numbers::pi;

// O(N^2 k) greedy max-min oracle: recomputes every candidate's distance to
// the whole chosen set at each step.
std::vector<size_t> BruteForceFps(const std::vector<Vec3>& pts, size_t k,
                                  size_t start) {
  std::vector<size_t> chosen = {start};
  while (chosen.size() < k) {
    size_t best = pts.size();
    double best_d = -1.0;
    for (size_t i = 0; i < pts.size(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (size_t c : chosen) d = std::min(d, SquaredDistance(pts[i], pts[c]));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

std::vector<Vec3> RandomCloud(std::mt19937_64& rng, size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

TEST(FarthestPointSampleTest, UnitSquareCorners) {
  std::vector<Vec3> sq = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  EXPECT_EQ(FarthestPointSample(sq, 2, 0), (std::vector<size_t>{0, 3}));
}

TEST(FarthestPointSampleTest, KEqualsNSelectsAll) {
  std::mt19937_64 rng(3);
  auto pts = RandomCloud(rng, 17);
  auto idx = FarthestPointSample(pts, 17, 0);
  EXPECT_EQ(std::set<size_t>(idx.begin(), idx.end()).size(), 17u);
}

TEST(FarthestPointSampleTest, TiesGoToLowestIndex) {
  // Points 1 and 2 are equidistant from point 0.
  std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}};
  EXPECT_EQ(FarthestPointSample(pts, 2, 0), (std::vector<size_t>{0, 1}));
}

TEST(FarthestPointSampleTest, KTooLargeThrows) {
  std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(FarthestPointSample(pts, 3, 0), Error);
  EXPECT_THROW(FarthestPointSample(pts, 0, 0), Error);
}

TEST(FarthestPointSampleTest, MatchesBruteForceOracle) {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    const size_t n = std::uniform_int_distribution<size_t>(1, 64)(rng);
    const size_t k = std::uniform_int_distribution<size_t>(1, n)(rng);
    auto pts = RandomCloud(rng, n);
    ASSERT_EQ(FarthestPointSample(pts, k, 0), BruteForceFps(pts, k, 0)) << "seed " << seed;
  }
}

TEST(BallGroupTest, HugeRadiusTakesAllUpToMax) {
  std::mt19937_64 rng(5);
  auto pts = RandomCloud(rng, 20);
  std::vector<Vec3> centers = {pts[0], pts[7]};
  auto all = BallGroup(pts, centers, 100.0, 50);
  for (const auto& g : all) EXPECT_EQ(g.size(), 20u);
  auto capped = BallGroup(pts, centers, 100.0, 6);
  for (const auto& g : capped) EXPECT_EQ(g.size(), 6u);
}

TEST(BallGroupTest, TinyRadiusFallsBackToNearest) {
  std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {3, 0, 0}};
  std::vector<Vec3> centers = {{0.9, 0, 0}, {2.6, 0.1, 0}};
  auto g = BallGroup(pts, centers, 1e-9, 4);
  EXPECT_EQ(g[0], (std::vector<size_t>{1}));
  EXPECT_EQ(g[1], (std::vector<size_t>{2}));
}

TEST(BallGroupTest, MatchesExhaustiveFilter) {
  std::mt19937_64 rng(77);
  auto pts = RandomCloud(rng, 60);
  auto centers = RandomCloud(rng, 8);
  const double radius = 1.3;
  const size_t max_n = 9;
  auto groups = BallGroup(pts, centers, radius, max_n);
  for (size_t c = 0; c < centers.size(); ++c) {
    std::vector<std::pair<double, size_t>> within;
    for (size_t i = 0; i < pts.size(); ++i) {
      const double d = SquaredDistance(pts[i], centers[c]);
      if (d <= radius * radius) within.emplace_back(d, i);
    }
    std::sort(within.begin(), within.end());
    std::vector<size_t> expected;
    for (size_t t = 0; t < std::min(max_n, within.size()); ++t)
      expected.push_back(within[t].second);
    if (expected.empty()) continue;
    EXPECT_EQ(groups[c], expected);
  }
}

void ExpectBoxNear(const Box3D& a, const Box3D& b, double tol) {
  EXPECT_NEAR(a.center.x, b.center.x, tol);
  EXPECT_NEAR(a.center.y, b.center.y, tol);
  EXPECT_NEAR(a.center.z, b.center.z, tol);
  EXPECT_EQ(a.size.x, b.size.x);
  EXPECT_EQ(a.size.y, b.size.y);
  EXPECT_EQ(a.size.z, b.size.z);
  const double dyaw = std::remainder(a.yaw - b.yaw, 2 * kPi);
  EXPECT_NEAR(dyaw, 0.0, tol);
}

TEST(RotateBoxTest, Examples) {
  Box3D b{{1, 0, 0.5}, {1, 2, 3}, 0.3};
  ExpectBoxNear(RotateBox(b, 0.0), b, 0.0);
  Box3D q = RotateBox(b, kPi / 2);
  EXPECT_NEAR(q.center.x, 0.0, 1e-12);
  EXPECT_NEAR(q.center.y, 1.0, 1e-12);
  EXPECT_NEAR(q.yaw, 0.3 + kPi / 2, 1e-12);
  ExpectBoxNear(RotateBox(b, 2 * kPi), b, 1e-9);
}

TEST(RotateBoxTest, QuarterTurnsCompose) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5, 5);
  const double angles[] = {0, kPi / 2, kPi, 3 * kPi / 2};
  for (int t = 0; t < 20; ++t) {
    Box3D b{{u(rng), u(rng), u(rng)}, {1, 1, 1}, WrapAngle(u(rng))};
    for (double a : angles)
      for (double c : angles)
        ExpectBoxNear(RotateBox(RotateBox(b, a), c), RotateBox(b, a + c), 1e-9);
  }
}

TEST(SelectViewTest, MaxCoverageTieGoesToLowestId) {
  std::vector<ViewMeta> views = {{0, {{5, 10}}}, {1, {{5, 40}}}, {2, {{5, 40}}}};
  EXPECT_EQ(SelectView(5, views, ViewSelection::kMaxCoverage), 1);
  std::vector<ViewMeta> single = {{3, {{5, 0}}}};
  EXPECT_EQ(SelectView(5, single, ViewSelection::kMaxCoverage), 3);
}

TEST(SelectViewTest, RandomModeIsSeededAndVisibleOnly) {
  std::vector<ViewMeta> views = {{0, {{1, 0}}}, {1, {{1, 3}}}, {2, {{1, 8}}}, {3, {{1, 1}}}};
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 50; ++i) {
    const int va = SelectView(1, views, ViewSelection::kRandom, &a);
    EXPECT_EQ(va, SelectView(1, views, ViewSelection::kRandom, &b));
    EXPECT_NE(va, 0);
  }
  std::vector<ViewMeta> dark = {{0, {{1, 0}}}, {1, {{1, 0}}}};
  std::mt19937_64 c(1);
  EXPECT_EQ(SelectView(1, dark, ViewSelection::kRandom, &c), 0);
}

Scene SceneWithClasses(const std::vector<std::optional<int>>& classes) {
  Scene s;
  s.id = "s";
  for (size_t i = 0; i < classes.size(); ++i) {
    ObjectProposal o;
    o.id = static_cast<int>(i);
    o.class_id = classes[i];
    s.objects.push_back(o);
  }
  return s;
}

TEST(CountDistractorsTest, Examples) {
  EXPECT_EQ(CountDistractors(SceneWithClasses({0, 1, 2}), 0), 0);
  EXPECT_EQ(CountDistractors(SceneWithClasses({0, 0, 0, 1}), 1), 2);
  Scene seven = SceneWithClasses({3, 3, 3, 3, 3, 3, 3, 1});
  const int d = CountDistractors(seven, 4);
  EXPECT_EQ(d, 6);
  EXPECT_GT(d, kEasyMaxDistractors);
  EXPECT_THROW(CountDistractors(SceneWithClasses({std::nullopt, 0}), 0), ValidationError);
}

TEST(ComputeViewsTest, TwelveViewsWithNearestObjectOcclusion) {
  Scene s;
  s.id = "v";
  // Two identical unit patches on the x axis; from the +x side the nearer one
  // hides the farther one.
  for (int k = 0; k < 2; ++k) {
    ObjectProposal o;
    o.id = k;
    o.box = {{k == 0 ? 1.0 : -1.0, 0, 1.6}, {0.2, 0.2, 0.2}, 0};
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j)
        o.cloud.points.push_back({{o.box.center.x, -0.1 + 0.02 * i, 1.5 + 0.02 * j}, {0.5, 0.5, 0.5}});
    s.objects.push_back(o);
  }
  auto views = ComputeViews(s);
  ASSERT_EQ(views.size(), 12u);
  // View 0 sits on +x looking toward -x.
  EXPECT_GT(views[0].visible_point_count.at(0), 0);
  EXPECT_EQ(views[0].visible_point_count.at(1), 0);
  EXPECT_GT(views[6].visible_point_count.at(1), 0);
  EXPECT_EQ(views[6].visible_point_count.at(0), 0);
}

}  // namespace
}  // namespace lsvg
