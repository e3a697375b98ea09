#include "lsvg/encoder/point_encoder.h"

#include <algorithm>
#include <numeric>

#include "lsvg/common/error.h"
#include "lsvg/numerics/ops.h"

namespace lsvg {

EncoderConfig EncoderConfig::Desk() {
  EncoderConfig c;
  c.points_per_object = 128;
  c.layers = {{32, 0.4, 16, {32}}, {0, 0.0, 0, {64, 64}}};
  c.fuse_layer = 2;
  c.teacher_dim = 32;
  return c;
}

EncoderConfig EncoderConfig::Paper() {
  EncoderConfig c;
  c.points_per_object = 1024;
  c.layers = {{512, 0.2, 32, {64, 64, 128}},
              {128, 0.4, 64, {128, 128, 256}},
              {0, 0.0, 0, {256, 512, 768}}};
  c.fuse_layer = 3;
  c.teacher_dim = 512;
  return c;
}

size_t EncoderConfig::InputWidth(size_t layer) const {
  LSVG_CHECK(layer >= 1 && layer <= layers.size(), "encoder: layer index out of range");
  return layer == 1 ? kPointChannels : layers[layer - 2].widths.back();
}

void EncoderConfig::Validate() const {
  LSVG_VALIDATE(!layers.empty(), "encoder: at least one SA layer required");
  LSVG_VALIDATE(points_per_object > 0, "encoder: points_per_object must be positive");
  LSVG_VALIDATE(fuse_layer >= 1 && fuse_layer <= layers.size(),
                "encoder: fuse_layer must be in [1, num_sa_layers]");
  LSVG_VALIDATE(teacher_dim > 0, "encoder: teacher_dim must be positive");
  size_t available = points_per_object;
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    LSVG_VALIDATE(!L.widths.empty(), "encoder: layer without widths");
    for (size_t w : L.widths) LSVG_VALIDATE(w > 0, "encoder: widths must be positive");
    const bool last = l + 1 == layers.size();
    LSVG_VALIDATE(last == (L.num_seeds == 0),
                  "encoder: exactly the last layer must be global (num_seeds 0)");
    if (!last) {
      LSVG_VALIDATE(L.num_seeds <= available, "encoder: seed count exceeds point count");
      LSVG_VALIDATE(L.radius > 0 && L.max_neighbors > 0,
                    "encoder: radius and max_neighbors must be positive");
      available = L.num_seeds;
    }
  }
}

nlohmann::json EncoderConfig::ToJson() const {
  nlohmann::json ls = nlohmann::json::array();
  for (const auto& L : layers)
    ls.push_back({{"num_seeds", L.num_seeds}, {"radius", L.radius},
                  {"max_neighbors", L.max_neighbors}, {"widths", L.widths}});
  return {{"points_per_object", points_per_object}, {"layers", ls},
          {"fuse_layer", fuse_layer}, {"teacher_dim", teacher_dim}};
}

EncoderConfig EncoderConfig::FromJson(const nlohmann::json& j) {
  EncoderConfig c = Desk();
  c.points_per_object = j.value("points_per_object", c.points_per_object);
  c.fuse_layer = j.value("fuse_layer", c.fuse_layer);
  c.teacher_dim = j.value("teacher_dim", c.teacher_dim);
  if (j.contains("layers")) {
    c.layers.clear();
    for (const auto& L : j["layers"])
      c.layers.push_back({L.at("num_seeds").get<size_t>(), L.value("radius", 0.0),
                          L.value("max_neighbors", size_t{0}),
                          L.at("widths").get<std::vector<size_t>>()});
  }
  c.Validate();
  return c;
}

namespace {

bool PointLess(const Point& a, const Point& b) {
  return std::tie(a.xyz.x, a.xyz.y, a.xyz.z, a.rgb[0], a.rgb[1], a.rgb[2]) <
         std::tie(b.xyz.x, b.xyz.y, b.xyz.z, b.rgb[0], b.rgb[1], b.rgb[2]);
}

std::vector<size_t> Resample(size_t n, size_t target, uint64_t seed) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n == target) return idx;
  std::mt19937_64 rng(seed);
  if (n > target) {
    // Partial Fisher-Yates, then restore canonical order.
    for (size_t i = 0; i < target; ++i) {
      std::uniform_int_distribution<size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(target);
  } else {
    std::uniform_int_distribution<size_t> pick(0, n - 1);
    while (idx.size() < target) idx.push_back(pick(rng));
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

PreparedObject PrepareObject(const PointCloud& cloud, const Vec3& center,
                             const EncoderConfig& cfg, uint64_t sample_seed) {
  LSVG_VALIDATE(!cloud.points.empty(), "encode_object: empty point cloud");
  std::vector<Point> pts = cloud.points;
  std::sort(pts.begin(), pts.end(), PointLess);
  const auto idx = Resample(pts.size(), cfg.points_per_object, sample_seed);

  PreparedObject out;
  out.positions.reserve(idx.size());
  out.feats.reserve(idx.size() * EncoderConfig::kPointChannels);
  for (size_t i : idx) {
    const Point& p = pts[i];
    const Vec3 c{p.xyz.x - center.x, p.xyz.y - center.y, p.xyz.z - center.z};
    out.positions.push_back(c);
    out.feats.insert(out.feats.end(), {c.x, c.y, c.z, p.rgb[0], p.rgb[1], p.rgb[2]});
  }

  std::vector<Vec3> level_pts = out.positions;
  for (const auto& L : cfg.layers) {
    PreparedObject::Level lv;
    lv.offsets.push_back(0);
    if (L.num_seeds == 0) {
      for (size_t i = 0; i < level_pts.size(); ++i) {
        lv.members.push_back(i);
        lv.rel.insert(lv.rel.end(), {level_pts[i].x, level_pts[i].y, level_pts[i].z});
      }
      lv.offsets.push_back(lv.members.size());
    } else {
      const auto seed_idx = FarthestPointSample(level_pts, L.num_seeds, 0);
      for (size_t s : seed_idx) lv.seeds.push_back(level_pts[s]);
      const auto groups = BallGroup(level_pts, lv.seeds, L.radius, L.max_neighbors);
      for (size_t g = 0; g < groups.size(); ++g) {
        for (size_t m : groups[g]) {
          lv.members.push_back(m);
          lv.rel.insert(lv.rel.end(), {level_pts[m].x - lv.seeds[g].x,
                                       level_pts[m].y - lv.seeds[g].y,
                                       level_pts[m].z - lv.seeds[g].z});
        }
        lv.offsets.push_back(lv.members.size());
      }
      level_pts = lv.seeds;
    }
    out.levels.push_back(std::move(lv));
  }
  return out;
}

DiffArray FuseTeacher(const DiffArray& feats, const std::vector<size_t>& row_owner,
                      const DiffArray& teacher, const Linear& proj) {
  LSVG_CHECK(row_owner.size() == feats.rows(), "fuse_teacher: owner count mismatch");
  DiffArray projected = proj.Forward(teacher);
  LSVG_CHECK(projected.cols() == feats.cols(),
             "fuse_teacher: projected width " + std::to_string(projected.cols()) +
                 " != layer width " + std::to_string(feats.cols()));
  return ops::Add(feats, ops::GatherRows(projected, row_owner));
}

PointEncoder::PointEncoder(ParameterSet& params, const std::string& name,
                           const EncoderConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg_.Validate();
  auto make = [&](const std::string& prefix, size_t l) {
    MlpSpec spec;
    spec.input_width = 3 + cfg_.InputWidth(l + 1);
    spec.widths = cfg_.layers[l].widths;
    spec.activation = Activation::kRelu;
    spec.activate_output = true;
    return Mlp(params, prefix + ".sa" + std::to_string(l + 1), spec, rng);
  };
  for (size_t l = 0; l < cfg_.layers.size(); ++l) {
    if (l + 1 < cfg_.fuse_layer) {
      shared_.push_back(make(name + ".shared", l));
    } else {
      pure_.push_back(make(name + ".pure", l));
      fused_.push_back(make(name + ".fused", l));
    }
  }
  proj_ = Linear::Create(params, name + ".teacher_proj", cfg_.teacher_dim,
                         cfg_.InputWidth(cfg_.fuse_layer), true, rng);
}

DiffArray PointEncoder::RunLayer(size_t layer, const Mlp& mlp, const DiffArray& feats,
                                 const std::vector<const PreparedObject*>& objects,
                                 const std::vector<size_t>& feat_base) const {
  std::vector<size_t> members, offsets = {0};
  std::vector<double> rel;
  for (size_t o = 0; o < objects.size(); ++o) {
    const auto& lv = objects[o]->levels[layer];
    const size_t row_base = members.size();
    for (size_t m : lv.members) members.push_back(feat_base[o] + m);
    for (size_t g = 1; g < lv.offsets.size(); ++g) offsets.push_back(row_base + lv.offsets[g]);
    rel.insert(rel.end(), lv.rel.begin(), lv.rel.end());
  }
  const size_t rows = members.size();
  DiffArray input = ops::ConcatCols(
      {DiffArray::Constant({rows, 3}, std::move(rel)), ops::GatherRows(feats, members)});
  std::vector<size_t> identity(rows);
  std::iota(identity.begin(), identity.end(), 0);
  return ops::MaxPoolGroups(mlp.Forward(input), offsets, identity);
}

ObjectEncodings PointEncoder::Encode(const std::vector<const PreparedObject*>& objects,
                                     const DiffArray& teacher, EncoderTrace* trace) const {
  LSVG_CHECK(!objects.empty(), "encoder: empty batch");
  LSVG_CHECK(teacher.rows() == objects.size() && teacher.cols() == cfg_.teacher_dim,
             "encoder: teacher batch must be " + std::to_string(objects.size()) + " x " +
                 std::to_string(cfg_.teacher_dim) + ", got " + teacher.shape().ToString());
  const size_t n = objects.size();
  const size_t P = cfg_.points_per_object;
  std::vector<double> raw;
  raw.reserve(n * P * EncoderConfig::kPointChannels);
  for (const auto* o : objects) {
    LSVG_CHECK(o->positions.size() == P && o->levels.size() == cfg_.layers.size(),
               "encoder: object prepared with a different config");
    raw.insert(raw.end(), o->feats.begin(), o->feats.end());
  }
  DiffArray x = DiffArray::Constant({n * P, EncoderConfig::kPointChannels}, std::move(raw));

  // Rows per object entering each layer.
  auto counts_at = [&](size_t l) {
    return l == 0 ? P : cfg_.layers[l - 1].num_seeds;
  };
  auto bases_at = [&](size_t l) {
    std::vector<size_t> b(n);
    for (size_t o = 0; o < n; ++o) b[o] = o * counts_at(l);
    return b;
  };

  const size_t split = cfg_.fuse_layer - 1;
  for (size_t l = 0; l < split; ++l) {
    x = RunLayer(l, shared_[l], x, objects, bases_at(l));
    if (trace) {
      trace->pure.push_back(x);
      trace->fused.push_back(x);
    }
  }
  std::vector<size_t> owner(n * counts_at(split));
  for (size_t r = 0; r < owner.size(); ++r) owner[r] = r / counts_at(split);
  DiffArray pure = x;
  DiffArray fused = FuseTeacher(x, owner, teacher, proj_);
  for (size_t l = split; l < cfg_.layers.size(); ++l) {
    const auto bases = bases_at(l);
    pure = RunLayer(l, pure_[l - split], pure, objects, bases);
    fused = RunLayer(l, fused_[l - split], fused, objects, bases);
    if (trace) {
      trace->pure.push_back(pure);
      trace->fused.push_back(fused);
    }
  }
  return {pure, fused, ops::Add(pure, fused)};
}

}  // namespace lsvg
