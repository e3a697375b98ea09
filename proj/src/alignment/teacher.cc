#include "lsvg/alignment/teacher.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "lsvg/common/error.h"

namespace lsvg {
namespace {

std::vector<double> ReadVector(const nlohmann::json& j, const std::string& path) {
  LSVG_VALIDATE(j.is_array(), path + ": expected an array of numbers");
  std::vector<double> v;
  v.reserve(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    LSVG_VALIDATE(j[i].is_number(), path + "/" + std::to_string(i) + ": not a number");
    v.push_back(j[i].get<double>());
  }
  return v;
}

void Normalize(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0) for (double& x : v) x /= n;
}

uint64_t Mix(uint64_t h, uint64_t v) {
  // splitmix64 finalizer over the running state.
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

uint64_t HashString(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

void TeacherStore::CheckVector(const std::vector<double>& v, const std::string& what) const {
  LSVG_VALIDATE(v.size() == dim_, what + ": length " + std::to_string(v.size()) +
                                      " != dim " + std::to_string(dim_));
  for (double x : v) LSVG_VALIDATE(std::isfinite(x), what + ": non-finite value");
}

void TeacherStore::SetPrompt(const std::string& class_name, std::vector<double> emb) {
  CheckVector(emb, "prompt '" + class_name + "'");
  prompts_[class_name] = std::move(emb);
}

void TeacherStore::SetObject(const std::string& scene, int object, int view,
                             std::vector<double> emb) {
  CheckVector(emb, "object " + std::to_string(object) + " in scene '" + scene + "'");
  objects_[{scene, object, view}] = std::move(emb);
}

const std::vector<double>& TeacherStore::Prompt(const std::string& class_name) const {
  auto it = prompts_.find(class_name);
  LSVG_VALIDATE(it != prompts_.end(), "teacher has no prompt for class '" + class_name + "'");
  return it->second;
}

const std::vector<double>* TeacherStore::FindObject(const std::string& scene, int object,
                                                    int view) const {
  auto it = objects_.find({scene, object, view});
  return it == objects_.end() ? nullptr : &it->second;
}

std::vector<int> TeacherStore::ObjectViews(const std::string& scene, int object) const {
  std::vector<int> views;
  for (auto it = objects_.lower_bound({scene, object, std::numeric_limits<int>::min()});
       it != objects_.end() && std::get<0>(it->first) == scene &&
       std::get<1>(it->first) == object;
       ++it) {
    views.push_back(std::get<2>(it->first));
  }
  return views;
}

TeacherStore TeacherStore::FromJson(const nlohmann::json& j, const ClassVocabulary* vocab) {
  LSVG_VALIDATE(j.is_object(), "/: expected an object");
  LSVG_VALIDATE(j.contains("dim") && j["dim"].is_number_integer() && j["dim"].get<int64_t>() > 0,
                "/dim: expected a positive integer");
  TeacherStore store(j["dim"].get<size_t>());
  LSVG_VALIDATE(j.contains("prompts") && j["prompts"].is_object(),
                "/prompts: expected an object");
  for (const auto& [name, vec] : j["prompts"].items()) {
    const std::string path = "/prompts/" + name;
    auto v = ReadVector(vec, path);
    LSVG_VALIDATE(v.size() == store.dim_, path + ": length " + std::to_string(v.size()) +
                                              " != dim " + std::to_string(store.dim_));
    store.SetPrompt(name, std::move(v));
  }
  LSVG_VALIDATE(j.contains("objects") && j["objects"].is_array(),
                "/objects: expected an array");
  for (size_t i = 0; i < j["objects"].size(); ++i) {
    const auto& o = j["objects"][i];
    const std::string path = "/objects/" + std::to_string(i);
    LSVG_VALIDATE(o.is_object(), path + ": expected an object");
    LSVG_VALIDATE(o.contains("scene") && o["scene"].is_string(), path + "/scene: expected a string");
    LSVG_VALIDATE(o.contains("object") && o["object"].is_number_integer(),
                  path + "/object: expected an integer");
    LSVG_VALIDATE(o.contains("view") && o["view"].is_number_integer(),
                  path + "/view: expected an integer");
    LSVG_VALIDATE(o.contains("emb"), path + "/emb: missing");
    const auto scene = o["scene"].get<std::string>();
    const int object = o["object"].get<int>();
    const int view = o["view"].get<int>();
    auto v = ReadVector(o["emb"], path + "/emb");
    LSVG_VALIDATE(v.size() == store.dim_,
                  path + "/emb: object_id " + std::to_string(object) + " has length " +
                      std::to_string(v.size()) + ", expected dim " + std::to_string(store.dim_));
    LSVG_VALIDATE(!store.FindObject(scene, object, view),
                  path + ": duplicate key (scene '" + scene + "', object " +
                      std::to_string(object) + ", view " + std::to_string(view) + ")");
    store.SetObject(scene, object, view, std::move(v));
  }
  if (vocab) {
    for (const auto& c : vocab->classes())
      LSVG_VALIDATE(store.HasPrompt(c), "/prompts: missing prompt for class '" + c + "'");
  }
  return store;
}

TeacherStore TeacherStore::Load(const std::string& path, const ClassVocabulary* vocab) {
  std::ifstream in(path);
  LSVG_VALIDATE(in.good(), "cannot open teacher file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("teacher file " + path + ": " + e.what());
  }
  return FromJson(j, vocab);
}

nlohmann::json TeacherStore::ToJson() const {
  nlohmann::json prompts = nlohmann::json::object();
  for (const auto& [name, v] : prompts_) prompts[name] = v;
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& [key, v] : objects_)
    objects.push_back({{"scene", std::get<0>(key)}, {"object", std::get<1>(key)},
                       {"view", std::get<2>(key)}, {"emb", v}});
  return {{"dim", dim_}, {"prompts", prompts}, {"objects", objects}};
}

void TeacherStore::Save(const std::string& path) const {
  std::ofstream out(path);
  LSVG_VALIDATE(out.good(), "cannot write teacher file " + path);
  // nlohmann emits the shortest round-trip representation (up to 17 digits).
  out << ToJson().dump() << "\n";
}

SynthTeacher::SynthTeacher(const ClassVocabulary& vocab, size_t dim, double sigma,
                           uint64_t seed)
    : vocab_(vocab), dim_(dim), sigma_(sigma), seed_(seed) {
  LSVG_VALIDATE(dim >= vocab.size(), "synth_teacher: dim " + std::to_string(dim) +
                                         " < vocabulary size " + std::to_string(vocab.size()));
  LSVG_VALIDATE(sigma >= 0, "synth_teacher: sigma must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  // Gram-Schmidt on Gaussian draws, repeated twice for numerical orthogonality.
  while (prompts_.size() < vocab.size()) {
    std::vector<double> v(dim);
    for (double& x : v) x = g(rng);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& p : prompts_) {
        double dot = 0.0;
        for (size_t i = 0; i < dim; ++i) dot += v[i] * p[i];
        for (size_t i = 0; i < dim; ++i) v[i] -= dot * p[i];
      }
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    if (n < 1e-12) continue;
    Normalize(v);
    prompts_.push_back(std::move(v));
  }
}

std::vector<double> SynthTeacher::ObjectEmbedding(int class_id, const std::string& scene,
                                                  int object, int view) const {
  LSVG_CHECK(class_id >= 0 && static_cast<size_t>(class_id) < prompts_.size(),
             "synth_teacher: class id out of range");
  std::vector<double> v = prompts_[class_id];
  if (sigma_ > 0) {
    uint64_t h = Mix(seed_, HashString(scene));
    h = Mix(h, static_cast<uint64_t>(object));
    h = Mix(h, static_cast<uint64_t>(view));
    std::mt19937_64 rng(h);
    std::normal_distribution<double> g(0.0, sigma_);
    for (double& x : v) x += g(rng);
  }
  Normalize(v);
  return v;
}

TeacherStore SynthTeacher::Prompts() const {
  TeacherStore store(dim_);
  for (size_t c = 0; c < prompts_.size(); ++c) store.SetPrompt(vocab_.name(c), prompts_[c]);
  return store;
}

TeacherStore SynthTeacher::Materialize(const std::vector<Scene>& scenes) const {
  TeacherStore store = Prompts();
  for (const auto& s : scenes) {
    for (const auto& o : s.objects) {
      if (!o.class_id) continue;
      std::set<int> views;
      if (!s.views.empty()) views.insert(SelectView(o.id, s.views, ViewSelection::kMaxCoverage));
      for (const auto& v : s.views) {
        auto it = v.visible_point_count.find(o.id);
        if (it != v.visible_point_count.end() && it->second > 0) views.insert(v.view_id);
      }
      if (views.empty()) views.insert(0);
      for (int view : views)
        store.SetObject(s.id, o.id, view, ObjectEmbedding(*o.class_id, s.id, o.id, view));
    }
  }
  return store;
}

}  // namespace lsvg
