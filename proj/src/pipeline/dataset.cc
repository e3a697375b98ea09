#include "lsvg/pipeline/dataset.h"

#include <fstream>
#include <map>
#include <set>

#include "lsvg/common/error.h"

namespace lsvg {
namespace {

Vec3 ReadVec3(const nlohmann::json& j, const std::string& what) {
  LSVG_VALIDATE(j.is_array() && j.size() == 3, what + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

nlohmann::json SceneToJson(const Scene& scene, const ClassVocabulary& vocab) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : o.cloud.points)
      pts.push_back({p.xyz.x, p.xyz.y, p.xyz.z, p.rgb[0], p.rgb[1], p.rgb[2]});
    nlohmann::json obj = {
        {"id", o.id},
        {"box",
         {{"center", {o.box.center.x, o.box.center.y, o.box.center.z}},
          {"size", {o.box.size.x, o.box.size.y, o.box.size.z}},
          {"yaw", o.box.yaw}}},
        {"points", pts}};
    if (o.class_id) obj["class"] = vocab.name(*o.class_id);
    objects.push_back(std::move(obj));
  }
  nlohmann::json views = nlohmann::json::array();
  for (const auto& v : scene.views) {
    nlohmann::json vis = nlohmann::json::object();
    for (const auto& [id, count] : v.visible_point_count) vis[std::to_string(id)] = count;
    views.push_back({{"view_id", v.view_id}, {"visible", vis}});
  }
  return {{"scene_id", scene.id}, {"objects", objects}, {"views", views}};
}

Scene SceneFromJson(const nlohmann::json& j, const ClassVocabulary& vocab) {
  Scene s;
  s.id = j.at("scene_id").get<std::string>();
  LSVG_VALIDATE(j.contains("objects") && j["objects"].is_array(),
                "scene '" + s.id + "': objects must be an array");
  std::set<int> ids;
  for (const auto& o : j["objects"]) {
    ObjectProposal p;
    p.id = o.at("id").get<int>();
    LSVG_VALIDATE(ids.insert(p.id).second, "scene '" + s.id + "': duplicate object id " +
                                               std::to_string(p.id));
    if (o.contains("class") && !o["class"].is_null()) {
      const auto name = o["class"].get<std::string>();
      const int cid = vocab.IdOf(name);
      LSVG_VALIDATE(cid >= 0, "class vocabulary mismatch: scene '" + s.id + "' uses class '" +
                                  name + "' which is not in the vocabulary");
      p.class_id = cid;
    }
    const auto& box = o.at("box");
    p.box.center = ReadVec3(box.at("center"), "box center");
    p.box.size = ReadVec3(box.at("size"), "box size");
    p.box.yaw = box.value("yaw", 0.0);
    LSVG_VALIDATE(p.box.size.x > 0 && p.box.size.y > 0 && p.box.size.z > 0,
                  "scene '" + s.id + "' object " + std::to_string(p.id) + ": box size must be positive");
    for (const auto& pt : o.at("points")) {
      LSVG_VALIDATE(pt.is_array() && pt.size() == 6, "points must be [x,y,z,r,g,b]");
      p.cloud.points.push_back({{pt[0].get<double>(), pt[1].get<double>(), pt[2].get<double>()},
                                {pt[3].get<double>(), pt[4].get<double>(), pt[5].get<double>()}});
    }
    p.cloud.Validate();
    s.objects.push_back(std::move(p));
  }
  if (j.contains("views")) {
    for (const auto& v : j["views"]) {
      ViewMeta m;
      m.view_id = v.at("view_id").get<int>();
      for (const auto& [k, c] : v.at("visible").items()) {
        LSVG_VALIDATE(c.get<int>() >= 0, "negative visible count");
        m.visible_point_count[std::stoi(k)] = c.get<int>();
      }
      s.views.push_back(std::move(m));
    }
  }
  return s;
}

Dataset Dataset::ParseJsonl(std::istream& in, const ClassVocabulary& vocab,
                            const std::string& source) {
  Dataset d;
  std::map<std::string, size_t> index;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      const auto scene_id = j.at("scene_id").get<std::string>();
      auto it = index.find(scene_id);
      if (j.contains("objects")) {
        LSVG_VALIDATE(it == index.end(), "scene '" + scene_id + "' defined twice");
        it = index.emplace(scene_id, d.scenes.size()).first;
        d.scenes.push_back(SceneFromJson(j, vocab));
      }
      LSVG_VALIDATE(it != index.end(), "scene '" + scene_id + "' referenced before definition");
      GroundingSample s;
      s.scene_index = it->second;
      s.utterance = j.at("utterance").get<std::string>();
      s.target_id = j.at("target_id").get<int>();
      const Scene& scene = d.scenes[s.scene_index];
      bool found = false;
      for (const auto& o : scene.objects) found |= o.id == s.target_id;
      LSVG_VALIDATE(found, "target_id " + std::to_string(s.target_id) + " not in scene");
      const auto tags = j.value("tags", nlohmann::json::object());
      s.tags.relation = tags.value("relation", std::string());
      s.tags.view_dependent = tags.value("view", std::string("view_indep")) == "view_dep";
      s.tags.hard = CountDistractors(scene, s.target_id) > kEasyMaxDistractors;
      d.samples.push_back(std::move(s));
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + e.what());
    }
  }
  return d;
}

Dataset Dataset::LoadJsonl(const std::string& path, const ClassVocabulary& vocab) {
  std::ifstream in(path);
  LSVG_VALIDATE(in.good(), "cannot open dataset " + path);
  return ParseJsonl(in, vocab, path);
}

void Dataset::WriteJsonl(std::ostream& out, const ClassVocabulary& vocab) const {
  std::vector<bool> written(scenes.size(), false);
  for (const auto& s : samples) {
    nlohmann::json j;
    if (!written[s.scene_index]) {
      j = SceneToJson(scenes[s.scene_index], vocab);
      written[s.scene_index] = true;
    } else {
      j["scene_id"] = scenes[s.scene_index].id;
    }
    j["utterance"] = s.utterance;
    j["target_id"] = s.target_id;
    j["tags"] = {{"difficulty", s.tags.hard ? "hard" : "easy"},
                 {"view", s.tags.view_dependent ? "view_dep" : "view_indep"},
                 {"relation", s.tags.relation}};
    out << j.dump() << "\n";
  }
}

void Dataset::SaveJsonl(const std::string& path, const ClassVocabulary& vocab) const {
  std::ofstream out(path);
  LSVG_VALIDATE(out.good(), "cannot write dataset " + path);
  WriteJsonl(out, vocab);
}

Dataset Dataset::SliceScenes(size_t begin, size_t end) const {
  Dataset d;
  for (size_t i = begin; i < std::min(end, scenes.size()); ++i) d.scenes.push_back(scenes[i]);
  for (const auto& s : samples) {
    if (s.scene_index < begin || s.scene_index >= end) continue;
    GroundingSample c = s;
    c.scene_index -= begin;
    d.samples.push_back(std::move(c));
  }
  return d;
}

double ChanceAccuracy(const Dataset& d) {
  if (d.samples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : d.samples) sum += 1.0 / d.scene_of(s).objects.size();
  return sum / d.samples.size();
}

}  // namespace lsvg
