#ifndef LSVG_ALIGNMENT_TEACHER_H_
#define LSVG_ALIGNMENT_TEACHER_H_

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "lsvg/geometry/geometry.h"
#include "lsvg/language/text.h"

namespace lsvg {

// Frozen teacher embeddings: per-class prompt vectors (F_T*) and per
// (scene, object, view) crop vectors (F_I*).
class TeacherStore {
 public:
  using Key = std::tuple<std::string, int, int>;

  TeacherStore() = default;
  explicit TeacherStore(size_t dim) : dim_(dim) {}

  // Validates the interchange schema; errors carry a JSON path. When `vocab`
  // is given every vocabulary class must have a prompt.
  static TeacherStore FromJson(const nlohmann::json& j, const ClassVocabulary* vocab = nullptr);
  static TeacherStore Load(const std::string& path, const ClassVocabulary* vocab = nullptr);
  nlohmann::json ToJson() const;
  void Save(const std::string& path) const;

  size_t dim() const { return dim_; }
  void SetPrompt(const std::string& class_name, std::vector<double> emb);
  void SetObject(const std::string& scene, int object, int view, std::vector<double> emb);

  bool HasPrompt(const std::string& class_name) const { return prompts_.count(class_name) > 0; }
  const std::vector<double>& Prompt(const std::string& class_name) const;
  const std::vector<double>* FindObject(const std::string& scene, int object, int view) const;
  // Views with an embedding for this object, ascending.
  std::vector<int> ObjectViews(const std::string& scene, int object) const;

  const std::map<std::string, std::vector<double>>& prompts() const { return prompts_; }
  const std::map<Key, std::vector<double>>& objects() const { return objects_; }

 private:
  void CheckVector(const std::vector<double>& v, const std::string& what) const;

  size_t dim_ = 0;
  std::map<std::string, std::vector<double>> prompts_;
  std::map<Key, std::vector<double>> objects_;
};

// Stand-in for the frozen 2D teacher: orthonormal prompt vectors per class
// and object vectors = normalize(prompt + N(0, sigma^2) noise). Noise is a
// pure function of (seed, scene, object, view).
class SynthTeacher {
 public:
  // Throws ValidationError when dim < |vocab|.
  SynthTeacher(const ClassVocabulary& vocab, size_t dim, double sigma, uint64_t seed);

  std::vector<double> ObjectEmbedding(int class_id, const std::string& scene, int object,
                                      int view) const;
  // Prompt table only.
  TeacherStore Prompts() const;
  // Prompts plus one embedding for every labeled object and every view that
  // sees it (always including its max-coverage view).
  TeacherStore Materialize(const std::vector<Scene>& scenes) const;

 private:
  ClassVocabulary vocab_;
  size_t dim_;
  double sigma_;
  uint64_t seed_;
  std::vector<std::vector<double>> prompts_;
};

}  // namespace lsvg

#endif  // LSVG_ALIGNMENT_TEACHER_H_
