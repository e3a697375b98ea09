#ifndef LSVG_LANGUAGE_TEXT_H_
#define LSVG_LANGUAGE_TEXT_H_

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace lsvg {

// Ordered class names (possibly multiword) plus a synonym map from surface
// lemmas to class ids.
class ClassVocabulary {
 public:
  ClassVocabulary() = default;
  ClassVocabulary(std::vector<std::string> classes,
                  std::map<std::string, std::string> synonyms);

  // {"classes": [...], "synonyms": {lemma: class}}. Throws ValidationError.
  static ClassVocabulary FromJson(const nlohmann::json& j);
  static ClassVocabulary Load(const std::string& path);
  nlohmann::json ToJson() const;
  void Save(const std::string& path) const;

  size_t size() const { return classes_.size(); }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::string& name(int id) const { return classes_.at(id); }
  // -1 when unknown.
  int IdOf(std::string_view name) const;
  const std::map<std::string, int>& synonyms() const { return synonyms_; }

  // Lemmatized phrase -> candidate class ids (several when ambiguous).
  const std::map<std::string, std::vector<int>>& phrases() const { return phrases_; }

  bool operator==(const ClassVocabulary& o) const {
    return classes_ == o.classes_ && synonyms_ == o.synonyms_;
  }

 private:
  void BuildPhrases();

  std::vector<std::string> classes_;
  std::map<std::string, int> synonyms_;
  std::map<std::string, std::vector<int>> phrases_;
};

// Lowercases and splits on anything that is not a letter or digit.
std::vector<std::string> Tokenize(std::string_view text);

// Dictionary lookup for irregular forms, then plural suffix rules
// (-ies -> -y; -es after s/x/z/ch/sh; -s), identity otherwise. Idempotent.
std::string Lemmatize(std::string_view token);

bool IsStopword(std::string_view lemma);

// "The object is <class>". Throws ValidationError for empty names and names
// outside the vocabulary.
std::string BuildPrompt(const ClassVocabulary& vocab, std::string_view class_name);

// Greedy left-to-right longest match of contiguous lemma n-grams (n <= 3)
// against class names and synonyms, after dropping stopwords. Each lemma is
// consumed at most once; ambiguous phrases contribute every candidate class.
std::set<int> MatchClasses(const std::vector<std::string>& lemmas,
                           const ClassVocabulary& vocab);

struct Utterance {
  std::string raw;
  std::vector<std::string> tokens;
  std::vector<std::string> lemmas;
  std::set<int> matched_classes;
  int target_id = -1;
};

Utterance ParseUtterance(std::string_view raw, const ClassVocabulary& vocab);

}  // namespace lsvg

#endif  // LSVG_LANGUAGE_TEXT_H_
