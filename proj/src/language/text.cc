#include "lsvg/language/text.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "lsvg/common/error.h"

namespace lsvg {
namespace {

constexpr size_t kMaxNgram = 3;

const std::unordered_map<std::string, std::string>& Irregulars() {
  static const auto* table = new std::unordered_map<std::string, std::string>{
      {"shelves", "shelf"}, {"bookshelves", "bookshelf"}, {"knives", "knife"},
      {"leaves", "leaf"},   {"halves", "half"},           {"wolves", "wolf"},
      {"lives", "life"},    {"wives", "wife"},            {"people", "person"},
      {"children", "child"}, {"men", "man"},             {"women", "woman"},
      {"feet", "foot"},     {"teeth", "tooth"},           {"mice", "mouse"},
      {"couches", "couch"}, {"benches", "bench"},         {"boxes", "box"},
      // Words that end in "s" but are not plurals.
      {"this", "this"},     {"is", "is"},                 {"was", "was"},
      {"has", "has"},       {"does", "does"},             {"its", "its"},
      {"his", "his"},       {"as", "as"},                 {"yes", "yes"},
      {"always", "always"}, {"towards", "towards"},       {"across", "across"},
      {"series", "series"}, {"species", "species"},       {"news", "news"},
      {"lens", "lens"},     {"gas", "gas"},               {"canvas", "canvas"},
      {"sofas", "sofa"}};
  return *table;
}

bool EndsWith(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string Join(const std::vector<std::string>& parts, size_t begin, size_t n) {
  std::string out;
  for (size_t i = begin; i < begin + n; ++i) {
    if (i > begin) out += ' ';
    out += parts[i];
  }
  return out;
}

std::string LemmatizePhrase(std::string_view phrase) {
  std::vector<std::string> lemmas;
  for (const auto& t : Tokenize(phrase)) lemmas.push_back(Lemmatize(t));
  return Join(lemmas, 0, lemmas.size());
}

}  // namespace

ClassVocabulary::ClassVocabulary(std::vector<std::string> classes,
                                 std::map<std::string, std::string> synonyms)
    : classes_(std::move(classes)) {
  std::set<std::string> seen;
  for (const auto& c : classes_) {
    LSVG_VALIDATE(!c.empty(), "vocabulary: empty class name");
    LSVG_VALIDATE(seen.insert(c).second, "vocabulary: duplicate class '" + c + "'");
  }
  for (const auto& [lemma, cls] : synonyms) {
    const int id = IdOf(cls);
    LSVG_VALIDATE(id >= 0, "vocabulary: synonym '" + lemma +
                               "' maps to unknown class '" + cls + "'");
    synonyms_[lemma] = id;
  }
  BuildPhrases();
}

void ClassVocabulary::BuildPhrases() {
  auto add = [this](const std::string& phrase, int id) {
    auto& ids = phrases_[phrase];
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  };
  for (size_t i = 0; i < classes_.size(); ++i)
    add(LemmatizePhrase(classes_[i]), static_cast<int>(i));
  for (const auto& [lemma, id] : synonyms_) add(LemmatizePhrase(lemma), id);
  for (auto& [_, ids] : phrases_) std::sort(ids.begin(), ids.end());
}

ClassVocabulary ClassVocabulary::FromJson(const nlohmann::json& j) {
  LSVG_VALIDATE(j.is_object(), "vocabulary: expected a JSON object");
  LSVG_VALIDATE(j.contains("classes") && j["classes"].is_array(),
                "vocabulary: /classes must be an array");
  std::vector<std::string> classes;
  for (size_t i = 0; i < j["classes"].size(); ++i) {
    LSVG_VALIDATE(j["classes"][i].is_string(),
                  "vocabulary: /classes/" + std::to_string(i) + " must be a string");
    classes.push_back(j["classes"][i].get<std::string>());
  }
  std::map<std::string, std::string> synonyms;
  if (j.contains("synonyms")) {
    LSVG_VALIDATE(j["synonyms"].is_object(), "vocabulary: /synonyms must be an object");
    for (const auto& [k, v] : j["synonyms"].items()) {
      LSVG_VALIDATE(v.is_string(), "vocabulary: /synonyms/" + k + " must be a string");
      synonyms[k] = v.get<std::string>();
    }
  }
  return ClassVocabulary(std::move(classes), std::move(synonyms));
}

ClassVocabulary ClassVocabulary::Load(const std::string& path) {
  std::ifstream in(path);
  LSVG_VALIDATE(in.good(), "cannot open vocabulary file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("vocabulary " + path + ": " + e.what());
  }
  return FromJson(j);
}

nlohmann::json ClassVocabulary::ToJson() const {
  nlohmann::json syn = nlohmann::json::object();
  for (const auto& [lemma, id] : synonyms_) syn[lemma] = classes_[id];
  return {{"classes", classes_}, {"synonyms", syn}};
}

void ClassVocabulary::Save(const std::string& path) const {
  std::ofstream out(path);
  LSVG_VALIDATE(out.good(), "cannot write vocabulary file " + path);
  out << ToJson().dump(2) << "\n";
}

int ClassVocabulary::IdOf(std::string_view name) const {
  for (size_t i = 0; i < classes_.size(); ++i)
    if (classes_[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

namespace {

std::string StripPlural(const std::string& t) {
  if (t.size() > 4 && EndsWith(t, "ies")) return t.substr(0, t.size() - 3) + "y";
  for (std::string_view suffix : {"sses", "xes", "zes", "ches", "shes"}) {
    if (t.size() > suffix.size() + 1 && EndsWith(t, suffix))
      return t.substr(0, t.size() - 2);
  }
  if (t.size() > 3 && EndsWith(t, "s") && !EndsWith(t, "ss") &&
      !EndsWith(t, "us") && !EndsWith(t, "is")) {
    return t.substr(0, t.size() - 1);
  }
  return t;
}

}  // namespace

std::string Lemmatize(std::string_view token) {
  const auto& irregular = Irregulars();
  std::string t(token);
  if (auto it = irregular.find(t); it != irregular.end()) return it->second;
  t = StripPlural(t);
  // "mens" -> "men" -> "man"
  if (auto it = irregular.find(t); it != irregular.end()) return it->second;
  return t;
}

bool IsStopword(std::string_view lemma) {
  static const auto* words = new std::unordered_set<std::string>{
      "a",     "an",   "the",   "that",   "this",  "these", "those",
      "is",    "are",  "was",   "be",     "which", "who",   "it",
      "its",   "one",  "of",    "to",     "in",    "on",    "at",
      "from",  "by",   "with",  "and",    "or",    "there", "find",
      "select", "pick", "facing", "among", "please", "choose", "when"};
  return words->count(std::string(lemma)) > 0;
}

std::string BuildPrompt(const ClassVocabulary& vocab, std::string_view class_name) {
  LSVG_VALIDATE(!class_name.empty(), "BuildPrompt: empty class name");
  LSVG_VALIDATE(vocab.IdOf(class_name) >= 0,
                "BuildPrompt: unknown class '" + std::string(class_name) + "'");
  return "The object is " + std::string(class_name);
}

std::set<int> MatchClasses(const std::vector<std::string>& lemmas,
                           const ClassVocabulary& vocab) {
  std::vector<std::string> content;
  for (const auto& l : lemmas)
    if (!IsStopword(l)) content.push_back(l);
  std::set<int> matched;
  const auto& phrases = vocab.phrases();
  size_t p = 0;
  while (p < content.size()) {
    size_t consumed = 0;
    for (size_t n = std::min(kMaxNgram, content.size() - p); n >= 1; --n) {
      auto it = phrases.find(Join(content, p, n));
      if (it != phrases.end()) {
        matched.insert(it->second.begin(), it->second.end());
        consumed = n;
        break;
      }
    }
    p += consumed > 0 ? consumed : 1;
  }
  return matched;
}

Utterance ParseUtterance(std::string_view raw, const ClassVocabulary& vocab) {
  Utterance u;
  u.raw = std::string(raw);
  u.tokens = Tokenize(raw);
  for (const auto& t : u.tokens) u.lemmas.push_back(Lemmatize(t));
  u.matched_classes = MatchClasses(u.lemmas, vocab);
  return u;
}

}  // namespace lsvg
