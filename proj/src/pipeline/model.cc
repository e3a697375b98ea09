#include "lsvg/pipeline/model.h"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lsvg/common/error.h"
#include "lsvg/numerics/ops.h"

namespace lsvg {
namespace {

constexpr char kMagic[] = "LSVG1";

uint64_t Fnv1a(std::string_view bytes, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string Hex(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void PutU64(std::ostream& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU32(std::ostream& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t GetU64(std::istream& in) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    LSVG_VALIDATE(c != EOF, "checkpoint truncated");
    v |= static_cast<uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

uint32_t GetU32(std::istream& in) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = in.get();
    LSVG_VALIDATE(c != EOF, "checkpoint truncated");
    v |= static_cast<uint32_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

std::string GetBytes(std::istream& in, uint64_t n) {
  LSVG_VALIDATE(n < (1ull << 34), "checkpoint: implausible field length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  LSVG_VALIDATE(static_cast<uint64_t>(in.gcount()) == n, "checkpoint truncated");
  return s;
}

}  // namespace

ModelConfig ModelConfig::Desk(ClassVocabulary vocab, TokenVocabulary tokens) {
  ModelConfig c;
  c.vocab = std::move(vocab);
  c.tokens = std::move(tokens);
  c.encoder = EncoderConfig::Desk();
  c.text.d_model = 64;
  c.text.heads = 8;
  c.interaction.d_model = 64;
  c.interaction.heads = 8;
  c.interaction.iterations = 2;
  return c;
}

void ModelConfig::Validate() const {
  LSVG_VALIDATE(vocab.size() > 0, "model: empty class vocabulary");
  encoder.Validate();
  interaction.Validate();
  LSVG_VALIDATE(encoder.out_dim() == interaction.d_model && text.d_model == interaction.d_model,
                "model: encoder out_dim, text d_model and interaction d_model must agree");
}

nlohmann::json ModelConfig::ToJson() const {
  return {{"vocab", vocab.ToJson()},         {"tokens", tokens.ToJson()},
          {"encoder", encoder.ToJson()},     {"text", text.ToJson()},
          {"interaction", interaction.ToJson()}, {"seed", seed}};
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab = ClassVocabulary::FromJson(j.at("vocab"));
  c.tokens = TokenVocabulary::FromJson(j.at("tokens"));
  c.encoder = EncoderConfig::FromJson(j.at("encoder"));
  c.text = TextEncoderConfig::FromJson(j.at("text"));
  c.interaction = InteractionConfig::FromJson(j.at("interaction"));
  c.seed = j.value("seed", c.seed);
  c.Validate();
  return c;
}

TokenVocabulary BuildTokenVocabulary(const std::vector<std::string>& utterances,
                                     const ClassVocabulary& vocab) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& u : utterances) corpus.push_back(Tokenize(u));
  for (const auto& c : vocab.classes()) corpus.push_back(Tokenize(BuildPrompt(vocab, c)));
  return TokenVocabulary::Build(corpus);
}

double TotalLoss(double l_ot, double l_ref, double l_t, double l_of, double lambda1,
                 double lambda2, double lambda3) {
  return lambda1 * l_ot + l_ref + lambda2 * l_t + lambda3 * l_of;
}

DiffArray TotalLoss(const DiffArray& l_ot, const DiffArray& l_ref, const DiffArray& l_t,
                    const DiffArray& l_of, double lambda1, double lambda2, double lambda3) {
  return ops::Add(ops::Add(ops::Add(ops::Scale(l_ot, lambda1), l_ref), ops::Scale(l_t, lambda2)),
                  ops::Scale(l_of, lambda3));
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.Validate();
  std::mt19937_64 rng(cfg_.seed);
  const size_t d = cfg_.interaction.d_model;
  text_ = TextEncoder(params_, "text", cfg_.tokens.size(), cfg_.text, rng);
  encoder_ = PointEncoder(params_, "encoder", cfg_.encoder, rng);
  align_ = AlignmentHead(params_, "align", cfg_.encoder.out_dim(), d, cfg_.encoder.teacher_dim, rng);
  object_head_ = ClassHead(params_, "object_head", cfg_.encoder.out_dim(), cfg_.vocab.size(), rng);
  text_head_ = ClassHead(params_, "text_head", d, cfg_.vocab.size(), rng);
  interaction_ = InteractionModule(params_, "interaction", cfg_.interaction, rng);
}

UtteranceInput Model::PrepareUtterance(const std::string& text) const {
  Utterance u = ParseUtterance(text, cfg_.vocab);
  LSVG_VALIDATE(!u.tokens.empty(), "utterance has no tokens");
  UtteranceInput in;
  in.token_ids = cfg_.tokens.Encode(u.tokens);
  in.matched_classes = u.matched_classes;
  return in;
}

DiffArray Model::EncodePrompts() const {
  std::vector<DiffArray> rows;
  for (const auto& c : cfg_.vocab.classes())
    rows.push_back(text_.Encode(cfg_.tokens.Encode(Tokenize(BuildPrompt(cfg_.vocab, c)))).sentence_emb);
  return ops::ConcatRows(rows);
}

SceneForward Model::EncodeScene(const SceneBatch& batch, const DiffArray& prompt_embs) const {
  std::vector<const PreparedObject*> ptrs;
  for (const auto& p : batch.prepared) ptrs.push_back(&p);
  SceneForward f;
  f.enc = encoder_.Encode(ptrs, batch.teacher);
  f.projected_objects = align_.ProjectObjects(f.enc.f_p);
  f.predicted_classes = PredictObjectClasses(f.projected_objects, align_.ProjectText(prompt_embs));
  return f;
}

Model::Grounding Model::GroundUtterance(const SceneForward& scene, const SceneBatch& batch,
                                        const UtteranceInput& u,
                                        const std::vector<int>& graph_classes) const {
  Grounding g;
  g.text = text_.Encode(u.token_ids);
  g.graph = BuildGraph(graph_classes, u.matched_classes);
  std::vector<Box3D> boxes;
  for (const auto& o : batch.objects) boxes.push_back(o.box);
  g.interaction = interaction_.Interact(scene.enc.f_o, boxes, g.graph, g.text);
  g.scores = interaction_.Scores(g.interaction, g.text.sentence_emb);
  return g;
}

std::vector<double> TeacherRow(const TeacherStore* store, size_t dim, const std::string& scene,
                               int object, int view) {
  if (store) {
    LSVG_VALIDATE(store->dim() == dim, "teacher dim " + std::to_string(store->dim()) +
                                           " != model teacher_dim " + std::to_string(dim));
    if (const auto* v = store->FindObject(scene, object, view)) return *v;
    const auto views = store->ObjectViews(scene, object);
    if (!views.empty()) return *store->FindObject(scene, object, views.front());
  }
  return std::vector<double>(dim, 0.0);
}

SceneBatch MakeEvalBatch(const Scene& scene, const EncoderConfig& cfg, const TeacherStore* teacher) {
  SceneBatch b;
  b.scene_id = scene.id;
  b.objects = scene.objects;
  std::vector<double> rows;
  for (const auto& o : scene.objects) {
    const int view = scene.views.empty() ? 0 : SelectView(o.id, scene.views, ViewSelection::kMaxCoverage);
    const auto row = TeacherRow(teacher, cfg.teacher_dim, scene.id, o.id, view);
    rows.insert(rows.end(), row.begin(), row.end());
    const uint64_t seed = Fnv1a(scene.id + "#" + std::to_string(o.id));
    b.prepared.push_back(PrepareObject(o.cloud, o.box.center, cfg, seed));
  }
  b.teacher = DiffArray::Constant({scene.objects.size(), cfg.teacher_dim}, std::move(rows));
  return b;
}

void SaveCheckpoint(const std::string& path, const Model& model, const nlohmann::json& train_cfg,
                    const std::string& rng_state) {
  nlohmann::json cfg = {{"model", model.config().ToJson()}, {"train", train_cfg}};
  cfg["config_hash"] = Hex(Fnv1a(cfg.dump()));
  const std::string cfg_text = cfg.dump();
  std::ofstream out(path, std::ios::binary);
  LSVG_VALIDATE(out.good(), "cannot write checkpoint " + path);
  out.write(kMagic, 5);
  PutU64(out, cfg_text.size());
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  const auto& all = model.params().all();
  PutU64(out, all.size());
  for (const auto& [name, p] : all) {
    PutU32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    PutU64(out, p.rows());
    PutU64(out, p.cols());
    for (double v : p.values()) {
      const float f = static_cast<float>(v);
      uint32_t bits;
      std::memcpy(&bits, &f, sizeof(bits));
      PutU32(out, bits);
    }
  }
  PutU64(out, rng_state.size());
  out.write(rng_state.data(), static_cast<std::streamsize>(rng_state.size()));
  LSVG_VALIDATE(out.good(), "failed writing checkpoint " + path);
}

std::unique_ptr<Model> LoadCheckpoint(const std::string& path, Checkpoint* meta) {
  std::ifstream in(path, std::ios::binary);
  LSVG_VALIDATE(in.good(), "cannot open checkpoint " + path);
  LSVG_VALIDATE(GetBytes(in, 5) == kMagic, path + ": not an LSVG1 checkpoint");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(GetBytes(in, GetU64(in)));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": bad config: " + e.what());
  }
  auto model = std::make_unique<Model>(ModelConfig::FromJson(cfg.at("model")));
  const uint64_t count = GetU64(in);
  LSVG_VALIDATE(count == model->params().all().size(),
                path + ": parameter count does not match the stored config");
  for (uint64_t i = 0; i < count; ++i) {
    const std::string name = GetBytes(in, GetU32(in));
    LSVG_VALIDATE(model->params().Contains(name), path + ": unknown parameter " + name);
    DiffArray p = model->params().Get(name);
    const uint64_t rows = GetU64(in), cols = GetU64(in);
    LSVG_VALIDATE(rows == p.rows() && cols == p.cols(), path + ": shape mismatch for " + name);
    for (double& v : p.mutable_values()) {
      const uint32_t bits = GetU32(in);
      float f;
      std::memcpy(&f, &bits, sizeof(f));
      v = f;
    }
  }
  Checkpoint c;
  c.config = cfg;
  c.rng_state = GetBytes(in, GetU64(in));
  if (meta) *meta = std::move(c);
  return model;
}

std::string FileHash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  LSVG_VALIDATE(in.good(), "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Hex(Fnv1a(ss.str()));
}

}  // namespace lsvg
