// lsvg command line: dataset generation, synthetic teacher, training,
// evaluation and single-utterance grounding.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsvg/alignment/teacher.h"
#include "lsvg/common/error.h"
#include "lsvg/pipeline/dataset.h"
#include "lsvg/pipeline/generator.h"
#include "lsvg/pipeline/model.h"
#include "lsvg/pipeline/training.h"

namespace {

using namespace lsvg;

std::string VocabSidecar(const std::string& data_path) { return data_path + ".vocab.json"; }

ClassVocabulary LoadVocab(const std::string& explicit_path, const std::string& data_path) {
  return ClassVocabulary::Load(explicit_path.empty() ? VocabSidecar(data_path) : explicit_path);
}

// Write to a temporary sibling, then rename over the target.
void WriteAtomically(const std::string& path, const std::function<void(const std::string&)>& write) {
  const std::string tmp = path + ".tmp";
  write(tmp);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  LSVG_VALIDATE(!ec, "cannot move " + tmp + " to " + path + ": " + ec.message());
}

std::unique_ptr<TeacherStore> MaybeTeacher(const std::string& path, const ClassVocabulary& vocab) {
  if (path.empty()) return nullptr;
  return std::make_unique<TeacherStore>(TeacherStore::Load(path, &vocab));
}

// A scene file holds one scene object (dataset line layout); a .jsonl file
// needs --scene-id.
Scene LoadScene(const std::string& path, const std::string& scene_id, const ClassVocabulary& vocab) {
  if (path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0) {
    const Dataset d = Dataset::LoadJsonl(path, vocab);
    LSVG_VALIDATE(!scene_id.empty() || d.scenes.size() == 1,
                  path + " holds several scenes; pass --scene-id");
    for (const auto& s : d.scenes)
      if (scene_id.empty() || s.id == scene_id) return s;
    throw ValidationError("scene '" + scene_id + "' not found in " + path);
  }
  std::ifstream in(path);
  LSVG_VALIDATE(in.good(), "cannot open scene file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("scene " + path + ": " + e.what());
  }
  Scene s = SceneFromJson(j, vocab);
  if (s.views.empty()) s.views = ComputeViews(s);
  return s;
}

struct GroundArgs {
  std::string ckpt, scene, scene_id, text, teacher;
  bool gt_classes = false;
  size_t top_k = 10;
};

struct GroundRun {
  std::unique_ptr<Model> model;
  Scene scene;
  SceneBatch batch;
  UtteranceInput u;
  Model::Grounding g;
  std::vector<int> graph_classes;
};

GroundRun RunGrounding(const GroundArgs& a) {
  GroundRun r;
  r.model = LoadCheckpoint(a.ckpt);
  const ClassVocabulary& vocab = r.model->config().vocab;
  r.scene = LoadScene(a.scene, a.scene_id, vocab);
  LSVG_VALIDATE(!r.scene.objects.empty(), "scene has no objects");
  auto teacher = MaybeTeacher(a.teacher, vocab);
  r.batch = MakeEvalBatch(r.scene, r.model->config().encoder, teacher.get());
  const SceneForward fwd = r.model->EncodeScene(r.batch, r.model->EncodePrompts());
  r.graph_classes = fwd.predicted_classes;
  if (a.gt_classes) {
    for (size_t i = 0; i < r.scene.objects.size(); ++i) {
      const auto& o = r.scene.objects[i];
      LSVG_VALIDATE(o.class_id.has_value(),
                    "--gt-classes needs a class on every object (object " + std::to_string(o.id) + ")");
      r.graph_classes[i] = *o.class_id;
    }
  }
  r.u = r.model->PrepareUtterance(a.text);
  r.g = r.model->GroundUtterance(fwd, r.batch, r.u, r.graph_classes);
  return r;
}

std::vector<int> ObjectIds(const Scene& s) {
  std::vector<int> ids;
  for (const auto& o : s.objects) ids.push_back(o.id);
  return ids;
}

void AddGroundOptions(CLI::App* cmd, GroundArgs& a) {
  cmd->add_option("--ckpt", a.ckpt, "checkpoint")->required();
  cmd->add_option("--scene", a.scene, "scene JSON, or dataset .jsonl with --scene-id")->required();
  cmd->add_option("--text", a.text, "utterance")->required();
  cmd->add_option("--scene-id", a.scene_id, "scene to pick from a .jsonl dataset");
  cmd->add_option("--teacher", a.teacher, "teacher store JSON");
  cmd->add_flag("--gt-classes", a.gt_classes, "build the graph from labeled classes");
}

int Run(int argc, char** argv) {
  CLI::App app{"lsvg: language-guided 3D visual grounding"};
  app.require_subcommand(1);

  GenConfig gen;
  std::string gen_out, gen_val_out;
  size_t gen_val = 0;
  auto* g = app.add_subcommand("gen-scenes", "generate a synthetic grounding dataset");
  g->add_option("--out", gen_out, "output .jsonl (vocabulary written to <out>.vocab.json)")->required();
  g->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
  g->add_option("--scenes", gen.num_scenes, "number of scenes")->capture_default_str();
  g->add_option("--classes", gen.num_classes, "number of object classes")->capture_default_str();
  g->add_option("--min-objects", gen.min_objects)->capture_default_str();
  g->add_option("--max-objects", gen.max_objects)->capture_default_str();
  g->add_option("--utterances", gen.utterances_per_scene, "utterances per scene")->capture_default_str();
  g->add_option("--points", gen.points_per_object, "points per object")->capture_default_str();
  g->add_option("--val-scenes", gen_val, "move the last N scenes to --val-out");
  g->add_option("--val-out", gen_val_out, "validation .jsonl");

  std::string ts_vocab, ts_out, ts_data;
  size_t ts_dim = 0;
  double ts_sigma = 0.0;
  uint64_t ts_seed = 0;
  auto* t = app.add_subcommand("teacher-synth", "synthesize a frozen teacher store");
  t->add_option("--vocab", ts_vocab, "class vocabulary JSON")->required();
  t->add_option("--dim", ts_dim, "embedding width")->required();
  t->add_option("--sigma", ts_sigma, "object noise")->required();
  t->add_option("--out", ts_out, "output JSON")->required();
  t->add_option("--data", ts_data, "dataset whose objects get embeddings");
  t->add_option("--seed", ts_seed, "noise seed")->capture_default_str();

  std::string tr_data, tr_teacher, tr_config, tr_out, tr_vocab;
  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--data", tr_data, "training .jsonl")->required();
  tr->add_option("--teacher", tr_teacher, "teacher store JSON");
  tr->add_option("--config", tr_config, "train config JSON");
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr->add_option("--vocab", tr_vocab, "class vocabulary (default <data>.vocab.json)");

  std::string ev_ckpt, ev_data, ev_report, ev_teacher, ev_vocab;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
  ev->add_option("--data", ev_data, "evaluation .jsonl")->required();
  ev->add_option("--report", ev_report, "report JSON path")->required();
  ev->add_option("--teacher", ev_teacher, "teacher store JSON");
  ev->add_option("--vocab", ev_vocab, "class vocabulary (default <data>.vocab.json)");

  GroundArgs ga;
  auto* gr = app.add_subcommand("ground", "ground one utterance in one scene");
  AddGroundOptions(gr, ga);
  gr->add_option("--top-k", ga.top_k, "attended node pairs to report")->capture_default_str();

  GroundArgs gg;
  auto* gh = app.add_subcommand("graph", "print the language-guided scene graph");
  AddGroundOptions(gh, gg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*g) {
    LSVG_VALIDATE(gen_val == 0 || !gen_val_out.empty(), "--val-scenes needs --val-out");
    LSVG_VALIDATE(gen_val < gen.num_scenes, "--val-scenes must be below --scenes");
    const Dataset d = GenerateScenes(gen);
    const ClassVocabulary vocab = CatalogVocabulary(gen.num_classes);
    const size_t split = gen.num_scenes - gen_val;
    auto write = [&](const Dataset& part, const std::string& path) {
      WriteAtomically(path, [&](const std::string& tmp) { part.SaveJsonl(tmp, vocab); });
      vocab.Save(VocabSidecar(path));
      std::cout << path << ": " << part.scenes.size() << " scenes, " << part.samples.size()
                << " samples, chance " << ChanceAccuracy(part) << "\n";
    };
    write(gen_val ? d.SliceScenes(0, split) : d, gen_out);
    if (gen_val) write(d.SliceScenes(split, gen.num_scenes), gen_val_out);
  } else if (*t) {
    const ClassVocabulary vocab = ClassVocabulary::Load(ts_vocab);
    SynthTeacher synth(vocab, ts_dim, ts_sigma, ts_seed);
    const TeacherStore store =
        ts_data.empty() ? synth.Prompts()
                        : synth.Materialize(Dataset::LoadJsonl(ts_data, vocab).scenes);
    WriteAtomically(ts_out, [&](const std::string& tmp) { store.Save(tmp); });
    std::cout << ts_out << ": " << store.prompts().size() << " prompts, "
              << store.objects().size() << " object embeddings\n";
  } else if (*tr) {
    const ClassVocabulary vocab = LoadVocab(tr_vocab, tr_data);
    const TrainConfig cfg = tr_config.empty() ? TrainConfig{} : TrainConfig::Load(tr_config);
    const Dataset data = Dataset::LoadJsonl(tr_data, vocab);
    auto teacher = MaybeTeacher(tr_teacher, vocab);
    auto result = Train(cfg, data, vocab, teacher.get(), [](const TrainStats& s) {
      std::fprintf(stderr, "epoch %d step %lld lr %.3g loss %.4f (ot %.4f ref %.4f t %.4f of %.4f)\n",
                   s.epoch, static_cast<long long>(s.step), s.lr, s.loss, s.l_ot, s.l_ref, s.l_t,
                   s.l_of);
    });
    WriteAtomically(tr_out, [&](const std::string& tmp) {
      SaveCheckpoint(tmp, *result.model, cfg.ToJson(), result.rng_state);
    });
    std::cout << tr_out << " " << FileHash(tr_out) << "\n";
  } else if (*ev) {
    auto model = LoadCheckpoint(ev_ckpt);
    const ClassVocabulary vocab = LoadVocab(ev_vocab, ev_data);
    LSVG_VALIDATE(vocab == model->config().vocab,
                  "class vocabulary mismatch between checkpoint and dataset");
    const Dataset data = Dataset::LoadJsonl(ev_data, vocab);
    auto teacher = MaybeTeacher(ev_teacher, vocab);
    const EvalReport report = Evaluate(*model, data, vocab, teacher.get());
    const std::string text = report.ToJson().dump(2);
    WriteAtomically(ev_report, [&](const std::string& tmp) {
      std::ofstream out(tmp);
      LSVG_VALIDATE(out.good(), "cannot write " + tmp);
      out << text << "\n";
    });
    std::cout << text << "\n";
  } else if (*gr) {
    GroundRun r = RunGrounding(ga);
    const auto ids = ObjectIds(r.scene);
    const GroundingResult res = InteractionModule::Ground(r.g.scores, r.g.interaction, ids, ga.top_k);
    nlohmann::json j = res.ToJson(ids);
    j["graph"] = GraphToJson(r.g.graph, ids, {});
    std::cout << j.dump(2) << "\n";
  } else if (*gh) {
    GroundRun r = RunGrounding(gg);
    std::vector<std::string> names;
    for (int c : r.u.matched_classes) names.push_back(r.model->config().vocab.name(c));
    std::cout << GraphToJson(r.g.graph, ObjectIds(r.scene), names).dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const lsvg::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
