#include "lsvg/pipeline/training.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "lsvg/common/error.h"
#include "lsvg/numerics/ops.h"

namespace lsvg {
namespace {

DiffArray MeanOf(const std::vector<DiffArray>& xs) {
  if (xs.empty()) return DiffArray::Scalar(0.0);
  DiffArray acc = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) acc = ops::Add(acc, xs[i]);
  return ops::Scale(acc, 1.0 / static_cast<double>(xs.size()));
}

size_t Argmax(std::span<const double> v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

int IndexOf(const std::vector<ObjectProposal>& objects, int id) {
  for (size_t i = 0; i < objects.size(); ++i)
    if (objects[i].id == id) return static_cast<int>(i);
  throw ValidationError("target " + std::to_string(id) + " is not an object of the scene");
}

int ClassOf(const ObjectProposal& o) {
  LSVG_VALIDATE(o.class_id.has_value(), "object " + std::to_string(o.id) + " has no class label");
  return *o.class_id;
}

// Teacher prompt rows for the given classes; zeros without a teacher.
DiffArray TeacherPrompts(const TeacherStore* teacher, const ClassVocabulary& vocab,
                         const std::vector<int>& classes, size_t dim) {
  std::vector<double> rows;
  for (int c : classes) {
    if (teacher && teacher->HasPrompt(vocab.name(c))) {
      const auto& p = teacher->Prompt(vocab.name(c));
      rows.insert(rows.end(), p.begin(), p.end());
    } else {
      rows.insert(rows.end(), dim, 0.0);
    }
  }
  return DiffArray::Constant({classes.size(), dim}, std::move(rows));
}

}  // namespace

void TrainConfig::Validate() const {
  for (double l : {lambda1, lambda2, lambda3})
    LSVG_VALIDATE(l > 0.0 && l < 1.0, "train config: lambdas must lie in (0, 1)");
  LSVG_VALIDATE(lr > 0.0, "train config: lr must be positive");
  LSVG_VALIDATE(decay > 0.0 && decay <= 1.0, "train config: decay must lie in (0, 1]");
  LSVG_VALIDATE(decay_every > 0 && decay_first <= decay_last, "train config: bad decay milestones");
  LSVG_VALIDATE(batch_size > 0 && epochs > 0, "train config: batch_size and epochs must be positive");
  LSVG_VALIDATE(hybrid_gt_prob >= 0.0 && hybrid_gt_prob <= 1.0,
                "train config: hybrid_gt_prob must lie in [0, 1]");
  LSVG_VALIDATE(jitter_sigma >= 0.0 && drop_fraction >= 0.0 && drop_fraction < 1.0,
                "train config: bad perturbation settings");
  LSVG_VALIDATE(profile == "desk" || profile == "paper", "train config: profile must be desk or paper");
}

nlohmann::json TrainConfig::ToJson() const {
  return {{"lambda1", lambda1},
          {"lambda2", lambda2},
          {"lambda3", lambda3},
          {"batch_size", batch_size},
          {"lr", lr},
          {"decay", decay},
          {"decay_first", decay_first},
          {"decay_last", decay_last},
          {"decay_every", decay_every},
          {"epochs", epochs},
          {"seed", seed},
          {"hybrid_gt_prob", hybrid_gt_prob},
          {"jitter_sigma", jitter_sigma},
          {"drop_fraction", drop_fraction},
          {"use_graph", use_graph},
          {"profile", profile}};
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& j) {
  LSVG_VALIDATE(j.is_object(), "train config: expected a JSON object");
  TrainConfig c;
  const nlohmann::json defaults = c.ToJson();
  for (const auto& [k, v] : j.items()) {
    LSVG_VALIDATE(defaults.contains(k), "train config: unknown key '" + k + "'");
    LSVG_VALIDATE(v.type_name() == defaults[k].type_name() ||
                      (v.is_number() && defaults[k].is_number()),
                  "train config: /" + k + " has the wrong type");
  }
  try {
    c.lambda1 = j.value("lambda1", c.lambda1);
    c.lambda2 = j.value("lambda2", c.lambda2);
    c.lambda3 = j.value("lambda3", c.lambda3);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.decay = j.value("decay", c.decay);
    c.decay_first = j.value("decay_first", c.decay_first);
    c.decay_last = j.value("decay_last", c.decay_last);
    c.decay_every = j.value("decay_every", c.decay_every);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.hybrid_gt_prob = j.value("hybrid_gt_prob", c.hybrid_gt_prob);
    c.jitter_sigma = j.value("jitter_sigma", c.jitter_sigma);
    c.drop_fraction = j.value("drop_fraction", c.drop_fraction);
    c.use_graph = j.value("use_graph", c.use_graph);
    c.profile = j.value("profile", c.profile);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  c.Validate();
  return c;
}

TrainConfig TrainConfig::Load(const std::string& path) {
  std::ifstream in(path);
  LSVG_VALIDATE(in.good(), "cannot open train config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("train config " + path + ": " + e.what());
  }
  return FromJson(j);
}

double LrAt(const TrainConfig& cfg, int epoch) {
  int n = 0;
  for (int m = cfg.decay_first; m <= cfg.decay_last; m += cfg.decay_every)
    if (m < epoch) ++n;
  return cfg.lr * std::pow(cfg.decay, n);
}

ObjectProposal PerturbObject(const ObjectProposal& o, double sigma, double drop_fraction,
                             std::mt19937_64& rng) {
  ObjectProposal p = o;
  std::normal_distribution<double> noise(0.0, sigma);
  const Vec3 shift = sigma > 0 ? Vec3{noise(rng), noise(rng), noise(rng)} : Vec3{};
  p.box.center = {o.box.center.x + shift.x, o.box.center.y + shift.y, o.box.center.z + shift.z};
  const size_t n = o.cloud.size();
  const size_t drop = std::min(n > 0 ? n - 1 : 0,
                               static_cast<size_t>(std::floor(drop_fraction * static_cast<double>(n))));
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = 0; i < drop; ++i) {
    const size_t j = std::uniform_int_distribution<size_t>(i, n - 1)(rng);
    std::swap(idx[i], idx[j]);
  }
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(drop), idx.end());
  p.cloud.points.clear();
  for (size_t k = drop; k < n; ++k) {
    Point q = o.cloud.points[idx[k]];
    q.xyz = {q.xyz.x + shift.x, q.xyz.y + shift.y, q.xyz.z + shift.z};
    p.cloud.points.push_back(q);
  }
  return p;
}

std::vector<ObjectProposal> HybridSample(const std::vector<ObjectProposal>& gt,
                                         const std::vector<ObjectProposal>& perturbed, double p,
                                         std::mt19937_64& rng, std::vector<bool>* from_gt) {
  LSVG_VALIDATE(gt.size() == perturbed.size(),
                "hybrid_sample: " + std::to_string(gt.size()) + " GT objects vs " +
                    std::to_string(perturbed.size()) + " perturbed");
  LSVG_VALIDATE(p >= 0.0 && p <= 1.0, "hybrid_sample: p must lie in [0, 1]");
  std::bernoulli_distribution coin(p);
  std::vector<ObjectProposal> out;
  if (from_gt) from_gt->clear();
  for (size_t i = 0; i < gt.size(); ++i) {
    LSVG_VALIDATE(gt[i].id == perturbed[i].id, "hybrid_sample: object ids differ at position " +
                                                   std::to_string(i));
    const bool take_gt = coin(rng);
    out.push_back(take_gt ? gt[i] : perturbed[i]);
    if (from_gt) from_gt->push_back(take_gt);
  }
  return out;
}

ModelConfig MakeModelConfig(const TrainConfig& cfg, const Dataset& train,
                            const ClassVocabulary& vocab) {
  std::vector<std::string> utterances;
  for (const auto& s : train.samples) utterances.push_back(s.utterance);
  ModelConfig m = ModelConfig::Desk(vocab, BuildTokenVocabulary(utterances, vocab));
  if (cfg.profile == "paper") {
    m.encoder = EncoderConfig::Paper();
    m.text.d_model = m.encoder.out_dim();
    m.interaction.d_model = m.encoder.out_dim();
  }
  m.interaction.use_graph = cfg.use_graph;
  m.seed = cfg.seed;
  m.Validate();
  return m;
}

LossTerms BatchLoss(const Model& model, const TrainConfig& cfg, const Dataset& data,
                    const std::vector<std::pair<size_t, std::vector<size_t>>>& groups,
                    const TeacherStore* teacher, std::mt19937_64& rng) {
  const ModelConfig& mc = model.config();
  const size_t dt = mc.encoder.teacher_dim;
  const DiffArray prompts = model.EncodePrompts();
  const DiffArray prompts_t = model.align().ProjectText(prompts);
  const DiffArray scale = model.align().Scale();

  std::vector<DiffArray> ot, of, ref, txt;
  for (const auto& [scene_index, sample_ids] : groups) {
    const Scene& scene = data.scenes.at(scene_index);
    std::vector<ObjectProposal> perturbed;
    for (const auto& o : scene.objects)
      perturbed.push_back(PerturbObject(o, cfg.jitter_sigma, cfg.drop_fraction, rng));

    SceneBatch batch;
    batch.scene_id = scene.id;
    batch.objects = HybridSample(scene.objects, perturbed, cfg.hybrid_gt_prob, rng);
    std::vector<double> rows;
    std::vector<int> classes;
    for (const auto& o : batch.objects) {
      classes.push_back(ClassOf(o));
      const int view = scene.views.empty()
                           ? 0
                           : SelectView(o.id, scene.views, ViewSelection::kRandom, &rng);
      const auto row = TeacherRow(teacher, dt, scene.id, o.id, view);
      rows.insert(rows.end(), row.begin(), row.end());
      batch.prepared.push_back(PrepareObject(o.cloud, o.box.center, mc.encoder, rng()));
    }
    batch.teacher = DiffArray::Constant({batch.objects.size(), dt}, std::move(rows));

    const SceneForward fwd = model.EncodeScene(batch, prompts);

    // One object per present class so no row has a same-class negative.
    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < classes.size(); ++i) by_class[classes[i]].push_back(i);
    if (by_class.size() >= 2) {
      std::vector<size_t> pick, pick_cls;
      std::vector<int> pick_cls_int;
      for (const auto& [c, members] : by_class) {
        pick.push_back(members[std::uniform_int_distribution<size_t>(0, members.size() - 1)(rng)]);
        pick_cls.push_back(static_cast<size_t>(c));
        pick_cls_int.push_back(c);
      }
      ot.push_back(AlignmentLoss(ops::GatherRows(fwd.projected_objects, pick),
                                 ops::GatherRows(prompts_t, pick_cls),
                                 ops::GatherRows(batch.teacher, pick),
                                 TeacherPrompts(teacher, mc.vocab, pick_cls_int, dt), scale)
                       .total);
    }
    std::vector<size_t> targets(classes.begin(), classes.end());
    of.push_back(ops::CrossEntropy(model.ObjectLogits(fwd.enc.f_o), targets));

    for (size_t sid : sample_ids) {
      const GroundingSample& s = data.samples.at(sid);
      UtteranceInput u = model.PrepareUtterance(s.utterance);
      u.target_index = IndexOf(batch.objects, s.target_id);
      u.target_class = classes[u.target_index];
      const auto g = model.GroundUtterance(fwd, batch, u, classes);
      const size_t ti = static_cast<size_t>(u.target_index);
      const size_t tc = static_cast<size_t>(u.target_class);
      ref.push_back(ops::CrossEntropy(g.scores, std::span<const size_t>(&ti, 1)));
      txt.push_back(ops::CrossEntropy(model.TextLogits(g.text.sentence_emb),
                                      std::span<const size_t>(&tc, 1)));
    }
  }
  LossTerms t;
  t.l_ot = MeanOf(ot);
  t.l_ref = MeanOf(ref);
  t.l_t = MeanOf(txt);
  t.l_of = MeanOf(of);
  t.total = TotalLoss(t.l_ot, t.l_ref, t.l_t, t.l_of, cfg.lambda1, cfg.lambda2, cfg.lambda3);
  return t;
}

TrainResult Train(const TrainConfig& cfg, const Dataset& train, const ClassVocabulary& vocab,
                  const TeacherStore* teacher,
                  const std::function<void(const TrainStats&)>& on_epoch) {
  cfg.Validate();
  return Train(cfg, MakeModelConfig(cfg, train, vocab), train, teacher, on_epoch);
}

TrainResult Train(const TrainConfig& cfg, const ModelConfig& model_cfg, const Dataset& train,
                  const TeacherStore* teacher,
                  const std::function<void(const TrainStats&)>& on_epoch) {
  cfg.Validate();
  LSVG_VALIDATE(!train.samples.empty(), "train: dataset has no samples");
  TrainResult result;
  result.model = std::make_unique<Model>(model_cfg);
  Model& model = *result.model;
  if (teacher)
    LSVG_VALIDATE(teacher->dim() == model.config().encoder.teacher_dim,
                  "train: teacher dim " + std::to_string(teacher->dim()) +
                      " != encoder teacher_dim " +
                      std::to_string(model.config().encoder.teacher_dim));

  std::vector<std::vector<size_t>> by_scene(train.scenes.size());
  for (size_t i = 0; i < train.samples.size(); ++i)
    by_scene.at(train.samples[i].scene_index).push_back(i);
  std::vector<size_t> order;
  for (size_t s = 0; s < by_scene.size(); ++s)
    if (!by_scene[s].empty()) order.push_back(s);

  std::mt19937_64 rng(cfg.seed);
  Adam adam(model.params(), Adam::Options{cfg.lr});
  int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = LrAt(cfg, epoch);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[std::uniform_int_distribution<size_t>(0, i - 1)(rng)]);
    TrainStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    size_t steps_this_epoch = 0;
    size_t pos = 0;
    while (pos < order.size()) {
      std::vector<std::pair<size_t, std::vector<size_t>>> groups;
      size_t n = 0;
      while (pos < order.size() && n < cfg.batch_size) {
        groups.emplace_back(order[pos], by_scene[order[pos]]);
        n += by_scene[order[pos]].size();
        ++pos;
      }
      model.params().ZeroGrad();
      LossTerms t = BatchLoss(model, cfg, train, groups, teacher, rng);
      const double loss = t.total.item();
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << " step " << step << ": L_ot="
           << t.l_ot.item() << " L_ref=" << t.l_ref.item() << " L_t=" << t.l_t.item()
           << " L_of=" << t.l_of.item() << " lr=" << lr << " scenes=[";
        for (size_t g = 0; g < groups.size(); ++g)
          os << (g ? "," : "") << train.scenes[groups[g].first].id;
        os << "]";
        throw Error(os.str());
      }
      t.total.Backward();
      adam.Step(lr);
      ++step;
      ++steps_this_epoch;
      result.step_losses.push_back(loss);
      stats.loss += loss;
      stats.l_ot += t.l_ot.item();
      stats.l_ref += t.l_ref.item();
      stats.l_t += t.l_t.item();
      stats.l_of += t.l_of.item();
    }
    if (on_epoch) {
      const double k = static_cast<double>(std::max<size_t>(steps_this_epoch, 1));
      stats.step = step;
      stats.loss /= k;
      stats.l_ot /= k;
      stats.l_ref /= k;
      stats.l_t /= k;
      stats.l_of /= k;
      on_epoch(stats);
    }
  }
  std::ostringstream state;
  state << rng;
  result.rng_state = state.str();
  return result;
}

nlohmann::json EvalReport::ToJson() const {
  auto b = [](const Bucket& x) {
    return nlohmann::json{{"accuracy", x.accuracy()}, {"correct", x.correct}, {"count", x.count}};
  };
  return {{"overall", b(overall)},
          {"easy", b(easy)},
          {"hard", b(hard)},
          {"view_dep", b(view_dep)},
          {"view_indep", b(view_indep)},
          {"chance", chance},
          {"object_class", b(object_class)},
          {"text_class", b(text_class)}};
}

EvalReport Evaluate(const Model& model, const Dataset& data, const ClassVocabulary& data_vocab,
                    const TeacherStore* teacher) {
  LSVG_VALIDATE(data_vocab == model.config().vocab,
                "class vocabulary mismatch between checkpoint and dataset");
  EvalReport r;
  r.chance = ChanceAccuracy(data);
  std::vector<std::vector<size_t>> by_scene(data.scenes.size());
  for (size_t i = 0; i < data.samples.size(); ++i)
    by_scene.at(data.samples[i].scene_index).push_back(i);

  const DiffArray prompts = model.EncodePrompts();
  for (size_t si = 0; si < data.scenes.size(); ++si) {
    if (by_scene[si].empty()) continue;
    const Scene& scene = data.scenes[si];
    const SceneBatch batch = MakeEvalBatch(scene, model.config().encoder, teacher);
    const SceneForward fwd = model.EncodeScene(batch, prompts);
    for (size_t i = 0; i < scene.objects.size(); ++i) {
      ++r.object_class.count;
      if (fwd.predicted_classes[i] == ClassOf(scene.objects[i])) ++r.object_class.correct;
    }
    for (size_t sid : by_scene[si]) {
      const GroundingSample& s = data.samples[sid];
      UtteranceInput u = model.PrepareUtterance(s.utterance);
      u.target_index = IndexOf(scene.objects, s.target_id);
      u.target_class = ClassOf(scene.objects[u.target_index]);
      const auto g = model.GroundUtterance(fwd, batch, u, fwd.predicted_classes);
      const bool ok = static_cast<int>(Argmax(g.scores.values())) == u.target_index;
      for (Bucket* b : {&r.overall, s.tags.hard ? &r.hard : &r.easy,
                        s.tags.view_dependent ? &r.view_dep : &r.view_indep}) {
        ++b->count;
        if (ok) ++b->correct;
      }
      ++r.text_class.count;
      if (static_cast<int>(Argmax(model.TextLogits(g.text.sentence_emb).values())) ==
          u.target_class)
        ++r.text_class.correct;
    }
  }
  return r;
}

}  // namespace lsvg
