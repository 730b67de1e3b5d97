// SPDX-License-Identifier: Apache-2.0

#include "scenechat/train/stages.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "scenechat/core/error.hpp"
#include "scenechat/core/rng.hpp"
#include "scenechat/core/text.hpp"
#include "scenechat/dataset/offline.hpp"
#include "scenechat/nn/ops.hpp"
#include "scenechat/nn/optim.hpp"
#include "scenechat/prompt/prompt.hpp"

namespace scenechat::train {

void StageConfig::validate() const {
  if (stage < 1 || stage > 3) throw ValidationError("stage must be 1, 2 or 3, got " + std::to_string(stage));
  const std::set<std::string> projectors{"f_e", "f_a"};
  const std::set<std::string> with_g{"g", "f_e", "f_a"};
  const std::set<std::string> with_r{"f_e", "f_a", "r"};
  auto names = [](const std::set<std::string>& s) {
    std::string out;
    for (const auto& n : s) out += (out.empty() ? "" : ", ") + n;
    return "{" + out + "}";
  };
  if (stage == 1 && trainable != projectors && trainable != with_g) {
    throw ValidationError("stage 1 trains {f_e, f_a} or {g, f_e, f_a}, got " + names(trainable));
  }
  if (stage > 1 && trainable != with_r) {
    throw ValidationError("stage " + std::to_string(stage) + " trains {f_e, f_a, r}, got " + names(trainable));
  }
  if (!(lr > 0.0)) throw ValidationError("lr must be positive");
  if (steps < 0) throw ValidationError("steps must be >= 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
}

StageConfig StageConfig::defaults(int stage) {
  StageConfig c;
  c.stage = stage;
  if (stage == 1) {
    c.trainable = {"g", "f_e", "f_a"};
    c.lr = 1e-3;
    c.steps = 1500;
    c.batch_size = 16;
  } else {
    c.trainable = {"f_e", "f_a", "r"};
    c.lr = 3e-4;
    c.steps = stage == 2 ? 1500 : 1000;
    c.batch_size = 8;
  }
  return c;
}

nlohmann::json StageConfig::to_json() const {
  return {{"stage", stage},
          {"trainable", std::vector<std::string>(trainable.begin(), trainable.end())},
          {"lr", lr},
          {"steps", steps},
          {"batch_size", batch_size},
          {"seed", seed}};
}

StageConfig StageConfig::from_json(const nlohmann::json& j) {
  try {
    StageConfig c = defaults(j.at("stage").get<int>());
    if (j.contains("trainable")) {
      const auto v = j.at("trainable").get<std::vector<std::string>>();
      c.trainable = std::set<std::string>(v.begin(), v.end());
    }
    c.lr = j.value("lr", c.lr);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("stage config", e.what());
  }
}

nlohmann::json PretrainConfig::to_json() const {
  return {{"steps", steps},
          {"batch_size", batch_size},
          {"lr", lr},
          {"warmup_fraction", warmup_fraction},
          {"slot_scale_min", slot_scale_min},
          {"slot_scale_max", slot_scale_max},
          {"slot_noise", slot_noise},
          {"seed", seed}};
}

PretrainConfig PretrainConfig::from_json(const nlohmann::json& j) {
  PretrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.slot_scale_min = j.value("slot_scale_min", c.slot_scale_min);
  c.slot_scale_max = j.value("slot_scale_max", c.slot_scale_max);
  c.slot_noise = j.value("slot_noise", c.slot_noise);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json StageReport::to_json() const {
  return {{"stage", stage},
          {"steps", steps},
          {"initial_loss", initial_loss},
          {"final_loss", final_loss},
          {"heldout_accuracy", heldout_accuracy},
          {"skipped", skipped},
          {"warnings", warnings}};
}

nn::Var stage1_align_loss(const nn::Var& z, const nn::Var& y) {
  if (z.rows() != y.rows() || z.cols() != y.cols()) throw InvalidInput("stage1_align_loss: shape mismatch");
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    if (std::abs(y.value().row(i).norm() - 1.0) > 1e-9) {
      throw InvalidInput("stage1_align_loss: target row " + std::to_string(i) + " is not unit-norm");
    }
  }
  return nn::cosine_loss(z, y);
}

std::string corpus_fingerprint(const std::vector<dataset::InstructionSample>& corpus) {
  return hex64(fnv1a(dataset::serialize_corpus(corpus)));
}

namespace {

constexpr std::size_t kMaxWarnings = 20;

struct Loop {
  int stage = 0;
  int steps = 0;
  int batch = 1;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::function<double(int)> lr_at;
  std::function<nn::Var(std::size_t, Rng&)> loss_of;
  std::function<std::string(std::size_t)> describe;
  std::function<void(int, nlohmann::json&)> extra;
};

void warn(StageReport& report, const std::string& message) {
  if (report.warnings.size() < kMaxWarnings) report.warnings.push_back(message);
}

void run_loop(TrainingState& state, const Loop& loop, StageReport& report, const StepCallback& on_step) {
  auto& store = state.bundle->store();
  nn::Adam adam(store.trainable_vars());
  store.zero_grad();
  Rng rng(mix_seed(loop.seed, 1000 + static_cast<std::uint64_t>(loop.stage)));
  std::vector<std::size_t> order(loop.samples);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();
  double last_finite = std::nan("");

  for (int step = 0; step < loop.steps; ++step) {
    const double lr = loop.lr_at(step);
    double total = 0.0;
    int used = 0;
    for (int b = 0; b < loop.batch; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(std::span(order));
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      nn::Var loss;
      try {
        loss = loop.loss_of(idx, rng);
      } catch (const ContextOverflow& e) {
        ++report.skipped;
        warn(report, "skipped " + loop.describe(idx) + ": " + e.what());
        continue;
      }
      if (!std::isfinite(loss.item())) {
        throw DivergenceError("stage " + std::to_string(loop.stage) + " step " + std::to_string(step) + ": loss " +
                              std::to_string(loss.item()) + " on " + loop.describe(idx) + " (lr " +
                              std::to_string(lr) + ", last finite batch loss " + std::to_string(last_finite) + ")");
      }
      nn::backward(loss);
      total += loss.item();
      ++used;
    }
    double grad_norm = 0.0;
    if (used > 0) {
      grad_norm = adam.step(lr, 1.0 / used);
      if (!std::isfinite(grad_norm)) {
        throw DivergenceError("stage " + std::to_string(loop.stage) + " step " + std::to_string(step) +
                              ": non-finite gradient norm (lr " + std::to_string(lr) + ", batch loss " +
                              std::to_string(total / used) + ")");
      }
      last_finite = total / used;
    }
    adam.zero_grad();
    nlohmann::json rec = {{"step", ++state.manifest.global_step},
                          {"stage", loop.stage},
                          {"stage_step", step + 1},
                          {"loss", used > 0 ? nlohmann::json(total / used) : nlohmann::json(nullptr)},
                          {"lr", lr},
                          {"grad_norm", grad_norm}};
    if (loop.extra) loop.extra(step + 1, rec);
    state.metrics.push_back(rec);
    if (on_step) on_step(rec);
  }
  report.steps = loop.steps;
}

double mean_loss(const std::vector<std::function<nn::Var()>>& probes, int& skipped) {
  double total = 0.0;
  int n = 0;
  for (const auto& p : probes) {
    try {
      total += p().item();
      ++n;
    } catch (const ContextOverflow&) {
      ++skipped;
    }
  }
  return n > 0 ? total / n : std::nan("");
}

std::map<std::string, const scene::SceneRecord*> index_scenes(const std::vector<scene::SceneRecord>& scenes) {
  std::map<std::string, const scene::SceneRecord*> out;
  for (const auto& s : scenes) out[s.scene_id] = &s;
  return out;
}

void finish_stage(TrainingState& state, int stage, const nlohmann::json& config, const StageReport& report) {
  state.manifest.stage_completed = stage;
  state.manifest.stages.push_back({{"stage", stage}, {"config", config}, {"report", report.to_json()}});
  state.bundle->store().set_trainable({});
}

}  // namespace

StageReport pretrain_lm(TrainingState& state, const std::vector<scene::SceneRecord>& scenes,
                        const std::vector<dataset::CaptionRecord>& brief,
                        const std::vector<dataset::InstructionSample>& corpus, const PretrainConfig& config,
                        const StepCallback& on_step) {
  if (state.manifest.stage_completed > kPretrained) {
    throw ValidationError("the language model is frozen once alignment training has started");
  }
  if (brief.empty() && corpus.empty()) throw InvalidInput("pretraining needs captions or an instruction corpus");
  auto& bundle = *state.bundle;
  const auto by_id = index_scenes(scenes);
  struct Item {
    const scene::SceneRecord* scene;
    int target;
    std::vector<prompt::DialogueTurn> turns;
  };
  std::vector<Item> items;
  auto scene_of = [&](const std::string& id) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw NotFound("sample references unknown scene " + id);
    return it->second;
  };
  for (const auto& c : brief) {
    for (const auto& text : c.captions) {
      items.push_back({scene_of(c.scene_id), c.target_object_id, {{dataset::kDescribeInstruction, text}}});
    }
  }
  for (const auto& s : corpus) items.push_back({scene_of(s.scene_id), s.target_object_id, s.turns});

  bundle.store().set_trainable({"lm", "oracle"});
  const int d = bundle.lm().d_model();
  Loop loop;
  loop.stage = kPretrained;
  loop.steps = config.steps;
  loop.batch = config.batch_size;
  loop.seed = config.seed;
  loop.samples = items.size();
  const int warm = static_cast<int>(config.warmup_fraction * config.steps);
  loop.lr_at = [&](int step) {
    if (step < warm) return config.lr * (step + 1) / warm;
    return nn::cosine_lr(config.lr, step - warm, config.steps - warm);
  };
  loop.describe = [&](std::size_t i) {
    return items[i].scene->scene_id + "/" + std::to_string(items[i].target);
  };
  loop.loss_of = [&](std::size_t i, Rng& rng) {
    const auto& it = items[i];
    auto seq = prompt::assemble_dialogue_layout(static_cast<int>(it.scene->objects.size()) - 1, d, it.turns,
                                                bundle.tokenizer());
    nn::Var slots = bundle.oracle_slots(*it.scene, it.target);
    const double s = rng.uniform(config.slot_scale_min, config.slot_scale_max);
    nn::Matrix noise(slots.rows(), slots.cols());
    for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = rng.normal() * config.slot_noise;
    slots = nn::add(nn::scale(slots, s), nn::Var::constant(noise));
    const auto logits = bundle.lm().forward_mixed(seq, slots);
    return nn::cross_entropy(logits, lm::text_targets(seq));
  };
  StageReport report;
  report.stage = kPretrained;
  run_loop(state, loop, report, on_step);
  if (!state.metrics.empty() && report.steps > 0) {
    const std::size_t k = std::min<std::size_t>(20, static_cast<std::size_t>(report.steps));
    double first = 0.0, last = 0.0;
    const std::size_t n = state.metrics.size();
    for (std::size_t i = 0; i < k; ++i) {
      first += state.metrics[n - report.steps + i].value("loss", 0.0);
      last += state.metrics[n - 1 - i].value("loss", 0.0);
    }
    report.initial_loss = first / k;
    report.final_loss = last / k;
  }
  finish_stage(state, kPretrained, config.to_json(), report);
  return report;
}

std::string nearest_category(const TrainingState& state, const nn::RowVector& z,
                             const std::vector<std::string>& categories) {
  std::string best;
  double best_cos = -2.0;
  const double zn = z.norm();
  for (const auto& c : categories) {
    const double cs = z.dot(state.bundle->lm().class_name_embedding(c)) / std::max(zn, 1e-300);
    if (cs > best_cos) {
      best_cos = cs;
      best = c;
    }
  }
  return best;
}

StageReport run_stage1(TrainingState& state, const std::vector<scene::ObjectRecord>& objects,
                       const StageConfig& config, const Stage1Options& options, const StepCallback& on_step) {
  config.validate();
  if (config.stage != 1) throw ValidationError("run_stage1 needs a stage-1 config");
  const int done = state.manifest.stage_completed;
  if (done != kPretrained && done != 1) {
    throw ValidationError("stage 1 needs a pretrained language model checkpoint (stage_completed = 0), found " +
                          std::to_string(done));
  }
  std::set<std::string> cats;
  for (const auto& o : objects) cats.insert(o.category);
  if (cats.size() < 2) throw InvalidInput("stage 1 needs at least 2 categories");
  const std::vector<std::string> categories(cats.begin(), cats.end());

  // Per-category holdout, chosen by seed.
  Rng split_rng(mix_seed(config.seed, 77));
  std::vector<std::size_t> train_idx, held_idx;
  for (const auto& c : categories) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (objects[i].category == c) idx.push_back(i);
    }
    split_rng.shuffle(std::span(idx));
    const auto n_held = static_cast<std::size_t>(std::lround(options.holdout_fraction * idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) (k < n_held ? held_idx : train_idx).push_back(idx[k]);
  }
  std::sort(held_idx.begin(), held_idx.end());
  if (train_idx.empty()) throw InvalidInput("stage 1 has no training objects after the holdout split");

  auto& bundle = *state.bundle;
  const auto stats = encoder::SceneStats::of(scene::SceneRecord{"stage1", objects});
  std::map<std::string, nn::RowVector> targets;
  for (const auto& c : categories) targets[c] = bundle.lm().class_name_embedding(c);

  auto accuracy = [&] {
    if (held_idx.empty()) return std::nan("");
    int hit = 0;
    for (const auto i : held_idx) {
      const auto z = bundle.encoder().encode_object(objects[i], stats).value();
      hit += nearest_category(state, z.row(0), categories) == objects[i].category;
    }
    return static_cast<double>(hit) / static_cast<double>(held_idx.size());
  };

  bundle.store().set_trainable(config.trainable);
  Loop loop;
  loop.stage = 1;
  loop.steps = config.steps;
  loop.batch = config.batch_size;
  loop.seed = config.seed;
  loop.samples = train_idx.size();
  loop.lr_at = [&](int step) { return nn::cosine_lr(config.lr, step, config.steps); };
  loop.describe = [&](std::size_t i) { return "object " + std::to_string(objects[train_idx[i]].id); };
  loop.loss_of = [&](std::size_t i, Rng&) {
    const auto& o = objects[train_idx[i]];
    return stage1_align_loss(bundle.encoder().encode_object(o, stats), nn::Var::constant(targets.at(o.category)));
  };
  StageReport report;
  report.stage = 1;
  loop.extra = [&](int step, nlohmann::json& rec) {
    if (options.eval_every > 0 && (step % options.eval_every == 0 || step == config.steps)) {
      rec["accuracy"] = accuracy();
    }
  };
  run_loop(state, loop, report, on_step);
  report.heldout_accuracy = accuracy();
  const auto n = state.metrics.size();
  if (report.steps > 0) {
    auto loss_of = [](const nlohmann::json& r) {
      return r.at("loss").is_number() ? r.at("loss").get<double>() : std::nan("");
    };
    report.initial_loss = loss_of(state.metrics[n - static_cast<std::size_t>(report.steps)]);
    report.final_loss = loss_of(state.metrics[n - 1]);
  }
  finish_stage(state, 1, config.to_json(), report);
  return report;
}

std::size_t stage2_epoch_size(const std::vector<scene::SceneRecord>& scenes) {
  std::size_t n = 0;
  for (const auto& s : scenes) {
    if (s.objects.size() >= 2) n += s.objects.size();
  }
  return n;
}

namespace {

/// Shared by stages 2 and 3: one dialogue per sample.
struct DialogueItem {
  const scene::SceneRecord* scene;
  int target;
  std::vector<std::vector<prompt::DialogueTurn>> variants;
};

StageReport run_dialogue_stage(TrainingState& state, const std::vector<DialogueItem>& items, const StageConfig& config,
                               int probe_size, const StepCallback& on_step) {
  auto& bundle = *state.bundle;
  const int d = bundle.lm().d_model();
  auto loss_for = [&](const DialogueItem& it, std::size_t variant) {
    const auto seq = prompt::assemble_dialogue_layout(static_cast<int>(it.scene->objects.size()) - 1, d,
                                                      it.variants[variant], bundle.tokenizer());
    const auto slots = bundle.encoder().encode_scene_var(*it.scene, it.target);
    return lm::lm_loss(bundle.lm().forward_mixed(seq, slots), seq);
  };

  std::vector<std::function<nn::Var()>> probes;
  {
    Rng probe_rng(mix_seed(config.seed, 55));
    std::vector<std::size_t> idx(items.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    probe_rng.shuffle(std::span(idx));
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(probe_size, 0))));
    for (const auto i : idx) probes.push_back([&, i] { return loss_for(items[i], 0); });
  }

  StageReport report;
  report.stage = config.stage;
  bundle.store().set_trainable({});
  report.initial_loss = mean_loss(probes, report.skipped);

  bundle.store().set_trainable(config.trainable);
  Loop loop;
  loop.stage = config.stage;
  loop.steps = config.steps;
  loop.batch = config.batch_size;
  loop.seed = config.seed;
  loop.samples = items.size();
  loop.lr_at = [&](int step) { return nn::cosine_lr(config.lr, step, config.steps); };
  loop.describe = [&](std::size_t i) { return items[i].scene->scene_id + "/" + std::to_string(items[i].target); };
  loop.loss_of = [&](std::size_t i, Rng& rng) { return loss_for(items[i], rng.index(items[i].variants.size())); };
  run_loop(state, loop, report, on_step);

  bundle.store().set_trainable({});
  int ignored = 0;
  report.final_loss = mean_loss(probes, ignored);
  return report;
}

}  // namespace

StageReport run_stage2(TrainingState& state, const std::vector<scene::SceneRecord>& scenes,
                       const std::vector<dataset::CaptionRecord>& captions, const StageConfig& config,
                       const Stage2Options& options, const StepCallback& on_step) {
  config.validate();
  if (config.stage != 2) throw ValidationError("run_stage2 needs a stage-2 config");
  const int done = state.manifest.stage_completed;
  const bool resume = done == 2;
  if (!resume) {
    if (options.two_stage) {
      if (done != kPretrained) {
        throw ValidationError("two-stage training starts from a pretrained language model checkpoint, found stage " +
                              std::to_string(done));
      }
    } else if (done != 1) {
      throw ValidationError("stage 2 requires a checkpoint that completed stage 1, found stage " +
                            std::to_string(done) + " (use the two-stage flag to skip stage 1)");
    }
  }

  std::map<std::pair<std::string, int>, const dataset::CaptionRecord*> by_key;
  for (const auto& c : captions) by_key[{c.scene_id, c.target_object_id}] = &c;
  std::vector<DialogueItem> items;
  for (const auto& s : scenes) {
    if (s.objects.size() < 2) continue;
    for (const auto& o : s.objects) {
      const auto it = by_key.find({s.scene_id, o.id});
      if (it == by_key.end() || it->second->captions.empty()) {
        throw InvalidInput("no brief caption for " + s.scene_id + "/" + std::to_string(o.id));
      }
      DialogueItem item{&s, o.id, {}};
      for (const auto& c : it->second->captions) item.variants.push_back({{dataset::kDescribeInstruction, c}});
      items.push_back(std::move(item));
    }
  }
  if (items.empty()) throw InvalidInput("stage 2 has no scenes with at least 2 objects");

  if (!state.manifest.relation_zeroed) {
    state.bundle->encoder().init_relation_zero();
    state.manifest.relation_zeroed = true;
  }
  if (options.two_stage) state.manifest.two_stage = true;
  auto report = run_dialogue_stage(state, items, config, options.probe_size, on_step);
  finish_stage(state, 2, config.to_json(), report);
  return report;
}

StageReport run_stage3(TrainingState& state, const std::vector<scene::SceneRecord>& scenes,
                       const std::vector<dataset::InstructionSample>& corpus, const StageConfig& config,
                       const Stage3Options& options, const StepCallback& on_step) {
  config.validate();
  if (config.stage != 3) throw ValidationError("run_stage3 needs a stage-3 config");
  const int done = state.manifest.stage_completed;
  if (done != 2 && done != 3) {
    throw ValidationError("stage 3 requires a checkpoint that completed stage 2, found stage " + std::to_string(done));
  }
  if (corpus.empty()) throw InvalidInput("stage 3 needs a non-empty instruction corpus");
  const auto by_id = index_scenes(scenes);
  std::vector<DialogueItem> items;
  for (const auto& s : corpus) {
    if (auto bad = dataset::validate_sample(s)) {
      throw ValidationError("corpus sample " + s.scene_id + "/" + std::to_string(s.target_object_id) + ": " + *bad);
    }
    const auto it = by_id.find(s.scene_id);
    if (it == by_id.end()) throw NotFound("corpus references unknown scene " + s.scene_id);
    it->second->at(s.target_object_id);
    items.push_back({it->second, s.target_object_id, {s.turns}});
  }
  auto report = run_dialogue_stage(state, items, config, options.probe_size, on_step);
  state.manifest.corpus_fingerprint = corpus_fingerprint(corpus);
  finish_stage(state, 3, config.to_json(), report);
  return report;
}

}  // namespace scenechat::train
