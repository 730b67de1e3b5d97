// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Offline only; the judge is the rule-based one.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "scenechat/chat/assistant.hpp"
#include "scenechat/core/text.hpp"
#include "scenechat/dataset/offline.hpp"
#include "scenechat/dataset/requests.hpp"
#include "scenechat/dataset/sample.hpp"
#include "scenechat/dataset/textualize.hpp"
#include "scenechat/judge/eval.hpp"
#include "scenechat/judge/judge.hpp"
#include "scenechat/prompt/prompt.hpp"
#include "scenechat/scene/scene_io.hpp"
#include "scenechat/scene/synthetic.hpp"
#include "scenechat/train/checkpoint.hpp"
#include "scenechat/train/diagnostics.hpp"
#include "scenechat/train/pipeline.hpp"
#include "scenechat/train/stages.hpp"

using namespace scenechat;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

void report(const std::string& name, bool pass, const std::string& detail, double secs, double budget) {
  const bool in_time = secs <= budget;
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << "  " << name << ": " << detail << " [" << fmt(secs, 3) << " s"
            << (in_time ? "" : ", over the " + fmt(budget, 4) + " s budget") << "]" << std::endl;
}

void note(const std::string& text) { std::cout << "      " << text << std::endl; }

// 1
void zero_init_identity() {
  const auto t0 = Clock::now();
  train::ModelBundle bundle(train::ModelConfig{}, train::build_tokenizer({}, {}));
  bundle.encoder().init_relation_zero();
  const int d = bundle.config().encoder.d_model;
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int rows = rng.range(2, 33);
    const nn::Matrix x = testutil::random_matrix(rows, d, rng, 0.1 + 10.0 * rng.uniform());
    const nn::Matrix y = bundle.encoder().relate(nn::Var::constant(x)).value();
    worst = std::max(worst, (y - x).cwiseAbs().maxCoeff());
  }
  report("zero-init identity", worst == 0.0, "max |relate(x) - x| = " + fmt(worst) + " over 100 inputs",
         seconds_since(t0), 1.0);
}

// 2
void gradient_checks() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (const auto& name : train::gradcheck_module_names()) {
    const auto r = train::gradcheck_module(name, 0);
    ok = ok && r.passed && r.max_rel_error < 1e-4;
    detail += (detail.empty() ? "" : ", ") + name + " " + fmt(r.max_rel_error, 3);
  }
  report("gradient checks (d = 8, rel < 1e-4)", ok, detail, seconds_since(t0), 120.0);
}

// 3
void permutation_invariance() {
  const auto t0 = Clock::now();
  nn::ParamStore store;
  Rng init(7);
  encoder::GeometryEncoder enc(encoder::EncoderConfig{}, store, init);
  scene::SceneSetSpec spec;
  spec.count = 4;
  spec.seed = 21;
  spec.min_objects = 5;
  spec.max_objects = 5;
  const auto scenes = scene::generate_scene_set(spec);
  Rng rng(8);
  int objects = 0, mismatches = 0;
  for (const auto& s : scenes) {
    for (const auto& o : s.objects) {
      const nn::Matrix base = enc.encode_points(o.cloud).value();
      std::vector<std::size_t> order(o.cloud.points.size());
      for (int t = 0; t < 50; ++t) {
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span(order));
        scene::PointCloud c;
        for (std::size_t i : order) {
          c.points.push_back(o.cloud.points[i]);
          if (o.cloud.has_colors()) c.colors.push_back(o.cloud.colors[i]);
        }
        if (!(enc.encode_points(c).value().array() == base.array()).all()) ++mismatches;
      }
      ++objects;
    }
  }
  report("permutation invariance of g", objects == 20 && mismatches == 0,
         std::to_string(objects) + " objects x 50 permutations, " + std::to_string(mismatches) + " not bitwise equal",
         seconds_since(t0), 10.0);
}

// 4
void freezing_policy() {
  const auto t0 = Clock::now();
  train::BenchmarkSpec spec;
  spec.pretrain_scenes = 20;
  spec.train_scenes = 20;
  spec.eval_scenes = 2;
  spec.labeled_per_category = 16;
  spec.seed = 3;
  const auto b = train::make_benchmark(spec);
  auto st = train::fresh_state(train::ModelConfig{}, train::build_tokenizer(b.pretrain_captions, b.pretrain_corpus));
  auto& store = st.bundle->store();

  bool ok = true;
  std::string detail;
  auto check = [&](const std::string& label, const std::set<std::string>& trainable, const std::function<void()>& run) {
    std::set<std::string> frozen;
    for (const auto& g : store.groups()) {
      if (!trainable.count(g)) frozen.insert(g);
    }
    const auto before = store.serialize(frozen);
    const auto trained_before = store.serialize(trainable);
    run();
    const bool same = store.serialize(frozen) == before;
    const bool moved = store.serialize(trainable) != trained_before;
    ok = ok && same && moved;
    detail += (detail.empty() ? "" : ", ") + label + (same ? " frozen intact" : " FROZEN CHANGED") +
              (moved ? "" : " (trainables unchanged)");
  };

  train::PretrainConfig pc;
  pc.steps = 50;
  check("pretrain", {"lm", "oracle"}, [&] { train::pretrain_lm(st, b.pretrain_scenes, b.pretrain_captions, b.pretrain_corpus, pc); });
  for (int stage = 1; stage <= 3; ++stage) {
    auto cfg = train::StageConfig::defaults(stage);
    cfg.steps = 50;
    check("stage " + std::to_string(stage), cfg.trainable, [&] {
      if (stage == 1) train::run_stage1(st, b.labeled_objects, cfg);
      if (stage == 2) train::run_stage2(st, b.train_scenes, b.train_captions, cfg);
      if (stage == 3) train::run_stage3(st, b.train_scenes, b.train_corpus, cfg);
    });
  }
  report("freezing policy (50 steps per stage)", ok, detail, seconds_since(t0), 300.0);
}

// 8
void format_goldens() {
  const auto t0 = Clock::now();
  std::vector<std::string> bad;

  // Prompt rendering, one to four turns.
  const std::vector<prompt::DialogueTurn> turns{{"Describe this object.", "This is a brown chair."},
                                                {"What color is it?", "It is brown."},
                                                {"What is the closest object to this object?",
                                                 "The closest object to the chair is the table."},
                                                {"How many chairs are in the room?", "There is 1 chair in the room."}};
  std::vector<std::string> texts{"###Human: <target> ", " </target> <scene> ", " </scene> ", " ###Assistant:"};
  for (const auto& t : turns) {
    texts.push_back(t.instruction);
    texts.push_back(" " + t.response + "###");
  }
  const auto tok = lm::Tokenizer::build(texts);
  Rng rng(1);
  const auto embs = encoder::SceneEmbeddings::from_stacked(testutil::random_matrix(3, 4, rng));
  for (int n = 1; n <= 4; ++n) {
    prompt::DialogueHistory h;
    h.turns.assign(turns.begin(), turns.begin() + (n - 1));
    const auto seq = prompt::assemble_prompt(embs, turns[n - 1].instruction, h, tok);
    const auto name = "prompt_turn" + std::to_string(n) + ".txt";
    if (seq.render() != read_file(testutil::data_path("golden/" + name))) bad.push_back(name);
  }

  // Sofa-chair textualization and the requests built on it.
  const auto sofa = scene::load_scene(testutil::data_path("golden/sofa_chair_scene.json"));
  const auto tx = dataset::textualize(sofa, 0, {"a white armchair under the window.", "the corner sofa chair."});
  if (tx.render() != read_file(testutil::data_path("golden/sofa_chair_textualization.txt")))
    bad.push_back("sofa_chair_textualization.txt");
  const std::vector<dataset::InContextExample> examples{dataset::in_context_pool()[0], dataset::in_context_pool()[1]};
  if (dataset::build_caption_request(tx, examples) != read_file(testutil::data_path("golden/caption_request_sofa_chair.txt")))
    bad.push_back("caption_request_sofa_chair.txt");
  const auto tx_plain = dataset::textualize(sofa, 0, {});
  if (dataset::build_conversation_request(tx_plain) !=
      read_file(testutil::data_path("golden/conversation_request_sofa_chair.txt")))
    bad.push_back("conversation_request_sofa_chair.txt");

  // Judge request.
  scene::SceneSetSpec spec;
  spec.count = 1;
  spec.seed = 2;
  spec.points_per_object = 16;
  const auto s = scene::generate_scene_set(spec)[0];
  judge::EvalItem item;
  item.scene_id = s.scene_id;
  item.target_object_id = s.objects[0].id;
  item.kind = dataset::Kind::kConversation;
  item.scene = dataset::textualize(s, item.target_object_id, {"a small object."});
  item.instruction = "What is this object?\nWhat color is this object?";
  item.reference_response = "This is a chair.\nThe chair is brown.";
  item.candidate_response = "It is a table.\nIt is red.";
  if (judge::build_judge_request(item) != read_file(testutil::data_path("golden/judge_request.txt")))
    bad.push_back("judge_request.txt");

  std::string detail = "8 goldens";
  for (const auto& b : bad) detail += ", mismatch " + b;
  report("format goldens", bad.empty(), detail, seconds_since(t0), 1.0);
}

// 9
void aggregation() {
  const auto t0 = Clock::now();
  using K = dataset::Kind;
  struct Case {
    std::vector<std::pair<K, judge::JudgeVerdict>> verdicts;
    std::string overall;
  };
  // Hand-computed: 100 * sum(candidate) / sum(reference), one decimal.
  const std::vector<Case> cases{
      {{{K::kConversation, {8, 10, ""}}, {K::kConversation, {6, 8, ""}}, {K::kConversation, {9, 9, ""}}}, "85.2"},
      {{{K::kConversation, {8, 10, ""}}, {K::kConversation, {8, 10, ""}}, {K::kDetailedCaption, {8, 10, ""}}}, "80.0"},
      {{{K::kConversation, {5, 10, ""}}, {K::kConversation, {5, 10, ""}}, {K::kDetailedCaption, {10, 10, ""}}}, "66.7"},
      {{{K::kDetailedCaption, {7, 9, ""}}, {K::kConversation, {10, 6, ""}}}, "113.3"},
      {{{K::kDetailedCaption, {1, 10, ""}}}, "10.0"},
  };
  std::string detail;
  bool ok = true;
  for (const auto& c : cases) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", judge::relative_score(c.verdicts).overall);
    ok = ok && c.overall == buf;
    detail += (detail.empty() ? "" : ", ") + std::string(buf) + (c.overall == buf ? "" : " (want " + c.overall + ")");
  }
  report("aggregation arithmetic", ok, detail, seconds_since(t0), 1.0);
}

// 10
void dataset_validators() {
  const auto t0 = Clock::now();
  scene::SceneSetSpec spec;
  spec.count = 100;
  spec.seed = 44;
  spec.points_per_object = 16;
  auto samples = dataset::generate_offline(scene::generate_scene_set(spec), {1, 1}, 9);
  samples.resize(std::min<std::size_t>(samples.size(), 200));
  int invalid = 0;
  for (const auto& s : samples) invalid += validate_sample(s).has_value();
  bool ok = samples.size() == 200 && invalid == 0;
  std::string detail = std::to_string(samples.size()) + " offline samples, " + std::to_string(invalid) + " invalid";

  const dataset::InstructionSample* conv = nullptr;
  const dataset::InstructionSample* cap = nullptr;
  for (const auto& s : samples) {
    if (s.kind == dataset::Kind::kConversation && !conv) conv = &s;
    if (s.kind == dataset::Kind::kDetailedCaption && !cap) cap = &s;
  }
  auto expect = [&](const std::string& label, dataset::InstructionSample s, const std::string& reason) {
    const auto got = validate_sample(s);
    const bool hit = got && contains(*got, reason);
    ok = ok && hit;
    detail += "; " + label + " -> " + (got ? "\"" + *got + "\"" : "accepted");
  };
  if (conv && cap) {
    auto short_caption = *cap;
    std::string words;
    for (int i = 0; i < 120; ++i) words += i ? " word" : "word";
    short_caption.turns[0].response = words;
    expect("120 words", short_caption, "word count 120");
    auto empty_turn = *conv;
    empty_turn.turns[1].response = "";
    expect("empty turn", empty_turn, "empty");
    auto delimiter = *conv;
    delimiter.turns[0].response += " ### extra";
    expect("delimiter", delimiter, "###");
  } else {
    ok = false;
    detail += "; corpus lacks a conversation or a caption";
  }
  report("dataset validators", ok, detail, seconds_since(t0), 10.0);
}

// 5, 6, 7: one desk-scale pipeline shared by the three criteria.
struct PipelineOutcome {
  double score_full = 0, score_two_stage = 0, score_no_stage3 = 0;
};

judge::RelativeScoreReport evaluate(const train::TrainingState& st, const std::vector<scene::SceneRecord>& eval_scenes) {
  lm::DecodingOptions dec;
  dec.max_new_tokens = 260;
  chat::Assistant assistant(*st.bundle, dec);
  judge::RuleBasedJudge judge;
  judge::EvalOptions opts;
  opts.num_scenes = 30;
  return judge::run_eval(assistant, eval_scenes, judge, opts).report;
}

void desk_scale_pipeline() {
  const auto t_all = Clock::now();
  const auto b = train::make_benchmark(train::BenchmarkSpec{});
  note("benchmark: " + std::to_string(b.train_scenes.size()) + " training scenes, " +
       std::to_string(b.labeled_objects.size()) + " labeled objects, " + std::to_string(b.eval_scenes.size()) +
       " evaluation scenes");

  auto t0 = Clock::now();
  auto pre = train::fresh_state(train::ModelConfig{}, train::build_tokenizer(b.pretrain_captions, b.pretrain_corpus));
  const auto pr = train::pretrain_lm(pre, b.pretrain_scenes, b.pretrain_captions, b.pretrain_corpus, train::PretrainConfig{});
  const fs::path dir = fs::temp_directory_path() / "scenechat_acceptance_pretrained";
  fs::remove_all(dir);
  train::save_checkpoint(pre, dir.string());
  const double t_pretrain = seconds_since(t0);
  note("language model pretraining: loss " + fmt(pr.initial_loss) + " -> " + fmt(pr.final_loss) + " in " +
       fmt(t_pretrain, 3) + " s");

  // Full three-stage run.
  auto full = train::load_checkpoint(dir.string());
  t0 = Clock::now();
  const auto r1 = train::run_stage1(full, b.labeled_objects, train::StageConfig::defaults(1));
  const double t1 = seconds_since(t0);
  report("stage-1 alignment (held-out accuracy >= 0.90)", r1.heldout_accuracy >= 0.90,
         "accuracy " + fmt(r1.heldout_accuracy) + " after " + std::to_string(r1.steps) + " steps at d = " +
             std::to_string(full.bundle->config().encoder.d_model),
         t1, 900.0);

  t0 = Clock::now();
  const auto r2 = train::run_stage2(full, b.train_scenes, b.train_captions, train::StageConfig::defaults(2));
  const double ratio = r2.final_loss / r2.initial_loss;
  lm::DecodingOptions dec;
  dec.max_new_tokens = 40;
  chat::Assistant assistant(*full.bundle, dec);
  std::vector<std::pair<const scene::SceneRecord*, const scene::ObjectRecord*>> pool;
  for (const auto& s : b.eval_scenes) {
    for (const auto& o : s.objects) pool.push_back({&s, &o});
  }
  Rng trial_rng(50);
  int hits = 0;
  for (int i = 0; i < 50; ++i) {
    const auto& [s, o] = pool[trial_rng.index(pool.size())];
    hits += contains(assistant.respond(*s, o->id, {}, "Describe this object."), o->category);
  }
  const double t2 = seconds_since(t0);
  report("stage-2 learning (loss ratio <= 0.5, category hits >= 80%)", ratio <= 0.5 && hits >= 40,
         "probe loss " + fmt(r2.initial_loss) + " -> " + fmt(r2.final_loss) + " (ratio " + fmt(ratio, 3) + "), " +
             std::to_string(hits) + "/50 held-out descriptions name the category",
         t2, 2700.0);

  t0 = Clock::now();
  const auto no_stage3 = evaluate(full, b.eval_scenes);
  train::run_stage3(full, b.train_scenes, b.train_corpus, train::StageConfig::defaults(3));
  const auto full_eval = evaluate(full, b.eval_scenes);

  auto two = train::load_checkpoint(dir.string());
  train::Stage2Options two_opts;
  two_opts.two_stage = true;
  train::run_stage2(two, b.train_scenes, b.train_captions, train::StageConfig::defaults(2), two_opts);
  train::run_stage3(two, b.train_scenes, b.train_corpus, train::StageConfig::defaults(3));
  const auto two_eval = evaluate(two, b.eval_scenes);
  const double t3 = seconds_since(t0) + t1 + t2 + t_pretrain;
  fs::remove_all(dir);

  const bool ordered = full_eval.overall > two_eval.overall && full_eval.overall > no_stage3.overall;
  report("ablation ordering (full > two-stage, full > no stage 3)", ordered,
         "overall " + fmt(full_eval.overall) + " vs two-stage " + fmt(two_eval.overall) + " vs no stage 3 " +
             fmt(no_stage3.overall),
         t3, 5400.0);
  note("full:        " + full_eval.to_json().dump());
  note("two-stage:   " + two_eval.to_json().dump());
  note("no stage 3:  " + no_stage3.to_json().dump());
  note("pipeline wall time " + fmt(seconds_since(t_all), 4) + " s");
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  zero_init_identity();
  gradient_checks();
  permutation_invariance();
  freezing_policy();
  format_goldens();
  aggregation();
  dataset_validators();
  if (quick) {
    std::cout << "skipped the desk-scale pipeline (--quick)" << std::endl;
  } else {
    desk_scale_pipeline();
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
