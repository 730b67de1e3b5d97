// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include "scenechat/chat/assistant.hpp"
#include "scenechat/chat/http.hpp"
#include "scenechat/chat/service.hpp"
#include "scenechat/core/error.hpp"
#include "scenechat/core/text.hpp"
#include "scenechat/dataset/external.hpp"
#include "scenechat/dataset/offline.hpp"
#include "scenechat/dataset/sample.hpp"
#include "scenechat/judge/eval.hpp"
#include "scenechat/judge/judge.hpp"
#include "scenechat/scene/scene_io.hpp"
#include "scenechat/scene/synthetic.hpp"
#include "scenechat/train/checkpoint.hpp"
#include "scenechat/train/diagnostics.hpp"
#include "scenechat/train/pipeline.hpp"
#include "scenechat/train/stages.hpp"

using namespace scenechat;
namespace fs = std::filesystem;

namespace {

constexpr const char* kDefaultCheckpoint = "checkpoint";

nlohmann::json read_json(const std::string& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ParseError(path, "invalid JSON");
  return j;
}

train::StepCallback progress(int every) {
  return [every](const nlohmann::json& r) {
    const int step = r.at("stage_step");
    if (every > 0 && step % every == 0) std::cerr << r.dump() << "\n";
  };
}

struct ClientFlags {
  dataset::ClientSettings settings;

  void add(CLI::App* app) {
    app->add_option("--base-url", settings.base_url, "Chat-completions server (plain http)");
    app->add_option("--model", settings.model, "Model name sent with each request");
    app->add_option("--api-key-env", settings.api_key_env, "Environment variable holding the bearer token");
    app->add_option("--timeout", settings.timeout_seconds, "Request timeout in seconds");
    app->add_option("--retries", settings.retry_budget, "Extra attempts per item");
    app->add_option("--rate-limit", settings.rate_limit, "Requests per second (0 = unlimited)");
    app->add_option("--concurrency", settings.max_concurrency, "Concurrent requests");
  }
};

struct DecodingFlags {
  bool sample = false;
  lm::DecodingOptions options;

  void add(CLI::App* app) {
    app->add_flag("--sample", sample, "Nucleus sampling instead of greedy decoding");
    app->add_option("--top-p", options.top_p, "Nucleus mass");
    app->add_option("--temperature", options.temperature, "Sampling temperature");
    app->add_option("--max-new-tokens", options.max_new_tokens, "Generation budget per reply");
    app->add_option("--decode-seed", options.seed, "Sampling seed");
  }
  lm::DecodingOptions get() const {
    auto d = options;
    d.greedy = !sample;
    return d;
  }
};

std::shared_ptr<const train::ModelBundle> load_model(const std::string& flag) {
  const auto dir = train::resolve_checkpoint_dir(flag, kDefaultCheckpoint);
  auto st = train::load_checkpoint(dir);
  std::cerr << "loaded " << dir << " (stage " << st.manifest.stage_completed << ")\n";
  return std::shared_ptr<const train::ModelBundle>(std::move(st.bundle));
}

void print_report(const train::StageReport& r) { std::cout << r.to_json().dump(2) << "\n"; }

void run_repl(chat::ChatService& svc, const std::string& scene_id, int target) {
  auto session = svc.create_session(scene_id, target).session_id;
  const auto& scene = svc.scenes().get(scene_id);
  std::cout << "scene " << scene_id << ", target " << target << " (" << scene.at(target).category
            << "). Commands: /target <id>, /objects, /history, /quit\n";
  std::string line;
  while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line == "/quit" || line == "/exit") break;
    if (line == "/objects") {
      for (const auto& o : scene.objects) std::cout << "  " << o.id << " " << o.category << "\n";
      continue;
    }
    if (line == "/history") {
      for (const auto& t : svc.session(session).history) std::cout << "Q: " << t.instruction << "\nA: " << t.response << "\n";
      continue;
    }
    if (line.rfind("/target ", 0) == 0) {
      try {
        const int id = std::stoi(line.substr(8));
        session = svc.create_session(scene_id, id).session_id;
        std::cout << "new session on " << id << " (" << scene.at(id).category << ")\n";
      } catch (const std::exception& e) {
        std::cout << "error: " << e.what() << "\n";
      }
      continue;
    }
    try {
      std::cout << svc.post_message(session, line) << "\n";
    } catch (const ContextOverflow& e) {
      std::cout << "error: " << e.what() << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-centric 3D scene dialogue: data, training, evaluation and chat"};
  app.require_subcommand(1);

  // gen-data
  auto* gen_data = app.add_subcommand("gen-data", "Write the synthetic benchmark (scenes, captions, corpora)");
  std::string data_out, spec_file;
  std::uint64_t data_seed = 1;
  bool small = false;
  gen_data->add_option("--out", data_out, "Output directory")->required();
  gen_data->add_option("--spec", spec_file, "Benchmark sizes as JSON");
  gen_data->add_option("--seed", data_seed, "Seed");
  gen_data->add_flag("--small", small, "Tiny sizes for smoke tests");

  // gen-scenes
  auto* gen_scenes = app.add_subcommand("gen-scenes", "Write random synthetic scenes");
  scene::SceneSetSpec scene_spec;
  std::string scenes_out;
  gen_scenes->add_option("--out", scenes_out, "Output directory")->required();
  gen_scenes->add_option("--count", scene_spec.count, "Number of scenes");
  gen_scenes->add_option("--seed", scene_spec.seed, "Seed");
  gen_scenes->add_option("--min-objects", scene_spec.min_objects, "Objects per scene, lower bound");
  gen_scenes->add_option("--max-objects", scene_spec.max_objects, "Objects per scene, upper bound");
  gen_scenes->add_option("--points", scene_spec.points_per_object, "Points per object");
  gen_scenes->add_option("--prefix", scene_spec.id_prefix, "Scene id prefix");

  // gen-corpus
  auto* gen_corpus = app.add_subcommand("gen-corpus", "Generate an instruction corpus for a scene directory");
  std::string corpus_scenes, corpus_out, corpus_captions, backend = "offline", log_dir;
  dataset::OfflineCounts counts;
  std::uint64_t corpus_seed = 0;
  ClientFlags corpus_client;
  gen_corpus->add_option("--scenes", corpus_scenes, "Scene directory")->required();
  gen_corpus->add_option("--out", corpus_out, "Corpus file (JSONL)")->required();
  gen_corpus->add_option("--backend", backend, "offline or external")->check(CLI::IsMember({"offline", "external"}));
  gen_corpus->add_option("--captions", corpus_captions, "Reference captions (JSONL) for external requests");
  gen_corpus->add_option("--conversations", counts.conversations_per_scene, "Conversations per scene");
  gen_corpus->add_option("--detailed", counts.detailed_per_scene, "Detailed captions per scene");
  gen_corpus->add_option("--seed", corpus_seed, "Seed");
  gen_corpus->add_option("--log-dir", log_dir, "Where transcripts and drop logs go (external)");
  corpus_client.add(gen_corpus);

  // pretrain-lm
  auto* pretrain = app.add_subcommand("pretrain-lm", "Build the vocabulary and pretrain the language model");
  std::string pre_data, pre_out, pre_config, model_config;
  int pre_steps = -1, log_every = 100;
  pretrain->add_option("--data", pre_data, "Data directory")->required();
  pretrain->add_option("--out", pre_out, "Checkpoint directory")->required();
  pretrain->add_option("--config", pre_config, "Pretraining config (JSON)");
  pretrain->add_option("--model-config", model_config, "Model sizes (JSON)");
  pretrain->add_option("--steps", pre_steps, "Override the step count");
  pretrain->add_option("--log-every", log_every, "Print every N steps");

  // train
  auto* train_cmd = app.add_subcommand("train", "Run one training stage");
  int stage = 0, train_steps = -1;
  std::string train_config, train_data, train_out, train_from, train_corpus;
  bool two_stage = false;
  train_cmd->add_option("--stage", stage, "1, 2 or 3")->required()->check(CLI::Range(1, 3));
  train_cmd->add_option("--config", train_config, "Stage config (JSON)");
  train_cmd->add_option("--data", train_data, "Data directory")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint directory to write")->required();
  train_cmd->add_option("--from", train_from, "Checkpoint to start from (default: env, then --out)");
  train_cmd->add_option("--corpus", train_corpus, "Stage-3 corpus file instead of the data directory's");
  train_cmd->add_flag("--two-stage", two_stage, "Skip stage 1 (ablation)");
  train_cmd->add_option("--steps", train_steps, "Override the step count");
  train_cmd->add_option("--log-every", log_every, "Print every N steps");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks at d = 8");
  std::string module = "all";
  std::uint64_t gc_seed = 0;
  gradcheck->add_option("--module", module, "encoder, relation, lm, stage1 or all");
  gradcheck->add_option("--seed", gc_seed, "Seed");

  // eval
  auto* eval = app.add_subcommand("eval", "Relative scores against the offline references");
  std::string eval_ckpt, eval_data, judge_kind = "rule", records;
  judge::EvalOptions eval_opts;
  bool swap = false;
  ClientFlags judge_client;
  DecodingFlags eval_decoding;
  eval_decoding.options.max_new_tokens = 260;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint (default: $SCENECHAT_CHECKPOINT)");
  eval->add_option("--data", eval_data, "Data directory (uses eval/scenes)")->required();
  eval->add_option("--judge", judge_kind, "rule or llm")->check(CLI::IsMember({"rule", "llm"}));
  eval->add_option("--scenes", eval_opts.num_scenes, "Scenes sampled for evaluation");
  eval->add_option("--seed", eval_opts.seed, "Seed");
  eval->add_option("--judge-concurrency", eval_opts.judge_concurrency, "Concurrent judge calls");
  eval->add_option("--records", records, "Write per-item records (JSONL)");
  eval->add_flag("--swap", swap, "LLM judge: average both presentation orders");
  judge_client.add(eval);
  eval_decoding.add(eval);

  // chat
  auto* chat_cmd = app.add_subcommand("chat", "Interactive chat about one object");
  std::string chat_scene, chat_ckpt;
  int chat_target = 0;
  DecodingFlags chat_decoding;
  chat_cmd->add_option("--scene", chat_scene, "Scene file")->required();
  chat_cmd->add_option("--target", chat_target, "Target object id")->required();
  chat_cmd->add_option("--checkpoint", chat_ckpt, "Checkpoint (default: $SCENECHAT_CHECKPOINT)");
  chat_decoding.add(chat_cmd);

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP chat service");
  std::string serve_ckpt, serve_scenes, host = "127.0.0.1";
  int port = 8080;
  bool reject_busy = false;
  DecodingFlags serve_decoding;
  serve->add_option("--port", port, "Port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--checkpoint", serve_ckpt, "Checkpoint (default: $SCENECHAT_CHECKPOINT)");
  serve->add_option("--scenes", serve_scenes, "Scene directory")->required();
  serve->add_flag("--reject-busy", reject_busy, "Answer 409 instead of queueing messages to a busy session");
  serve_decoding.add(serve);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_data) {
      train::BenchmarkSpec spec;
      if (!spec_file.empty()) spec = train::BenchmarkSpec::from_json(read_json(spec_file));
      if (small) {
        spec.pretrain_scenes = 20;
        spec.train_scenes = 20;
        spec.eval_scenes = 10;
        spec.labeled_per_category = 8;
      }
      spec.seed = data_seed;
      const auto b = train::make_benchmark(spec);
      train::save_benchmark(b, data_out);
      write_file((fs::path(data_out) / "benchmark.json").string(), spec.to_json().dump(2) + "\n");
      std::cout << "wrote " << data_out << ": " << b.pretrain_scenes.size() << " pretraining, " << b.train_scenes.size()
                << " training, " << b.eval_scenes.size() << " evaluation scenes; " << b.train_corpus.size()
                << " training samples; " << b.labeled_objects.size() << " labeled objects\n";
    } else if (*gen_scenes) {
      const auto scenes = scene::generate_scene_set(scene_spec);
      scene::save_scene_dir(scenes, scenes_out);
      std::cout << "wrote " << scenes.size() << " scenes to " << scenes_out << "\n";
    } else if (*gen_corpus) {
      const auto scenes = scene::load_scene_dir(corpus_scenes);
      if (backend == "offline") {
        const auto corpus = dataset::generate_offline(scenes, counts, corpus_seed);
        dataset::write_corpus(corpus, corpus_out);
        std::cout << "wrote " << corpus.size() << " samples to " << corpus_out << "\n";
      } else {
        dataset::GenerationJob job;
        job.scenes = scenes;
        if (!corpus_captions.empty()) job.captions = dataset::read_captions(corpus_captions);
        job.conversations_per_scene = counts.conversations_per_scene;
        job.detailed_per_scene = counts.detailed_per_scene;
        job.client = corpus_client.settings;
        job.seed = corpus_seed;
        dataset::HttpChatClient client(job.client);
        const auto report = dataset::generate_external(job, client);
        dataset::write_corpus(report.samples, corpus_out);
        const fs::path logs = log_dir.empty() ? fs::path(corpus_out).parent_path() : fs::path(log_dir);
        if (!logs.empty()) fs::create_directories(logs);
        dataset::write_report_logs(report, (logs / "transcript.jsonl").string(), (logs / "drops.jsonl").string());
        std::cout << "wrote " << report.samples.size() << " samples to " << corpus_out << " (" << report.drops.size()
                  << " dropped, " << report.request_count() << " requests)\n";
      }
    } else if (*pretrain) {
      const auto data = train::load_benchmark(pre_data);
      train::ModelConfig mc;
      if (!model_config.empty()) mc = train::ModelConfig::from_json(read_json(model_config));
      train::PretrainConfig pc;
      if (!pre_config.empty()) pc = train::PretrainConfig::from_json(read_json(pre_config));
      if (pre_steps >= 0) pc.steps = pre_steps;
      auto st = train::fresh_state(mc, train::build_tokenizer(data.pretrain_captions, data.pretrain_corpus));
      print_report(
          train::pretrain_lm(st, data.pretrain_scenes, data.pretrain_captions, data.pretrain_corpus, pc, progress(log_every)));
      train::save_checkpoint(st, pre_out);
      std::cout << "saved " << pre_out << "\n";
    } else if (*train_cmd) {
      const auto data = train::load_benchmark(train_data);
      auto cfg = train_config.empty() ? train::StageConfig::defaults(stage)
                                      : train::StageConfig::from_json(read_json(train_config));
      cfg.stage = stage;
      if (train_steps >= 0) cfg.steps = train_steps;
      const auto from = train::resolve_checkpoint_dir(train_from, train_out);
      auto st = train::load_checkpoint(from);
      train::StageReport report;
      if (stage == 1) {
        if (two_stage) throw InvalidInput("--two-stage skips stage 1; start with --stage 2");
        report = train::run_stage1(st, data.labeled_objects, cfg, {}, progress(log_every));
      } else if (stage == 2) {
        train::Stage2Options o;
        o.two_stage = two_stage;
        report = train::run_stage2(st, data.train_scenes, data.train_captions, cfg, o, progress(log_every));
      } else {
        const auto corpus = train_corpus.empty() ? data.train_corpus : dataset::read_corpus(train_corpus);
        report = train::run_stage3(st, data.train_scenes, corpus, cfg, {}, progress(log_every));
      }
      print_report(report);
      train::save_checkpoint(st, train_out);
      std::cout << "saved " << train_out << "\n";
    } else if (*gradcheck) {
      std::vector<std::string> modules;
      if (module == "all") {
        modules = train::gradcheck_module_names();
      } else {
        modules = {module};
      }
      bool ok = true;
      for (const auto& m : modules) {
        const auto r = train::gradcheck_module(m, gc_seed);
        std::cout << m << ": " << (r.passed ? "pass" : "FAIL") << " max rel error " << r.max_rel_error << "\n";
        for (const auto& g : r.groups) {
          std::cout << "  " << g.name << " " << g.max_rel_error << " (" << g.checked << " elements)"
                    << (g.passed ? "" : " FAIL") << "\n";
        }
        ok = ok && r.passed;
      }
      return ok ? 0 : 1;
    } else if (*eval) {
      const auto data = train::load_benchmark(eval_data);
      if (data.eval_scenes.empty()) throw NotFound("no eval/scenes in " + eval_data);
      auto bundle = load_model(eval_ckpt);
      chat::Assistant assistant(*bundle, eval_decoding.get());
      std::unique_ptr<judge::JudgeBackend> backend_ptr;
      if (judge_kind == "rule") {
        backend_ptr = std::make_unique<judge::RuleBasedJudge>();
      } else {
        backend_ptr =
            std::make_unique<judge::LlmJudge>(std::make_shared<dataset::HttpChatClient>(judge_client.settings), swap);
      }
      const auto result = judge::run_eval(assistant, data.eval_scenes, *backend_ptr, eval_opts);
      if (!records.empty()) judge::write_eval_records(result.records, records);
      std::cout << result.report.to_json().dump(2) << "\n";
    } else if (*chat_cmd) {
      chat::SceneStore store;
      store.load_file(chat_scene);
      const auto scene_id = store.list().front().scene_id;
      chat::ServiceOptions opts;
      opts.decoding = chat_decoding.get();
      chat::ChatService svc(load_model(chat_ckpt), std::move(store), opts);
      run_repl(svc, scene_id, chat_target);
    } else if (*serve) {
      chat::SceneStore store;
      store.load_dir(serve_scenes);
      chat::ServiceOptions opts;
      opts.busy = reject_busy ? chat::BusyPolicy::kReject : chat::BusyPolicy::kSerialize;
      opts.decoding = serve_decoding.get();
      chat::ChatService svc(load_model(serve_ckpt), std::move(store), opts);
      chat::HttpServer server(svc);
      if (!server.bind(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
      std::cerr << "serving " << svc.scenes().size() << " scenes on http://" << host << ":" << port << "\n";
      server.serve();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
