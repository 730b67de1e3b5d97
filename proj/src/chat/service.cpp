// SPDX-License-Identifier: Apache-2.0

#include "scenechat/chat/service.hpp"

#include <random>

#include "scenechat/core/error.hpp"
#include "scenechat/core/rng.hpp"
#include "scenechat/core/text.hpp"
#include "scenechat/scene/scene_io.hpp"

namespace scenechat::chat {

namespace {

nlohmann::json vec_json(const scene::Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); }

}  // namespace

nlohmann::json SceneSummary::to_json(bool include_points) const {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : objects) {
    nlohmann::json j{{"id", o.id},
                     {"category", o.category},
                     {"color", vec_json(o.color)},
                     {"bbox_min", vec_json(o.bbox_min)},
                     {"bbox_max", vec_json(o.bbox_max)}};
    if (include_points) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : o.points) pts.push_back(vec_json(p));
      j["points"] = std::move(pts);
    }
    objs.push_back(std::move(j));
  }
  return {{"scene_id", scene_id}, {"objects", std::move(objs)}};
}

SceneSummary summarize(const scene::SceneRecord& scene, bool include_points) {
  SceneSummary s;
  s.scene_id = scene.scene_id;
  for (const auto& o : scene.objects) {
    ObjectSummary os;
    os.id = o.id;
    os.category = o.category;
    os.color = o.color;
    os.bbox_min = o.bbox_min();
    os.bbox_max = o.bbox_max();
    if (include_points) os.points = o.cloud.points;
    s.objects.push_back(std::move(os));
  }
  return s;
}

void SceneStore::add(scene::SceneRecord scene) {
  scene::validate_scene(scene);
  if (scenes_.count(scene.scene_id)) throw InvalidInput("duplicate scene id '" + scene.scene_id + "'");
  auto id = scene.scene_id;
  scenes_.emplace(std::move(id), std::move(scene));
}

void SceneStore::load_dir(const std::string& dir) {
  for (auto& s : scene::load_scene_dir(dir)) add(std::move(s));
}

void SceneStore::load_file(const std::string& path) { add(scene::load_scene(path)); }

const scene::SceneRecord& SceneStore::get(const std::string& scene_id) const {
  auto it = scenes_.find(scene_id);
  if (it == scenes_.end()) throw NotFound("unknown scene '" + scene_id + "'");
  return it->second;
}

std::vector<SceneSummary> SceneStore::list() const {
  std::vector<SceneSummary> out;
  out.reserve(scenes_.size());
  for (const auto& [id, s] : scenes_) out.push_back(summarize(s));
  return out;
}

nlohmann::json SessionInfo::to_json() const {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : history) turns.push_back({{"instruction", t.instruction}, {"response", t.response}});
  return {{"session_id", session_id},
          {"scene_id", scene_id},
          {"target_object_id", target_object_id},
          {"other_count", other_count},
          {"history", std::move(turns)},
          {"decoding",
           {{"greedy", decoding.greedy},
            {"top_p", decoding.top_p},
            {"temperature", decoding.temperature},
            {"max_new_tokens", decoding.max_new_tokens},
            {"seed", decoding.seed}}}};
}

lm::DecodingOptions decoding_from_json(const nlohmann::json& j, const lm::DecodingOptions& base) {
  if (!j.is_object()) throw InvalidInput("decoding must be an object");
  lm::DecodingOptions d = base;
  try {
    d.greedy = j.value("greedy", d.greedy);
    d.top_p = j.value("top_p", d.top_p);
    d.temperature = j.value("temperature", d.temperature);
    d.max_new_tokens = j.value("max_new_tokens", d.max_new_tokens);
    d.seed = j.value("seed", d.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("decoding: ") + e.what());
  }
  if (d.max_new_tokens < 1) throw InvalidInput("decoding: max_new_tokens must be positive");
  if (!(d.top_p > 0.0 && d.top_p <= 1.0)) throw InvalidInput("decoding: top_p must be in (0, 1]");
  return d;
}

struct ChatService::Session {
  std::mutex mutex;
  SessionInfo info;
  std::shared_ptr<const encoder::SceneEmbeddings> embs;
  std::uint64_t generation = 0;
};

ChatService::ChatService(std::shared_ptr<const train::ModelBundle> bundle, SceneStore store, ServiceOptions options)
    : store_(std::move(store)), options_(options), bundle_(std::move(bundle)) {
  if (!bundle_) throw InvalidInput("ChatService needs a model");
  next_session_ = std::random_device{}();
}

ChatService::~ChatService() = default;

std::shared_ptr<const encoder::SceneEmbeddings> ChatService::embeddings(const std::string& scene_id, int target_id,
                                                                        std::uint64_t* generation) {
  std::shared_ptr<const train::ModelBundle> bundle;
  std::uint64_t gen = 0;
  {
    std::lock_guard lock(model_mutex_);
    auto it = cache_.find({scene_id, target_id});
    if (it != cache_.end()) {
      *generation = generation_;
      return it->second;
    }
    bundle = bundle_;
    gen = generation_;
  }
  auto embs = std::make_shared<const encoder::SceneEmbeddings>(
      bundle->encoder().encode_scene(store_.get(scene_id), target_id));
  std::lock_guard lock(model_mutex_);
  if (gen == generation_) cache_[{scene_id, target_id}] = embs;
  *generation = gen;
  return embs;
}

SessionInfo ChatService::create_session(const std::string& scene_id, int target_object_id,
                                        std::optional<lm::DecodingOptions> decoding) {
  const auto& scene = store_.get(scene_id);
  scene.at(target_object_id);
  auto s = std::make_shared<Session>();
  s->embs = embeddings(scene_id, target_object_id, &s->generation);
  s->info.scene_id = scene_id;
  s->info.target_object_id = target_object_id;
  s->info.other_count = s->embs->other_count();
  s->info.decoding = decoding.value_or(options_.decoding);
  std::lock_guard lock(sessions_mutex_);
  s->info.session_id = hex64(mix_seed(next_session_++, 0x5e55));
  sessions_[s->info.session_id] = s;
  return s->info;
}

std::shared_ptr<ChatService::Session> ChatService::find(const std::string& session_id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFound("unknown session '" + session_id + "'");
  return it->second;
}

std::shared_ptr<const train::ModelBundle> ChatService::refresh(Session& s) {
  for (;;) {
    {
      std::lock_guard lock(model_mutex_);
      if (s.generation == generation_ && s.embs) return bundle_;
    }
    std::uint64_t gen = 0;
    auto embs = embeddings(s.info.scene_id, s.info.target_object_id, &gen);
    s.embs = std::move(embs);
    s.generation = gen;
  }
}

std::string ChatService::post_message(const std::string& session_id, const std::string& instruction) {
  if (trim(instruction).empty()) throw InvalidInput("empty instruction");
  auto s = find(session_id);
  std::unique_lock lock(s->mutex, std::defer_lock);
  if (options_.busy == BusyPolicy::kReject) {
    if (!lock.try_lock()) throw BusyError("session '" + session_id + "' is busy");
  } else {
    lock.lock();
  }
  const auto bundle = refresh(*s);
  const auto seq =
      prompt::assemble_prompt(*s->embs, instruction, prompt::DialogueHistory{s->info.history}, bundle->tokenizer());
  if (options_.before_generate) options_.before_generate(session_id);
  lm::GenerationResult r;
  try {
    r = bundle->lm().generate(seq, s->info.decoding);
  } catch (const ContextOverflow& e) {
    throw ContextOverflow(std::string(e.what()) + "; start a new session");
  }
  s->info.history.push_back({instruction, r.text});
  return r.text;
}

void ChatService::delete_session(const std::string& session_id) {
  std::lock_guard lock(sessions_mutex_);
  if (!sessions_.erase(session_id)) throw NotFound("unknown session '" + session_id + "'");
}

SessionInfo ChatService::session(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return s->info;
}

encoder::SceneEmbeddings ChatService::session_embeddings(const std::string& session_id) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  refresh(*s);
  return *s->embs;
}

std::size_t ChatService::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

void ChatService::reload(std::shared_ptr<const train::ModelBundle> bundle) {
  if (!bundle) throw InvalidInput("reload needs a model");
  std::lock_guard lock(model_mutex_);
  bundle_ = std::move(bundle);
  ++generation_;
  cache_.clear();
}

std::size_t ChatService::cache_size() const {
  std::lock_guard lock(model_mutex_);
  return cache_.size();
}

}  // namespace scenechat::chat
