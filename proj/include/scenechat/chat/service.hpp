// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scenechat/encoder/embeddings.hpp"
#include "scenechat/lm/lm.hpp"
#include "scenechat/prompt/prompt.hpp"
#include "scenechat/scene/scene.hpp"
#include "scenechat/train/bundle.hpp"

namespace scenechat::chat {

struct ObjectSummary {
  int id = 0;
  std::string category;
  scene::Vec3 color{};
  scene::Vec3 bbox_min{};
  scene::Vec3 bbox_max{};
  /// Filled only when points were requested.
  std::vector<scene::Vec3> points;
};

struct SceneSummary {
  std::string scene_id;
  std::vector<ObjectSummary> objects;

  nlohmann::json to_json(bool include_points = false) const;
};

SceneSummary summarize(const scene::SceneRecord& scene, bool include_points = false);

/// Loaded scenes by id. Read-only once the service starts.
class SceneStore {
 public:
  /// Validates the scene; a duplicate id throws InvalidInput.
  void add(scene::SceneRecord scene);
  void load_dir(const std::string& dir);
  void load_file(const std::string& path);

  /// Throws NotFound naming the id.
  const scene::SceneRecord& get(const std::string& scene_id) const;
  bool contains(const std::string& scene_id) const { return scenes_.count(scene_id) != 0; }
  std::vector<SceneSummary> list() const;
  std::size_t size() const { return scenes_.size(); }

 private:
  std::map<std::string, scene::SceneRecord> scenes_;
};

enum class BusyPolicy {
  kSerialize,  // a second message to a busy session waits
  kReject,     // ... or fails with BusyError
};

struct ServiceOptions {
  BusyPolicy busy = BusyPolicy::kSerialize;
  lm::DecodingOptions decoding{};
  /// Runs with the session lock held, just before generation.
  std::function<void(const std::string& session_id)> before_generate;
};

/// Snapshot of a session.
struct SessionInfo {
  std::string session_id;
  std::string scene_id;
  int target_object_id = 0;
  int other_count = 0;
  std::vector<prompt::DialogueTurn> history;
  lm::DecodingOptions decoding;

  nlohmann::json to_json() const;
};

lm::DecodingOptions decoding_from_json(const nlohmann::json& j, const lm::DecodingOptions& base);

/// Multi-turn chat sessions over a store of scenes. Model parameters are
/// shared read-only; each session has its own lock.
class ChatService {
 public:
  ChatService(std::shared_ptr<const train::ModelBundle> bundle, SceneStore store, ServiceOptions options = {});
  ~ChatService();

  /// Throws NotFound for an unknown scene or target.
  SessionInfo create_session(const std::string& scene_id, int target_object_id,
                             std::optional<lm::DecodingOptions> decoding = std::nullopt);
  /// Generates the next response and appends the turn. Throws InvalidInput
  /// for an empty instruction, NotFound, BusyError (reject mode) or
  /// ContextOverflow (history left unchanged).
  std::string post_message(const std::string& session_id, const std::string& instruction);
  /// Throws NotFound.
  void delete_session(const std::string& session_id);
  SessionInfo session(const std::string& session_id) const;
  /// Cached embeddings of the session's scene for its target (recomputed
  /// after a reload).
  encoder::SceneEmbeddings session_embeddings(const std::string& session_id);
  std::size_t session_count() const;

  /// Swaps the model and drops every cached embedding.
  void reload(std::shared_ptr<const train::ModelBundle> bundle);
  std::size_t cache_size() const;

  const SceneStore& scenes() const { return store_; }
  const ServiceOptions& options() const { return options_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& session_id) const;
  std::shared_ptr<const encoder::SceneEmbeddings> embeddings(const std::string& scene_id, int target_id,
                                                             std::uint64_t* generation);
  /// Current model, after bringing the session's embeddings up to date.
  std::shared_ptr<const train::ModelBundle> refresh(Session& s);

  SceneStore store_;
  ServiceOptions options_;

  mutable std::mutex model_mutex_;
  std::shared_ptr<const train::ModelBundle> bundle_;
  std::uint64_t generation_ = 0;
  std::map<std::pair<std::string, int>, std::shared_ptr<const encoder::SceneEmbeddings>> cache_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 0;
};

}  // namespace scenechat::chat
