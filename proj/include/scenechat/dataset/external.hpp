// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "scenechat/core/error.hpp"
#include "scenechat/dataset/requests.hpp"
#include "scenechat/dataset/sample.hpp"
#include "scenechat/scene/scene.hpp"

namespace scenechat::dataset {

/// A failure worth retrying (timeouts, 429, 5xx, malformed bodies).
class TransientError : public Error {
 public:
  using Error::Error;
};

/// Text-in, text-out access to a chat model. Implementations throw
/// AuthError on rejected credentials and TransientError otherwise.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

struct ClientSettings {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "SCENECHAT_API_KEY";
  double timeout_seconds = 60.0;
  int retry_budget = 3;
  /// Requests per second across all workers; 0 disables limiting.
  double rate_limit = 0.0;
  int max_concurrency = 1;
  double backoff_base_seconds = 1.0;

  void validate() const;
};

/// OpenAI-style chat completion over plain HTTP.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(ClientSettings settings);
  std::string complete(const std::string& prompt) override;

  /// Request body sent for `prompt`.
  std::string request_body(const std::string& prompt) const;
  /// Extracts choices[0].message.content; throws TransientError.
  static std::string parse_reply(const std::string& body);

 private:
  ClientSettings settings_;
  std::string api_key_;
};

/// Spaces acquisitions at least 1/rate seconds apart. Thread-safe.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;
  explicit RateLimiter(double per_second);
  void acquire();

 private:
  std::mutex mutex_;
  Clock::duration interval_{};
  Clock::time_point next_{};
};

struct GenerationJob {
  std::vector<scene::SceneRecord> scenes;
  /// Reference descriptions looked up by (scene_id, object id); may be empty.
  std::vector<CaptionRecord> captions;
  int conversations_per_scene = 1;
  int detailed_per_scene = 1;
  std::vector<InContextExample> examples = in_context_pool();
  ClientSettings client;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TranscriptEntry {
  std::size_t item = 0;
  int attempt = 0;
  std::string request;
  std::string response;
  std::string error;
};

struct DropRecord {
  std::string scene_id;
  int target_object_id = 0;
  Kind kind = Kind::kConversation;
  std::string reason;
};

struct GenerationReport {
  std::vector<InstructionSample> samples;
  std::vector<DropRecord> drops;
  std::vector<TranscriptEntry> transcript;
  std::size_t request_count() const { return transcript.size(); }
};

struct GenerationHooks {
  /// Called between retries; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::duration<double>)> sleep;
};

/// Queries `client` for every planned item. Output order follows the plan
/// regardless of concurrency. AuthError propagates; other failures drop the
/// item after 1 + retry_budget attempts.
GenerationReport generate_external(const GenerationJob& job, ChatClient& client, const GenerationHooks& hooks = {});

nlohmann::json to_json(const TranscriptEntry& entry);
nlohmann::json to_json(const DropRecord& drop);
/// Transcript and drop log as JSONL files.
void write_report_logs(const GenerationReport& report, const std::string& transcript_path,
                       const std::string& drops_path);

}  // namespace scenechat::dataset
