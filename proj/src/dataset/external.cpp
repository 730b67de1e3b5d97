// SPDX-License-Identifier: Apache-2.0

#include "scenechat/dataset/external.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <thread>

#include <httplib.h>

#include "scenechat/core/rng.hpp"
#include "scenechat/core/text.hpp"
#include "scenechat/dataset/offline.hpp"
#include "scenechat/dataset/textualize.hpp"

namespace scenechat::dataset {

void ClientSettings::validate() const {
  if (retry_budget < 0) throw InvalidInput("retry budget must be >= 0");
  if (rate_limit < 0.0) throw InvalidInput("rate limit must be >= 0");
  if (max_concurrency < 1) throw InvalidInput("max_concurrency must be >= 1");
  if (timeout_seconds <= 0.0) throw InvalidInput("timeout must be positive");
  if (backoff_base_seconds < 0.0) throw InvalidInput("backoff base must be >= 0");
}

HttpChatClient::HttpChatClient(ClientSettings settings) : settings_(std::move(settings)) {
  settings_.validate();
  if (settings_.base_url.rfind("https://", 0) == 0) {
    throw InvalidInput("https endpoints are not supported; use a local http proxy");
  }
  if (const char* key = std::getenv(settings_.api_key_env.c_str())) api_key_ = key;
}

std::string HttpChatClient::request_body(const std::string& prompt) const {
  nlohmann::json body = {{"model", settings_.model},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  return body.dump();
}

std::string HttpChatClient::parse_reply(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw TransientError("reply is not valid JSON");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw TransientError("reply lacks choices[0].message.content");
  }
}

std::string HttpChatClient::complete(const std::string& prompt) {
  httplib::Client cli(settings_.base_url);
  const auto timeout = std::chrono::duration<double>(settings_.timeout_seconds);
  cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = cli.Post(settings_.path, headers, request_body(prompt), "application/json");
  if (!res) throw TransientError("request failed: " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403) {
    throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status != 200) throw TransientError("HTTP " + std::to_string(res->status));
  return parse_reply(res->body);
}

RateLimiter::RateLimiter(double per_second) {
  if (per_second > 0.0) {
    interval_ = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / per_second));
  }
}

void RateLimiter::acquire() {
  if (interval_ == Clock::duration::zero()) return;
  Clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = Clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

void GenerationJob::validate() const {
  if (conversations_per_scene < 0 || detailed_per_scene < 0) throw InvalidInput("counts must be >= 0");
  if (detailed_per_scene > 0 && examples.size() < 2) throw InvalidInput("caption requests need 2 in-context examples");
  client.validate();
}

namespace {

struct Item {
  const scene::SceneRecord* scene = nullptr;
  int target = 0;
  Kind kind = Kind::kConversation;
  std::string request;
};

std::vector<std::string> captions_for(const GenerationJob& job, const std::string& scene_id, int target) {
  for (const auto& c : job.captions) {
    if (c.scene_id == scene_id && c.target_object_id == target) return c.captions;
  }
  return {};
}

std::vector<Item> plan(const GenerationJob& job) {
  std::vector<Item> items;
  for (const auto& s : job.scenes) {
    if (s.objects.size() < 2) continue;
    Rng rng(mix_seed(job.seed ^ fnv1a(s.scene_id), 7));
    auto add = [&](Kind kind) {
      Item it{&s, s.objects[rng.index(s.objects.size())].id, kind, {}};
      const auto tx = textualize(s, it.target, captions_for(job, s.scene_id, it.target));
      it.request = kind == Kind::kConversation
                       ? build_conversation_request(tx)
                       : build_caption_request(tx, select_examples(job.examples, rng.next()));
      items.push_back(std::move(it));
    };
    for (int i = 0; i < job.conversations_per_scene; ++i) add(Kind::kConversation);
    for (int i = 0; i < job.detailed_per_scene; ++i) add(Kind::kDetailedCaption);
  }
  return items;
}

InstructionSample to_sample(const Item& it, const std::string& reply) {
  InstructionSample s;
  s.scene_id = it.scene->scene_id;
  s.target_object_id = it.target;
  s.kind = it.kind;
  s.provenance = Provenance::kExternalLlm;
  if (it.kind == Kind::kConversation) {
    s.turns = parse_conversation_response(reply);
  } else {
    s.turns = {{kDetailedInstruction, parse_caption_response(reply)}};
  }
  return s;
}

}  // namespace

GenerationReport generate_external(const GenerationJob& job, ChatClient& client, const GenerationHooks& hooks) {
  job.validate();
  const auto items = plan(job);
  const auto sleep = hooks.sleep ? hooks.sleep : [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
  RateLimiter limiter(job.client.rate_limit);

  std::vector<std::optional<InstructionSample>> results(items.size());
  std::vector<std::string> reasons(items.size());
  std::vector<std::vector<TranscriptEntry>> logs(items.size());
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&] {
    while (!abort) {
      const std::size_t i = cursor++;
      if (i >= items.size()) return;
      const Item& it = items[i];
      for (int attempt = 0; attempt <= job.client.retry_budget && !abort; ++attempt) {
        if (attempt > 0) sleep(std::chrono::duration<double>(job.client.backoff_base_seconds * std::ldexp(1.0, attempt - 1)));
        limiter.acquire();
        TranscriptEntry entry{i, attempt, it.request, {}, {}};
        try {
          entry.response = client.complete(it.request);
          auto sample = to_sample(it, entry.response);
          if (auto bad = validate_sample(sample)) {
            entry.error = *bad;
          } else {
            results[i] = std::move(sample);
          }
        } catch (const AuthError&) {
          std::lock_guard lock(fatal_mutex);
          if (!fatal) fatal = std::current_exception();
          abort = true;
          entry.error = "auth failure";
        } catch (const Error& e) {
          entry.error = e.what();
        }
        reasons[i] = entry.error;
        logs[i].push_back(std::move(entry));
        if (results[i]) break;
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(job.client.max_concurrency, static_cast<int>(items.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  GenerationReport report;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (auto& e : logs[i]) report.transcript.push_back(std::move(e));
    if (results[i]) {
      report.samples.push_back(std::move(*results[i]));
    } else {
      report.drops.push_back({items[i].scene->scene_id, items[i].target, items[i].kind, reasons[i]});
    }
  }
  return report;
}

nlohmann::json to_json(const TranscriptEntry& entry) {
  return {{"item", entry.item},
          {"attempt", entry.attempt},
          {"request", entry.request},
          {"response", entry.response},
          {"error", entry.error}};
}

nlohmann::json to_json(const DropRecord& drop) {
  return {{"scene_id", drop.scene_id},
          {"target_object_id", drop.target_object_id},
          {"kind", to_string(drop.kind)},
          {"reason", drop.reason}};
}

void write_report_logs(const GenerationReport& report, const std::string& transcript_path,
                       const std::string& drops_path) {
  std::string t;
  for (const auto& e : report.transcript) t += to_json(e).dump() + "\n";
  write_file(transcript_path, t);
  std::string d;
  for (const auto& e : report.drops) d += to_json(e).dump() + "\n";
  write_file(drops_path, d);
}

}  // namespace scenechat::dataset
