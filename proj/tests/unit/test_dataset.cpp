// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <thread>

#include "helpers.hpp"
#include "scenechat/core/error.hpp"
#include "scenechat/core/text.hpp"
#include "scenechat/dataset/external.hpp"
#include "scenechat/dataset/facts.hpp"
#include "scenechat/dataset/offline.hpp"
#include "scenechat/dataset/requests.hpp"
#include "scenechat/dataset/sample.hpp"
#include "scenechat/dataset/textualize.hpp"
#include "scenechat/scene/scene_io.hpp"
#include "scenechat/scene/synthetic.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

using namespace scenechat;
using namespace scenechat::dataset;
using doctest::Contains;

namespace {

scene::ObjectRecord box_object(int id, const std::string& cat, scene::Vec3 c, scene::Vec3 rgb = {0.5, 0.5, 0.5}) {
  scene::PointCloud cloud;
  for (int i = 0; i < 8; ++i) {
    cloud.points.push_back({c[0] + ((i & 1) ? 0.125 : -0.125), c[1] + ((i & 2) ? 0.125 : -0.125),
                            c[2] + ((i & 4) ? 0.125 : -0.125)});
    cloud.colors.push_back(rgb);
  }
  return scene::make_object(id, cat, cloud);
}

scene::SceneRecord sofa_chair_scene() { return scene::load_scene(testutil::data_path("golden/sofa_chair_scene.json")); }

std::vector<scene::SceneRecord> small_scenes(int count, std::uint64_t seed) {
  scene::SceneSetSpec spec;
  spec.count = count;
  spec.seed = seed;
  spec.min_objects = 3;
  spec.max_objects = 6;
  spec.points_per_object = 16;
  return scene::generate_scene_set(spec);
}

std::string words(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + std::string("word");
  return s;
}

class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::function<std::string(int)> fn) : fn_(std::move(fn)) {}
  std::string complete(const std::string& prompt) override {
    prompts.push_back(prompt);
    return fn_(calls++);
  }
  int calls = 0;
  std::vector<std::string> prompts;

 private:
  std::function<std::string(int)> fn_;
};

GenerationJob one_caption_job() {
  GenerationJob job;
  job.scenes = {sofa_chair_scene()};
  job.conversations_per_scene = 0;
  job.detailed_per_scene = 1;
  job.client.retry_budget = 3;
  job.seed = 5;
  return job;
}

GenerationHooks no_sleep(std::vector<double>* delays = nullptr) {
  GenerationHooks h;
  h.sleep = [delays](std::chrono::duration<double> d) {
    if (delays) delays->push_back(d.count());
  };
  return h;
}

}  // namespace

TEST_CASE("knn with a single other object returns it") {
  scene::SceneRecord s{"s", {box_object(0, "chair", {0, 0, 0}), box_object(1, "table", {2, 0, 0})}};
  const auto n = knn_neighbors(s, 0);
  REQUIRE(n.size() == 1);
  CHECK(n[0]->id == 1);
}

TEST_CASE("knn breaks distance ties by object id") {
  scene::SceneRecord s{"s",
                       {box_object(5, "chair", {0, 0, 0}), box_object(9, "lamp", {1, 0, 0}),
                        box_object(3, "table", {-1, 0, 0})}};
  const auto n = knn_neighbors(s, 5);
  REQUIRE(n.size() == 2);
  CHECK(n[0]->id == 3);
  CHECK(n[1]->id == 9);
  CHECK_THROWS_AS(knn_neighbors(s, 42), NotFound);
}

TEST_CASE("knn agrees with an exhaustive oracle on random scenes") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    scene::SceneRecord s{"r", {}};
    for (int i = 0; i < 20; ++i) {
      // Integer grid coordinates create plenty of exact ties.
      s.objects.push_back(box_object(19 - i, "obj", {double(rng.range(-3, 3)), double(rng.range(-3, 3)), 0.5}));
    }
    const int target = s.objects[rng.index(20)].id;
    const auto& t = s.at(target);
    // Exhaustive: repeatedly pick the unused object with the smallest
    // (squared distance, id).
    std::vector<int> expected;
    std::vector<bool> used(20, false);
    for (int round = 0; round < 10; ++round) {
      int best = -1;
      double best_d = 0;
      for (int j = 0; j < 20; ++j) {
        const auto& o = s.objects[j];
        if (used[j] || o.id == target) continue;
        double d = 0;
        for (int k = 0; k < 3; ++k) d += (o.location[k] - t.location[k]) * (o.location[k] - t.location[k]);
        if (best < 0 || d < best_d || (d == best_d && o.id < s.objects[best].id)) {
          best = j;
          best_d = d;
        }
      }
      used[best] = true;
      expected.push_back(s.objects[best].id);
    }
    const auto got = knn_neighbors(s, target);
    REQUIRE(got.size() == 10);
    for (int i = 0; i < 10; ++i) CHECK(got[i]->id == expected[i]);
  }
}

TEST_CASE("textualize reproduces the sofa-chair entries") {
  const auto s = sofa_chair_scene();
  const auto tx = textualize(s, 0, {"a white armchair under the window."});
  CHECK(tx.target_line == "Described object: {sofa chair:[-1.31, 3.15, 0.59]}");
  CHECK(tx.neighbor_count == 10);
  const auto entries = parse_entries(tx.neighbors_line);
  REQUIRE(entries.size() == 10);
  // Reference listing as a set, with every coordinate at two decimals.
  std::vector<std::string> expected{"window:[-1.12, 4.12, 1.59]",   "table:[0.86, 1.61, 0.38]",
                                     "doorframe:[-2.25, 0.67, 1.27]", "windowsill:[0.88, 3.97, 0.98]",
                                     "windowsill:[-1.32, 3.93, 0.91]", "sofa chair:[0.98, 3.35, 0.71]",
                                     "window:[1.16, 4.18, 1.73]",     "pillow:[1.35, 0.29, 0.46]",
                                     "table:[-0.15, -2.66, 0.26]",    "tv:[-2.20, -0.55, 1.52]"};
  std::vector<std::string> rendered;
  for (const auto& e : entries) rendered.push_back(render_entry(e.category, e.location));
  auto a = expected, b = rendered;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  CHECK(contains(tx.neighbors_line, "window:[-1.12, 4.12, 1.59]"));
  // Ascending distance puts the left windowsill (0.84 m) ahead of the window
  // (1.41 m).
  CHECK(rendered.front() == "windowsill:[-1.32, 3.93, 0.91]");
  CHECK(rendered[1] == "window:[-1.12, 4.12, 1.59]");
  const auto text = tx.render();
  CHECK(contains(text, "Categories and locations of target object and its 10 neighbors:"));
  CHECK(contains(text, "Descriptions: [\"a white armchair under the window.\"]"));
  CHECK(contains(text, tx.target_line + "; " + tx.neighbors_line));
}

TEST_CASE("textualize renders exact values and omits empty captions") {
  scene::SceneRecord s{"s", {box_object(0, "cat", {0, 0, 0}), box_object(1, "cat", {1, 0, 0})}};
  const auto tx = textualize(s, 0, {});
  CHECK(tx.target_line == "Described object: {cat:[0.00, 0.00, 0.00]}");
  CHECK(tx.neighbors_line == "Neighbor objects: {cat:[1.00, 0.00, 0.00]}");
  const auto text = tx.render();
  CHECK_FALSE(contains(text, "Caption of the target object"));
  CHECK(contains(text, "its 1 neighbor:"));
}

TEST_CASE("rendered entries parse back to two decimals") {
  const auto scenes = small_scenes(30, 3);
  for (const auto& s : scenes) {
    for (const auto& o : s.objects) {
      const auto tx = textualize(s, o.id, {});
      const auto target = parse_entries(tx.target_line);
      REQUIRE(target.size() == 1);
      CHECK(target[0].category == o.category);
      for (int k = 0; k < 3; ++k) CHECK(std::abs(target[0].location[k] - o.location[k]) <= 0.005 + 1e-12);
      const auto nn = knn_neighbors(s, o.id);
      const auto parsed = parse_entries(tx.neighbors_line);
      REQUIRE(parsed.size() == nn.size());
      CHECK(tx.neighbor_count == static_cast<int>(std::min<std::size_t>(10, s.objects.size() - 1)));
      for (std::size_t i = 0; i < nn.size(); ++i) {
        CHECK(parsed[i].category == nn[i]->category);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(parsed[i].location[k] - nn[i]->location[k]) <= 0.005 + 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(parse_entries("Neighbor objects: {chair:[1.0, 2]}"), ParseError);
}

TEST_CASE("in-context pool examples are within the caption window") {
  const auto& pool = in_context_pool();
  REQUIRE(pool.size() == 6);
  for (const auto& e : pool) {
    const auto n = word_count(e.caption);
    CHECK(n > 150);
    CHECK(n < 200);
    CHECK_FALSE(contains(e.caption, "###"));
    CHECK(parse_entries(e.scene.target_line).size() == 1);
    CHECK(static_cast<int>(parse_entries(e.scene.neighbors_line).size()) == e.scene.neighbor_count);
  }
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto pick = select_examples(seed);
    REQUIRE(pick.size() == 2);
    CHECK(pick[0].caption != pick[1].caption);
    CHECK(select_examples(seed)[0].caption == pick[0].caption);
  }
}

TEST_CASE("caption request matches the frozen golden") {
  const auto tx = textualize(sofa_chair_scene(), 0, {"a white armchair under the window.", "the corner sofa chair."});
  const std::vector<InContextExample> examples{in_context_pool()[0], in_context_pool()[1]};
  const auto req = build_caption_request(tx, examples);
  CHECK(req == build_caption_request(tx, examples));
  CHECK(contains(req, "Importantly, do not mention any specific spatial coordinate values. The description should "
                      "be more than 150 words and less than 200 words."));
  CHECK(req.rfind("You are an AI 3D visual assistant", 0) == 0);
  CHECK(req == read_file(testutil::data_path("golden/caption_request_sofa_chair.txt")));
  CHECK_THROWS_WITH_AS(build_caption_request(tx, {in_context_pool()[0]}), Contains("exactly 2"), InvalidInput);
  CHECK_THROWS_AS(build_caption_request(tx, {}), InvalidInput);
}

TEST_CASE("conversation request matches the frozen golden") {
  const auto tx = textualize(sofa_chair_scene(), 0, {});
  const auto req = build_conversation_request(tx);
  CHECK(req == build_conversation_request(tx));
  CHECK(contains(req, "multi-turn dialogue in which you ask yourself questions about this object and answer them"));
  CHECK(req == read_file(testutil::data_path("golden/conversation_request_sofa_chair.txt")));
}

TEST_CASE("conversation responses parse into turns") {
  const auto turns = parse_conversation_response(
      "Question: What is this?\nAnswer: A sofa chair.\n\nQuestion: Where is it?\nAnswer: Under the\nwindow.\n");
  REQUIRE(turns.size() == 2);
  CHECK(turns[0].instruction == "What is this?");
  CHECK(turns[0].response == "A sofa chair.");
  CHECK(turns[1].response == "Under the window.");
  CHECK_THROWS_AS(parse_conversation_response("Question: a\nQuestion: b\nAnswer: c"), ParseError);
  CHECK_THROWS_AS(parse_conversation_response("Answer: c"), ParseError);
  CHECK_THROWS_AS(parse_conversation_response("nothing here"), ParseError);
  CHECK_THROWS_AS(parse_conversation_response("Question: a"), ParseError);
  CHECK(parse_caption_response("  Description:\n text  ") == "text");
  CHECK_THROWS_AS(parse_caption_response("   "), ParseError);
}

TEST_CASE("offline nearest-object answer names the knn head") {
  const auto scenes = small_scenes(10, 21);
  for (const auto& s : scenes) {
    const int t = s.objects[0].id;
    const auto qa = answer_question(s, t, Question::kNearest);
    CHECK(qa.instruction == "What is the closest object to this object?");
    CHECK(qa.response == "The closest object to the " + s.objects[0].category + " is the " +
                             knn_neighbors(s, t)[0]->category + ".");
  }
}

TEST_CASE("offline count answer on a scene with 3 chairs") {
  scene::SceneRecord s{"s",
                       {box_object(0, "chair", {0, 0, 0}), box_object(1, "chair", {1, 0, 0}),
                        box_object(2, "table", {0, 1, 0}), box_object(3, "chair", {2, 2, 0})}};
  int chairs = 0;
  for (const auto& o : s.objects) chairs += o.category == "chair";
  const auto qa = answer_question(s, 0, Question::kCount);
  CHECK(qa.instruction == "How many chairs are in the room?");
  CHECK(qa.response == "There are " + std::to_string(chairs) + " chairs in the room.");
  CHECK(contains(qa.response, "3"));
  CHECK(answer_question(s, 2, Question::kCount).response == "There is 1 table in the room.");
}

TEST_CASE("offline answers agree with facts re-derived from the scene") {
  const auto scenes = small_scenes(40, 8);
  const auto samples = generate_offline(scenes, {2, 1}, 17);
  REQUIRE(samples.size() == 120);
  std::map<std::string, const scene::SceneRecord*> by_id;
  for (const auto& s : scenes) by_id[s.scene_id] = &s;
  int checked = 0;
  for (const auto& smp : samples) {
    CHECK_FALSE(validate_sample(smp).has_value());
    const auto& s = *by_id.at(smp.scene_id);
    const auto& t = s.at(smp.target_object_id);
    // Brute-force nearest neighbor.
    const scene::ObjectRecord* nn = nullptr;
    double best = 1e300;
    for (const auto& o : s.objects) {
      if (o.id == t.id) continue;
      const double d = std::hypot(o.location[0] - t.location[0], o.location[1] - t.location[1],
                                  o.location[2] - t.location[2]);
      if (d < best || (d == best && o.id < nn->id)) {
        best = d;
        nn = &o;
      }
    }
    int same = 0;
    for (const auto& o : s.objects) same += o.category == t.category;
    const std::string color = scene::nearest_color_name(t.color);
    for (const auto& turn : smp.turns) {
      const auto& q = turn.instruction;
      const auto& a = turn.response;
      if (smp.kind == Kind::kDetailedCaption) {
        CHECK(contains(a, " " + color + " " + t.category));
        CHECK(contains(a, "The closest object to the " + t.category + " is "));
        CHECK(contains(a, " " + nn->category + ", which is "));
        ++checked;
      } else if (q == "What is the closest object to this object?") {
        CHECK(a == "The closest object to the " + t.category + " is the " + nn->category + ".");
        ++checked;
      } else if (q.rfind("How many ", 0) == 0) {
        CHECK(contains(a, (same == 1 ? "There is 1 " : "There are " + std::to_string(same) + " ")));
        ++checked;
      } else if (q == "What color is this object?") {
        CHECK(a == "The " + t.category + " is " + color + ".");
        ++checked;
      } else if (q == "What is this object?") {
        CHECK(contains(a, color + " " + t.category + "."));
        ++checked;
      } else if (q == "How big is this object?") {
        const double m = std::max({t.size[0], t.size[1], t.size[2]});
        CHECK(contains(a, m < 0.75 ? "small" : (m < 1.6 ? "medium-sized" : "large")));
        ++checked;
      } else if (q.rfind("Where is the ", 0) == 0) {
        CHECK(q == "Where is the " + nn->category + " relative to this object?");
        int axis = 0;
        for (int k = 1; k < 3; ++k) {
          if (std::abs(nn->location[k] - t.location[k]) > std::abs(nn->location[axis] - t.location[axis])) axis = k;
        }
        const bool pos = nn->location[axis] > t.location[axis];
        const char* names[3][2] = {{"to the left of", "to the right of"}, {"in front of", "behind"}, {"below", "above"}};
        CHECK(contains(a, std::string(" is ") + names[axis][pos] + " the " + t.category));
        ++checked;
      } else if (q == "What is this object used for?") {
        CHECK(contains(a, "The " + t.category + " is "));
        ++checked;
      }
    }
  }
  CHECK(checked > 200);
}

TEST_CASE("offline corpus is byte-deterministic in the seed") {
  const auto scenes = small_scenes(15, 4);
  const auto a = serialize_corpus(generate_offline(scenes, {1, 1}, 9));
  CHECK(a == serialize_corpus(generate_offline(scenes, {1, 1}, 9)));
  CHECK(a != serialize_corpus(generate_offline(scenes, {1, 1}, 10)));
  for (const auto& s : generate_offline(scenes, {1, 1}, 9)) {
    if (s.kind == Kind::kDetailedCaption) {
      CHECK(word_count(s.turns[0].response) >= 150);
      CHECK(word_count(s.turns[0].response) <= 200);
    } else {
      CHECK(s.turns.size() >= 2);
    }
  }
}

TEST_CASE("sample validation reports the violated rule") {
  InstructionSample s;
  s.scene_id = "scene0000";
  s.kind = Kind::kDetailedCaption;
  s.provenance = Provenance::kExternalLlm;
  s.turns = {{kDetailedInstruction, words(120)}};
  CHECK(validate_sample(s).value() == "word count 120 < 150");
  s.turns[0].response = words(201);
  CHECK(validate_sample(s).value() == "word count 201 > 200");
  s.turns[0].response = words(180);
  CHECK_FALSE(validate_sample(s).has_value());
  s.kind = Kind::kConversation;
  s.turns = {{"q", "a"}};
  CHECK(contains(validate_sample(s).value(), "needs at least 2"));
  s.turns = {{"q", "a"}, {"q2", "a ### b"}};
  CHECK(contains(validate_sample(s).value(), "###"));
  s.turns = {{"q", "a"}, {"q2", ""}};
  CHECK(contains(validate_sample(s).value(), "empty response"));
}

TEST_CASE("corpus round trip and bad line numbers") {
  const auto scenes = small_scenes(5, 2);
  const auto samples = generate_offline(scenes, {1, 1}, 1);
  const auto text = serialize_corpus(samples);
  CHECK(parse_corpus(text) == samples);
  const std::string path = "test_corpus_roundtrip.jsonl";
  write_corpus(samples, path);
  CHECK(read_corpus(path) == samples);
  std::remove(path.c_str());

  auto lines = split_lines(text);
  lines[3] = "{\"scene_id\": \"x\"";
  std::string broken;
  for (const auto& l : lines) broken += l + "\n";
  CHECK_THROWS_WITH_AS(parse_corpus(broken), Contains("line 4"), ParseError);
  lines[3] = R"({"scene_id":"x","target_object_id":0,"kind":"poem","turns":[],"provenance":"offline_template"})";
  broken.clear();
  for (const auto& l : lines) broken += l + "\n";
  CHECK_THROWS_WITH_AS(parse_corpus(broken), Contains("line 4"), ParseError);
}

TEST_CASE("ten thousand sample corpus round trips byte-equal") {
  std::vector<InstructionSample> samples;
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    InstructionSample s;
    s.scene_id = "scene" + std::to_string(i % 97);
    s.target_object_id = static_cast<int>(rng.index(40));
    if (i % 3 == 0) {
      s.kind = Kind::kDetailedCaption;
      s.provenance = Provenance::kExternalLlm;
      s.turns = {{kDetailedInstruction, words(150 + static_cast<int>(rng.index(51)))}};
    } else {
      s.turns = {{"What \"is\" this?", "It is a caf\xc3\xa9 table.\nReally."}, {"Color?", "Red, " + std::to_string(i)}};
    }
    samples.push_back(std::move(s));
  }
  const auto text = serialize_corpus(samples);
  const auto again = serialize_corpus(parse_corpus(text));
  CHECK(fnv1a(text) == fnv1a(again));
  CHECK(text.size() == again.size());
}

TEST_CASE("external generation accepts a 180-word caption") {
  ScriptedClient client([](int) { return words(180); });
  const auto report = generate_external(one_caption_job(), client, no_sleep());
  REQUIRE(report.samples.size() == 1);
  CHECK(report.drops.empty());
  CHECK(report.request_count() == 1);
  const auto& s = report.samples[0];
  CHECK(s.kind == Kind::kDetailedCaption);
  CHECK(s.provenance == Provenance::kExternalLlm);
  CHECK(s.turns.size() == 1);
  CHECK(word_count(s.turns[0].response) == 180);
  CHECK(contains(client.prompts[0], "more than 150 words and less than 200 words"));
}

TEST_CASE("external generation retries then drops a short caption") {
  ScriptedClient client([](int) { return words(120); });
  std::vector<double> delays;
  const auto report = generate_external(one_caption_job(), client, no_sleep(&delays));
  CHECK(report.samples.empty());
  REQUIRE(report.drops.size() == 1);
  CHECK(report.drops[0].reason == "word count 120 < 150");
  CHECK(report.request_count() == 4);
  CHECK(client.calls == 4);
  // Exponential backoff between attempts.
  REQUIRE(delays.size() == 3);
  CHECK(delays[0] == doctest::Approx(1.0));
  CHECK(delays[1] == doctest::Approx(2.0));
  CHECK(delays[2] == doctest::Approx(4.0));
  CHECK(contains(to_json(report.drops[0]).dump(), "word count 120 < 150"));
}

TEST_CASE("external generation recovers from two transient failures") {
  ScriptedClient client([](int call) -> std::string {
    if (call < 2) throw TransientError("HTTP 503");
    return words(175);
  });
  const auto report = generate_external(one_caption_job(), client, no_sleep());
  CHECK(report.samples.size() == 1);
  CHECK(report.request_count() == 3);
  CHECK(report.transcript[0].error == "HTTP 503");
  CHECK(report.transcript[1].error == "HTTP 503");
  CHECK(report.transcript[2].error.empty());
  CHECK(report.transcript[2].attempt == 2);
}

TEST_CASE("external generation treats auth failures as fatal") {
  ScriptedClient client([](int) -> std::string { throw AuthError("HTTP 401"); });
  auto job = one_caption_job();
  job.scenes.push_back(job.scenes[0]);
  CHECK_THROWS_AS(generate_external(job, client, no_sleep()), AuthError);
  CHECK(client.calls == 1);
}

TEST_CASE("external output order does not depend on concurrency") {
  // Replies depend only on the prompt, with every third prompt failing once.
  class PromptClient : public ChatClient {
   public:
    std::string complete(const std::string& prompt) override {
      const auto h = fnv1a(prompt);
      {
        std::lock_guard lock(mutex);
        if (h % 3 == 0 && !failed[h]) {
          failed[h] = true;
          throw TransientError("flaky");
        }
      }
      std::this_thread::sleep_for(std::chrono::microseconds(h % 500));
      if (contains(prompt, "Dialogue:")) {
        return "Question: What is it?\nAnswer: Item " + hex64(h) + ".\nQuestion: Why?\nAnswer: Because.";
      }
      return words(150 + static_cast<int>(h % 50));
    }
    std::mutex mutex;
    std::map<std::uint64_t, bool> failed;
  };
  auto job = one_caption_job();
  job.scenes = small_scenes(12, 6);
  job.conversations_per_scene = 1;
  job.detailed_per_scene = 1;
  job.client.retry_budget = 1;
  PromptClient serial;
  const auto a = generate_external(job, serial, no_sleep());
  job.client.max_concurrency = 4;
  job.client.rate_limit = 2000.0;
  PromptClient parallel;
  const auto b = generate_external(job, parallel, no_sleep());
  CHECK(a.samples.size() == 24);
  CHECK(serialize_corpus(a.samples) == serialize_corpus(b.samples));
  CHECK(a.request_count() == b.request_count());
}

TEST_CASE("rate limiter spaces acquisitions") {
  RateLimiter limiter(200.0);
  const auto t0 = RateLimiter::Clock::now();
  for (int i = 0; i < 11; ++i) limiter.acquire();
  const std::chrono::duration<double> dt = RateLimiter::Clock::now() - t0;
  CHECK(dt.count() >= 0.049);
}

TEST_CASE("job settings are validated") {
  auto job = one_caption_job();
  job.client.retry_budget = -1;
  ScriptedClient client([](int) { return std::string(); });
  CHECK_THROWS_AS(generate_external(job, client), InvalidInput);
  job = one_caption_job();
  job.detailed_per_scene = -1;
  CHECK_THROWS_AS(generate_external(job, client), InvalidInput);
}

TEST_CASE("http client talks to an OpenAI-style endpoint") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth, seen_body;
  std::mutex m;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    {
      std::lock_guard lock(m);
      seen_auth = req.get_header_value("Authorization");
      seen_body = req.body;
    }
    if (req.get_header_value("Authorization") != "Bearer sekret") {
      res.status = 401;
      return;
    }
    nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "hello there"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ClientSettings settings;
  settings.base_url = "http://127.0.0.1:" + std::to_string(port);
  settings.api_key_env = "SCENECHAT_TEST_KEY";
  settings.timeout_seconds = 5;
  ::setenv("SCENECHAT_TEST_KEY", "sekret", 1);
  HttpChatClient good(settings);
  CHECK(good.complete("hi") == "hello there");
  {
    std::lock_guard lock(m);
    CHECK(seen_auth == "Bearer sekret");
    const auto body = nlohmann::json::parse(seen_body);
    CHECK(body["messages"][0]["content"] == "hi");
    CHECK(body["messages"][0]["role"] == "user");
  }
  ::setenv("SCENECHAT_TEST_KEY", "wrong", 1);
  HttpChatClient bad(settings);
  CHECK_THROWS_AS(bad.complete("hi"), AuthError);
  settings.path = "/broken";
  HttpChatClient broken(settings);
  CHECK_THROWS_WITH_AS(broken.complete("hi"), Contains("503"), TransientError);
  ::unsetenv("SCENECHAT_TEST_KEY");
  server.stop();
  th.join();
  CHECK(hits == 2);
  CHECK_THROWS_AS(HttpChatClient::parse_reply("{}"), TransientError);
  CHECK_THROWS_AS(HttpChatClient::parse_reply("not json"), TransientError);
}
