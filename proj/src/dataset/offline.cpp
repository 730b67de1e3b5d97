// SPDX-License-Identifier: Apache-2.0

#include "scenechat/dataset/offline.hpp"

#include <algorithm>

#include "scenechat/core/error.hpp"
#include "scenechat/core/rng.hpp"
#include "scenechat/core/text.hpp"
#include "scenechat/dataset/facts.hpp"

namespace scenechat::dataset {
namespace {

const scene::ObjectRecord& nearest(const scene::SceneRecord& scene, int target_id) {
  const auto n = knn_neighbors(scene, target_id, 1);
  if (n.empty()) throw InvalidInput("scene " + scene.scene_id + " has no object besides the target");
  return *n.front();
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string article(const std::string& word) {
  return std::string("aeiou").find(word[0]) != std::string::npos ? "an" : "a";
}

std::uint64_t item_seed(std::uint64_t seed, const scene::SceneRecord& scene, int target_id, std::uint64_t stream) {
  return mix_seed(seed ^ fnv1a(scene.scene_id), static_cast<std::uint64_t>(target_id) * 16 + stream);
}

}  // namespace

QuestionAnswer answer_question(const scene::SceneRecord& scene, int target_id, Question q) {
  const auto& t = scene.at(target_id);
  const auto& nn = nearest(scene, target_id);
  const std::string cat = t.category;
  switch (q) {
    case Question::kCategory:
      return {"What is this object?", "This is " + article(color_word(t)) + " " + color_word(t) + " " + cat + "."};
    case Question::kColor:
      return {"What color is this object?", "The " + cat + " is " + color_word(t) + "."};
    case Question::kSize:
      return {"How big is this object?", "The " + cat + " is " + size_word(t) + "."};
    case Question::kNearest:
      return {"What is the closest object to this object?",
              "The closest object to the " + cat + " is the " + nn.category + "."};
    case Question::kCount:
      return {"How many " + plural(cat) + " are in the room?",
              count_phrase(scene.count_category(cat), cat) + " in the room."};
    case Question::kFunction: {
      const std::string fn = function_of(cat);
      return {"What is this object used for?",
              fn.empty() ? "The " + cat + " is part of the room." : "The " + cat + " is used for " + fn + "."};
    }
    case Question::kDirection:
      return {"Where is the " + nn.category + " relative to this object?",
              "The " + nn.category + " is " + direction_word(nn, t) + " the " + cat + "."};
  }
  throw InvalidInput("unknown question kind");
}

std::vector<std::string> brief_captions(const scene::SceneRecord& scene, int target_id, std::uint64_t seed,
                                        int count) {
  const auto& t = scene.at(target_id);
  const auto& nn = nearest(scene, target_id);
  const std::string color = color_word(t);
  const std::string dir = direction_word(t, nn);
  const std::vector<std::string> all{
      "this is " + article(color) + " " + color + " " + t.category + ". it is " + dir + " the " + nn.category + ".",
      article(color) + " " + color + " " + t.category + " " + dir + " the " + nn.category + ".",
      "the " + t.category + " is " + color + ". the " + nn.category + " is close to it.",
      "there is " + article(size_word(t)) + " " + size_word(t) + " " + color + " " + t.category +
          ". it is placed near the " + nn.category + ".",
  };
  Rng rng(item_seed(seed, scene, target_id, 1));
  std::vector<std::size_t> order{0, 1, 2, 3};
  rng.shuffle(std::span(order));
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) out.push_back(all[order[static_cast<std::size_t>(i) % order.size()]]);
  return out;
}

std::vector<CaptionRecord> caption_corpus(const std::vector<scene::SceneRecord>& scenes, std::uint64_t seed,
                                          int captions_per_object) {
  std::vector<CaptionRecord> out;
  for (const auto& s : scenes) {
    for (const auto& o : s.objects) {
      out.push_back({s.scene_id, o.id, brief_captions(s, o.id, seed, captions_per_object)});
    }
  }
  return out;
}

InstructionSample offline_conversation(const scene::SceneRecord& scene, int target_id, std::uint64_t seed) {
  Rng rng(item_seed(seed, scene, target_id, 2));
  std::vector<Question> kinds{Question::kCategory, Question::kColor,    Question::kSize,     Question::kNearest,
                              Question::kCount,    Question::kFunction, Question::kDirection};
  rng.shuffle(std::span(kinds));
  const int turns = rng.range(2, 3);
  InstructionSample s;
  s.scene_id = scene.scene_id;
  s.target_object_id = target_id;
  s.kind = Kind::kConversation;
  s.provenance = Provenance::kOfflineTemplate;
  for (int i = 0; i < turns; ++i) {
    const auto qa = answer_question(scene, target_id, kinds[static_cast<std::size_t>(i)]);
    s.turns.push_back({qa.instruction, qa.response});
  }
  return s;
}

InstructionSample offline_detailed_caption(const scene::SceneRecord& scene, int target_id, std::uint64_t seed) {
  const auto& t = scene.at(target_id);
  const std::string cat = t.category;
  const std::string color = color_word(t);
  const auto neighbors = knn_neighbors(scene, target_id, 3);
  Rng rng(item_seed(seed, scene, target_id, 3));

  std::vector<std::string> facts;
  facts.push_back("The object is " + article(size_word(t)) + " " + size_word(t) + " " + color + " " + cat +
                  " located " + room_position(scene, t) + ".");
  const std::string fn = function_of(cat);
  if (!fn.empty()) facts.push_back("It is mainly used for " + fn + ", which makes it a useful part of the room.");
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const auto& n = *neighbors[i];
    if (i == 0) {
      facts.push_back("The closest object to the " + cat + " is " + article(color_word(n)) + " " + color_word(n) +
                      " " + n.category + ", which is " + direction_word(n, t) + " the " + cat + ".");
    } else {
      facts.push_back(capitalize(article(color_word(n))) + " " + color_word(n) + " " + n.category +
                      " can also be found nearby, " + direction_word(n, t) + " the " + cat + ".");
    }
  }
  facts.push_back(count_phrase(scene.count_category(cat), cat) + " in the room, and " +
                  std::to_string(scene.objects.size()) + " objects in total.");

  std::vector<std::string> fillers{
      "The " + cat + " fits naturally into the layout and does not block the paths through the room.",
      "A person can reach the " + cat + " easily by walking around the objects that surround it.",
      "Its " + color + " color stands out against the rest of the furniture and helps to locate it quickly.",
      "The space around the " + cat + " leaves enough room for a person to move and use it comfortably.",
      "Together with its neighbors, the " + cat + " forms a small functional area within the room.",
      "The arrangement suggests that the " + cat + " was placed with everyday use in mind.",
      "Someone entering the room would notice the " + cat + " after a short look around.",
      "The objects near the " + cat + " make this part of the room practical and well organized.",
      "Its position keeps it accessible without getting in the way of other activities.",
      "The " + cat + " looks well kept and ready to be used at any time of the day.",
      "Light from the room falls on the " + cat + " and makes its shape easy to recognize.",
      "Overall, the " + cat + " contributes to a calm and orderly atmosphere in the space.",
      "Moving around the " + cat + " is simple because the floor nearby is mostly clear.",
      "The placement of the " + cat + " reflects a sensible use of the available space.",
  };
  rng.shuffle(std::span(fillers));

  std::string text;
  std::size_t words = 0;
  auto append = [&](const std::string& sentence) {
    text += (text.empty() ? "" : " ") + sentence;
    words += word_count(sentence);
  };
  for (const auto& f : facts) append(f);
  for (const auto& f : fillers) {
    if (words >= static_cast<std::size_t>(kMinCaptionWords)) break;
    append(f);
  }
  InstructionSample s;
  s.scene_id = scene.scene_id;
  s.target_object_id = target_id;
  s.kind = Kind::kDetailedCaption;
  s.provenance = Provenance::kOfflineTemplate;
  s.turns.push_back({kDetailedInstruction, text});
  if (auto reason = validate_sample(s)) {
    throw Error("offline detailed caption for " + scene.scene_id + "/" + std::to_string(target_id) + ": " + *reason);
  }
  return s;
}

std::vector<InstructionSample> generate_offline(const std::vector<scene::SceneRecord>& scenes,
                                                const OfflineCounts& counts, std::uint64_t seed) {
  std::vector<InstructionSample> out;
  for (const auto& s : scenes) {
    Rng rng(mix_seed(seed ^ fnv1a(s.scene_id), 0));
    for (int i = 0; i < counts.conversations_per_scene; ++i) {
      const int target = s.objects[rng.index(s.objects.size())].id;
      out.push_back(offline_conversation(s, target, mix_seed(seed ^ fnv1a(s.scene_id), 2 * i + 1)));
    }
    for (int i = 0; i < counts.detailed_per_scene; ++i) {
      const int target = s.objects[rng.index(s.objects.size())].id;
      out.push_back(offline_detailed_caption(s, target, mix_seed(seed ^ fnv1a(s.scene_id), 2 * i + 2)));
    }
  }
  return out;
}

}  // namespace scenechat::dataset
