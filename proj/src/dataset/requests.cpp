// SPDX-License-Identifier: Apache-2.0

#include "scenechat/dataset/requests.hpp"

#include "scenechat/core/error.hpp"
#include "scenechat/core/rng.hpp"
#include "scenechat/core/text.hpp"

namespace scenechat::dataset {

const std::string_view kCaptionSystemPrompt =
    "You are an AI 3D visual assistant, and you are seeing an object in a 3D scene. What you see is provided with "
    "several sentences, describing the same object you are looking at, and the position of surrounding objects in "
    "the 3D scene to represent the content of the 3D scene. Based on these descriptions of this object and the "
    "location of surrounding objects in the 3D scene, summary and describe the placement, function of this object, "
    "and how a person can access this object in detail as if you are in the 3D scene.\n\n"
    "Importantly, do not mention any specific spatial coordinate values. The description should be more than 150 "
    "words and less than 200 words.";

const std::string_view kConversationSystemPrompt =
    "You are an AI 3D visual assistant, and you are seeing an object in a 3D scene. What you see is provided with "
    "several sentences describing the object and the positions of the objects around it. Write a multi-turn "
    "dialogue in which you ask yourself questions about this object and answer them, as if you are looking at the "
    "scene. Cover its appearance, its function, how many objects of its kind are in the room, and how it relates "
    "to the objects nearby. Only ask questions that can be answered confidently from the information given. "
    "Format every turn as a line starting with \"Question:\" followed by a line starting with \"Answer:\". Do not "
    "mention any specific spatial coordinate values.";

namespace {

InContextExample make_example(std::vector<std::string> captions, std::string target, std::string neighbors, int n,
                              std::string caption) {
  InContextExample e;
  e.scene.captions = std::move(captions);
  e.scene.target_line = "Described object: {" + target + "}";
  e.scene.neighbors_line = "Neighbor objects: {" + neighbors + "}";
  e.scene.neighbor_count = n;
  e.caption = std::move(caption);
  return e;
}

}  // namespace

const std::vector<InContextExample>& in_context_pool() {
  static const std::vector<InContextExample> kPool = {
      make_example(
          {"this is a brown wooden desk. it is against the wall under the window.",
           "a desk with a monitor on it. an office chair is in front of it."},
          "desk:[1.02, -2.10, 0.38]",
          "office chair:[0.95, -1.45, 0.52], monitor:[1.10, -2.25, 0.95], window:[1.05, -2.60, 1.55], "
          "trash can:[1.80, -2.20, 0.20], bookshelf:[2.40, -1.20, 0.90], door:[-0.80, -2.55, 1.00]",
          6,
          "The brown wooden desk stands against the wall directly beneath the window, which lets daylight fall onto "
          "its surface during the day. A monitor rests near the back edge of the desk, so the desk clearly serves as "
          "a small workstation for reading, writing and working on a computer. An office chair is tucked in front of "
          "it, ready for someone to sit down and pull closer. A trash can sits on the floor beside the desk, which "
          "keeps paper and small waste within easy reach while working. Slightly further away a tall bookshelf "
          "offers storage for books and folders that a person at the desk might need. To use the desk, a person "
          "would walk in from the door on the far side of the room, pass the bookshelf, pull out the office chair "
          "and sit facing the window. The open floor in front of the desk leaves enough space to move the chair "
          "freely. Overall, the desk forms the center of a quiet and practical working corner in this room."),
      make_example(
          {"a white bed with two pillows. it is in the corner of the room.",
           "the bed is large and white. a nightstand is on its right side."},
          "bed:[-1.60, 1.20, 0.30]",
          "pillow:[-2.30, 1.05, 0.55], pillow:[-2.30, 1.60, 0.55], nightstand:[-2.20, 2.30, 0.30], "
          "lamp:[-2.20, 2.35, 0.80], window:[-3.00, 1.30, 1.50], rug:[-0.40, 1.10, 0.01], closet:[0.90, 2.60, 1.00]",
          7,
          "The large white bed occupies the corner of the room, with its headboard placed against the wall below "
          "the window. Two soft pillows rest at the head of the bed, suggesting that it is prepared for a person to "
          "lie down and sleep comfortably. A small nightstand stands on the right side of the bed and carries a lamp, "
          "which provides gentle light for reading before sleeping or for finding the way at night. A rug lies on the "
          "floor next to the long side of the bed, so a person getting up in the morning can step onto a warm "
          "surface instead of the bare floor. Across the room a closet offers space to store clothes and bedding. "
          "To access the bed, a person can walk across the rug and sit on its edge, or climb in from the open side "
          "that faces the middle of the room. The window above the headboard brings in fresh air and daylight. "
          "Altogether the bed and its surroundings create a calm sleeping area in the room."),
      make_example(
          {"this is a gray sofa. it faces the television.",
           "a long gray couch with a coffee table in front of it."},
          "sofa:[0.20, 2.10, 0.40]",
          "coffee table:[0.25, 1.10, 0.25], armchair:[1.60, 1.30, 0.45], tv stand:[0.30, -0.80, 0.30], "
          "tv:[0.30, -0.85, 0.95], lamp:[-1.20, 2.30, 0.80], plant:[-1.30, 1.20, 0.50]",
          6,
          "The long gray sofa is placed along the wall and faces the television on the opposite side of the room, "
          "which makes it the main seating spot for watching shows and films. A low coffee table stands right in "
          "front of the sofa, close enough for a person to put down a drink, a remote control or a book without "
          "getting up. An armchair is set at an angle to the right of the sofa, so that several people can sit "
          "together and talk while still seeing the screen. A floor lamp on the left side of the sofa provides "
          "warm light in the evening, and a potted plant nearby adds some green color to this corner. To reach "
          "the sofa, a person can walk around the coffee table from either side and sit down on any of its seats. "
          "The distance between the sofa and the television is comfortable for viewing. This arrangement turns "
          "the sofa into the heart of a cozy living area where people can relax together."),
      make_example(
          {"a black office chair. it is pushed under the table.",
           "this is a black chair with wheels next to a round table."},
          "office chair:[-0.60, -0.40, 0.50]",
          "table:[-0.90, -0.10, 0.38], office chair:[-1.30, 0.30, 0.50], whiteboard:[-2.40, 0.00, 1.40], "
          "cabinet:[0.80, -1.60, 0.90], door:[1.70, 0.90, 1.00], trash can:[0.20, -1.20, 0.20]",
          6,
          "The black office chair with wheels is pushed partly under a round table, together with a second chair "
          "on the other side, which suggests that the table is used for small meetings or shared work. A whiteboard "
          "hangs on the wall behind the table, so people sitting here can write down ideas and discuss them. The "
          "chair has a padded seat and a backrest, making it comfortable for sitting during longer sessions, and its "
          "wheels let a person roll it back easily before standing up. A cabinet stands a short distance away and "
          "can hold documents, pens and other office supplies. A trash can is placed on the floor between the chair "
          "and the cabinet. To access the chair, a person would enter through the door, walk past the cabinet, pull "
          "the chair away from the table and sit down facing the whiteboard. The surrounding floor is open, so "
          "moving the chair around is easy. Together these objects create an efficient little meeting corner."),
      make_example(
          {"there is a white sink in the kitchen. it is below a cabinet.",
           "a kitchen sink between the stove and the refrigerator."},
          "sink:[2.10, 0.50, 0.90]",
          "kitchen cabinet:[2.20, 0.50, 1.80], stove:[2.15, -0.40, 0.45], counter:[2.10, 1.20, 0.45], "
          "refrigerator:[2.00, 2.10, 0.90], dish rack:[2.20, 0.95, 1.00], window:[2.70, 0.55, 1.50]",
          6,
          "The white sink is built into the kitchen counter and sits between the stove on one side and the "
          "refrigerator further along the wall, a layout that keeps the most important kitchen tasks close "
          "together. A wall cabinet hangs directly above the sink and can store glasses, plates and cleaning "
          "supplies. A dish rack stands on the counter right next to the sink, so freshly washed dishes can be "
          "placed there to dry. A window above the counter lets in daylight, which makes washing vegetables or "
          "dishes more pleasant. The sink is used for cleaning food, filling pots with water and washing up after "
          "meals, and its position near the stove means a cook can move a hot pot to the sink in just a few steps. "
          "A person can access the sink by standing in front of the counter, facing the window, with the stove on "
          "the left hand side. The floor in front of the counter is free of obstacles. The sink is a central and "
          "practical part of this kitchen."),
      make_example(
          {"a wooden bookshelf filled with books. it is next to the desk.",
           "this is a tall brown shelf standing against the wall."},
          "bookshelf:[-2.40, -1.10, 0.95]",
          "desk:[-1.50, -1.90, 0.38], chair:[-1.40, -1.30, 0.45], lamp:[-1.20, -2.30, 0.90], "
          "picture:[-2.90, 0.20, 1.60], armchair:[-1.90, 0.60, 0.45], rug:[-1.00, -0.20, 0.01]",
          6,
          "The tall brown bookshelf stands upright against the wall, close to the desk, and is filled with books of "
          "different sizes arranged on several shelves. Its position next to the desk makes it convenient for a "
          "person who is working or studying to reach for a reference book without leaving the chair for long. A "
          "desk lamp on the nearby desk provides enough light to read titles on the lower shelves in the evening. "
          "A framed picture hangs on the wall beside the bookshelf and adds a decorative touch to this part of the "
          "room, while an armchair a few steps away invites someone to sit down and read a book taken from the "
          "shelves. A rug covers the floor in front of the armchair. To access the bookshelf, a person can walk "
          "across the open floor from the middle of the room and stand directly in front of it, reaching the top "
          "shelves by stretching up. The bookshelf serves both as storage and as a quiet centerpiece of a small "
          "reading corner."),
  };
  return kPool;
}

std::vector<InContextExample> select_examples(std::uint64_t seed) { return select_examples(in_context_pool(), seed); }

std::vector<InContextExample> select_examples(const std::vector<InContextExample>& pool, std::uint64_t seed) {
  if (pool.size() < 2) throw InvalidInput("in-context pool needs at least 2 examples");
  Rng rng(seed);
  const std::size_t a = rng.index(pool.size());
  std::size_t b = rng.index(pool.size() - 1);
  if (b >= a) ++b;
  return {pool[a], pool[b]};
}

std::string build_caption_request(const TextualizedScene& tx, const std::vector<InContextExample>& examples) {
  if (examples.size() != 2) {
    throw InvalidInput("caption request needs exactly 2 in-context examples, got " + std::to_string(examples.size()));
  }
  std::string out(kCaptionSystemPrompt);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out += "\n\nExample " + std::to_string(i + 1) + ":\n\n" + examples[i].scene.render() + "\n\nDescription:\n" +
           examples[i].caption;
  }
  out += "\n\nNow describe this object:\n\n" + tx.render() + "\n\nDescription:\n";
  return out;
}

std::string build_conversation_request(const TextualizedScene& tx) {
  return std::string(kConversationSystemPrompt) + "\n\n" + tx.render() + "\n\nDialogue:\n";
}

std::string parse_caption_response(std::string_view text) {
  std::string t = trim(text);
  if (t.rfind("Description:", 0) == 0) t = trim(std::string_view(t).substr(12));
  if (t.empty()) throw ParseError("caption response", "empty text");
  return t;
}

std::vector<prompt::DialogueTurn> parse_conversation_response(std::string_view text) {
  std::vector<prompt::DialogueTurn> turns;
  enum { kNone, kQuestion, kAnswer } state = kNone;
  for (const auto& raw : split_lines(text)) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.rfind("Question:", 0) == 0) {
      if (state == kQuestion) throw ParseError("conversation response", "question without an answer");
      turns.push_back({trim(std::string_view(line).substr(9)), ""});
      state = kQuestion;
    } else if (line.rfind("Answer:", 0) == 0) {
      if (state != kQuestion) throw ParseError("conversation response", "answer without a question");
      turns.back().response = trim(std::string_view(line).substr(7));
      state = kAnswer;
    } else if (state == kQuestion) {
      turns.back().instruction += " " + line;
    } else if (state == kAnswer) {
      turns.back().response += " " + line;
    }
  }
  if (state == kQuestion) throw ParseError("conversation response", "question without an answer");
  if (turns.empty()) throw ParseError("conversation response", "no Question/Answer pairs found");
  return turns;
}

}  // namespace scenechat::dataset
