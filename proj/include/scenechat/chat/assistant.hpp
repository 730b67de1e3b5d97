// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "scenechat/encoder/embeddings.hpp"
#include "scenechat/judge/eval.hpp"
#include "scenechat/lm/lm.hpp"
#include "scenechat/prompt/prompt.hpp"
#include "scenechat/train/bundle.hpp"

namespace scenechat::chat {

/// Answers instructions about a target object with a trained bundle.
/// Read-only: concurrent calls are safe while nothing trains the bundle.
class Assistant : public judge::ResponseModel {
 public:
  Assistant(const train::ModelBundle& bundle, lm::DecodingOptions decoding) : bundle_(bundle), decoding_(decoding) {}

  encoder::SceneEmbeddings embed(const scene::SceneRecord& scene, int target_id) const;
  /// Full generation result for the next turn.
  lm::GenerationResult reply(const encoder::SceneEmbeddings& embs, const std::vector<prompt::DialogueTurn>& history,
                             const std::string& instruction) const;

  std::string respond(const scene::SceneRecord& scene, int target_id, const std::vector<prompt::DialogueTurn>& history,
                      const std::string& instruction) override;

  const lm::DecodingOptions& decoding() const { return decoding_; }

 private:
  const train::ModelBundle& bundle_;
  lm::DecodingOptions decoding_;
};

}  // namespace scenechat::chat
