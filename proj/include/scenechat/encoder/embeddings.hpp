// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "scenechat/nn/tensor.hpp"

namespace scenechat::encoder {

/// Post-relation embeddings of one scene in LM space: the target first,
/// then the remaining objects in scene order.
struct SceneEmbeddings {
  nn::RowVector target;
  nn::Matrix others;  // n_s x d_model

  int d_model() const { return static_cast<int>(target.size()); }
  int other_count() const { return static_cast<int>(others.rows()); }
  /// (n_s + 1) x d_model with the target in row 0.
  nn::Matrix stacked() const;
  static SceneEmbeddings from_stacked(const nn::Matrix& rows);
};

}  // namespace scenechat::encoder
