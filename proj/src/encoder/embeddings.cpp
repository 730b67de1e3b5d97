// SPDX-License-Identifier: Apache-2.0

#include "scenechat/encoder/embeddings.hpp"

#include "scenechat/core/error.hpp"

namespace scenechat::encoder {

nn::Matrix SceneEmbeddings::stacked() const {
  nn::Matrix out(others.rows() + 1, target.size());
  out.row(0) = target;
  if (others.rows() > 0) out.bottomRows(others.rows()) = others;
  return out;
}

SceneEmbeddings SceneEmbeddings::from_stacked(const nn::Matrix& rows) {
  if (rows.rows() < 1) throw InvalidInput("SceneEmbeddings: need at least the target row");
  SceneEmbeddings s;
  s.target = rows.row(0);
  s.others = rows.bottomRows(rows.rows() - 1);
  return s;
}

}  // namespace scenechat::encoder
