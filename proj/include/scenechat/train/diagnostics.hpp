// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenechat/nn/gradcheck.hpp"

namespace scenechat::train {

/// Names accepted by gradcheck_module.
const std::vector<std::string>& gradcheck_module_names();

/// Finite-difference check of one module on a freshly initialized d = 8
/// model and a small synthetic scene:
///   encoder  g, f_e, f_a and r through encode_scene
///   relation r alone (zero-initialized, so the identity), plus its input
///   lm       the language model and its slot inputs under the masked loss
///   stage1   the alignment loss through g, f_e and f_a
/// Throws InvalidInput for an unknown name.
nn::GradcheckReport gradcheck_module(const std::string& module, std::uint64_t seed = 0,
                                     const nn::GradcheckOptions& options = {});

}  // namespace scenechat::train
