// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "scenechat/nn/tensor.hpp"

namespace scenechat::nn {

/// Named parameter tensors in registration order.
///
/// A parameter's group is the prefix of its name up to the first '.', e.g.
/// "f_a.l0.weight" belongs to group "f_a". Trainability is managed per group.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var var;
  };

  Var add(std::string name, Matrix init);
  const Var& get(std::string_view name) const;
  bool has(std::string_view name) const;
  const std::vector<Entry>& entries() const { return entries_; }

  static std::string group_of(std::string_view name);
  std::set<std::string> groups() const;

  /// Enables gradients exactly for parameters whose group is in `trainable`.
  void set_trainable(const std::set<std::string>& trainable);
  std::vector<Var> trainable_vars() const;
  void zero_grad();

  /// Little-endian dump of name, shape and values for the selected groups
  /// (all groups when `only` is empty).
  std::string serialize(const std::set<std::string>& only = {}) const;
  std::uint64_t fingerprint(const std::set<std::string>& only = {}) const;

  /// Copies values from `other` for every name both stores share.
  void copy_values_from(const ParamStore& other);

  std::size_t parameter_count() const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace scenechat::nn
