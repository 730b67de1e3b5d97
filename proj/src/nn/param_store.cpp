// SPDX-License-Identifier: Apache-2.0

#include "scenechat/nn/param_store.hpp"

#include <cstring>

#include "scenechat/core/error.hpp"
#include "scenechat/core/text.hpp"

namespace scenechat::nn {

Var ParamStore::add(std::string name, Matrix init) {
  if (has(name)) throw InvalidInput("duplicate parameter " + name);
  Var v = Var::parameter(std::move(init));
  entries_.push_back({std::move(name), v});
  return v;
}

const Var& ParamStore::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.var;
  }
  throw NotFound("no parameter named " + std::string(name));
}

bool ParamStore::has(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::string ParamStore::group_of(std::string_view name) {
  return std::string(name.substr(0, name.find('.')));
}

std::set<std::string> ParamStore::groups() const {
  std::set<std::string> out;
  for (const auto& e : entries_) out.insert(group_of(e.name));
  return out;
}

void ParamStore::set_trainable(const std::set<std::string>& trainable) {
  for (auto& e : entries_) {
    e.var.set_requires_grad(trainable.count(group_of(e.name)) > 0);
    e.var.zero_grad();
  }
}

std::vector<Var> ParamStore::trainable_vars() const {
  std::vector<Var> out;
  for (const auto& e : entries_) {
    if (e.var.requires_grad()) out.push_back(e.var);
  }
  return out;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

namespace {
template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}
}  // namespace

std::string ParamStore::serialize(const std::set<std::string>& only) const {
  std::string out;
  for (const auto& e : entries_) {
    if (!only.empty() && only.count(group_of(e.name)) == 0) continue;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put<std::int64_t>(out, e.var.rows());
    put<std::int64_t>(out, e.var.cols());
    out.append(reinterpret_cast<const char*>(e.var.value().data()),
               static_cast<std::size_t>(e.var.value().size()) * sizeof(double));
  }
  return out;
}

std::uint64_t ParamStore::fingerprint(const std::set<std::string>& only) const {
  return fnv1a(serialize(only));
}

void ParamStore::copy_values_from(const ParamStore& other) {
  for (auto& e : entries_) {
    if (!other.has(e.name)) continue;
    const Var& src = other.get(e.name);
    if (src.rows() != e.var.rows() || src.cols() != e.var.cols()) {
      throw ValidationError("shape mismatch for parameter " + e.name);
    }
    e.var.mutable_value() = src.value();
  }
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.var.value().size());
  return n;
}

}  // namespace scenechat::nn
