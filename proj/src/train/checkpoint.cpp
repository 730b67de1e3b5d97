// SPDX-License-Identifier: Apache-2.0

#include "scenechat/train/checkpoint.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "scenechat/core/error.hpp"
#include "scenechat/core/text.hpp"

namespace scenechat::train {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kMagic = "SCENECHAT-PARAMS-1\n";

}  // namespace

nlohmann::json CheckpointManifest::to_json() const {
  return {{"stage_completed", stage_completed},
          {"two_stage", two_stage},
          {"relation_zeroed", relation_zeroed},
          {"global_step", global_step},
          {"params_file", params_file},
          {"vocab_file", vocab_file},
          {"metrics_file", metrics_file},
          {"model_config", model_config},
          {"stages", stages},
          {"corpus_fingerprint", corpus_fingerprint}};
}

CheckpointManifest CheckpointManifest::from_json(const nlohmann::json& j) {
  CheckpointManifest m;
  try {
    m.stage_completed = j.at("stage_completed").get<int>();
    m.two_stage = j.value("two_stage", false);
    m.relation_zeroed = j.value("relation_zeroed", false);
    m.global_step = j.value("global_step", std::int64_t{0});
    m.params_file = j.value("params_file", m.params_file);
    m.vocab_file = j.value("vocab_file", m.vocab_file);
    m.metrics_file = j.value("metrics_file", m.metrics_file);
    m.model_config = j.at("model_config");
    m.stages = j.value("stages", nlohmann::json::array());
    m.corpus_fingerprint = j.value("corpus_fingerprint", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest", e.what());
  }
  return m;
}

TrainingState fresh_state(const ModelConfig& config, lm::Tokenizer tokenizer) {
  TrainingState s;
  s.bundle = std::make_unique<ModelBundle>(config, std::move(tokenizer));
  s.manifest.model_config = s.bundle->config().to_json();
  return s;
}

void write_params(const nn::ParamStore& store, const std::string& path, const std::string& tag) {
  nlohmann::json header = {{"tag", tag}, {"params", nlohmann::json::array()}};
  for (const auto& e : store.entries()) {
    header["params"].push_back({{"name", e.name}, {"rows", e.var.rows()}, {"cols", e.var.cols()}});
  }
  const std::string h = header.dump();
  std::string out(kMagic);
  const std::uint64_t len = h.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  out += h;
  for (const auto& e : store.entries()) {
    const auto& v = e.var.value();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, v.data() + i, sizeof bits);
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  }
  write_file(path, out);
}

void read_params(nn::ParamStore& store, const std::string& path) {
  const std::string data = read_file(path);
  if (data.compare(0, kMagic.size(), kMagic) != 0) throw ParseError(path, "not a parameter archive");
  std::size_t pos = kMagic.size();
  auto u64 = [&](std::size_t at) {
    if (at + 8 > data.size()) throw ParseError(path, "truncated archive");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[at + b])) << (8 * b);
    return v;
  };
  const std::uint64_t len = u64(pos);
  pos += 8;
  if (pos + len > data.size()) throw ParseError(path, "truncated header");
  const auto header = nlohmann::json::parse(data.substr(pos, len), nullptr, false);
  if (header.is_discarded() || !header.contains("params")) throw ParseError(path, "bad header");
  pos += len;
  std::map<std::string, nn::Matrix> values;
  for (const auto& p : header["params"]) {
    const auto rows = p.at("rows").get<Eigen::Index>(), cols = p.at("cols").get<Eigen::Index>();
    nn::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const std::uint64_t bits = u64(pos);
      pos += 8;
      std::memcpy(m.data() + i, &bits, sizeof bits);
    }
    values.emplace(p.at("name").get<std::string>(), std::move(m));
  }
  if (pos != data.size()) throw ParseError(path, "trailing bytes after the last parameter");
  for (const auto& e : store.entries()) {
    const auto it = values.find(e.name);
    if (it == values.end()) throw ValidationError(path + ": missing parameter " + e.name);
    if (it->second.rows() != e.var.rows() || it->second.cols() != e.var.cols()) {
      throw ValidationError(path + ": shape mismatch for " + e.name);
    }
  }
  for (const auto& e : store.entries()) {
    nn::Var v = e.var;
    v.mutable_value() = values.at(e.name);
  }
}

void save_checkpoint(const TrainingState& state, const std::string& dir) {
  fs::create_directories(dir);
  const auto& m = state.manifest;
  write_params(state.bundle->store(), (fs::path(dir) / m.params_file).string(),
               "stage " + std::to_string(m.stage_completed));
  state.bundle->tokenizer().save((fs::path(dir) / m.vocab_file).string());
  std::string log;
  for (const auto& r : state.metrics) log += r.dump() + "\n";
  write_file((fs::path(dir) / m.metrics_file).string(), log);
  write_file((fs::path(dir) / "manifest.json").string(), m.to_json().dump(2) + "\n");
}

TrainingState load_checkpoint(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "manifest.json")) throw NotFound("no manifest.json in " + dir);
  const auto j = nlohmann::json::parse(read_file((root / "manifest.json").string()), nullptr, false);
  if (j.is_discarded()) throw ParseError((root / "manifest.json").string(), "invalid JSON");
  auto manifest = CheckpointManifest::from_json(j);
  for (const auto& f : {manifest.params_file, manifest.vocab_file, manifest.metrics_file}) {
    if (!fs::exists(root / f)) throw NotFound("checkpoint " + dir + " references missing file " + f);
  }
  TrainingState s;
  s.bundle = std::make_unique<ModelBundle>(ModelConfig::from_json(manifest.model_config),
                                           lm::Tokenizer::load((root / manifest.vocab_file).string()));
  read_params(s.bundle->store(), (root / manifest.params_file).string());
  std::int64_t last = -1;
  int line = 0;
  for (const auto& l : split_lines(read_file((root / manifest.metrics_file).string()))) {
    ++line;
    if (trim(l).empty()) continue;
    auto r = nlohmann::json::parse(l, nullptr, false);
    if (r.is_discarded() || !r.contains("step")) throw ParseError("metrics line " + std::to_string(line), "bad record");
    const auto step = r["step"].get<std::int64_t>();
    if (step <= last) throw ValidationError("metric log is not increasing at line " + std::to_string(line));
    last = step;
    s.metrics.push_back(std::move(r));
  }
  s.manifest = std::move(manifest);
  return s;
}

std::string resolve_checkpoint_dir(const std::string& flag, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SCENECHAT_CHECKPOINT"); env && *env) return env;
  return fallback;
}

}  // namespace scenechat::train
