// SPDX-License-Identifier: Apache-2.0

#include "scenechat/train/diagnostics.hpp"

#include <algorithm>
#include <memory>
#include <set>

#include "scenechat/core/error.hpp"
#include "scenechat/core/rng.hpp"
#include "scenechat/nn/ops.hpp"
#include "scenechat/prompt/prompt.hpp"
#include "scenechat/scene/synthetic.hpp"
#include "scenechat/train/bundle.hpp"
#include "scenechat/train/pipeline.hpp"
#include "scenechat/train/stages.hpp"

namespace scenechat::train {

namespace {

std::unique_ptr<ModelBundle> small_bundle(std::uint64_t seed) {
  ModelConfig mc;
  mc.seed = seed;
  mc.encoder.d_point = 8;
  mc.encoder.d_model = 8;
  mc.encoder.point_mlp_layers = {8};
  mc.encoder.relation_heads = 2;
  mc.lm.d_model = 8;
  mc.lm.n_layers = 2;
  mc.lm.n_heads = 2;
  mc.lm.context_length = 128;
  return std::make_unique<ModelBundle>(mc, build_tokenizer({}, {}));
}

scene::SceneRecord small_scene(std::uint64_t seed) {
  scene::SyntheticSceneSpec spec;
  spec.seed = seed;
  spec.num_objects = 3;
  spec.points_per_object = 12;
  spec.scene_id = "gradcheck";
  return scene::generate_synthetic_scene(spec);
}

nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double sd) {
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, sd);
  }
  return m;
}

using Params = std::vector<std::pair<std::string, nn::Var>>;

Params trainable_params(const nn::ParamStore& store, const std::set<std::string>& groups) {
  Params out;
  for (const auto& e : store.entries()) {
    if (groups.count(nn::ParamStore::group_of(e.name))) out.emplace_back(e.name, e.var);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& gradcheck_module_names() {
  static const std::vector<std::string> names{"encoder", "relation", "lm", "stage1"};
  return names;
}

nn::GradcheckReport gradcheck_module(const std::string& module, std::uint64_t seed,
                                     const nn::GradcheckOptions& options) {
  const auto& names = gradcheck_module_names();
  if (std::find(names.begin(), names.end(), module) == names.end()) {
    throw InvalidInput("unknown module '" + module + "' (encoder, relation, lm, stage1)");
  }
  auto bundle = small_bundle(seed);
  const auto scene = small_scene(mix_seed(seed, 7));
  const int target = scene.objects[1].id;
  Rng rng(mix_seed(seed, 11));
  const int d = 8;
  const auto n = static_cast<Eigen::Index>(scene.objects.size());

  if (module == "encoder") {
    const std::set<std::string> groups{"g", "f_e", "f_a", "r"};
    bundle->store().set_trainable(groups);
    const nn::Matrix w = random_matrix(n, d, rng, 1.0);
    auto loss = [&] {
      const nn::Var out = bundle->encoder().encode_scene_var(scene, target);
      return nn::sum(nn::gelu(nn::matmul_nt(out, nn::Var::constant(w))));
    };
    return nn::gradcheck(loss, trainable_params(bundle->store(), groups), options);
  }
  if (module == "relation") {
    bundle->encoder().init_relation_zero();
    bundle->store().set_trainable({"r"});
    nn::Var x = nn::Var::parameter(random_matrix(n, d, rng, 0.5));
    const nn::Matrix w = random_matrix(n, d, rng, 1.0);
    auto loss = [&] { return nn::sum(nn::gelu(nn::matmul_nt(bundle->encoder().relate(x), nn::Var::constant(w)))); };
    Params params{{"input", x}};
    for (auto& p : trainable_params(bundle->store(), {"r"})) params.push_back(std::move(p));
    return nn::gradcheck(loss, params, options);
  }
  if (module == "lm") {
    bundle->store().set_trainable({"lm"});
    const auto embs = encoder::SceneEmbeddings::from_stacked(random_matrix(n, d, rng, 0.5));
    const auto seq = prompt::assemble_dialogue(embs, {{"What color is this object?", "The chair is black."}},
                                               bundle->tokenizer());
    nn::Var slots = nn::Var::parameter(seq.slots);
    auto loss = [&] { return lm::lm_loss(bundle->lm().forward_mixed(seq, slots), seq); };
    Params params{{"slots", slots}};
    for (auto& p : trainable_params(bundle->store(), {"lm"})) params.push_back(std::move(p));
    nn::GradcheckOptions opts = options;
    if (opts.max_elements == 0) opts.max_elements = 24;
    return nn::gradcheck(loss, params, opts);
  }
  // stage1
  const std::set<std::string> groups{"g", "f_e", "f_a"};
  bundle->store().set_trainable(groups);
  const auto stats = encoder::SceneStats::of(scene);
  nn::Matrix y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    y.row(i) = bundle->lm().class_name_embedding(scene.objects[static_cast<std::size_t>(i)].category);
  }
  auto loss = [&] {
    std::vector<nn::Var> rows;
    for (const auto& o : scene.objects) rows.push_back(bundle->encoder().encode_object(o, stats));
    return stage1_align_loss(nn::concat_rows(rows), nn::Var::constant(y));
  };
  return nn::gradcheck(loss, trainable_params(bundle->store(), groups), options);
}

}  // namespace scenechat::train
