#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gm/model.hpp"
#include "gm/tensor.hpp"

namespace gm {

// Trained-model container: ordered metadata strings plus named f32 tensors.
// Both sequences keep insertion order, so equal contents always serialize to
// the same bytes.
struct Checkpoint {
  struct Entry {
    std::string name;
    Tensor<float> tensor;
  };
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<Entry> tensors;

  const std::string* find_meta(const std::string& key) const;
  const Tensor<float>* find_tensor(const std::string& name) const;
  // insert or overwrite, preserving first-seen position
  void set_meta(const std::string& key, const std::string& value);
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Bundle a model: config fields become metadata, parameters become tensors in
// canonical order. `extra` metadata (e.g. the normalization flag a scorer
// needs at load time) is appended after the config keys.
Checkpoint make_checkpoint(const ModelConfig& cfg, const ModelParams<float>& params,
                           const std::vector<std::pair<std::string, std::string>>& extra = {});
ModelConfig config_from_checkpoint(const Checkpoint& ck);
// Rebuilds parameters for the embedded config; every canonical tensor must be
// present with its expected shape.
ModelParams<float> params_from_checkpoint(const Checkpoint& ck);

}  // namespace gm
