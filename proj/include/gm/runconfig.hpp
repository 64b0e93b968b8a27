#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gm/model.hpp"
#include "gm/train.hpp"

namespace gm {

// Everything a run can configure, with the defaults a config file overrides.
// Section.key addressing matches the file syntax, so --set uses the same
// names. Unknown sections or keys are hard errors.
struct RunConfig {
  ModelConfig model;   // [model] patch_size, bands, classes, feature_dim, state_dim,
                       //         spectral_tokens, spectral_group, top_tokens, lambda
  TrainConfig train;   // [train] epochs, batch_size, learning_rate, seed, fraction, epoch_eval
  struct {
    std::string cube;       // [data] cube = path to an HSIC file
    bool normalize = true;  // [data] normalize = per-band min-max before patching
  } data;
  struct {
    int64_t height = 24;  // [synth] height, width, bands, classes, noise
    int64_t width = 24;
    int64_t bands = 8;
    int64_t classes = 4;
    double noise = 0.05;
  } synth;
  struct {
    std::string checkpoint;  // [eval] checkpoint = trained model to score
  } eval;
  struct {
    std::string checkpoint;  // [predict] checkpoint = trained model to map with
  } predict;

  // Apply one "section.key=value" assignment.
  void set(const std::string& key, const std::string& value);
};

// # comments, [section] headers, key = value lines. Unknown names and
// malformed numbers raise InvalidArgument naming the line.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "config");
RunConfig load_config(const std::string& path);

}  // namespace gm
