#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gm/model.hpp"

namespace gm {

// Closed forms for what a run will cost, derived from the config alone. The
// flop forms must agree exactly with the tape's instrumented counts — tests
// hold the two routes together.

int64_t count_params(const ModelConfig& cfg);
StageFlops estimate_flops(const ModelConfig& cfg);  // per sample
// top-N selection work, reported separately from arithmetic
uint64_t estimate_sort_comparisons(const ModelConfig& cfg);  // per sample
// the forward pass's intermediates in pipeline order: (name, elements/sample)
std::vector<std::pair<std::string, int64_t>> trace_stage_elements(const ModelConfig& cfg);

struct ResourceReport {
  int64_t batch = 0;
  int64_t param_count = 0;
  int64_t param_bytes = 0;       // f32 storage
  int64_t activation_bytes = 0;  // batch x every traced stage
  int64_t gradient_bytes = 0;    // mirrors activations
  int64_t optimizer_bytes = 0;   // two Adam moments per parameter
  int64_t total_bytes = 0;
  StageFlops flops;               // per sample
  uint64_t sort_comparisons = 0;  // per sample, informational
};

ResourceReport estimate_resources(const ModelConfig& cfg, int64_t batch);
std::string format_report(const ModelConfig& cfg, const ResourceReport& r);

}  // namespace gm
