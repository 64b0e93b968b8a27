#include "gm/estimate.hpp"

namespace gm {

int64_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  int64_t B = cfg.bands, F = cfg.feature_dim, D = cfg.state_dim, G = cfg.group_channels();
  int64_t Cspc = cfg.spectral_conv_channels(), dk = cfg.key_dim(), C = cfg.classes;
  int64_t n = 0;
  n += 3 * 3 * B * F + F;   // spatial conv
  n += B * Cspc + Cspc;     // spectral 1x1 conv
  n += F * F + F;           // spatial projection
  n += G * F + F;           // spectral projection
  n += F + 1;               // score head
  n += F * F + F;           // graph projection
  n += 2 * (F * dk + dk);   // query, key
  n += F * F + F;           // value
  n += 2 * (F * D + D);     // fusion projections
  n += 3 * (2 * D * D + D); // GRU gates
  n += D * C;               // classifier
  return n;
}

StageFlops estimate_flops(const ModelConfig& cfg) {
  cfg.validate();
  uint64_t S2 = uint64_t(cfg.n_spatial()), B = uint64_t(cfg.bands);
  uint64_t F = uint64_t(cfg.feature_dim), D = uint64_t(cfg.state_dim);
  uint64_t Cspc = uint64_t(cfg.spectral_conv_channels()), dk = uint64_t(cfg.key_dim());
  uint64_t Nsp = S2, Nspc = uint64_t(cfg.n_spectral()), G = uint64_t(cfg.group_channels());
  uint64_t T = uint64_t(cfg.n_tokens()), N = uint64_t(cfg.n_top());
  uint64_t seq = uint64_t(cfg.sequence_len()), C = uint64_t(cfg.classes);

  StageFlops f;
  // convs meter their nominal k*k taps (padding included) plus the two
  // token projections
  f.tokenization = 2 * S2 * 9 * B * F + 2 * S2 * B * Cspc + 2 * Nsp * F * F + 2 * Nspc * G * F;
  // score head, X.X^T, A.X, graph projection
  f.graph = 2 * T * F + 2 * N * F * N + 2 * N * N * F + 2 * N * F * F;
  // Q/K/V projections, QK^T, weights.V
  f.attention =
      2 * Nsp * F * dk + 2 * Nspc * F * dk + 2 * Nspc * F * F + 2 * Nsp * dk * Nspc +
      2 * Nsp * Nspc * F;
  f.fusion = 2 * N * F * D + 2 * Nsp * F * D;
  // six d_model x d_model denses per GRU step, then the classifier
  f.ssm = seq * 12 * D * D + 2 * D * C;
  return f;
}

uint64_t estimate_sort_comparisons(const ModelConfig& cfg) {
  cfg.validate();
  uint64_t t = uint64_t(cfg.n_tokens());
  uint64_t lg = 0;
  while ((uint64_t(1) << lg) < t) ++lg;
  return t * lg;  // n log2 n bound for the per-sample score sort
}

std::vector<std::pair<std::string, int64_t>> trace_stage_elements(const ModelConfig& cfg) {
  cfg.validate();
  int64_t F = cfg.feature_dim, D = cfg.state_dim, dk = cfg.key_dim();
  int64_t Nsp = cfg.n_spatial(), Nspc = cfg.n_spectral(), T = cfg.n_tokens(), N = cfg.n_top();
  int64_t seq = cfg.sequence_len(), C = cfg.classes;
  return {
      {"spatial_tokens", Nsp * F},
      {"spectral_tokens", Nspc * F},
      {"tokens", T * F},
      {"scores", T},
      {"top_indices", N},
      {"prioritized", N * F},
      {"adjacency", N * N},
      {"propagated", N * F},
      {"graph_out", N * F},
      {"query", Nsp * dk},
      {"key", Nspc * dk},
      {"value", Nspc * F},
      {"attn_weights", Nsp * Nspc},
      {"attn_out", Nsp * F},
      {"fused", seq * D},
      {"hidden", seq * D},
      {"logits", C},
  };
}

ResourceReport estimate_resources(const ModelConfig& cfg, int64_t batch) {
  if (batch < 1) raise(ErrorKind::InvalidArgument, "batch must be >= 1");
  ResourceReport r;
  r.batch = batch;
  r.param_count = count_params(cfg);
  r.param_bytes = 4 * r.param_count;
  int64_t stage_elems = 0;
  for (const auto& [name, elems] : trace_stage_elements(cfg)) stage_elems += elems;
  r.activation_bytes = 4 * batch * stage_elems;
  r.gradient_bytes = r.activation_bytes;
  r.optimizer_bytes = 2 * r.param_bytes;
  r.total_bytes = r.param_bytes + r.activation_bytes + r.gradient_bytes + r.optimizer_bytes;
  r.flops = estimate_flops(cfg);
  r.sort_comparisons = estimate_sort_comparisons(cfg);
  return r;
}

std::string format_report(const ModelConfig& cfg, const ResourceReport& r) {
  std::string out;
  out += "resource report (flops count 2 per multiply-accumulate; convs meter nominal k*k taps "
         "including padding)\n";
  out += "patch_size=" + std::to_string(cfg.patch_size) + "\n";
  out += "bands=" + std::to_string(cfg.bands) + "\n";
  out += "classes=" + std::to_string(cfg.classes) + "\n";
  out += "feature_dim=" + std::to_string(cfg.feature_dim) + "\n";
  out += "state_dim=" + std::to_string(cfg.state_dim) + "\n";
  out += "spatial_tokens=" + std::to_string(cfg.n_spatial()) + "\n";
  out += "spectral_tokens=" + std::to_string(cfg.n_spectral()) + "\n";
  out += "top_tokens=" + std::to_string(cfg.n_top()) + "\n";
  out += "batch=" + std::to_string(r.batch) + "\n";
  out += "parameters=" + std::to_string(r.param_count) + "\n";
  out += "parameter_bytes=" + std::to_string(r.param_bytes) + "\n";
  out += "activation_bytes=" + std::to_string(r.activation_bytes) + "\n";
  out += "gradient_bytes=" + std::to_string(r.gradient_bytes) + "\n";
  out += "optimizer_bytes=" + std::to_string(r.optimizer_bytes) + "\n";
  out += "total_bytes=" + std::to_string(r.total_bytes) + "\n";
  out += "flops_per_sample.tokenization=" + std::to_string(r.flops.tokenization) + "\n";
  out += "flops_per_sample.graph=" + std::to_string(r.flops.graph) + "\n";
  out += "flops_per_sample.attention=" + std::to_string(r.flops.attention) + "\n";
  out += "flops_per_sample.fusion=" + std::to_string(r.flops.fusion) + "\n";
  out += "flops_per_sample.ssm=" + std::to_string(r.flops.ssm) + "\n";
  out += "flops_per_sample.total=" + std::to_string(r.flops.total()) + "\n";
  out += "flops_per_batch=" + std::to_string(r.flops.total() * uint64_t(r.batch)) + "\n";
  out += "sort_comparisons_per_sample=" + std::to_string(r.sort_comparisons) +
         " (selection work, not arithmetic)\n";
  return out;
}

}  // namespace gm
