#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "gm/autodiff.hpp"
#include "gm/rng.hpp"
#include "gm/tensor.hpp"

namespace gm {

// Architecture hyperparameters. bands/classes come from the data; the token
// counts N_Sp, N_Spc and the prioritized count N are derived unless
// explicitly overridden (0 = use the default derivation).
struct ModelConfig {
  int64_t patch_size = 7;       // S, odd
  int64_t bands = 0;            // spectral bands of the input cube
  int64_t classes = 0;          // C
  int64_t feature_dim = 64;     // F, token feature width
  int64_t state_dim = 128;      // d_model: fusion/attention/GRU width
  int64_t spectral_tokens = 0;  // N_Spc; default: patch_size
  int64_t spectral_group = 0;   // channels per spectral token; default: feature_dim
  int64_t top_tokens = 0;       // N; default: ceil((N_Sp + N_Spc) / 2)
  double lambda = 0.01;         // classifier L2 strength

  int64_t n_spatial() const { return patch_size * patch_size; }
  int64_t n_spectral() const { return spectral_tokens > 0 ? spectral_tokens : patch_size; }
  int64_t group_channels() const { return spectral_group > 0 ? spectral_group : feature_dim; }
  // 1x1 conv output channels: one group of group_channels per spectral token
  int64_t spectral_conv_channels() const { return n_spectral() * group_channels(); }
  int64_t n_tokens() const { return n_spatial() + n_spectral(); }
  int64_t n_top() const { return top_tokens > 0 ? top_tokens : (n_tokens() + 1) / 2; }
  int64_t key_dim() const { return state_dim; }  // d_k
  // fused sequence length: N graph tokens then N_Sp attention tokens
  int64_t sequence_len() const { return n_top() + n_spatial(); }

  void validate() const {
    if (patch_size < 1 || patch_size % 2 == 0)
      raise(ErrorKind::InvalidArgument,
            "patch size must be odd and positive, got " + std::to_string(patch_size));
    if (bands < 1) raise(ErrorKind::InvalidArgument, "bands must be >= 1");
    if (classes < 1) raise(ErrorKind::InvalidArgument, "classes must be >= 1");
    if (feature_dim < 1) raise(ErrorKind::InvalidArgument, "feature_dim must be >= 1");
    if (state_dim < 1) raise(ErrorKind::InvalidArgument, "state_dim must be >= 1");
    if (spectral_tokens < 0 || spectral_group < 0 || top_tokens < 0)
      raise(ErrorKind::InvalidArgument, "token-count overrides must be >= 0 (0 = default)");
    if (lambda < 0) raise(ErrorKind::InvalidArgument, "lambda must be >= 0");
    if (n_top() < 1 || n_top() > n_tokens())
      raise(ErrorKind::InvalidArgument,
            "top_tokens must lie in [1, " + std::to_string(n_tokens()) + "], got " +
                std::to_string(n_top()));
  }
};

// Every learnable tensor, addressable by path. for_each order is canonical:
// it fixes checkpoint layout, optimizer slots, and gradient ordering.
template <typename T>
struct ModelParams {
  Tensor<T> spatial_kernel, spatial_bias;    // 3x3xB_bands xF
  Tensor<T> spectral_kernel, spectral_bias;  // 1x1xB_bands x(N_Spc*G)
  Tensor<T> spatial_proj_w, spatial_proj_b;  // FxF, F
  Tensor<T> spectral_proj_w, spectral_proj_b;  // GxF, F
  Tensor<T> score_w, score_b;                // Fx1, 1
  Tensor<T> graph_w, graph_b;                // FxF, F
  Tensor<T> query_w, query_b;                // Fxd_k, d_k
  Tensor<T> key_w, key_b;                    // Fxd_k, d_k
  Tensor<T> value_w, value_b;                // FxF, F
  Tensor<T> fuse_graph_w, fuse_graph_b;      // Fxd_model, d_model
  Tensor<T> fuse_attn_w, fuse_attn_b;        // Fxd_model, d_model
  Tensor<T> gru_wz, gru_uz, gru_bz;          // d_model x d_model (x2), d_model
  Tensor<T> gru_wr, gru_ur, gru_br;
  Tensor<T> gru_wh, gru_uh, gru_bh;
  Tensor<T> classifier_w;                    // d_model x C, bias-free

  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn) {
    fn("tokenizer.spatial_conv.kernel", self.spatial_kernel);
    fn("tokenizer.spatial_conv.bias", self.spatial_bias);
    fn("tokenizer.spectral_conv.kernel", self.spectral_kernel);
    fn("tokenizer.spectral_conv.bias", self.spectral_bias);
    fn("tokenizer.spatial_proj.weight", self.spatial_proj_w);
    fn("tokenizer.spatial_proj.bias", self.spatial_proj_b);
    fn("tokenizer.spectral_proj.weight", self.spectral_proj_w);
    fn("tokenizer.spectral_proj.bias", self.spectral_proj_b);
    fn("prioritizer.score.weight", self.score_w);
    fn("prioritizer.score.bias", self.score_b);
    fn("graph.proj.weight", self.graph_w);
    fn("graph.proj.bias", self.graph_b);
    fn("attention.query.weight", self.query_w);
    fn("attention.query.bias", self.query_b);
    fn("attention.key.weight", self.key_w);
    fn("attention.key.bias", self.key_b);
    fn("attention.value.weight", self.value_w);
    fn("attention.value.bias", self.value_b);
    fn("fusion.graph_proj.weight", self.fuse_graph_w);
    fn("fusion.graph_proj.bias", self.fuse_graph_b);
    fn("fusion.attn_proj.weight", self.fuse_attn_w);
    fn("fusion.attn_proj.bias", self.fuse_attn_b);
    fn("gru.update.weight", self.gru_wz);
    fn("gru.update.recurrent", self.gru_uz);
    fn("gru.update.bias", self.gru_bz);
    fn("gru.reset.weight", self.gru_wr);
    fn("gru.reset.recurrent", self.gru_ur);
    fn("gru.reset.bias", self.gru_br);
    fn("gru.candidate.weight", self.gru_wh);
    fn("gru.candidate.recurrent", self.gru_uh);
    fn("gru.candidate.bias", self.gru_bh);
    fn("classifier.weight", self.classifier_w);
  }
  template <typename Fn>
  void for_each(Fn&& fn) {
    visit(*this, fn);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    visit(*this, fn);
  }

  // Correctly shaped, all zeros.
  static ModelParams shaped(const ModelConfig& cfg) {
    cfg.validate();
    int64_t B = cfg.bands, F = cfg.feature_dim, D = cfg.state_dim, G = cfg.group_channels();
    int64_t Cspc = cfg.spectral_conv_channels(), dk = cfg.key_dim(), C = cfg.classes;
    ModelParams p;
    p.spatial_kernel = Tensor<T>({3, 3, B, F});
    p.spatial_bias = Tensor<T>({F});
    p.spectral_kernel = Tensor<T>({1, 1, B, Cspc});
    p.spectral_bias = Tensor<T>({Cspc});
    p.spatial_proj_w = Tensor<T>({F, F});
    p.spatial_proj_b = Tensor<T>({F});
    p.spectral_proj_w = Tensor<T>({G, F});
    p.spectral_proj_b = Tensor<T>({F});
    p.score_w = Tensor<T>({F, 1});
    p.score_b = Tensor<T>({1});
    p.graph_w = Tensor<T>({F, F});
    p.graph_b = Tensor<T>({F});
    p.query_w = Tensor<T>({F, dk});
    p.query_b = Tensor<T>({dk});
    p.key_w = Tensor<T>({F, dk});
    p.key_b = Tensor<T>({dk});
    p.value_w = Tensor<T>({F, F});
    p.value_b = Tensor<T>({F});
    p.fuse_graph_w = Tensor<T>({F, D});
    p.fuse_graph_b = Tensor<T>({D});
    p.fuse_attn_w = Tensor<T>({F, D});
    p.fuse_attn_b = Tensor<T>({D});
    p.gru_wz = Tensor<T>({D, D});
    p.gru_uz = Tensor<T>({D, D});
    p.gru_bz = Tensor<T>({D});
    p.gru_wr = Tensor<T>({D, D});
    p.gru_ur = Tensor<T>({D, D});
    p.gru_br = Tensor<T>({D});
    p.gru_wh = Tensor<T>({D, D});
    p.gru_uh = Tensor<T>({D, D});
    p.gru_bh = Tensor<T>({D});
    p.classifier_w = Tensor<T>({D, C});
    return p;
  }

  // Glorot-uniform weights, zero biases. Weight draws happen in canonical
  // order from a single stream, so init is a pure function of (cfg, seed).
  static ModelParams init(const ModelConfig& cfg, uint64_t seed) {
    ModelParams p = shaped(cfg);
    Rng rng(seed);
    p.for_each([&](const char* path, Tensor<T>& t) {
      std::string name(path);
      bool is_bias = name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
      if (is_bias) return;  // biases stay zero
      int64_t fan_in, fan_out;
      if (t.rank() == 4) {  // k x k x c_in x c_out convolution kernel
        fan_in = t.dim(0) * t.dim(1) * t.dim(2);
        fan_out = t.dim(0) * t.dim(1) * t.dim(3);
      } else {  // dense: f_in x f_out
        fan_in = t.dim(0);
        fan_out = t.dim(1);
      }
      double limit = std::sqrt(6.0 / double(fan_in + fan_out));
      for (T& v : t.data) v = T(rng.uniform(-limit, limit));
    });
    return p;
  }

  int64_t total_elements() const {
    int64_t n = 0;
    for_each([&](const char*, const Tensor<T>& t) { n += t.numel(); });
    return n;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    std::vector<const Tensor<T>*> src;
    for_each([&](const char*, const Tensor<T>& t) { src.push_back(&t); });
    size_t i = 0;
    out.for_each([&](const char*, Tensor<U>& t) { t = src[i++]->template cast<U>(); });
    return out;
  }
};

// Tape handles for every parameter, bound once per graph so each training
// step differentiates w.r.t. the same Vars the optimizer updates.
template <typename T>
struct ModelVars {
  using Var = typename Graph<T>::Var;
  Var spatial_kernel, spatial_bias, spectral_kernel, spectral_bias;
  Var spatial_proj_w, spatial_proj_b, spectral_proj_w, spectral_proj_b;
  Var score_w, score_b;
  Var graph_w, graph_b;
  Var query_w, query_b, key_w, key_b, value_w, value_b;
  Var fuse_graph_w, fuse_graph_b, fuse_attn_w, fuse_attn_b;
  Var gru_wz, gru_uz, gru_bz, gru_wr, gru_ur, gru_br, gru_wh, gru_uh, gru_bh;
  Var classifier_w;

  // Rebuild from a canonical-order var list (inverse of all()).
  static ModelVars from_vars(const std::vector<Var>& vars) {
    ModelVars v;
    std::vector<Var*> slots = v.slot_pointers();
    if (vars.size() != slots.size())
      raise(ErrorKind::InvalidArgument,
            "expected " + std::to_string(slots.size()) + " parameter vars, got " +
                std::to_string(vars.size()));
    for (size_t i = 0; i < slots.size(); ++i) *slots[i] = vars[i];
    return v;
  }

  static ModelVars bind(Graph<T>& g, const ModelParams<T>& p) {
    ModelVars v;
    std::vector<Var*> slots = v.slot_pointers();
    size_t i = 0;
    p.for_each([&](const char*, const Tensor<T>& t) { *slots[i++] = g.input(t); });
    return v;
  }

 private:
  std::vector<Var*> slot_pointers() {
    return {
        &spatial_kernel, &spatial_bias, &spectral_kernel, &spectral_bias,
        &spatial_proj_w, &spatial_proj_b, &spectral_proj_w, &spectral_proj_b,
        &score_w,        &score_b,       &graph_w,         &graph_b,
        &query_w,        &query_b,       &key_w,           &key_b,
        &value_w,        &value_b,       &fuse_graph_w,    &fuse_graph_b,
        &fuse_attn_w,    &fuse_attn_b,   &gru_wz,          &gru_uz,
        &gru_bz,         &gru_wr,        &gru_ur,          &gru_br,
        &gru_wh,         &gru_uh,        &gru_bh,          &classifier_w};
  }

 public:
  std::vector<Var> all() const {
    return {spatial_kernel, spatial_bias, spectral_kernel, spectral_bias,
            spatial_proj_w, spatial_proj_b, spectral_proj_w, spectral_proj_b,
            score_w,        score_b,       graph_w,         graph_b,
            query_w,        query_b,       key_w,           key_b,
            value_w,        value_b,       fuse_graph_w,    fuse_graph_b,
            fuse_attn_w,    fuse_attn_b,   gru_wz,          gru_uz,
            gru_bz,         gru_wr,        gru_ur,          gru_br,
            gru_wh,         gru_uh,        gru_bh,          classifier_w};
  }
};

// Per-stage multiply-add counts (x2), produced by forward() from tape
// snapshots and by the estimator from closed forms. The score head and
// gather are folded into `graph`; Q/K/V projections into `attention`; the
// classifier into `ssm`. Sort work is tracked separately as comparisons,
// not arithmetic.
struct StageFlops {
  uint64_t tokenization = 0;
  uint64_t graph = 0;
  uint64_t attention = 0;
  uint64_t fusion = 0;
  uint64_t ssm = 0;
  uint64_t total() const { return tokenization + graph + attention + fusion + ssm; }
};

// Every intermediate the forward pass produces, in pipeline order. The
// estimator's activation-memory model sums exactly these seventeen stages.
template <typename T>
struct ForwardTrace {
  Tensor<T> spatial_tokens;                   // batch x N_Sp x F
  Tensor<T> spectral_tokens;                  // batch x N_Spc x F
  Tensor<T> tokens;                           // batch x (N_Sp+N_Spc) x F
  Tensor<T> scores;                           // batch x (N_Sp+N_Spc) x 1
  std::vector<std::vector<int>> top_indices;  // batch lists of N
  Tensor<T> prioritized;                      // batch x N x F
  Tensor<T> adjacency;                        // batch x N x N
  Tensor<T> propagated;                       // batch x N x F
  Tensor<T> graph_out;                        // batch x N x F
  Tensor<T> query;                            // batch x N_Sp x d_k
  Tensor<T> key;                              // batch x N_Spc x d_k
  Tensor<T> value;                            // batch x N_Spc x F
  Tensor<T> attn_weights;                     // batch x N_Sp x N_Spc
  Tensor<T> attn_out;                         // batch x N_Sp x F
  Tensor<T> fused;                            // batch x (N+N_Sp) x d_model
  Tensor<T> hidden;                           // batch x (N+N_Sp) x d_model, h_t stacked
  Tensor<T> logits;                           // batch x C
};

// ---- stages ----

template <typename T>
struct TokenizeOut {
  typename Graph<T>::Var spatial_tokens, spectral_tokens, tokens;
};

// Spatial stream: 3x3 same-padded conv + ReLU, flatten the S*S positions to
// tokens, dense-project to F. Spectral stream: 1x1 conv + ReLU, mean-pool
// over positions, regroup channels into N_Spc tokens of width G,
// dense-project to F. Tokens stack spatial-first.
template <typename T>
TokenizeOut<T> tokenize(Graph<T>& g, const ModelVars<T>& pv, const ModelConfig& cfg,
                        typename Graph<T>::Var x) {
  const Tensor<T>& xv = g.value(x);
  require_shape(xv, {xv.dim(0), cfg.patch_size, cfg.patch_size, cfg.bands}, "tokenize input");
  int64_t batch = xv.dim(0);

  auto sp = g.relu(g.conv2d(x, pv.spatial_kernel, pv.spatial_bias, Padding::Same));
  sp = g.reshape(sp, {batch, cfg.n_spatial(), cfg.feature_dim});
  auto spatial_tokens = g.dense(sp, pv.spatial_proj_w, pv.spatial_proj_b);

  auto spc = g.relu(g.conv2d(x, pv.spectral_kernel, pv.spectral_bias, Padding::Same));
  auto pooled = g.mean_hw(spc);
  auto grouped = g.reshape(pooled, {batch, cfg.n_spectral(), cfg.group_channels()});
  auto spectral_tokens = g.dense(grouped, pv.spectral_proj_w, pv.spectral_proj_b);

  return {spatial_tokens, spectral_tokens, g.concat_tokens(spatial_tokens, spectral_tokens)};
}

template <typename T>
struct PrioritizeOut {
  typename Graph<T>::Var scores, prioritized;
  std::vector<std::vector<int>> indices;
};

// Scores = ReLU(dense(tokens) -> 1). The N highest-scoring token rows are
// gathered per batch element in descending-score order, ties broken by the
// lower original index. Selection is piecewise-constant, so no gradient
// flows into the score head; `frozen` overrides selection (finite-difference
// checks hold indices fixed while perturbing).
template <typename T>
PrioritizeOut<T> prioritize(Graph<T>& g, const ModelVars<T>& pv, const ModelConfig& cfg,
                            typename Graph<T>::Var tokens,
                            const std::vector<std::vector<int>>* frozen = nullptr) {
  int64_t n_tokens = g.value(tokens).dim(1);
  int64_t n = cfg.n_top();
  if (n > n_tokens)
    raise(ErrorKind::InvalidArgument, "top_tokens " + std::to_string(n) + " exceeds token count " +
                                          std::to_string(n_tokens));
  auto scores = g.relu(g.dense(tokens, pv.score_w, pv.score_b));
  PrioritizeOut<T> out;
  out.scores = scores;
  if (frozen) {
    out.indices = *frozen;
  } else {
    const Tensor<T>& sv = g.value(scores);
    int64_t batch = sv.dim(0);
    out.indices.resize(size_t(batch));
    for (int64_t b = 0; b < batch; ++b) {
      std::vector<int> order(static_cast<size_t>(n_tokens));
      for (int64_t i = 0; i < n_tokens; ++i) order[size_t(i)] = int(i);
      const T* row = &sv.data[size_t(b * n_tokens)];
      std::stable_sort(order.begin(), order.end(),
                       [row](int a, int c) { return row[a] > row[c]; });
      order.resize(size_t(n));
      out.indices[size_t(b)] = std::move(order);
    }
  }
  out.prioritized = g.gather_tokens(tokens, out.indices);
  return out;
}

template <typename T>
struct GraphOut {
  typename Graph<T>::Var adjacency, propagated, graph_out;
};

// Adjacency = X_Pro . X_Pro^T (symmetric by construction), propagate by
// multiplying back onto the tokens, then a ReLU dense keeps width F.
template <typename T>
GraphOut<T> graph_propagate(Graph<T>& g, const ModelVars<T>& pv, typename Graph<T>::Var x_pro) {
  auto adjacency = g.matmul_nt(x_pro, x_pro);
  auto propagated = g.matmul(adjacency, x_pro);
  auto graph_out = g.relu(g.dense(propagated, pv.graph_w, pv.graph_b));
  return {adjacency, propagated, graph_out};
}

template <typename T>
struct AttentionOut {
  typename Graph<T>::Var query, key, value, weights, out;
};

// Queries from the spatial stream, keys and values from the spectral stream;
// softmax(QK^T / sqrt(d_k)) rows attend over the spectral tokens.
template <typename T>
AttentionOut<T> cross_attention(Graph<T>& g, const ModelVars<T>& pv, const ModelConfig& cfg,
                                typename Graph<T>::Var spatial_tokens,
                                typename Graph<T>::Var spectral_tokens) {
  auto q = g.dense(spatial_tokens, pv.query_w, pv.query_b);
  auto k = g.dense(spectral_tokens, pv.key_w, pv.key_b);
  auto v = g.dense(spectral_tokens, pv.value_w, pv.value_b);
  auto scaled = g.affine(g.matmul_nt(q, k), T(1.0 / std::sqrt(double(cfg.key_dim()))), T(0));
  auto weights = g.softmax_lastdim(scaled);
  auto out = g.matmul(weights, v);
  return {q, k, v, weights, out};
}

// Project both streams to d_model and stack along the token axis, graph
// tokens first — this ordering is the GRU's timestep order.
template <typename T>
typename Graph<T>::Var fuse(Graph<T>& g, const ModelVars<T>& pv, typename Graph<T>::Var graph_out,
                            typename Graph<T>::Var attn_out) {
  auto a = g.dense(graph_out, pv.fuse_graph_w, pv.fuse_graph_b);
  auto b = g.dense(attn_out, pv.fuse_attn_w, pv.fuse_attn_b);
  return g.concat_tokens(a, b);
}

// Gated recurrence over the fused tokens from h0 = 0:
//   z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
//   r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//   hcand_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
//   h_t = (1 - z_t) * h_{t-1} + z_t * hcand_t
// Returns the final state; optionally stacks every h_t into *hidden_all.
template <typename T>
typename Graph<T>::Var gru_ssm(Graph<T>& g, const ModelVars<T>& pv, const ModelConfig& cfg,
                               typename Graph<T>::Var fused, Tensor<T>* hidden_all = nullptr) {
  const Tensor<T>& fv = g.value(fused);
  int64_t batch = fv.dim(0), steps = fv.dim(1);
  if (steps < 1) raise(ErrorKind::InvalidArgument, "gru_ssm: empty token sequence");
  if (hidden_all) *hidden_all = Tensor<T>({batch, steps, cfg.state_dim});
  auto h = g.input(Tensor<T>({batch, cfg.state_dim}));  // h0 = 0
  for (int64_t t = 0; t < steps; ++t) {
    auto x_t = g.token_at(fused, t);
    auto z = g.sigmoid(g.add(g.dense(x_t, pv.gru_wz, pv.gru_bz),
                             g.dense(h, pv.gru_uz, typename Graph<T>::Var{})));
    auto r = g.sigmoid(g.add(g.dense(x_t, pv.gru_wr, pv.gru_br),
                             g.dense(h, pv.gru_ur, typename Graph<T>::Var{})));
    auto cand = g.tanh_(g.add(g.dense(x_t, pv.gru_wh, pv.gru_bh),
                              g.dense(g.mul(r, h), pv.gru_uh, typename Graph<T>::Var{})));
    h = g.add(g.mul(g.affine(z, T(-1), T(1)), h), g.mul(z, cand));
    if (hidden_all) {
      const Tensor<T>& hv = g.value(h);
      for (int64_t b = 0; b < batch; ++b)
        std::copy_n(&hv(b, 0), size_t(cfg.state_dim), &(*hidden_all)(b, t, 0));
    }
  }
  return h;
}

// Bias-free logits; the L2 penalty on this weight lives in the loss.
template <typename T>
typename Graph<T>::Var classify(Graph<T>& g, const ModelVars<T>& pv,
                                typename Graph<T>::Var h_final) {
  return g.dense(h_final, pv.classifier_w, typename Graph<T>::Var{});
}

template <typename T>
struct ForwardResult {
  typename Graph<T>::Var logits;
  std::vector<std::vector<int>> top_indices;
};

// Full pipeline: tokenize -> {prioritize -> graph} + cross-attention ->
// fuse -> GRU -> classify. Optionally records every intermediate and the
// per-stage flop deltas.
template <typename T>
ForwardResult<T> forward(Graph<T>& g, const ModelVars<T>& pv, const ModelConfig& cfg,
                         typename Graph<T>::Var x,
                         const std::vector<std::vector<int>>* frozen_topk = nullptr,
                         std::type_identity_t<ForwardTrace<T>>* trace = nullptr,
                         StageFlops* stage_flops = nullptr) {
  uint64_t mark = g.flops();
  auto step = [&](uint64_t& slot) {
    uint64_t now = g.flops();
    slot += now - mark;
    mark = now;
  };
  StageFlops local;

  auto tok = tokenize(g, pv, cfg, x);
  step(local.tokenization);

  auto pri = prioritize(g, pv, cfg, tok.tokens, frozen_topk);
  auto gr = graph_propagate(g, pv, pri.prioritized);
  step(local.graph);

  auto att = cross_attention(g, pv, cfg, tok.spatial_tokens, tok.spectral_tokens);
  step(local.attention);

  auto fused = fuse(g, pv, gr.graph_out, att.out);
  step(local.fusion);

  auto h = gru_ssm(g, pv, cfg, fused, trace ? &trace->hidden : nullptr);
  auto logits = classify(g, pv, h);
  step(local.ssm);

  if (stage_flops) *stage_flops = local;
  if (trace) {
    trace->spatial_tokens = g.value(tok.spatial_tokens);
    trace->spectral_tokens = g.value(tok.spectral_tokens);
    trace->tokens = g.value(tok.tokens);
    trace->scores = g.value(pri.scores);
    trace->top_indices = pri.indices;
    trace->prioritized = g.value(pri.prioritized);
    trace->adjacency = g.value(gr.adjacency);
    trace->propagated = g.value(gr.propagated);
    trace->graph_out = g.value(gr.graph_out);
    trace->query = g.value(att.query);
    trace->key = g.value(att.key);
    trace->value = g.value(att.value);
    trace->attn_weights = g.value(att.weights);
    trace->attn_out = g.value(att.out);
    trace->fused = g.value(fused);
    trace->logits = g.value(logits);
  }
  return {logits, pri.indices};
}

// Inference convenience: forward a plain batch tensor under fresh tape.
template <typename T>
Tensor<T> infer_logits(const ModelParams<T>& params, const ModelConfig& cfg,
                       const Tensor<T>& batch, ForwardTrace<T>* trace = nullptr) {
  Graph<T> g;
  auto pv = ModelVars<T>::bind(g, params);
  auto res = forward(g, pv, cfg, g.input(batch), nullptr, trace, nullptr);
  return g.value(res.logits);
}

}  // namespace gm
