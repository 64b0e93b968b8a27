#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "gm/estimate.hpp"
#include "gm/rng.hpp"

using gm::ModelConfig;
using gm::Rng;
using gm::StageFlops;
using T64 = gm::Tensor<double>;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.patch_size = 5;
  cfg.bands = 6;
  cfg.classes = 3;
  cfg.feature_dim = 8;
  cfg.state_dim = 8;
  cfg.top_tokens = 4;
  return cfg;
}

ModelConfig random_config(Rng& r) {
  ModelConfig cfg;
  cfg.patch_size = 3 + 2 * int64_t(r.next_below(3));
  cfg.bands = 2 + int64_t(r.next_below(7));
  cfg.classes = 2 + int64_t(r.next_below(5));
  cfg.feature_dim = 2 + int64_t(r.next_below(9));
  cfg.state_dim = 2 + int64_t(r.next_below(11));
  cfg.spectral_tokens = 1 + int64_t(r.next_below(6));
  cfg.spectral_group = 1 + int64_t(r.next_below(6));
  cfg.top_tokens = 1 + int64_t(r.next_below(uint64_t(cfg.n_tokens())));
  return cfg;
}

// Instrumented flops from an actual forward pass.
StageFlops measured_flops(const ModelConfig& cfg, int64_t batch, uint64_t seed) {
  auto params = gm::ModelParams<double>::init(cfg, seed);
  Rng r(seed + 1);
  T64 x({batch, cfg.patch_size, cfg.patch_size, cfg.bands});
  for (double& v : x.data) v = r.uniform(0.0, 1.0);
  gm::Graph<double> g;
  auto pv = gm::ModelVars<double>::bind(g, params);
  StageFlops flops;
  gm::forward(g, pv, cfg, g.input(x), nullptr, nullptr, &flops);
  return flops;
}

}  // namespace

TEST_SUITE("parameter count") {
  TEST_CASE("closed form equals the allocated element count on random configs") {
    Rng r(1);
    for (int it = 0; it < 20; ++it) {
      ModelConfig cfg = random_config(r);
      auto params = gm::ModelParams<double>::shaped(cfg);
      CHECK(gm::count_params(cfg) == params.total_elements());
    }
  }

  TEST_CASE("pinned count for the reference small model") {
    CHECK(gm::count_params(tiny_config()) == 1737);
  }
}

TEST_SUITE("flop estimate") {
  TEST_CASE("closed forms equal the instrumented counts stage by stage") {
    Rng r(2);
    ModelConfig tiny = tiny_config();
    StageFlops want = gm::estimate_flops(tiny);
    StageFlops got = measured_flops(tiny, 1, 7);
    CHECK(got.tokenization == want.tokenization);
    CHECK(got.graph == want.graph);
    CHECK(got.attention == want.attention);
    CHECK(got.fusion == want.fusion);
    CHECK(got.ssm == want.ssm);
    for (int it = 0; it < 10; ++it) {
      ModelConfig cfg = random_config(r);
      StageFlops w = gm::estimate_flops(cfg);
      StageFlops g2 = measured_flops(cfg, 1, 100 + uint64_t(it));
      CHECK(g2.tokenization == w.tokenization);
      CHECK(g2.graph == w.graph);
      CHECK(g2.attention == w.attention);
      CHECK(g2.fusion == w.fusion);
      CHECK(g2.ssm == w.ssm);
    }
  }

  TEST_CASE("instrumented flops scale linearly in the batch") {
    ModelConfig cfg = tiny_config();
    StageFlops one = measured_flops(cfg, 1, 3);
    StageFlops three = measured_flops(cfg, 3, 3);
    CHECK(three.total() == 3 * one.total());
  }

  TEST_CASE("pinned per-stage numbers for the reference small model") {
    StageFlops f = gm::estimate_flops(tiny_config());
    CHECK(f.tokenization == 37440);
    CHECK(f.graph == 1504);
    CHECK(f.attention == 8480);
    CHECK(f.fusion == 3712);
    CHECK(f.ssm == 22320);
    CHECK(f.total() == 73456);
  }
}

TEST_SUITE("stage elements") {
  TEST_CASE("the list names all seventeen pipeline stages") {
    auto stages = gm::trace_stage_elements(tiny_config());
    REQUIRE(stages.size() == 17);
    CHECK(stages.front().first == "spatial_tokens");
    CHECK(stages.back().first == "logits");
  }

  TEST_CASE("per-stage element counts match an actual forward trace") {
    Rng r(4);
    for (int it = 0; it < 6; ++it) {
      ModelConfig cfg = random_config(r);
      auto params = gm::ModelParams<double>::init(cfg, 50 + uint64_t(it));
      T64 x({1, cfg.patch_size, cfg.patch_size, cfg.bands});
      for (double& v : x.data) v = r.uniform(0.0, 1.0);
      gm::ForwardTrace<double> trace;
      gm::Graph<double> g;
      auto pv = gm::ModelVars<double>::bind(g, params);
      gm::forward(g, pv, cfg, g.input(x), nullptr, &trace);
      std::vector<std::pair<std::string, int64_t>> actual = {
          {"spatial_tokens", trace.spatial_tokens.numel()},
          {"spectral_tokens", trace.spectral_tokens.numel()},
          {"tokens", trace.tokens.numel()},
          {"scores", trace.scores.numel()},
          {"top_indices", int64_t(trace.top_indices[0].size())},
          {"prioritized", trace.prioritized.numel()},
          {"adjacency", trace.adjacency.numel()},
          {"propagated", trace.propagated.numel()},
          {"graph_out", trace.graph_out.numel()},
          {"query", trace.query.numel()},
          {"key", trace.key.numel()},
          {"value", trace.value.numel()},
          {"attn_weights", trace.attn_weights.numel()},
          {"attn_out", trace.attn_out.numel()},
          {"fused", trace.fused.numel()},
          {"hidden", trace.hidden.numel()},
          {"logits", trace.logits.numel()},
      };
      auto expected = gm::trace_stage_elements(cfg);
      REQUIRE(expected.size() == actual.size());
      for (size_t i = 0; i < actual.size(); ++i) {
        CHECK(expected[i].first == actual[i].first);
        CHECK(expected[i].second == actual[i].second);
      }
    }
  }
}

TEST_SUITE("memory model") {
  TEST_CASE("pinned byte totals for the reference small model at batch two") {
    auto r = gm::estimate_resources(tiny_config(), 2);
    CHECK(r.param_count == 1737);
    CHECK(r.param_bytes == 6948);
    CHECK(r.activation_bytes == 13584);
    CHECK(r.gradient_bytes == 13584);
    CHECK(r.optimizer_bytes == 13896);
    CHECK(r.total_bytes == 48012);
  }

  TEST_CASE("composition rules hold on random configs") {
    Rng r(5);
    for (int it = 0; it < 12; ++it) {
      ModelConfig cfg = random_config(r);
      int64_t batch = 1 + int64_t(r.next_below(64));
      auto rep = gm::estimate_resources(cfg, batch);
      CHECK(rep.param_bytes == 4 * rep.param_count);
      CHECK(rep.gradient_bytes == rep.activation_bytes);
      CHECK(rep.optimizer_bytes == 2 * rep.param_bytes);
      CHECK(rep.total_bytes == rep.param_bytes + rep.activation_bytes + rep.gradient_bytes +
                                   rep.optimizer_bytes);
      int64_t elems = 0;
      for (const auto& [name, n] : gm::trace_stage_elements(cfg)) elems += n;
      CHECK(rep.activation_bytes == 4 * batch * elems);
      // activations scale linearly with batch
      CHECK(gm::estimate_resources(cfg, 2 * batch).activation_bytes == 2 * rep.activation_bytes);
    }
  }

  TEST_CASE("growing the model never shrinks the bill") {
    ModelConfig cfg = tiny_config();
    auto base = gm::estimate_resources(cfg, 4);
    ModelConfig wider = cfg;
    wider.feature_dim *= 2;
    ModelConfig deeper = cfg;
    deeper.state_dim *= 2;
    ModelConfig more_bands = cfg;
    more_bands.bands += 3;
    for (const ModelConfig& bigger : {wider, deeper, more_bands}) {
      auto r2 = gm::estimate_resources(bigger, 4);
      CHECK(r2.param_count > base.param_count);
      CHECK(r2.total_bytes > base.total_bytes);
      CHECK(r2.flops.total() > base.flops.total());
    }
  }
}

TEST_SUITE("report text") {
  TEST_CASE("the report states its conventions and carries the key numbers") {
    ModelConfig cfg = tiny_config();
    auto rep = gm::estimate_resources(cfg, 2);
    std::string text = gm::format_report(cfg, rep);
    CHECK(text.find("2 per multiply-accumulate") != std::string::npos);
    CHECK(text.find("parameters=1737\n") != std::string::npos);
    CHECK(text.find("total_bytes=48012\n") != std::string::npos);
    CHECK(text.find("flops_per_sample.total=73456\n") != std::string::npos);
    CHECK(text.find("flops_per_batch=146912\n") != std::string::npos);
    CHECK(text.find("sort_comparisons_per_sample=") != std::string::npos);
    CHECK(text.find("not arithmetic") != std::string::npos);
  }
}
