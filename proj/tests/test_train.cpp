#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "gm/train.hpp"

using gm::Error;
using gm::ErrorKind;
using gm::HsiCube;
using gm::ModelConfig;
using gm::PatchSet;
using gm::Split;
using gm::TrainConfig;

namespace {

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::IoError;
}

// Small, clearly separable scene and a matching small model.
struct Rig {
  HsiCube cube;
  PatchSet patches;
  Split split;
  ModelConfig cfg;

  explicit Rig(double fraction = 0.3, uint64_t seed = 1) {
    cube = gm::generate_synthetic(12, 12, 6, 4, 0.02, 5);
    gm::normalize_bands(cube);
    patches = gm::extract_patches(cube, 3, 1);
    split = gm::stratified_split(patches, fraction, seed);
    cfg.patch_size = 3;
    cfg.bands = 6;
    cfg.classes = 4;
    cfg.feature_dim = 8;
    cfg.state_dim = 8;
  }
};

}  // namespace

TEST_SUITE("loss") {
  TEST_CASE("zero parameters give log(C) cross-entropy and no penalty") {
    Rig rig;
    auto params = gm::ModelParams<double>::shaped(rig.cfg);
    std::vector<int> labels;
    auto batch = gm::assemble_batch<double>(rig.patches, rig.split.train, 0, 4, &labels);
    gm::Graph<double> g;
    auto pv = gm::ModelVars<double>::bind(g, params);
    auto res = gm::forward(g, pv, rig.cfg, g.input(batch));
    auto loss = gm::loss_op(g, res.logits, labels, pv.classifier_w, rig.cfg.lambda);
    CHECK(g.value(loss).data[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }

  TEST_CASE("ridge term adds lambda times the squared classifier weight") {
    Rig rig;
    auto params = gm::ModelParams<double>::init(rig.cfg, 2);
    std::vector<int> labels;
    auto batch = gm::assemble_batch<double>(rig.patches, rig.split.train, 0, 4, &labels);
    auto run = [&](double lambda) {
      gm::Graph<double> g;
      auto pv = gm::ModelVars<double>::bind(g, params);
      auto res = gm::forward(g, pv, rig.cfg, g.input(batch));
      auto loss = gm::loss_op(g, res.logits, labels, pv.classifier_w, lambda);
      return g.value(loss).data[0];
    };
    double w2 = 0;
    for (double v : params.classifier_w.data) w2 += v * v;
    CHECK(run(0.25) - run(0.0) == doctest::Approx(0.25 * w2).epsilon(1e-9));
  }
}

TEST_SUITE("batches") {
  TEST_CASE("assemble_batch stacks patches and 0-bases the labels") {
    Rig rig;
    std::vector<int> labels;
    auto batch = gm::assemble_batch<float>(rig.patches, rig.split.train, 1, 4, &labels);
    CHECK(batch.shape == gm::Shape{3, 3, 3, 6});
    REQUIRE(labels.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
      int64_t idx = rig.split.train[1 + i];
      CHECK(labels[i] == rig.patches.labels[size_t(idx)] - 1);
      const float* src = rig.patches.patch(idx);
      for (int64_t j = 0; j < 3 * 3 * 6; ++j)
        CHECK(batch.data[size_t(int64_t(i) * 3 * 3 * 6 + j)] == src[j]);
    }
  }

  TEST_CASE("an unlabeled sample cannot enter a supervised batch") {
    HsiCube cube = gm::generate_synthetic(8, 8, 6, 4, 0.02, 5);
    cube.labels[size_t(3 * 8 + 3)] = 0;  // strike one interior center
    PatchSet patches = gm::extract_patches(cube, 3, 1);
    std::vector<int64_t> indices = {int64_t((3 - 1) * 6 + (3 - 1))};  // its patch index
    CHECK(patches.labels[size_t(indices[0])] == 0);
    std::vector<int> labels;
    CHECK(kind_of([&] { gm::assemble_batch<float>(patches, indices, 0, 1, &labels); }) ==
          ErrorKind::InvalidArgument);
  }
}

TEST_SUITE("training") {
  TEST_CASE("one optimizer step lowers the loss on the training batch across seeds") {
    Rig rig(0.3, 3);
    for (uint64_t seed = 0; seed < 10; ++seed) {
      TrainConfig tc;
      tc.epochs = 1;
      tc.batch_size = int64_t(rig.split.train.size());  // one step per epoch
      tc.learning_rate = 1e-4;
      tc.seed = seed;

      // loss at the exact starting point, on the same full batch
      auto params0 = gm::ModelParams<double>::init(rig.cfg, seed);
      std::vector<int> labels;
      auto batch = gm::assemble_batch<double>(rig.patches, rig.split.train, 0,
                                              int64_t(rig.split.train.size()), &labels);
      auto loss_at = [&](const gm::ModelParams<double>& p) {
        gm::Graph<double> g;
        auto pv = gm::ModelVars<double>::bind(g, p);
        auto res = gm::forward(g, pv, rig.cfg, g.input(batch));
        auto loss = gm::loss_op(g, res.logits, labels, pv.classifier_w, rig.cfg.lambda);
        return g.value(loss).data[0];
      };
      double before = loss_at(params0);

      auto result = gm::train_model<double>(rig.cfg, tc, rig.patches, rig.split.train);
      CHECK(loss_at(result.params) < before);
      // the single step saw the whole split, so the recorded epoch loss is
      // the pre-step loss (shuffling only reorders the mean)
      CHECK(result.history[0].loss == doctest::Approx(before).epsilon(1e-12));
    }
  }

  TEST_CASE("training twice with one seed is bitwise identical, another seed differs") {
    Rig rig;
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 8;
    tc.seed = 11;
    auto a = gm::train_model<float>(rig.cfg, tc, rig.patches, rig.split.train);
    auto b = gm::train_model<float>(rig.cfg, tc, rig.patches, rig.split.train);
    std::vector<const gm::Tensor<float>*> av, bv;
    a.params.for_each([&](const char*, const gm::Tensor<float>& t) { av.push_back(&t); });
    b.params.for_each([&](const char*, const gm::Tensor<float>& t) { bv.push_back(&t); });
    bool identical = true;
    for (size_t i = 0; i < av.size(); ++i) identical = identical && av[i]->data == bv[i]->data;
    CHECK(identical);
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].loss == b.history[i].loss);

    tc.seed = 12;
    auto c = gm::train_model<float>(rig.cfg, tc, rig.patches, rig.split.train);
    std::vector<const gm::Tensor<float>*> cv;
    c.params.for_each([&](const char*, const gm::Tensor<float>& t) { cv.push_back(&t); });
    bool any_differ = false;
    for (size_t i = 0; i < av.size(); ++i) any_differ = any_differ || av[i]->data != cv[i]->data;
    CHECK(any_differ);
  }

  TEST_CASE("history covers every epoch; OA only when asked") {
    Rig rig;
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 16;
    auto plain = gm::train_model<float>(rig.cfg, tc, rig.patches, rig.split.train);
    REQUIRE(plain.history.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
      CHECK(plain.history[i].epoch == int64_t(i + 1));
      CHECK(plain.history[i].loss > 0);
      CHECK(plain.history[i].oa == -1);
    }
    tc.epoch_eval = true;
    auto scored =
        gm::train_model<float>(rig.cfg, tc, rig.patches, rig.split.train, &rig.split.test);
    for (const auto& rec : scored.history) {
      CHECK(rec.oa >= 0);
      CHECK(rec.oa <= 1);
    }
  }

  TEST_CASE("a diverged step aborts naming the epoch and step") {
    Rig rig;
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = int64_t(rig.split.train.size());
    // absurd on purpose: the first step flings weights far enough that the
    // next forward pass overflows to infinity
    tc.learning_rate = 1e160;
    try {
      gm::train_model<double>(rig.cfg, tc, rig.patches, rig.split.train);
      FAIL("expected divergence");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFinite);
      CHECK(std::string(e.what()).find("epoch ") != std::string::npos);
      CHECK(std::string(e.what()).find("step ") != std::string::npos);
    }
  }

  TEST_CASE("config validation rejects nonsense") {
    Rig rig;
    TrainConfig tc;
    tc.epochs = 0;
    CHECK(kind_of([&] { gm::train_model<float>(rig.cfg, tc, rig.patches, rig.split.train); }) ==
          ErrorKind::InvalidArgument);
    tc.epochs = 1;
    tc.learning_rate = 0;
    CHECK(kind_of([&] { gm::train_model<float>(rig.cfg, tc, rig.patches, rig.split.train); }) ==
          ErrorKind::InvalidArgument);
    tc.learning_rate = 0.001;
    CHECK(kind_of([&] {
            gm::train_model<float>(rig.cfg, tc, rig.patches, std::vector<int64_t>{});
          }) == ErrorKind::InvalidArgument);
  }
}

TEST_SUITE("scoring") {
  TEST_CASE("evaluation counts every sample once and stays in class range") {
    Rig rig;
    auto params = gm::ModelParams<float>::init(rig.cfg, 4);
    auto m = gm::evaluate_model(params, rig.cfg, rig.patches, rig.split.test, 16);
    CHECK(m.samples == int64_t(rig.split.test.size()));
    int64_t total = 0;
    for (int64_t v : m.confusion) total += v;
    CHECK(total == m.samples);
  }

  TEST_CASE("predictions are identical at any worker count") {
    Rig rig;
    auto params = gm::ModelParams<float>::init(rig.cfg, 4);
    auto one = gm::predict_classes(params, rig.cfg, rig.patches, rig.split.test, 7, 1);
    auto four = gm::predict_classes(params, rig.cfg, rig.patches, rig.split.test, 7, 4);
    CHECK(one == four);
  }

  TEST_CASE("the class map colors the interior and leaves the border at zero") {
    Rig rig;
    auto params = gm::ModelParams<float>::init(rig.cfg, 4);
    HsiCube small = gm::generate_synthetic(8, 7, 6, 4, 0.02, 9);
    gm::normalize_bands(small);
    auto map = gm::predict_map(params, rig.cfg, small, 16, 2);
    REQUIRE(map.size() == size_t(8 * 7));
    for (int64_t h = 0; h < 8; ++h)
      for (int64_t w = 0; w < 7; ++w) {
        int32_t v = map[size_t(h * 7 + w)];
        bool border = h == 0 || h == 7 || w == 0 || w == 6;
        if (border) {
          CHECK(v == 0);
        } else {
          CHECK(v >= 1);
          CHECK(v <= 4);
        }
      }
  }
}

TEST_SUITE("history file") {
  TEST_CASE("CSV rows carry epoch, loss, and a blank OA when unscored") {
    std::vector<gm::EpochRecord> hist = {{1, 1.5, -1}, {2, 0.75, 0.5}};
    std::string path = "/tmp/gm_history_test.csv";
    gm::write_history(hist, path);
    std::ifstream in(path);
    REQUIRE(bool(in));
    std::string l0, l1, l2;
    std::getline(in, l0);
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(l0 == "epoch,loss,oa");
    CHECK(l1 == "1,1.5,");
    CHECK(l2 == "2,0.75,0.500000");
    std::remove(path.c_str());
  }
}
