#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gm/adam.hpp"
#include "gm/rng.hpp"
#include "gm/tensor.hpp"

using gm::Adam;
using gm::Error;
using gm::ErrorKind;
using gm::Rng;
using gm::Tensor;
using T64 = Tensor<double>;

TEST_SUITE("adam") {
  TEST_CASE("zero gradient is a parameter fixed point and decays moments") {
    T64 w({3}, {1.0, -2.0, 0.5});
    auto keep = w.data;
    Adam<double> opt;
    opt.add_param("w", &w);
    T64 g = T64::zeros({3});

    // seed the moments with one real step first
    T64 g1({3}, {0.5, 0.5, 0.5});
    opt.step({&g1});
    double m_before = opt.first_moment(0).data[0];
    double v_before = opt.second_moment(0).data[0];
    auto w_after_real = w.data;

    opt.step({&g});
    CHECK(std::abs(opt.first_moment(0).data[0]) < std::abs(m_before));
    CHECK(opt.second_moment(0).data[0] < v_before);

    // from a cold start, zero gradient leaves parameters untouched exactly
    T64 w2({3}, {1.0, -2.0, 0.5});
    Adam<double> opt2;
    opt2.add_param("w", &w2);
    opt2.step({&g});
    CHECK(w2.data == keep);
    (void)w_after_real;
  }

  TEST_CASE("single step with constant gradient moves by ~lr") {
    // with fresh moments and g constant, m_hat = g and v_hat = g^2, so the
    // update is lr * g / (|g| + eps): within lr*eps of lr for g = 1
    T64 w = T64::scalar(0.7);
    Adam<double> opt;  // defaults lr=0.001
    opt.add_param("w", &w);
    T64 g = T64::scalar(1.0);
    opt.step({&g});
    CHECK(std::abs((0.7 - w.data[0]) - 0.001) < 1e-9);
  }

  TEST_CASE("ten steps on w^2 from w=1 strictly decrease it") {
    T64 w = T64::scalar(1.0);
    Adam<double> opt({0.01, 0.9, 0.999, 1e-8});
    opt.add_param("w", &w);
    double prev = 1.0;
    for (int i = 0; i < 10; ++i) {
      T64 g = T64::scalar(2.0 * w.data[0]);
      opt.step({&g});
      double f = w.data[0] * w.data[0];
      CHECK(f < prev);
      prev = f;
    }
  }

  TEST_CASE("bias correction matches a hand-rolled reference over many steps") {
    Rng r(5);
    T64 w({4}, {0.3, -0.1, 0.9, -0.7});
    std::vector<double> m(4, 0.0), v(4, 0.0), ref = w.data;
    Adam<double> opt;
    opt.add_param("w", &w);
    const double lr = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 50; ++t) {
      T64 g({4});
      for (double& x : g.data) x = r.uniform(-1, 1);
      opt.step({&g});
      for (int i = 0; i < 4; ++i) {
        m[size_t(i)] = b1 * m[size_t(i)] + (1 - b1) * g.data[size_t(i)];
        v[size_t(i)] = b2 * v[size_t(i)] + (1 - b2) * g.data[size_t(i)] * g.data[size_t(i)];
        double mhat = m[size_t(i)] / (1 - std::pow(b1, t));
        double vhat = v[size_t(i)] / (1 - std::pow(b2, t));
        ref[size_t(i)] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      for (int i = 0; i < 4; ++i) CHECK(w.data[size_t(i)] == doctest::Approx(ref[size_t(i)]).epsilon(1e-12));
    }
    CHECK(opt.step_count() == 50);
  }

  TEST_CASE("step counter increases by one per update") {
    T64 w = T64::scalar(0.0);
    Adam<double> opt;
    opt.add_param("w", &w);
    T64 g = T64::scalar(0.1);
    for (int i = 1; i <= 5; ++i) {
      opt.step({&g});
      CHECK(opt.step_count() == i);
    }
  }

  TEST_CASE("moment tensors mirror parameter shapes") {
    T64 a({2, 3}), b({4});
    Adam<double> opt;
    opt.add_param("a", &a);
    opt.add_param("b", &b);
    CHECK(opt.first_moment(0).shape == a.shape);
    CHECK(opt.second_moment(0).shape == a.shape);
    CHECK(opt.first_moment(1).shape == b.shape);
  }

  TEST_CASE("non-finite gradient aborts naming the parameter") {
    T64 w({2}, {1.0, 2.0});
    Adam<double> opt;
    opt.add_param("model.classifier.weight", &w);
    T64 g({2}, {0.1, std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(opt.step({&g}), Error);
    try {
      opt.step({&g});
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFinite);
      CHECK(std::string(e.what()).find("model.classifier.weight") != std::string::npos);
    }
  }

  TEST_CASE("gradient count and shape mismatches are rejected") {
    T64 w({2});
    Adam<double> opt;
    opt.add_param("w", &w);
    T64 g({3});
    CHECK_THROWS_AS(opt.step({&g}), Error);
    CHECK_THROWS_AS(opt.step({}), Error);
  }

  TEST_CASE("works in float mode too") {
    Tensor<float> w = Tensor<float>::scalar(1.0f);
    Adam<float> opt({0.01f, 0.9f, 0.999f, 1e-8f});
    opt.add_param("w", &w);
    float prev = 1.0f;
    for (int i = 0; i < 10; ++i) {
      Tensor<float> g = Tensor<float>::scalar(2.0f * w.data[0]);
      opt.step({&g});
      CHECK(w.data[0] * w.data[0] < prev);
      prev = w.data[0] * w.data[0];
    }
  }
}
