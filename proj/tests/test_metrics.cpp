#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "gm/metrics.hpp"
#include "gm/rng.hpp"

using gm::Error;
using gm::ErrorKind;
using gm::Metrics;
using gm::Rng;

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

// Independent recompute with different loop structure and long double sums.
struct Oracle {
  long double oa, aa, kappa;
  std::vector<long double> per_class;
};

Oracle recompute(const std::vector<int64_t>& cm, int64_t c) {
  long double total = 0, diag = 0;
  for (int64_t i = 0; i < c * c; ++i) total += (long double)cm[size_t(i)];
  for (int64_t i = 0; i < c; ++i) diag += (long double)cm[size_t(i * c + i)];
  Oracle o;
  o.oa = diag / total;
  o.per_class.assign(size_t(c), -1.0L);
  long double sum = 0;
  int64_t present = 0;
  long double pe = 0;
  for (int64_t i = 0; i < c; ++i) {
    long double row = 0, col = 0;
    for (int64_t j = 0; j < c; ++j) {
      row += (long double)cm[size_t(i * c + j)];
      col += (long double)cm[size_t(j * c + i)];
    }
    pe += (row / total) * (col / total);
    if (row > 0) {
      o.per_class[size_t(i)] = (long double)cm[size_t(i * c + i)] / row;
      sum += o.per_class[size_t(i)];
      ++present;
    }
  }
  o.aa = sum / (long double)present;
  long double denom = 1.0L - pe;
  if (std::fabs((double)denom) < 1e-15)
    o.kappa = o.oa >= 1.0L - 1e-15L ? 1.0L : 0.0L;
  else
    o.kappa = (o.oa - pe) / denom;
  return o;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("perfect agreement scores 1 across the board") {
    std::vector<int> y = {0, 1, 2, 1, 0, 2, 2};
    Metrics m = gm::compute_metrics(y, y, 3);
    CHECK(m.oa == 1.0);
    CHECK(m.aa == 1.0);
    CHECK(m.kappa == 1.0);
    CHECK(m.samples == 7);
    for (double v : m.per_class) CHECK(v == 1.0);
  }

  TEST_CASE("hand-checked two-class confusion") {
    // rows = truth: [[40, 10], [5, 45]]
    Metrics m = gm::metrics_from_confusion({40, 10, 5, 45}, 2);
    CHECK(m.oa == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(m.per_class[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(m.per_class[1] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(m.aa == doctest::Approx(0.85).epsilon(1e-12));
    // p_e = 0.5*0.45 + 0.5*0.55 = 0.5 -> kappa = 0.35 / 0.5
    CHECK(m.kappa == doctest::Approx(0.7).epsilon(1e-12));
  }

  TEST_CASE("constant predictor on balanced truth gets zero kappa") {
    std::vector<int> truth, pred;
    for (int i = 0; i < 100; ++i) {
      truth.push_back(i < 50 ? 0 : 1);
      pred.push_back(0);
    }
    Metrics m = gm::compute_metrics(truth, pred, 2);
    CHECK(m.oa == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.kappa == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("saturated chance agreement resolves by the perfect-agreement rule") {
    // single class: p_e = 1 and p_o = 1
    Metrics one = gm::metrics_from_confusion({17}, 1);
    CHECK(one.kappa == 1.0);
    CHECK(one.oa == 1.0);
    // two classes, all mass on one diagonal cell: still p_e = 1, p_o = 1
    Metrics m = gm::metrics_from_confusion({9, 0, 0, 0}, 2);
    CHECK(m.kappa == 1.0);
  }

  TEST_CASE("absent classes are skipped by AA and flagged in per_class") {
    Metrics m = gm::metrics_from_confusion({3, 1, 0, 0, 0, 0, 0, 2, 2}, 3);
    CHECK(m.per_class[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(m.per_class[1] == -1.0);
    CHECK(m.per_class[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.aa == doctest::Approx((0.75 + 0.5) / 2).epsilon(1e-12));
  }

  TEST_CASE("random confusions match the independent recompute") {
    Rng r(123);
    for (int it = 0; it < 1000; ++it) {
      int64_t c = 1 + int64_t(r.next_below(6));
      std::vector<int64_t> cm(size_t(c * c));
      int64_t total = 0;
      for (int64_t& v : cm) {
        v = int64_t(r.next_below(21));
        total += v;
      }
      if (total == 0) cm[0] = 1;
      Metrics m = gm::metrics_from_confusion(cm, c);
      Oracle o = recompute(cm, c);
      CHECK(std::abs(m.oa - double(o.oa)) < 1e-12);
      CHECK(std::abs(m.aa - double(o.aa)) < 1e-12);
      CHECK(std::abs(m.kappa - double(o.kappa)) < 1e-12);
      for (int64_t i = 0; i < c; ++i)
        CHECK(std::abs(m.per_class[size_t(i)] - double(o.per_class[size_t(i)])) < 1e-12);
    }
  }

  TEST_CASE("compute_metrics builds the confusion with rows as truth") {
    std::vector<int> truth = {0, 0, 1, 1, 1};
    std::vector<int> pred = {0, 1, 1, 1, 0};
    Metrics m = gm::compute_metrics(truth, pred, 2);
    CHECK(m.at(0, 0) == 1);
    CHECK(m.at(0, 1) == 1);
    CHECK(m.at(1, 0) == 1);
    CHECK(m.at(1, 1) == 2);
  }

  TEST_CASE("bad inputs are rejected") {
    CHECK(kind_of([] { gm::compute_metrics({0}, {0, 1}, 2); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { gm::compute_metrics({}, {}, 2); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { gm::compute_metrics({2}, {0}, 2); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { gm::compute_metrics({0}, {-1}, 2); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { gm::compute_metrics({0}, {0}, 0); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { gm::metrics_from_confusion({1, 2, 3}, 2); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { gm::metrics_from_confusion({0, 0, 0, 0}, 2); }) ==
          ErrorKind::InvalidArgument);
    CHECK(kind_of([] { gm::metrics_from_confusion({1, -1, 0, 1}, 2); }) ==
          ErrorKind::InvalidArgument);
  }

  TEST_CASE("report text carries the keys and the count block") {
    Metrics m = gm::metrics_from_confusion({2, 0, 0, 3}, 2);
    std::string text = gm::format_metrics(m);
    CHECK(text.find("classes=2\n") != std::string::npos);
    CHECK(text.find("samples=5\n") != std::string::npos);
    CHECK(text.find("oa=1.000000\n") != std::string::npos);
    CHECK(text.find("aa=1.000000\n") != std::string::npos);
    CHECK(text.find("kappa=1.000000\n") != std::string::npos);
    CHECK(text.find("class_1=1.000000\n") != std::string::npos);
    CHECK(text.find("confusion=\n2 0\n0 3\n") != std::string::npos);
    Metrics absent = gm::metrics_from_confusion({5, 0, 0, 0}, 2);
    CHECK(gm::format_metrics(absent).find("class_2=absent\n") != std::string::npos);
  }
}
