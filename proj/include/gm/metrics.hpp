#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gm/error.hpp"

namespace gm {

// Confusion-matrix summary. Rows index the true class, columns the predicted
// class, both 0-based.
struct Metrics {
  int64_t classes = 0;
  std::vector<int64_t> confusion;  // classes x classes, row-major
  int64_t samples = 0;
  double oa = 0;                  // overall accuracy
  double aa = 0;                  // mean per-class accuracy over classes that occur
  double kappa = 0;
  std::vector<double> per_class;  // recall per class; -1 when the class never occurs

  int64_t at(int64_t truth, int64_t pred) const { return confusion[size_t(truth * classes + pred)]; }
};

Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& predicted,
                        int64_t classes);
Metrics metrics_from_confusion(std::vector<int64_t> confusion, int64_t classes);
// key=value lines followed by the confusion block (one row of counts per line)
std::string format_metrics(const Metrics& m);

}  // namespace gm
