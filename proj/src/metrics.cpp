#include "gm/metrics.hpp"

#include <cstdio>

namespace gm {

namespace {

std::string fixed6(double v) {
  char tmp[48];
  std::snprintf(tmp, sizeof tmp, "%.6f", v);
  return tmp;
}

}  // namespace

Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& predicted,
                        int64_t classes) {
  if (classes < 1) raise(ErrorKind::InvalidArgument, "metrics need at least one class");
  if (truth.empty()) raise(ErrorKind::InvalidArgument, "metrics need at least one sample");
  if (truth.size() != predicted.size())
    raise(ErrorKind::InvalidArgument,
          "metrics got " + std::to_string(truth.size()) + " truth labels but " +
              std::to_string(predicted.size()) + " predictions");
  std::vector<int64_t> confusion(size_t(classes * classes), 0);
  for (size_t i = 0; i < truth.size(); ++i) {
    int t = truth[i], p = predicted[i];
    if (t < 0 || t >= classes)
      raise(ErrorKind::InvalidArgument,
            "truth label " + std::to_string(t) + " outside [0, " + std::to_string(classes) + ")");
    if (p < 0 || p >= classes)
      raise(ErrorKind::InvalidArgument,
            "prediction " + std::to_string(p) + " outside [0, " + std::to_string(classes) + ")");
    ++confusion[size_t(int64_t(t) * classes + p)];
  }
  return metrics_from_confusion(std::move(confusion), classes);
}

Metrics metrics_from_confusion(std::vector<int64_t> confusion, int64_t classes) {
  if (classes < 1) raise(ErrorKind::InvalidArgument, "metrics need at least one class");
  if (int64_t(confusion.size()) != classes * classes)
    raise(ErrorKind::InvalidArgument,
          "confusion matrix for " + std::to_string(classes) + " classes needs " +
              std::to_string(classes * classes) + " cells, got " +
              std::to_string(confusion.size()));
  Metrics m;
  m.classes = classes;
  m.confusion = std::move(confusion);

  int64_t total = 0, diagonal = 0;
  std::vector<int64_t> row(size_t(classes), 0), col(size_t(classes), 0);
  for (int64_t t = 0; t < classes; ++t)
    for (int64_t p = 0; p < classes; ++p) {
      int64_t n = m.at(t, p);
      if (n < 0) raise(ErrorKind::InvalidArgument, "confusion matrix holds a negative count");
      total += n;
      row[size_t(t)] += n;
      col[size_t(p)] += n;
      if (t == p) diagonal += n;
    }
  if (total == 0) raise(ErrorKind::InvalidArgument, "confusion matrix is empty");

  m.samples = total;
  m.oa = double(diagonal) / double(total);
  m.per_class.assign(size_t(classes), -1.0);
  double acc_sum = 0;
  int64_t present = 0;
  for (int64_t t = 0; t < classes; ++t)
    if (row[size_t(t)] > 0) {
      m.per_class[size_t(t)] = double(m.at(t, t)) / double(row[size_t(t)]);
      acc_sum += m.per_class[size_t(t)];
      ++present;
    }
  m.aa = acc_sum / double(present);

  double p_e = 0;
  for (int64_t c = 0; c < classes; ++c)
    p_e += (double(row[size_t(c)]) / double(total)) * (double(col[size_t(c)]) / double(total));
  double denom = 1.0 - p_e;
  if (std::abs(denom) < 1e-15) {
    // chance agreement saturates: call it perfect only if agreement is too
    m.kappa = m.oa >= 1.0 - 1e-15 ? 1.0 : 0.0;
  } else {
    m.kappa = (m.oa - p_e) / denom;
  }
  return m;
}

std::string format_metrics(const Metrics& m) {
  std::string out;
  out += "classes=" + std::to_string(m.classes) + "\n";
  out += "samples=" + std::to_string(m.samples) + "\n";
  out += "oa=" + fixed6(m.oa) + "\n";
  out += "aa=" + fixed6(m.aa) + "\n";
  out += "kappa=" + fixed6(m.kappa) + "\n";
  for (int64_t c = 0; c < m.classes; ++c) {
    double v = m.per_class[size_t(c)];
    out += "class_" + std::to_string(c + 1) + "=" + (v < 0 ? std::string("absent") : fixed6(v)) +
           "\n";
  }
  out += "confusion=\n";
  for (int64_t t = 0; t < m.classes; ++t) {
    for (int64_t p = 0; p < m.classes; ++p) {
      if (p) out += ' ';
      out += std::to_string(m.at(t, p));
    }
    out += '\n';
  }
  return out;
}

}  // namespace gm
