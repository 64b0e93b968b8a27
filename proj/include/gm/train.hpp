#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "gm/adam.hpp"
#include "gm/autodiff.hpp"
#include "gm/metrics.hpp"
#include "gm/model.hpp"
#include "gm/patches.hpp"
#include "gm/threads.hpp"

namespace gm {

struct TrainConfig {
  int64_t epochs = 50;
  int64_t batch_size = 56;  // capped at the training-split size per epoch
  double learning_rate = 0.001;
  uint64_t seed = 0;
  double fraction = 0.1;   // labeled samples routed to the training split
  bool epoch_eval = false;  // score the test split after every epoch

  void validate() const {
    if (epochs < 1) raise(ErrorKind::InvalidArgument, "epochs must be >= 1");
    if (batch_size < 1) raise(ErrorKind::InvalidArgument, "batch_size must be >= 1");
    if (!(learning_rate > 0)) raise(ErrorKind::InvalidArgument, "learning_rate must be > 0");
    if (!(fraction > 0) || fraction > 1)
      raise(ErrorKind::InvalidArgument, "fraction must lie in (0, 1]");
  }
};

struct EpochRecord {
  int64_t epoch = 0;
  double loss = 0;
  double oa = -1;  // -1 when the epoch was not evaluated
};

template <typename T>
struct TrainResult {
  ModelParams<T> params;
  std::vector<EpochRecord> history;
};

// Training objective: mean cross-entropy plus the classifier ridge penalty.
template <typename T>
typename Graph<T>::Var loss_op(Graph<T>& g, typename Graph<T>::Var logits,
                               const std::vector<int>& labels,
                               typename Graph<T>::Var classifier_w, double lambda) {
  auto ce = g.softmax_cross_entropy(logits, labels);
  if (lambda == 0) return ce;
  return g.add(ce, g.affine(g.sum_squares(classifier_w), T(lambda), T(0)));
}

// Stack the chosen patches into one (n, S, S, B) batch with 0-based labels.
template <typename T>
Tensor<T> assemble_batch(const PatchSet& set, const std::vector<int64_t>& indices, int64_t from,
                         int64_t to, std::vector<int>* labels) {
  int64_t n = to - from;
  int64_t per = set.patch_size * set.patch_size * set.bands;
  Tensor<T> batch({n, set.patch_size, set.patch_size, set.bands});
  if (labels) labels->clear();
  for (int64_t i = 0; i < n; ++i) {
    int64_t idx = indices[size_t(from + i)];
    const float* src = set.patch(idx);
    for (int64_t j = 0; j < per; ++j) batch.data[size_t(i * per + j)] = T(src[j]);
    if (labels) {
      int32_t lab = set.labels[size_t(idx)];
      if (lab < 1)
        raise(ErrorKind::InvalidArgument,
              "sample " + std::to_string(idx) + " is unlabeled; supervised batches need labels");
      labels->push_back(int(lab - 1));
    }
  }
  return batch;
}

// Argmax class (0-based) per sample for the listed patches, chunked into
// forward batches. Each sample's computation is self-contained, so any
// worker count gives identical predictions.
template <typename T>
std::vector<int> predict_classes(const ModelParams<T>& params, const ModelConfig& cfg,
                                 const PatchSet& set, const std::vector<int64_t>& indices,
                                 int64_t batch_size, int threads = 1) {
  std::vector<int> out(indices.size(), 0);
  parallel_ranges(int64_t(indices.size()), threads, [&](int64_t lo, int64_t hi) {
    for (int64_t b = lo; b < hi; b += batch_size) {
      int64_t e = std::min(hi, b + batch_size);
      Tensor<T> batch = assemble_batch<T>(set, indices, b, e, nullptr);
      Tensor<T> logits = infer_logits(params, cfg, batch);
      for (int64_t i = 0; i < e - b; ++i) {
        int best = 0;
        for (int64_t c = 1; c < cfg.classes; ++c)
          if (logits(i, c) > logits(i, best)) best = int(c);
        out[size_t(b + i)] = best;
      }
    }
  });
  return out;
}

template <typename T>
Metrics evaluate_model(const ModelParams<T>& params, const ModelConfig& cfg, const PatchSet& set,
                       const std::vector<int64_t>& indices, int64_t batch_size, int threads = 1) {
  if (indices.empty()) raise(ErrorKind::InvalidArgument, "evaluation needs at least one sample");
  std::vector<int> predicted = predict_classes(params, cfg, set, indices, batch_size, threads);
  std::vector<int> truth;
  truth.reserve(indices.size());
  for (int64_t idx : indices) {
    int32_t lab = set.labels[size_t(idx)];
    if (lab < 1)
      raise(ErrorKind::InvalidArgument,
            "sample " + std::to_string(idx) + " is unlabeled; evaluation needs labels");
    truth.push_back(int(lab - 1));
  }
  return compute_metrics(truth, predicted, cfg.classes);
}

// Adam over shuffled mini-batches. Epoch e reshuffles with seed + e, chunks
// the order into batches of at most batch_size (the last may be smaller),
// and steps once per batch. Gradients are taken in canonical parameter
// order; a non-finite loss or gradient aborts with the epoch and step named.
template <typename T>
TrainResult<T> train_model(const ModelConfig& cfg, const TrainConfig& tc, const PatchSet& set,
                           const std::vector<int64_t>& train_indices,
                           const std::vector<int64_t>* eval_indices = nullptr) {
  cfg.validate();
  tc.validate();
  if (train_indices.empty())
    raise(ErrorKind::InvalidArgument, "training needs at least one sample");

  TrainResult<T> result;
  result.params = ModelParams<T>::init(cfg, tc.seed);

  typename Adam<T>::Settings opt_settings;
  opt_settings.lr = T(tc.learning_rate);
  Adam<T> opt(opt_settings);
  result.params.for_each([&](const char* path, Tensor<T>& t) { opt.add_param(path, &t); });

  int64_t n = int64_t(train_indices.size());
  int64_t batch_size = std::min(tc.batch_size, n);

  for (int64_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::vector<int64_t> order = train_indices;
    Rng rng(tc.seed + uint64_t(epoch));
    rng.shuffle(order);

    double loss_sum = 0;
    int64_t step = 0;
    for (int64_t b = 0; b < n; b += batch_size, ++step) {
      int64_t e = std::min(n, b + batch_size);
      try {
        std::vector<int> labels;
        Tensor<T> batch = assemble_batch<T>(set, order, b, e, &labels);
        Graph<T> g;
        auto pv = ModelVars<T>::bind(g, result.params);
        auto res = forward(g, pv, cfg, g.input(batch));
        auto loss = loss_op(g, res.logits, labels, pv.classifier_w, cfg.lambda);
        g.backward(loss);
        std::vector<const Tensor<T>*> grads;
        for (auto v : pv.all()) grads.push_back(&g.grad(v));
        opt.step(grads);
        loss_sum += double(g.value(loss).data[0]) * double(e - b);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::NonFinite) throw;
        raise(ErrorKind::NonFinite, "epoch " + std::to_string(epoch) + " step " +
                                        std::to_string(step + 1) + ": " + err.what());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / double(n);
    if (tc.epoch_eval && eval_indices && !eval_indices->empty())
      rec.oa = evaluate_model(result.params, cfg, set, *eval_indices, batch_size).oa;
    result.history.push_back(rec);
  }
  return result;
}

// epoch,loss,oa rows; the oa column is blank for epochs that were not scored.
inline void write_history(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorKind::IoError, "cannot open for writing: " + path);
  out << "epoch,loss,oa\n";
  char line[96];
  for (const EpochRecord& r : history) {
    std::snprintf(line, sizeof line, "%lld,%.9g,", (long long)r.epoch, r.loss);
    out << line;
    if (r.oa >= 0) {
      std::snprintf(line, sizeof line, "%.6f", r.oa);
      out << line;
    }
    out << '\n';
  }
  if (!out) raise(ErrorKind::IoError, "short write: " + path);
}

// Class map for a whole scene: stride-1 patches are scored and their argmax
// class (1-based) lands at each patch center; border pixels that no patch
// centers on stay 0.
template <typename T>
std::vector<int32_t> predict_map(const ModelParams<T>& params, const ModelConfig& cfg,
                                 const HsiCube& cube, int64_t batch_size, int threads = 1) {
  PatchSet set = extract_patches(cube, cfg.patch_size, 1);
  std::vector<int64_t> all(size_t(set.count()));
  for (int64_t i = 0; i < set.count(); ++i) all[size_t(i)] = i;
  std::vector<int> predicted = predict_classes(params, cfg, set, all, batch_size, threads);
  std::vector<int32_t> map(size_t(cube.height * cube.width), 0);
  for (int64_t i = 0; i < set.count(); ++i) {
    auto [alpha, beta] = set.centers[size_t(i)];
    map[size_t(alpha * cube.width + beta)] = int32_t(predicted[size_t(i)] + 1);
  }
  return map;
}

}  // namespace gm
