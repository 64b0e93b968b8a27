#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gm/tensor.hpp"

namespace gm {

// Adam with bias correction. Moment buffers are laid out to mirror the
// parameter tensors registered up front; step() consumes one gradient per
// parameter in registration order. A non-finite gradient aborts the run
// naming the offending parameter so a diverging trial fails loudly instead
// of training on garbage.
template <typename T>
class Adam {
 public:
  struct Settings {
    T lr = T(0.001);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
  };

  explicit Adam(Settings s = {}) : s_(s) {}

  void add_param(const std::string& name, Tensor<T>* param) {
    slots_.push_back(Slot{name, param, Tensor<T>::zeros(param->shape), Tensor<T>::zeros(param->shape)});
  }

  size_t param_count() const { return slots_.size(); }
  int64_t step_count() const { return t_; }

  // grads must match registration order and shapes.
  void step(const std::vector<const Tensor<T>*>& grads) {
    if (grads.size() != slots_.size())
      raise(ErrorKind::InvalidArgument,
            "adam: got " + std::to_string(grads.size()) + " gradients for " +
                std::to_string(slots_.size()) + " parameters");
    ++t_;
    T bc1 = T(1) - std::pow(s_.beta1, T(t_));
    T bc2 = T(1) - std::pow(s_.beta2, T(t_));
    for (size_t i = 0; i < slots_.size(); ++i) {
      Slot& sl = slots_[i];
      const Tensor<T>& g = *grads[i];
      if (!g.same_shape(*sl.param))
        raise(ErrorKind::ShapeMismatch, "adam: gradient shape " + shape_str(g.shape) +
                                            " for parameter " + sl.name + " " +
                                            shape_str(sl.param->shape));
      if (!g.all_finite())
        raise(ErrorKind::NonFinite, "adam: non-finite gradient for parameter " + sl.name);
      for (size_t j = 0; j < g.data.size(); ++j) {
        T gj = g.data[j];
        sl.m.data[j] = s_.beta1 * sl.m.data[j] + (T(1) - s_.beta1) * gj;
        sl.v.data[j] = s_.beta2 * sl.v.data[j] + (T(1) - s_.beta2) * gj * gj;
        T mhat = sl.m.data[j] / bc1;
        T vhat = sl.v.data[j] / bc2;
        sl.param->data[j] -= s_.lr * mhat / (std::sqrt(vhat) + s_.eps);
      }
    }
  }

  // Moment state for checkpointing, in registration order.
  const Tensor<T>& first_moment(size_t i) const { return slots_[i].m; }
  const Tensor<T>& second_moment(size_t i) const { return slots_[i].v; }
  Tensor<T>& first_moment(size_t i) { return slots_[i].m; }
  Tensor<T>& second_moment(size_t i) { return slots_[i].v; }
  void set_step_count(int64_t t) { t_ = t; }
  const Settings& settings() const { return s_; }

 private:
  struct Slot {
    std::string name;
    Tensor<T>* param;
    Tensor<T> m;
    Tensor<T> v;
  };
  Settings s_;
  std::vector<Slot> slots_;
  int64_t t_ = 0;
};

}  // namespace gm
