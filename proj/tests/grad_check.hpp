#pragma once

// Finite-difference gradient oracle shared by the op-level and model-level
// test binaries. Central differences at step h in 64-bit; per-element error
// is |analytic - numeric| / max(|analytic|, |numeric|), falling back to the
// absolute difference when both magnitudes are below 1e-6 (a relative error
// on two near-zero values is noise).

#include <cmath>
#include <cstdint>
#include <vector>

#include "gm/autodiff.hpp"
#include "gm/tensor.hpp"

namespace gmtest {

inline double grad_err(double analytic, double numeric) {
  double denom = std::max(std::abs(analytic), std::abs(numeric));
  if (denom < 1e-6) return std::abs(analytic - numeric) < 1e-6 ? 0.0 : 1.0;
  return std::abs(analytic - numeric) / denom;
}

// build(graph, vars) must construct a scalar loss from the given inputs.
// Returns the worst grad_err over every element of every input tensor.
template <typename BuildFn>
double max_grad_err(std::vector<gm::Tensor<double>> inputs, BuildFn build, double h = 1e-5) {
  using G = gm::Graph<double>;
  std::vector<gm::Tensor<double>> analytic;
  {
    G g;
    std::vector<typename G::Var> vars;
    vars.reserve(inputs.size());
    for (const auto& t : inputs) vars.push_back(g.input(t));
    auto loss = build(g, vars);
    g.backward(loss);
    for (auto v : vars) analytic.push_back(g.grad(v));
  }
  auto eval = [&]() {
    G g;
    std::vector<typename G::Var> vars;
    vars.reserve(inputs.size());
    for (const auto& t : inputs) vars.push_back(g.input(t));
    return g.value(build(g, vars)).data[0];
  };
  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (size_t j = 0; j < inputs[i].data.size(); ++j) {
      double keep = inputs[i].data[j];
      inputs[i].data[j] = keep + h;
      double up = eval();
      inputs[i].data[j] = keep - h;
      double dn = eval();
      inputs[i].data[j] = keep;
      double numeric = (up - dn) / (2.0 * h);
      worst = std::max(worst, grad_err(analytic[i].data[j], numeric));
    }
  }
  return worst;
}

}  // namespace gmtest
