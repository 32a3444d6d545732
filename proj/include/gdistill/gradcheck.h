// gdistill/gradcheck.h

// Copyright 2026  gdistill authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef GDISTILL_GRADCHECK_H_
#define GDISTILL_GRADCHECK_H_

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gdistill/rng.h"
#include "gdistill/tensor.h"

namespace gdistill {

struct GradCheckResult {
  bool ok = true;
  double max_rel_err = 0.0;
  // Where the worst coordinate lives, for diagnosing a failure.
  size_t worst_input = 0;
  size_t worst_coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  size_t coords_checked = 0;

  std::string Describe() const;
};

// Central-difference check of reverse-mode gradients.
//
// `fn` must rebuild the graph from scratch on every call (values are perturbed
// in place between calls) and return a scalar loss. Gradients are compared as
//   rel = |a - n| / max(|a|, |n|, 1e-8)
// and the check passes when every sampled coordinate stays below `tol`.
// `max_coords_per_input` == 0 checks every coordinate; otherwise a seeded
// subsample keeps large parameter tensors affordable.
inline GradCheckResult FiniteDiffCheck(
    const std::function<Tensor<double>()> &fn,
    const std::vector<Tensor<double>> &inputs, double eps = 1e-5,
    double tol = 1e-4, size_t max_coords_per_input = 0,
    uint64_t sample_seed = 0x9e3779b97f4a7c15ull) {
  GradCheckResult res;

  {
    for (Tensor<double> in : inputs) in.ZeroGrad();  // handles share storage
    auto loss = fn();
    Backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto &in : inputs) {
    auto g = in.Grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  Rng picker(sample_seed);
  for (size_t ii = 0; ii < inputs.size(); ++ii) {
    Tensor<double> input = inputs[ii];
    auto vals = input.MutableValues();
    const size_t numel = vals.size();
    std::vector<size_t> coords;
    if (max_coords_per_input == 0 || numel <= max_coords_per_input) {
      coords.resize(numel);
      for (size_t i = 0; i < numel; ++i) coords[i] = i;
    } else {
      // Sample distinct coordinates; collisions are simply skipped, which is
      // fine for coverage purposes.
      std::vector<bool> seen(numel, false);
      while (coords.size() < max_coords_per_input) {
        size_t c = static_cast<size_t>(picker.UniformInt(static_cast<int64_t>(numel)));
        if (!seen[c]) {
          seen[c] = true;
          coords.push_back(c);
        }
      }
    }
    for (size_t c : coords) {
      const double saved = vals[c];
      vals[c] = saved + eps;
      double up = fn().Item();
      vals[c] = saved - eps;
      double down = fn().Item();
      vals[c] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[ii][c];
      const double rel =
          std::abs(a - numeric) /
          std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++res.coords_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_input = ii;
        res.worst_coord = c;
        res.analytic = a;
        res.numeric = numeric;
      }
      if (rel > tol) res.ok = false;
    }
  }
  return res;
}

inline std::string GradCheckResult::Describe() const {
  return Cat(ok ? "ok" : "FAIL", " max_rel_err=", max_rel_err, " at input ",
             worst_input, " coord ", worst_coord, " analytic=", analytic,
             " numeric=", numeric, " (", coords_checked, " coords)");
}

}  // namespace gdistill

#endif  // GDISTILL_GRADCHECK_H_
