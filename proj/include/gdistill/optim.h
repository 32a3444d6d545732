// gdistill/optim.h

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

#ifndef GDISTILL_OPTIM_H_
#define GDISTILL_OPTIM_H_

#include <cmath>
#include <vector>

#include "gdistill/tensor.h"

namespace gdistill {

// SGD with classical momentum:
//   v <- momentum * v - lr * g
//   p <- p + v
// A non-finite gradient coordinate aborts the step with NumericError before
// any parameter is touched, so a diverged run cannot silently corrupt state.
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor<T>> params, T lr, T momentum = T(0.9))
      : params_(std::move(params)), lr_(lr), momentum_(momentum) {
    if (!(lr > T(0))) throw ConfigError("SgdMomentum: lr must be > 0");
    if (momentum < T(0) || momentum >= T(1))
      throw ConfigError("SgdMomentum: momentum must be in [0,1)");
    velocity_.reserve(params_.size());
    for (const auto &p : params_)
      velocity_.emplace_back(p.Numel(), T(0));
  }

  void Step() {
    for (size_t i = 0; i < params_.size(); ++i) {
      auto g = params_[i].Grad();
      for (T gv : g)
        if (!std::isfinite(gv))
          throw NumericError(
              "SgdMomentum: non-finite gradient; refusing to update");
    }
    for (size_t i = 0; i < params_.size(); ++i) {
      auto g = params_[i].Grad();
      auto vals = params_[i].MutableValues();
      auto &vel = velocity_[i];
      for (size_t j = 0; j < vel.size(); ++j) {
        vel[j] = momentum_ * vel[j] - lr_ * g[j];
        vals[j] += vel[j];
      }
    }
  }

  void ZeroGrad() { ZeroGrads(params_); }

  // Velocity is part of optimizer state; exposed for checkpointing.
  std::vector<std::vector<T>> &Velocity() { return velocity_; }
  const std::vector<Tensor<T>> &Params() const { return params_; }
  T LearningRate() const { return lr_; }
  void SetLearningRate(T lr) {
    if (!(lr > T(0))) throw ConfigError("SgdMomentum: lr must be > 0");
    lr_ = lr;
  }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> velocity_;
  T lr_;
  T momentum_;
};

}  // namespace gdistill

#endif  // GDISTILL_OPTIM_H_
