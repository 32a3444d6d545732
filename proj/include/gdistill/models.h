// include/gdistill/models.h

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

#ifndef GDISTILL_MODELS_H_
#define GDISTILL_MODELS_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gdistill/common.h"
#include "gdistill/ops.h"
#include "gdistill/rng.h"
#include "gdistill/tensor.h"

namespace gdistill {

enum class ModelKind { kResDavenet, kDavenet };

std::string ModelKindName(ModelKind kind);
ModelKind ModelKindFromName(const std::string &name);  // ConfigError on junk

// Residual audio encoder. The stem convolves all mel channels over a single
// temporal frame; each of the four stacks halves the temporal length in its
// first block, so tap k has length ceil(T / 2^k).
struct ResDavenetConfig {
  int input_mels = 40;
  int stem_channels = 128;
  std::vector<int> stack_channels = {128, 256, 512, 1024};
  int kernel = 9;
  int blocks_per_stack = 2;
  int stack_stride = 2;

  void Validate() const;
};

// One layer of the plain convolutional audio encoder: conv + ReLU, followed
// by a ceil-mode max pool when pool > 1.
struct DavenetLayer {
  int channels = 0;
  int kernel = 1;
  int pool = 0;
};

struct DavenetConfig {
  int input_mels = 40;
  std::vector<DavenetLayer> layers = {
      {128, 1, 0}, {256, 11, 2}, {512, 17, 2}, {512, 17, 2}, {1024, 17, 0}};

  void Validate() const;
};

// Compact image branch: a small strided conv stack pooled to a vector and
// projected to the shared embedding dimension. In presence mode the input is
// the object-presence vector and the branch is a single linear map.
struct ImageEncoderConfig {
  std::vector<int> conv_channels = {16, 32, 64};
  int kernel = 3;
  int embed_dim = 1024;
  int image_size = 32;
  bool presence_input = false;
  int presence_dim = 0;  // required when presence_input

  void Validate() const;
};

struct ModelConfig {
  ModelKind kind = ModelKind::kResDavenet;
  ResDavenetConfig resdavenet;
  DavenetConfig davenet;
  ImageEncoderConfig image;

  // Embedding width of the configured audio branch.
  int AudioEmbedDim() const;
  // Checks the active branch configs and that both branches agree on the
  // embedding dimension.
  void Validate() const;

  // Desk-scale preset: quarter-width stacks, 256-dim embeddings.
  static ModelConfig MiniPreset();
};

namespace detail {

template <typename T>
struct Conv1dModule {
  Tensor<T> w;
  Tensor<T> b;  // undefined handle when the conv feeds a BatchNorm
  int stride = 1;
  int pad = 0;

  Tensor<T> Forward(const Tensor<T> &x) const {
    return Conv1d(x, w, b, stride, pad);
  }
};

template <typename T>
struct Bn1dModule {
  Tensor<T> gamma;
  Tensor<T> beta;
  RunningStats<T> stats;

  Tensor<T> Forward(const Tensor<T> &x, BnMode mode) {
    return BatchNorm1d(x, gamma, beta, stats, mode);
  }
};

// conv -> BN -> ReLU -> conv -> BN, skip joins before the final ReLU. The
// skip goes through a strided 1x1 projection (plus BN) whenever shape or
// stride would otherwise break the addition.
template <typename T>
struct ResBlock {
  Conv1dModule<T> conv1, conv2;
  Bn1dModule<T> bn1, bn2;
  bool has_proj = false;
  Conv1dModule<T> proj;
  Bn1dModule<T> proj_bn;

  Tensor<T> Forward(const Tensor<T> &x, BnMode mode);
};

template <typename T>
struct Conv2dModule {
  Tensor<T> w;
  Tensor<T> b;
  int stride = 1;
  int pad = 0;

  Tensor<T> Forward(const Tensor<T> &x) const {
    return Conv2d(x, w, b, stride, pad);
  }
};

template <typename T>
struct LinearModule {
  Tensor<T> w;
  Tensor<T> b;

  Tensor<T> Forward(const Tensor<T> &x) const { return Linear(x, w, b); }
};

}  // namespace detail

// The two-branch grounding model. Parameters are created once at
// construction from a scaled-uniform fan-in init driven by the seed, so two
// models built from the same (config, seed) start bit-identical.
template <typename T>
class GroundingModel {
 public:
  GroundingModel(const ModelConfig &config, uint64_t seed);

  const ModelConfig &Config() const { return config_; }
  uint64_t Seed() const { return seed_; }
  int EmbedDim() const { return config_.AudioEmbedDim(); }

  // Runs the audio branch on (F, T) or (B, F, T) features. When `taps` is
  // non-null it receives the per-stack activations, shallowest first.
  Tensor<T> AudioForward(const Tensor<T> &features, BnMode mode,
                         std::vector<std::pair<std::string, Tensor<T>>> *taps =
                             nullptr);

  // Runs the image branch on (3, H, W) / (B, 3, H, W) pixels, or on
  // presence vectors (V) / (B, V) in presence mode.
  Tensor<T> ImageForward(const Tensor<T> &image, BnMode mode);

  // Trainable tensors in fixed construction order; handles are shared with
  // the forward graph, so an optimizer step moves the model.
  std::vector<Tensor<T>> &Parameters() { return params_; }
  const std::vector<std::string> &ParameterNames() const { return names_; }

  // BatchNorm running statistics, name -> slot, in construction order.
  std::vector<std::pair<std::string, RunningStats<T> *>> MutableStats();

  // Total scalar parameter count under names starting with `prefix`
  // ("audio/" and "image/" select the two branches; "" counts everything).
  int64_t ParameterCount(const std::string &prefix = "") const;

  std::vector<std::string> TapNames() const;

  // Cumulative temporal downsampling factor of each tap, aligned with
  // TapNames(). A tap of ratio r emits ceil(T / r) frames.
  std::vector<int> TapRatios() const;

  // Channel count of each tap, aligned with TapNames().
  std::vector<int> TapChannels() const;

 private:
  void BuildResDavenet(Rng *rng);
  void BuildDavenet(Rng *rng);
  void BuildImageEncoder(Rng *rng);

  Tensor<T> RegisterParam(const std::string &name, Tensor<T> t);
  detail::Conv1dModule<T> MakeConv1d(const std::string &name, int in, int out,
                                     int kernel, int stride, bool bias,
                                     Rng *rng);
  detail::Bn1dModule<T> MakeBn(const std::string &name, int channels);
  detail::Conv2dModule<T> MakeConv2d(const std::string &name, int in, int out,
                                     int kernel, int stride, int pad,
                                     Rng *rng);
  detail::LinearModule<T> MakeLinear(const std::string &name, int in, int out,
                                     Rng *rng);

  ModelConfig config_;
  uint64_t seed_ = 0;

  std::vector<Tensor<T>> params_;
  std::vector<std::string> names_;
  std::vector<std::pair<std::string, RunningStats<T> *>> stat_slots_;

  // resdavenet branch
  detail::Conv1dModule<T> stem_conv_;
  detail::Bn1dModule<T> stem_bn_;
  std::vector<std::vector<detail::ResBlock<T>>> stacks_;

  // davenet branch
  std::vector<detail::Conv1dModule<T>> dav_convs_;

  // image branch
  std::vector<detail::Conv2dModule<T>> img_convs_;
  detail::LinearModule<T> img_proj_;
};

extern template class GroundingModel<float>;
extern template class GroundingModel<double>;

}  // namespace gdistill

#endif  // GDISTILL_MODELS_H_
