// src/models.cc

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

#include "gdistill/models.h"

#include <cmath>

#include "gdistill/rng.h"

namespace gdistill {

std::string ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kResDavenet:
      return "resdavenet";
    case ModelKind::kDavenet:
      return "davenet";
  }
  throw ConfigError("ModelKindName: unhandled kind");
}

ModelKind ModelKindFromName(const std::string &name) {
  if (name == "resdavenet") return ModelKind::kResDavenet;
  if (name == "davenet") return ModelKind::kDavenet;
  throw ConfigError(Cat("unknown model kind '", name,
                        "' (expected resdavenet or davenet)"));
}

void ResDavenetConfig::Validate() const {
  if (input_mels < 1)
    throw ConfigError(Cat("resdavenet.input_mels must be >= 1, got ",
                          input_mels));
  if (stem_channels < 1)
    throw ConfigError(Cat("resdavenet.stem_channels must be >= 1, got ",
                          stem_channels));
  if (stack_channels.empty())
    throw ConfigError("resdavenet.stack_channels must be non-empty");
  for (int c : stack_channels)
    if (c < 1)
      throw ConfigError(Cat("resdavenet.stack_channels entries must be >= 1, "
                            "got ", c));
  if (kernel < 1 || kernel % 2 == 0)
    throw ConfigError(Cat("resdavenet.kernel must be odd and >= 1, got ",
                          kernel));
  if (blocks_per_stack < 1)
    throw ConfigError(Cat("resdavenet.blocks_per_stack must be >= 1, got ",
                          blocks_per_stack));
  if (stack_stride < 1)
    throw ConfigError(Cat("resdavenet.stack_stride must be >= 1, got ",
                          stack_stride));
}

void DavenetConfig::Validate() const {
  if (input_mels < 1)
    throw ConfigError(Cat("davenet.input_mels must be >= 1, got ", input_mels));
  if (layers.empty()) throw ConfigError("davenet.layers must be non-empty");
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto &l = layers[i];
    if (l.channels < 1)
      throw ConfigError(Cat("davenet.layers[", i, "].channels must be >= 1, "
                            "got ", l.channels));
    if (l.kernel < 1 || l.kernel % 2 == 0)
      throw ConfigError(Cat("davenet.layers[", i, "].kernel must be odd and "
                            ">= 1, got ", l.kernel));
    if (l.pool < 0 || l.pool == 1)
      throw ConfigError(Cat("davenet.layers[", i, "].pool must be 0 or >= 2, "
                            "got ", l.pool));
  }
}

void ImageEncoderConfig::Validate() const {
  if (embed_dim < 1)
    throw ConfigError(Cat("image.embed_dim must be >= 1, got ", embed_dim));
  if (presence_input) {
    if (presence_dim < 1)
      throw ConfigError(Cat("image.presence_dim must be >= 1 in presence "
                            "mode, got ", presence_dim));
    return;
  }
  if (conv_channels.empty())
    throw ConfigError("image.conv_channels must be non-empty");
  for (int c : conv_channels)
    if (c < 1)
      throw ConfigError(Cat("image.conv_channels entries must be >= 1, got ",
                            c));
  if (kernel < 1 || kernel % 2 == 0)
    throw ConfigError(Cat("image.kernel must be odd and >= 1, got ", kernel));
  if (image_size < kernel)
    throw ConfigError(Cat("image.image_size must be >= kernel, got ",
                          image_size));
}

int ModelConfig::AudioEmbedDim() const {
  return kind == ModelKind::kResDavenet ? resdavenet.stack_channels.back()
                                        : davenet.layers.back().channels;
}

void ModelConfig::Validate() const {
  if (kind == ModelKind::kResDavenet)
    resdavenet.Validate();
  else
    davenet.Validate();
  image.Validate();
  if (image.embed_dim != AudioEmbedDim())
    throw ConfigError(Cat("image.embed_dim (", image.embed_dim,
                          ") must equal the audio embedding dim (",
                          AudioEmbedDim(), ")"));
}

ModelConfig ModelConfig::MiniPreset() {
  ModelConfig cfg;
  cfg.resdavenet.stem_channels = 32;
  cfg.resdavenet.stack_channels = {32, 64, 128, 256};
  cfg.image.embed_dim = 256;
  return cfg;
}

namespace detail {

template <typename T>
Tensor<T> ResBlock<T>::Forward(const Tensor<T> &x, BnMode mode) {
  Tensor<T> y = bn1.Forward(conv1.Forward(x), mode);
  y = bn2.Forward(conv2.Forward(Relu(y)), mode);
  Tensor<T> skip = has_proj ? proj_bn.Forward(proj.Forward(x), mode) : x;
  return Relu(Add(y, skip));
}

template struct ResBlock<float>;
template struct ResBlock<double>;

}  // namespace detail

namespace {

// Scaled-uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
Tensor<T> UniformParam(const std::vector<int64_t> &shape, int64_t fan_in,
                       Rng *rng) {
  Tensor<T> t = Tensor<T>::Zeros(shape, /*requires_grad=*/true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  auto vals = t.MutableValues();
  for (auto &v : vals) v = static_cast<T>(rng->Uniform(-bound, bound));
  return t;
}

}  // namespace

template <typename T>
Tensor<T> GroundingModel<T>::RegisterParam(const std::string &name,
                                           Tensor<T> t) {
  names_.push_back(name);
  params_.push_back(t);
  return t;
}

template <typename T>
detail::Conv1dModule<T> GroundingModel<T>::MakeConv1d(const std::string &name,
                                                      int in, int out,
                                                      int kernel, int stride,
                                                      bool bias, Rng *rng) {
  detail::Conv1dModule<T> m;
  const int64_t fan_in = static_cast<int64_t>(in) * kernel;
  m.w = RegisterParam(name + "/w",
                      UniformParam<T>({out, in, kernel}, fan_in, rng));
  if (bias) m.b = RegisterParam(name + "/b", UniformParam<T>({out}, fan_in, rng));
  m.stride = stride;
  m.pad = (kernel - 1) / 2;
  return m;
}

template <typename T>
detail::Bn1dModule<T> GroundingModel<T>::MakeBn(const std::string &name,
                                                int channels) {
  detail::Bn1dModule<T> m;
  m.gamma = RegisterParam(name + "/gamma",
                          Tensor<T>::Full({channels}, T(1), true));
  m.beta = RegisterParam(name + "/beta",
                         Tensor<T>::Full({channels}, T(0), true));
  m.stats = RunningStats<T>::Fresh(channels);
  return m;
}

template <typename T>
detail::Conv2dModule<T> GroundingModel<T>::MakeConv2d(const std::string &name,
                                                      int in, int out,
                                                      int kernel, int stride,
                                                      int pad, Rng *rng) {
  detail::Conv2dModule<T> m;
  const int64_t fan_in = static_cast<int64_t>(in) * kernel * kernel;
  m.w = RegisterParam(
      name + "/w", UniformParam<T>({out, in, kernel, kernel}, fan_in, rng));
  m.b = RegisterParam(name + "/b", UniformParam<T>({out}, fan_in, rng));
  m.stride = stride;
  m.pad = pad;
  return m;
}

template <typename T>
detail::LinearModule<T> GroundingModel<T>::MakeLinear(const std::string &name,
                                                      int in, int out,
                                                      Rng *rng) {
  detail::LinearModule<T> m;
  m.w = RegisterParam(name + "/w", UniformParam<T>({out, in}, in, rng));
  m.b = RegisterParam(name + "/b", UniformParam<T>({out}, in, rng));
  return m;
}

template <typename T>
void GroundingModel<T>::BuildResDavenet(Rng *rng) {
  const auto &cfg = config_.resdavenet;
  // Stem: all mel channels x one frame, then ReLU, then BatchNorm. The bias
  // matters here because the ReLU sits between the conv and the norm.
  stem_conv_ = MakeConv1d("audio/stem/conv", cfg.input_mels, cfg.stem_channels,
                          /*kernel=*/1, /*stride=*/1, /*bias=*/true, rng);
  stem_bn_ = MakeBn("audio/stem/bn", cfg.stem_channels);

  int in_ch = cfg.stem_channels;
  for (size_t s = 0; s < cfg.stack_channels.size(); ++s) {
    const int out_ch = cfg.stack_channels[s];
    std::vector<detail::ResBlock<T>> stack;
    for (int b = 0; b < cfg.blocks_per_stack; ++b) {
      const std::string base = Cat("audio/stack", s + 1, "/block", b + 1);
      const int stride = (b == 0) ? cfg.stack_stride : 1;
      const int block_in = (b == 0) ? in_ch : out_ch;
      detail::ResBlock<T> blk;
      // Convs feeding a BatchNorm carry no bias; the norm would erase it.
      blk.conv1 = MakeConv1d(base + "/conv1", block_in, out_ch, cfg.kernel,
                             stride, /*bias=*/false, rng);
      blk.bn1 = MakeBn(base + "/bn1", out_ch);
      blk.conv2 = MakeConv1d(base + "/conv2", out_ch, out_ch, cfg.kernel,
                             /*stride=*/1, /*bias=*/false, rng);
      blk.bn2 = MakeBn(base + "/bn2", out_ch);
      blk.has_proj = (stride != 1 || block_in != out_ch);
      if (blk.has_proj) {
        blk.proj = MakeConv1d(base + "/proj", block_in, out_ch, /*kernel=*/1,
                              stride, /*bias=*/false, rng);
        blk.proj_bn = MakeBn(base + "/proj_bn", out_ch);
      }
      stack.push_back(std::move(blk));
    }
    stacks_.push_back(std::move(stack));
    in_ch = out_ch;
  }
}

template <typename T>
void GroundingModel<T>::BuildDavenet(Rng *rng) {
  const auto &cfg = config_.davenet;
  int in_ch = cfg.input_mels;
  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto &l = cfg.layers[i];
    dav_convs_.push_back(MakeConv1d(Cat("audio/layer", i + 1, "/conv"), in_ch,
                                    l.channels, l.kernel, /*stride=*/1,
                                    /*bias=*/true, rng));
    in_ch = l.channels;
  }
}

template <typename T>
void GroundingModel<T>::BuildImageEncoder(Rng *rng) {
  const auto &cfg = config_.image;
  if (cfg.presence_input) {
    img_proj_ = MakeLinear("image/proj", cfg.presence_dim, cfg.embed_dim, rng);
    return;
  }
  int in_ch = 3;
  for (size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    img_convs_.push_back(MakeConv2d(Cat("image/conv", i + 1), in_ch,
                                    cfg.conv_channels[i], cfg.kernel,
                                    /*stride=*/2, (cfg.kernel - 1) / 2, rng));
    in_ch = cfg.conv_channels[i];
  }
  img_proj_ = MakeLinear("image/proj", in_ch, cfg.embed_dim, rng);
}

template <typename T>
GroundingModel<T>::GroundingModel(const ModelConfig &config, uint64_t seed)
    : config_(config), seed_(seed) {
  config_.Validate();
  Rng rng(seed);
  if (config_.kind == ModelKind::kResDavenet)
    BuildResDavenet(&rng);
  else
    BuildDavenet(&rng);
  BuildImageEncoder(&rng);

  // Register stat slots after all modules are in their final location.
  if (config_.kind == ModelKind::kResDavenet) {
    stat_slots_.emplace_back("audio/stem/bn/stats", &stem_bn_.stats);
    for (size_t s = 0; s < stacks_.size(); ++s)
      for (size_t b = 0; b < stacks_[s].size(); ++b) {
        const std::string base = Cat("audio/stack", s + 1, "/block", b + 1);
        stat_slots_.emplace_back(base + "/bn1/stats", &stacks_[s][b].bn1.stats);
        stat_slots_.emplace_back(base + "/bn2/stats", &stacks_[s][b].bn2.stats);
        if (stacks_[s][b].has_proj)
          stat_slots_.emplace_back(base + "/proj_bn/stats",
                                   &stacks_[s][b].proj_bn.stats);
      }
  }
}

template <typename T>
Tensor<T> GroundingModel<T>::AudioForward(
    const Tensor<T> &features, BnMode mode,
    std::vector<std::pair<std::string, Tensor<T>>> *taps) {
  if (features.Rank() != 2 && features.Rank() != 3)
    throw ShapeError(Cat("AudioForward: features must be (F,T) or (B,F,T), "
                         "got ", ShapeStr(features.Shape())));
  const int64_t f = features.Dim(features.Rank() - 2);
  const int expect = config_.kind == ModelKind::kResDavenet
                         ? config_.resdavenet.input_mels
                         : config_.davenet.input_mels;
  if (f != expect)
    throw ShapeError(Cat("AudioForward: features have ", f,
                         " mel bins, model expects ", expect));
  if (taps) taps->clear();

  if (config_.kind == ModelKind::kResDavenet) {
    Tensor<T> x = stem_bn_.Forward(Relu(stem_conv_.Forward(features)), mode);
    for (size_t s = 0; s < stacks_.size(); ++s) {
      for (auto &blk : stacks_[s]) x = blk.Forward(x, mode);
      if (taps) taps->emplace_back(Cat("L", s + 1), x);
    }
    return TemporalMeanPool(x);
  }

  // Plain encoder: conv+ReLU per layer, ceil-mode max pool where configured.
  Tensor<T> x = features;
  for (size_t i = 0; i < dav_convs_.size(); ++i) {
    x = Relu(dav_convs_[i].Forward(x));
    if (config_.davenet.layers[i].pool > 1)
      x = MaxPool1d(x, config_.davenet.layers[i].pool,
                    config_.davenet.layers[i].pool);
    if (taps && i > 0) taps->emplace_back(Cat("L", i), x);
  }
  return TemporalMeanPool(x);
}

template <typename T>
Tensor<T> GroundingModel<T>::ImageForward(const Tensor<T> &image, BnMode) {
  const auto &cfg = config_.image;
  if (cfg.presence_input) {
    if (image.Rank() > 2 || image.Dim(image.Rank() - 1) != cfg.presence_dim)
      throw ShapeError(Cat("ImageForward: presence input must be (V) or "
                           "(B,V) with V=", cfg.presence_dim, ", got ",
                           ShapeStr(image.Shape())));
    return img_proj_.Forward(image);
  }
  if (image.Rank() != 3 && image.Rank() != 4)
    throw ShapeError(Cat("ImageForward: image must be (3,H,W) or (B,3,H,W), "
                         "got ", ShapeStr(image.Shape())));
  const int64_t c = image.Dim(image.Rank() - 3);
  const int64_t h = image.Dim(image.Rank() - 2);
  const int64_t w = image.Dim(image.Rank() - 1);
  if (c != 3 || h != cfg.image_size || w != cfg.image_size)
    throw ShapeError(Cat("ImageForward: expected 3x", cfg.image_size, "x",
                         cfg.image_size, " pixels, got ",
                         ShapeStr(image.Shape())));
  Tensor<T> x = image;
  for (auto &conv : img_convs_) x = Relu(conv.Forward(x));
  return img_proj_.Forward(SpatialMeanPool(x));
}

template <typename T>
std::vector<std::pair<std::string, RunningStats<T> *>>
GroundingModel<T>::MutableStats() {
  return stat_slots_;
}

template <typename T>
int64_t GroundingModel<T>::ParameterCount(const std::string &prefix) const {
  int64_t n = 0;
  for (size_t i = 0; i < params_.size(); ++i)
    if (names_[i].rfind(prefix, 0) == 0) n += params_[i].Numel();
  return n;
}

template <typename T>
std::vector<std::string> GroundingModel<T>::TapNames() const {
  std::vector<std::string> names;
  const size_t n = config_.kind == ModelKind::kResDavenet
                       ? config_.resdavenet.stack_channels.size()
                       : config_.davenet.layers.size() - 1;
  for (size_t i = 1; i <= n; ++i) names.push_back(Cat("L", i));
  return names;
}

template <typename T>
std::vector<int> GroundingModel<T>::TapRatios() const {
  std::vector<int> ratios;
  if (config_.kind == ModelKind::kResDavenet) {
    int r = 1;
    for (size_t i = 0; i < config_.resdavenet.stack_channels.size(); ++i) {
      r *= config_.resdavenet.stack_stride;
      ratios.push_back(r);
    }
  } else {
    int r = 1;
    for (size_t i = 1; i < config_.davenet.layers.size(); ++i) {
      if (config_.davenet.layers[i].pool > 1) r *= config_.davenet.layers[i].pool;
      ratios.push_back(r);
    }
  }
  return ratios;
}

template <typename T>
std::vector<int> GroundingModel<T>::TapChannels() const {
  std::vector<int> channels;
  if (config_.kind == ModelKind::kResDavenet) {
    for (int c : config_.resdavenet.stack_channels) channels.push_back(c);
  } else {
    for (size_t i = 1; i < config_.davenet.layers.size(); ++i)
      channels.push_back(config_.davenet.layers[i].channels);
  }
  return channels;
}

template class GroundingModel<float>;
template class GroundingModel<double>;

}  // namespace gdistill
