// src/distill.cc

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

#include "gdistill/distill.h"

#include <algorithm>

#include "gdistill/ops.h"

namespace gdistill {

LayerFeatures ExtractLayerFeatures(GroundingModel<float> &model,
                                   const FeatureMatrix &features,
                                   const std::string &layer) {
  features.Validate();
  const auto names = model.TapNames();
  if (std::find(names.begin(), names.end(), layer) == names.end()) {
    std::string valid;
    for (const auto &n : names) valid += valid.empty() ? n : ", " + n;
    throw ConfigError(
        Cat("unknown tap '", layer, "'; this model has: ", valid));
  }

  NoGradGuard guard;
  const int64_t f = features.num_bins;
  const int64_t t = features.num_frames;
  std::vector<float> transposed(static_cast<size_t>(f * t));
  for (int64_t i = 0; i < t; ++i)
    for (int64_t j = 0; j < f; ++j)
      transposed[j * t + i] = features.At(i, j);
  auto x = Tensor<float>::Leaf({f, t}, transposed, /*requires_grad=*/false);

  std::vector<std::pair<std::string, Tensor<float>>> taps;
  model.AudioForward(x, BnMode::kInfer, &taps);
  for (auto &[name, act] : taps) {
    if (name != layer) continue;
    LayerFeatures out;
    out.channels = act.Shape()[0];
    out.num_frames = act.Shape()[1];
    auto vals = act.Values();
    out.values.assign(vals.begin(), vals.end());
    return out;
  }
  // TapNames() and AudioForward emit the same list, so this is unreachable.
  throw ConfigError(Cat("tap '", layer, "' missing from forward pass"));
}

LayerFeatures RepeatUpsample(const LayerFeatures &tap, int ratio,
                             int64_t target_frames) {
  if (ratio < 1)
    throw ConfigError(Cat("upsample ratio must be >= 1, got ", ratio));
  if (target_frames < 1)
    throw ConfigError(Cat("target frame count must be >= 1, got ",
                          target_frames));
  const int64_t want = (target_frames + ratio - 1) / ratio;
  if (tap.num_frames != want)
    throw ShapeError(Cat("upsample by ", ratio, " to ", target_frames,
                         " frames needs ", want, " input frames, got ",
                         tap.num_frames));
  LayerFeatures out;
  out.channels = tap.channels;
  out.num_frames = target_frames;
  out.values.resize(static_cast<size_t>(tap.channels * target_frames));
  for (int64_t c = 0; c < tap.channels; ++c)
    for (int64_t t = 0; t < target_frames; ++t)
      out.values[c * target_frames + t] = tap.At(c, t / ratio);
  return out;
}

namespace {

// Archives store frames time-major; LayerFeatures is channel-major.
void PackRecord(const LayerFeatures &feats, ArchiveRecord *rec) {
  rec->num_frames = static_cast<uint32_t>(feats.num_frames);
  rec->channels = static_cast<uint32_t>(feats.channels);
  rec->frames.resize(feats.values.size());
  for (int64_t t = 0; t < feats.num_frames; ++t)
    for (int64_t c = 0; c < feats.channels; ++c)
      rec->frames[t * feats.channels + c] = feats.At(c, t);
}

}  // namespace

FeatureArchive DistillCorpus(GroundingModel<float> &model,
                             const Corpus &corpus, const std::string &layer,
                             uint64_t checkpoint_hash) {
  if (corpus.pairs.empty()) throw DataError("cannot distill an empty corpus");

  const auto names = model.TapNames();
  const auto ratios = model.TapRatios();
  const auto channels = model.TapChannels();
  size_t tap = names.size();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == layer) tap = i;
  if (tap == names.size()) {
    std::string valid;
    for (const auto &n : names) valid += valid.empty() ? n : ", " + n;
    throw ConfigError(
        Cat("unknown tap '", layer, "'; this model has: ", valid));
  }
  FeatureArchive archive;
  archive.header.layer_name = layer;
  archive.header.checkpoint_hash = checkpoint_hash;
  archive.header.ratio = static_cast<uint32_t>(ratios[tap]);
  archive.header.channels = static_cast<uint32_t>(channels[tap]);

  archive.records.reserve(corpus.pairs.size());
  for (const PairedExample &pair : corpus.pairs) {
    const FeatureMatrix &feats = pair.utterance.features;
    LayerFeatures tap = ExtractLayerFeatures(model, feats, layer);
    LayerFeatures full = RepeatUpsample(
        tap, static_cast<int>(archive.header.ratio), feats.num_frames);

    ArchiveRecord rec;
    rec.id = pair.pair_id;
    PackRecord(full, &rec);
    rec.has_labels = true;
    rec.labels.reserve(pair.utterance.phone_labels.size());
    for (int32_t l : pair.utterance.phone_labels)
      rec.labels.push_back(static_cast<uint32_t>(l));
    rec.condition = pair.utterance.condition;
    archive.records.push_back(std::move(rec));
  }
  return archive;
}

FeatureArchive RawFeatureArchive(const Corpus &corpus) {
  if (corpus.pairs.empty())
    throw DataError("cannot archive an empty corpus");
  FeatureArchive archive;
  archive.header.layer_name = "fbank";
  archive.header.channels =
      static_cast<uint32_t>(corpus.pairs[0].utterance.features.num_bins);
  archive.header.ratio = 1;
  archive.header.checkpoint_hash = 0;
  archive.records.reserve(corpus.pairs.size());
  for (const PairedExample &pair : corpus.pairs) {
    const FeatureMatrix &feats = pair.utterance.features;
    ArchiveRecord rec;
    rec.id = pair.pair_id;
    rec.num_frames = static_cast<uint32_t>(feats.num_frames);
    rec.channels = static_cast<uint32_t>(feats.num_bins);
    rec.frames = feats.values;  // already time-major
    rec.has_labels = true;
    rec.labels.reserve(pair.utterance.phone_labels.size());
    for (int32_t l : pair.utterance.phone_labels)
      rec.labels.push_back(static_cast<uint32_t>(l));
    rec.condition = pair.utterance.condition;
    archive.records.push_back(std::move(rec));
  }
  return archive;
}

}  // namespace gdistill
