// include/gdistill/distill.h

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

#ifndef GDISTILL_DISTILL_H_
#define GDISTILL_DISTILL_H_

// Turns a trained audio branch into a frame-level feature extractor: run an
// utterance through the frozen model, take one intermediate activation, and
// repeat each of its frames until the original frame rate is restored. The
// result aligns one-to-one with the utterance's frame labels, which is what
// every downstream probe depends on.

#include <string>
#include <vector>

#include "gdistill/archive.h"
#include "gdistill/corpus.h"
#include "gdistill/models.h"

namespace gdistill {

// A plain (channels x frames) activation matrix, row-major.
struct LayerFeatures {
  int64_t channels = 0;
  int64_t num_frames = 0;
  std::vector<float> values;

  float At(int64_t c, int64_t t) const { return values[c * num_frames + t]; }
};

// Runs the audio branch on one utterance (features as T x F, the corpus
// layout) with frozen BatchNorm statistics and returns the activation of the
// named tap ("L1".."L4"). The output has ceil(T / r) frames, where r is the
// tap's downsampling ratio. Unknown tap names are rejected with the list of
// valid ones.
LayerFeatures ExtractLayerFeatures(GroundingModel<float> &model,
                                   const FeatureMatrix &features,
                                   const std::string &layer);

// Repeats every frame r times and truncates to exactly `target_frames`, so
// output frame t is input frame floor(t / r). The input must have
// ceil(target_frames / r) frames, the length ExtractLayerFeatures produces.
LayerFeatures RepeatUpsample(const LayerFeatures &tap, int ratio,
                             int64_t target_frames);

// Distills one tap of a model over a whole corpus: per pair, extract the tap
// activations, upsample back to the utterance's frame count, and store them
// with the utterance's phone labels and condition tag. The header records
// the tap name, channel count, ratio, and `checkpoint_hash` so downstream
// consumers can tell which model produced the features.
FeatureArchive DistillCorpus(GroundingModel<float> &model,
                             const Corpus &corpus, const std::string &layer,
                             uint64_t checkpoint_hash);

// Packs raw corpus filterbank features into the same archive shape as the
// distilled taps (layer name "fbank", ratio 1, hash 0). This is the baseline
// row every probe comparison includes.
FeatureArchive RawFeatureArchive(const Corpus &corpus);

}  // namespace gdistill

#endif  // GDISTILL_DISTILL_H_
