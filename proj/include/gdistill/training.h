// include/gdistill/training.h

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

#ifndef GDISTILL_TRAINING_H_
#define GDISTILL_TRAINING_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gdistill/corpus.h"
#include "gdistill/models.h"
#include "gdistill/optim.h"
#include "gdistill/retrieval.h"

namespace gdistill {

struct TrainingConfig {
  double margin = 1.0;
  int batch_size = 32;
  double lr = 0.05;
  double momentum = 0.9;
  int epochs = 10;
  double semi_hard_fraction = 0.5;  // rho: share of rows mined semi-hard
  int crop_frames = 128;
  double holdout_fraction = 0.1;
  uint64_t seed = 0;

  void Validate() const;
};

// Pad value for utterances shorter than the crop window: the log of the
// filterbank floor, i.e. the value a silent frame would take.
inline constexpr float kPadLogValue = -23.025850929940457f;

// Fixed-length (F, crop) slice of an utterance: a random crop when the
// utterance is longer, right-padding with kPadLogValue when shorter. Always
// consumes exactly one draw from `rng` so batch layouts stay reproducible.
Tensor<float> CropOrPad(const FeatureMatrix &features, int crop_frames,
                        Rng &rng);

// Per-row imposter choice over a B x B similarity matrix whose diagonal
// holds the positive-pair scores. Each row is mined semi-hard with
// probability rho: the highest-scoring candidate strictly below the
// positive (ties to the lowest index), falling back to a uniform draw when
// no candidate qualifies. Otherwise the row draws uniformly over j != i.
// Rows are laid out for the audio->image direction; pass the transpose for
// the other one.
std::vector<int32_t> SampleNegatives(const std::vector<double> &sim,
                                     int64_t b, double rho, Rng &rng);

// Two-sided hinge over a batch: for each row i,
//   max(0, margin - S_ii + S(i, neg_image[i]))
// + max(0, margin - S_ii + S(neg_audio[i], i)),
// averaged over rows. Both embedding tensors are (B, D).
template <typename T>
Tensor<T> TripletMarginLoss(const Tensor<T> &audio_emb,
                            const Tensor<T> &image_emb,
                            const std::vector<int32_t> &neg_image,
                            const std::vector<int32_t> &neg_audio, T margin);

struct DataSplit {
  std::vector<int> train, heldout;
};

// Deterministic, seed-free split: every round(1/holdout_fraction)-th pair is
// held out, so nested training subsets can share one evaluation pool.
DataSplit SplitPairs(int n_pairs, double holdout_fraction);

// One optimizer step on a batch of corpus pairs. Returns the loss value.
// A non-finite loss aborts before any parameter moves, naming the batch.
double TrainStep(GroundingModel<float> &model, const Corpus &corpus,
                 const std::vector<int> &batch, const TrainingConfig &cfg,
                 Rng &rng, SgdMomentum<float> &opt);

struct TrainResult {
  std::vector<double> loss_curve;    // one entry per optimizer step
  std::vector<double> heldout_r10;   // mean R@10 per epoch
  uint64_t steps = 0;
  double best_r10 = -1.0;
  int best_epoch = -1;

  std::string CurveCsv() const;
};

// Full training run: epochs over shuffled full batches, held-out retrieval
// after each epoch, best-by-R@10 checkpoint written to `checkpoint_path`.
// `train_override` restricts the training pool (the held-out pool is
// unaffected); `log` receives one progress line per epoch when non-null.
TrainResult TrainLoop(const Corpus &corpus, const ModelConfig &model_cfg,
                      const TrainingConfig &cfg,
                      const std::string &checkpoint_path,
                      const std::vector<int> *train_override = nullptr,
                      std::ostream *log = nullptr);

}  // namespace gdistill

#endif  // GDISTILL_TRAINING_H_
