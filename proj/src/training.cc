// src/training.cc

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

#include "gdistill/training.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "gdistill/checkpoint.h"

namespace gdistill {

void TrainingConfig::Validate() const {
  if (!(margin > 0))
    throw ConfigError(Cat("training.margin must be > 0, got ", margin));
  if (batch_size < 2)
    throw ConfigError(Cat("training.batch_size must be >= 2, got ",
                          batch_size));
  if (!(lr > 0)) throw ConfigError(Cat("training.lr must be > 0, got ", lr));
  if (momentum < 0 || momentum >= 1)
    throw ConfigError(Cat("training.momentum must be in [0,1), got ",
                          momentum));
  if (epochs < 0)
    throw ConfigError(Cat("training.epochs must be >= 0, got ", epochs));
  if (semi_hard_fraction < 0 || semi_hard_fraction > 1)
    throw ConfigError(Cat("training.semi_hard_fraction must be in [0,1], "
                          "got ", semi_hard_fraction));
  if (crop_frames < 1)
    throw ConfigError(Cat("training.crop_frames must be >= 1, got ",
                          crop_frames));
  if (holdout_fraction <= 0 || holdout_fraction >= 1)
    throw ConfigError(Cat("training.holdout_fraction must be in (0,1), got ",
                          holdout_fraction));
}

Tensor<float> CropOrPad(const FeatureMatrix &features, int crop_frames,
                        Rng &rng) {
  if (crop_frames < 1)
    throw ConfigError(Cat("CropOrPad: crop must be >= 1, got ", crop_frames));
  const int64_t t_in = features.num_frames;
  const int64_t f = features.num_bins;
  // One draw regardless of length keeps the rng stream aligned across
  // batches with mixed utterance lengths.
  const int64_t span = std::max<int64_t>(1, t_in - crop_frames + 1);
  const int64_t start = static_cast<int64_t>(rng.UniformInt(span));
  auto out = Tensor<float>::Full({f, crop_frames}, kPadLogValue);
  auto ov = out.MutableValues();
  const int64_t copy = std::min<int64_t>(crop_frames, t_in);
  for (int64_t ff = 0; ff < f; ++ff)
    for (int64_t t = 0; t < copy; ++t)
      ov[ff * crop_frames + t] = features.At(start + t, ff);
  return out;
}

std::vector<int32_t> SampleNegatives(const std::vector<double> &sim,
                                     int64_t b, double rho, Rng &rng) {
  if (b < 2) throw ShapeError(Cat("SampleNegatives: need B >= 2, got ", b));
  if (static_cast<int64_t>(sim.size()) != b * b)
    throw ShapeError(Cat("SampleNegatives: matrix size ", sim.size(),
                         " does not match B=", b));
  if (rho < 0 || rho > 1)
    throw ConfigError(Cat("SampleNegatives: rho must be in [0,1], got ", rho));
  std::vector<int32_t> out(b);
  for (int64_t i = 0; i < b; ++i) {
    const bool mine = rng.Uniform() < rho;
    int64_t pick = -1;
    if (mine) {
      // Closest violator strictly below the positive score; ties keep the
      // lowest index because only strictly-greater candidates replace it.
      const double truth = sim[i * b + i];
      double best = -HUGE_VAL;
      for (int64_t j = 0; j < b; ++j) {
        if (j == i) continue;
        const double v = sim[i * b + j];
        if (v < truth && v > best) {
          best = v;
          pick = j;
        }
      }
    }
    if (pick < 0) {
      // Uniform over j != i, also the fallback when no candidate violates.
      pick = static_cast<int64_t>(rng.UniformInt(b - 1));
      if (pick >= i) ++pick;
    }
    out[i] = static_cast<int32_t>(pick);
  }
  return out;
}

template <typename T>
Tensor<T> TripletMarginLoss(const Tensor<T> &audio_emb,
                            const Tensor<T> &image_emb,
                            const std::vector<int32_t> &neg_image,
                            const std::vector<int32_t> &neg_audio, T margin) {
  if (!(margin > T(0)))
    throw ConfigError(Cat("TripletMarginLoss: margin must be > 0, got ",
                          margin));
  if (audio_emb.Rank() != 2 || image_emb.Rank() != 2 ||
      audio_emb.Shape() != image_emb.Shape())
    throw ShapeError(Cat("TripletMarginLoss: embeddings must share (B,D), "
                         "got ", ShapeStr(audio_emb.Shape()), " and ",
                         ShapeStr(image_emb.Shape())));
  const int64_t b = audio_emb.Dim(0);
  if (static_cast<int64_t>(neg_image.size()) != b ||
      static_cast<int64_t>(neg_audio.size()) != b)
    throw ShapeError(Cat("TripletMarginLoss: need ", b,
                         " negatives per modality, got ", neg_image.size(),
                         " and ", neg_audio.size()));
  for (int64_t i = 0; i < b; ++i) {
    if (neg_image[i] < 0 || neg_image[i] >= b || neg_image[i] == i ||
        neg_audio[i] < 0 || neg_audio[i] >= b || neg_audio[i] == i)
      throw DataError(Cat("TripletMarginLoss: negative index for row ", i,
                          " is not a valid imposter"));
  }

  auto margin_leaf = Tensor<T>::Full({1}, margin);
  Tensor<T> total = Tensor<T>::Zeros({1});
  for (int64_t i = 0; i < b; ++i) {
    auto a_i = SelectRow(audio_emb, i);
    auto v_i = SelectRow(image_emb, i);
    auto s_ap = Dot(a_i, v_i);
    // Imposter image against the anchor audio, imposter audio against the
    // anchor image.
    auto s_imp_img = Dot(a_i, SelectRow(image_emb, neg_image[i]));
    auto s_imp_aud = Dot(SelectRow(audio_emb, neg_audio[i]), v_i);
    auto neg_ap = Scale(s_ap, T(-1));
    total = Add(total, Relu(Add(margin_leaf, Add(neg_ap, s_imp_img))));
    total = Add(total, Relu(Add(margin_leaf, Add(neg_ap, s_imp_aud))));
  }
  return Scale(total, T(1) / static_cast<T>(b));
}

template Tensor<float> TripletMarginLoss<float>(const Tensor<float> &,
                                                const Tensor<float> &,
                                                const std::vector<int32_t> &,
                                                const std::vector<int32_t> &,
                                                float);
template Tensor<double> TripletMarginLoss<double>(const Tensor<double> &,
                                                  const Tensor<double> &,
                                                  const std::vector<int32_t> &,
                                                  const std::vector<int32_t> &,
                                                  double);

DataSplit SplitPairs(int n_pairs, double holdout_fraction) {
  if (n_pairs < 1) throw DataError("SplitPairs: empty corpus");
  if (holdout_fraction <= 0 || holdout_fraction >= 1)
    throw ConfigError(Cat("SplitPairs: holdout_fraction must be in (0,1), "
                          "got ", holdout_fraction));
  const int stride =
      std::max(2, static_cast<int>(std::lround(1.0 / holdout_fraction)));
  DataSplit split;
  for (int i = 0; i < n_pairs; ++i) {
    if (i % stride == stride - 1)
      split.heldout.push_back(i);
    else
      split.train.push_back(i);
  }
  if (split.heldout.empty() || split.train.empty())
    throw DataError(Cat("SplitPairs: split of ", n_pairs,
                        " pairs left one side empty"));
  return split;
}

namespace {

// Stacks fixed-length crops of the batch utterances into (B, F, crop).
Tensor<float> BatchAudio(const Corpus &corpus, const std::vector<int> &batch,
                         int crop_frames, Rng &rng) {
  const int64_t b = static_cast<int64_t>(batch.size());
  const int64_t f = corpus.config.num_bins;
  auto out = Tensor<float>::Zeros({b, f, crop_frames});
  auto ov = out.MutableValues();
  for (int64_t i = 0; i < b; ++i) {
    auto crop = CropOrPad(corpus.pairs[batch[i]].utterance.features,
                          crop_frames, rng);
    std::copy(crop.Values().begin(), crop.Values().end(),
              ov.begin() + i * f * crop_frames);
  }
  return out;
}

Tensor<float> BatchImages(const Corpus &corpus, const std::vector<int> &batch,
                          const ImageEncoderConfig &cfg) {
  const int64_t b = static_cast<int64_t>(batch.size());
  if (cfg.presence_input) {
    auto out = Tensor<float>::Zeros({b, cfg.presence_dim});
    auto ov = out.MutableValues();
    for (int64_t i = 0; i < b; ++i) {
      auto one = ImageInputOf(corpus.pairs[batch[i]].image, cfg);
      std::copy(one.Values().begin(), one.Values().end(),
                ov.begin() + i * cfg.presence_dim);
    }
    return out;
  }
  const int64_t hw = static_cast<int64_t>(cfg.image_size) * cfg.image_size;
  auto out = Tensor<float>::Zeros({b, 3, cfg.image_size, cfg.image_size});
  auto ov = out.MutableValues();
  for (int64_t i = 0; i < b; ++i) {
    auto one = ImageInputOf(corpus.pairs[batch[i]].image, cfg);
    std::copy(one.Values().begin(), one.Values().end(),
              ov.begin() + i * 3 * hw);
  }
  return out;
}

std::string BatchIds(const Corpus &corpus, const std::vector<int> &batch) {
  std::string ids;
  for (size_t i = 0; i < batch.size(); ++i) {
    if (i) ids += ' ';
    ids += corpus.pairs[batch[i]].pair_id;
  }
  return ids;
}

}  // namespace

double TrainStep(GroundingModel<float> &model, const Corpus &corpus,
                 const std::vector<int> &batch, const TrainingConfig &cfg,
                 Rng &rng, SgdMomentum<float> &opt) {
  if (batch.size() < 2)
    throw DataError(Cat("TrainStep: batch must have >= 2 pairs, got ",
                        batch.size()));
  for (int idx : batch)
    if (idx < 0 || idx >= static_cast<int>(corpus.pairs.size()))
      throw DataError(Cat("TrainStep: pair index ", idx, " outside corpus"));
  const int64_t b = static_cast<int64_t>(batch.size());

  auto audio = BatchAudio(corpus, batch, cfg.crop_frames, rng);
  auto images = BatchImages(corpus, batch, model.Config().image);
  auto audio_emb = model.AudioForward(audio, BnMode::kTrain);
  auto image_emb = model.ImageForward(images, BnMode::kTrain);

  // Negative mining looks at raw similarity values only, outside the graph.
  std::vector<double> sim;
  {
    NoGradGuard ng;
    sim = SimilarityMatrixOf(audio_emb, image_emb);
  }
  std::vector<double> sim_t(sim.size());
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < b; ++j) sim_t[j * b + i] = sim[i * b + j];
  auto neg_image = SampleNegatives(sim, b, cfg.semi_hard_fraction, rng);
  auto neg_audio = SampleNegatives(sim_t, b, cfg.semi_hard_fraction, rng);

  auto loss = TripletMarginLoss(audio_emb, image_emb, neg_image, neg_audio,
                                static_cast<float>(cfg.margin));
  const double loss_value = static_cast<double>(loss.Item());
  if (!std::isfinite(loss_value))
    throw NumericError(Cat("TrainStep: non-finite loss on batch [",
                           BatchIds(corpus, batch), "], step aborted"));
  opt.ZeroGrad();
  Backward(loss);
  opt.Step();
  return loss_value;
}

std::string TrainResult::CurveCsv() const {
  std::ostringstream out;
  out << "step,loss\n";
  for (size_t i = 0; i < loss_curve.size(); ++i)
    out << (i + 1) << ',' << loss_curve[i] << '\n';
  out << "epoch,heldout_mean_r10\n";
  for (size_t e = 0; e < heldout_r10.size(); ++e)
    out << (e + 1) << ',' << heldout_r10[e] << '\n';
  return out.str();
}

TrainResult TrainLoop(const Corpus &corpus, const ModelConfig &model_cfg,
                      const TrainingConfig &cfg,
                      const std::string &checkpoint_path,
                      const std::vector<int> *train_override,
                      std::ostream *log) {
  cfg.Validate();
  model_cfg.Validate();
  if (corpus.pairs.empty()) throw DataError("TrainLoop: empty corpus");

  auto split = SplitPairs(static_cast<int>(corpus.pairs.size()),
                          cfg.holdout_fraction);
  const std::vector<int> &train =
      train_override ? *train_override : split.train;
  if (train.empty()) throw DataError("TrainLoop: empty training split");

  GroundingModel<float> model(model_cfg, cfg.seed);
  SgdMomentum<float> opt(model.Parameters(), static_cast<float>(cfg.lr),
                         static_cast<float>(cfg.momentum));

  TrainResult result;
  if (cfg.epochs == 0) {
    SaveCheckpoint(model, 0, checkpoint_path);
    return result;
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = train;
    Rng shuffle_rng(DeriveSeed(cfg.seed, "order", epoch));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[shuffle_rng.UniformInt(static_cast<int64_t>(i))]);

    Rng step_rng(DeriveSeed(cfg.seed, "epoch", epoch));
    const size_t n_batches = order.size() / cfg.batch_size;  // full batches
    if (n_batches == 0)
      throw DataError(Cat("TrainLoop: training split of ", order.size(),
                          " pairs cannot fill a batch of ", cfg.batch_size));
    for (size_t bi = 0; bi < n_batches; ++bi) {
      std::vector<int> batch(order.begin() + bi * cfg.batch_size,
                             order.begin() + (bi + 1) * cfg.batch_size);
      result.loss_curve.push_back(
          TrainStep(model, corpus, batch, cfg, step_rng, opt));
      ++result.steps;
    }

    auto report = EvaluateRetrieval(model, corpus, split.heldout);
    result.heldout_r10.push_back(report.mean_recall10);
    if (report.mean_recall10 > result.best_r10) {
      result.best_r10 = report.mean_recall10;
      result.best_epoch = epoch;
      SaveCheckpoint(model, result.steps, checkpoint_path);
    }
    if (log) {
      double mean_loss = 0;
      for (size_t i = result.loss_curve.size() - n_batches;
           i < result.loss_curve.size(); ++i)
        mean_loss += result.loss_curve[i];
      mean_loss /= static_cast<double>(n_batches);
      *log << "epoch " << (epoch + 1) << "/" << cfg.epochs << ": loss "
           << mean_loss << ", held-out mean R@10 " << report.mean_recall10
           << '\n';
    }
  }
  return result;
}

}  // namespace gdistill
