// tests/test_training.cc

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

#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "gdistill/checkpoint.h"
#include "gdistill/gradcheck.h"
#include "gdistill/training.h"

using gdistill::Corpus;
using gdistill::CorpusConfig;
using gdistill::GroundingModel;
using gdistill::ModelConfig;
using gdistill::Rng;
using gdistill::SampleNegatives;
using gdistill::Tensor;
using gdistill::TrainingConfig;
using gdistill::TripletMarginLoss;

namespace {

ModelConfig TinyModel() {
  ModelConfig cfg;
  cfg.resdavenet.stem_channels = 8;
  cfg.resdavenet.stack_channels = {8, 8, 12, 16};
  cfg.image.conv_channels = {4, 8};
  cfg.image.embed_dim = 16;
  return cfg;
}

Corpus SmallCorpus(int n_pairs, uint64_t seed) {
  CorpusConfig cfg;
  cfg.n_pairs = n_pairs;
  cfg.vocab_size = 10;
  cfg.n_phones = 8;
  cfg.n_speakers = 3;
  cfg.seed = seed;
  return gdistill::GenerateCorpus(cfg);
}

Tensor<double> EmbOf(const std::vector<std::vector<double>> &rows) {
  const int64_t n = static_cast<int64_t>(rows.size());
  const int64_t d = static_cast<int64_t>(rows[0].size());
  auto t = Tensor<double>::Zeros({n, d}, /*requires_grad=*/true);
  auto v = t.MutableValues();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) v[i * d + j] = rows[i][j];
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Loss

TEST_CASE("triplet loss: satisfied margins give zero") {
  auto audio = EmbOf({{1, 0}, {0, 1}});
  auto image = EmbOf({{2.0, 0.2}, {0.5, 2.0}});
  // Dots: a0.v0=2, a0.v1=0.5, a1.v0=0.2, a1.v1=2.
  auto loss = TripletMarginLoss<double>(audio, image, {1, 0}, {1, 0}, 1.0);
  CHECK(loss.Item() == doctest::Approx(0.0));
}

TEST_CASE("triplet loss: hinge arithmetic") {
  auto audio = EmbOf({{1, 0}, {0, 1}});
  auto image = EmbOf({{0.5, -1.0}, {0.4, 0.5}});
  // Dots: a0.v0=0.5, a0.v1=0.4, a1.v0=-1.0, a1.v1=0.5.
  // Row 0: max(0, 1-0.5+0.4)=0.9 (image imposter), max(0, 1-0.5-1.0)=0
  // (audio imposter). Row 1 mirrors: 0 and 0.9. Mean over B=2 is 0.9.
  auto loss = TripletMarginLoss<double>(audio, image, {1, 0}, {1, 0}, 1.0);
  CHECK(loss.Item() == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("triplet loss: imposter equal to positive costs the margin") {
  auto audio = EmbOf({{0.3, 0.7}, {0.3, 0.7}});
  auto image = EmbOf({{1.1, -0.2}, {1.1, -0.2}});
  // Identical rows: every similarity equals the positive, each hinge is the
  // margin, so the mean is 2 * margin.
  for (double margin : {0.5, 1.0, 2.0}) {
    auto loss =
        TripletMarginLoss<double>(audio, image, {1, 0}, {1, 0}, margin);
    CHECK(loss.Item() == doctest::Approx(2 * margin).epsilon(1e-12));
  }
}

TEST_CASE("triplet loss: rejects bad margins and imposter indices") {
  auto audio = EmbOf({{1, 0}, {0, 1}});
  auto image = EmbOf({{1, 0}, {0, 1}});
  CHECK_THROWS_AS(
      TripletMarginLoss<double>(audio, image, {1, 0}, {1, 0}, 0.0),
      gdistill::ConfigError);
  CHECK_THROWS_AS(
      TripletMarginLoss<double>(audio, image, {0, 0}, {1, 0}, 1.0),
      gdistill::DataError);  // own index as imposter
  CHECK_THROWS_AS(
      TripletMarginLoss<double>(audio, image, {2, 0}, {1, 0}, 1.0),
      gdistill::DataError);  // out of range
  CHECK_THROWS_AS(
      TripletMarginLoss<double>(audio, image, {1}, {1, 0}, 1.0),
      gdistill::ShapeError);
}

TEST_CASE("triplet loss gradient agrees with finite differences") {
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Rng rng(seed);
    const int64_t b = 4, d = 5;
    auto audio = Tensor<double>::Zeros({b, d}, true);
    auto image = Tensor<double>::Zeros({b, d}, true);
    for (auto &v : audio.MutableValues()) v = 0.5 * rng.Normal();
    for (auto &v : image.MutableValues()) v = 0.5 * rng.Normal();
    std::vector<int32_t> neg_img = {1, 2, 3, 0};
    std::vector<int32_t> neg_aud = {3, 0, 1, 2};
    auto fn = [&]() {
      return TripletMarginLoss<double>(audio, image, neg_img, neg_aud, 1.0);
    };
    auto res = gdistill::FiniteDiffCheck(fn, {audio, image});
    INFO(res.Describe());
    CHECK(res.ok);
    CHECK(res.max_rel_err < 1e-6);
  }
}

// ---------------------------------------------------------------------------
// Negative sampling

TEST_CASE("semi-hard picks the closest violator below the positive") {
  // Row 0 has candidates 0.6 and 0.9 against a positive of 0.8; only 0.6
  // qualifies. Rows 1 and 2 have two violators each and must keep the
  // larger one.
  std::vector<double> s = {0.8, 0.6, 0.9,   //
                           0.1, 0.5, 0.4,   //
                           0.2, -1.0, 0.3};
  Rng rng(1);
  auto picks = SampleNegatives(s, 3, 1.0, rng);
  CHECK(picks[0] == 1);
  CHECK(picks[1] == 2);  // 0.4 beats 0.1 among values below 0.5
  CHECK(picks[2] == 0);  // 0.2 beats -1.0 among values below 0.3
}

TEST_CASE("semi-hard tie-break and fallback") {
  // Ties: two equal violators keep the lower index.
  std::vector<double> tie = {0.9, 0.5, 0.5,  //
                             0.0, 0.9, 0.2,  //
                             0.2, 0.0, 0.9};
  Rng rng(2);
  auto picks = SampleNegatives(tie, 3, 1.0, rng);
  CHECK(picks[0] == 1);

  // All candidates at or above the positive: uniform fallback, never i.
  std::vector<double> wall = {0.1, 0.8, 0.9,  //
                              0.0, 0.0, 0.7,  //
                              0.9, 0.8, 0.1};
  for (uint64_t seed = 0; seed < 30; ++seed) {
    Rng r(seed);
    auto p = SampleNegatives(wall, 3, 1.0, r);
    CHECK(p[0] != 0);
    CHECK(p[0] >= 0);
    CHECK(p[0] < 3);
    CHECK(p[1] != 1);
  }
}

TEST_CASE("semi-hard matches a brute-force oracle on random matrices") {
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t b = 8;
    std::vector<double> s(b * b);
    Rng data_rng(5000 + trial);
    for (auto &v : s) v = data_rng.Normal();
    Rng pick_rng(9000 + trial);
    auto got = SampleNegatives(s, b, 1.0, pick_rng);
    // Oracle: independent exhaustive scan. The rho=1 road never consumes
    // fallback draws on rows that have a violator, and random reals make
    // violators almost sure, so this stays aligned with the sampler's rng.
    for (int64_t i = 0; i < b; ++i) {
      int64_t want = -1;
      double best = -HUGE_VAL;
      for (int64_t j = 0; j < b; ++j) {
        if (j == i) continue;
        if (s[i * b + j] < s[i * b + i] && s[i * b + j] > best) {
          best = s[i * b + j];
          want = j;
        }
      }
      if (want >= 0) CHECK(got[i] == want);
    }
  }
}

TEST_CASE("rho=0 never inspects beyond the diagonal") {
  const int64_t b = 6;
  std::vector<double> a(b * b), c(b * b);
  Rng fill(11);
  for (int64_t i = 0; i < b * b; ++i) {
    a[i] = fill.Normal();
    c[i] = fill.Normal() + 2.0;
  }
  for (int64_t i = 0; i < b; ++i) c[i * b + i] = a[i * b + i];
  // Same diagonal, unrelated off-diagonals: identical seeds must give
  // identical picks if and only if the off-diagonals are never read.
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng r1(seed), r2(seed);
    CHECK(SampleNegatives(a, b, 0.0, r1) == SampleNegatives(c, b, 0.0, r2));
  }
}

TEST_CASE("semi-hard selection is invariant to per-row constant shifts") {
  const int64_t b = 7;
  std::vector<double> s(b * b);
  Rng rng(13);
  for (auto &v : s) v = rng.Normal();
  std::vector<double> shifted(s);
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < b; ++j) shifted[i * b + j] += 10.0 * (i + 1);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng r1(seed), r2(seed);
    CHECK(SampleNegatives(s, b, 1.0, r1) ==
          SampleNegatives(shifted, b, 1.0, r2));
  }
}

TEST_CASE("negative sampling rejects degenerate input") {
  std::vector<double> s = {1.0};
  Rng rng(1);
  CHECK_THROWS_AS(SampleNegatives(s, 1, 0.5, rng), gdistill::ShapeError);
  std::vector<double> wrong(5, 0.0);
  CHECK_THROWS_AS(SampleNegatives(wrong, 2, 0.5, rng), gdistill::ShapeError);
  std::vector<double> ok(4, 0.0);
  CHECK_THROWS_AS(SampleNegatives(ok, 2, 1.5, rng), gdistill::ConfigError);
}

// ---------------------------------------------------------------------------
// Crops and splits

TEST_CASE("crop-or-pad: windows, padding, and rng draw accounting") {
  gdistill::FeatureMatrix m;
  m.num_frames = 10;
  m.num_bins = 3;
  m.values.resize(30);
  for (int t = 0; t < 10; ++t)
    for (int f = 0; f < 3; ++f)
      m.values[t * 3 + f] = static_cast<float>(10 * t + f);

  // Long utterance: a contiguous window survives.
  Rng rng(5);
  auto crop = gdistill::CropOrPad(m, 4, rng);
  REQUIRE(crop.Shape() == std::vector<int64_t>({3, 4}));
  const float first = crop.Values()[0];
  const int start = static_cast<int>(first) / 10;
  for (int f = 0; f < 3; ++f)
    for (int t = 0; t < 4; ++t)
      CHECK(crop.Values()[f * 4 + t] ==
            doctest::Approx(10.0f * (start + t) + f));

  // Short utterance: copied verbatim then padded with the log floor.
  Rng rng2(6);
  auto padded = gdistill::CropOrPad(m, 14, rng2);
  for (int f = 0; f < 3; ++f) {
    for (int t = 0; t < 10; ++t)
      CHECK(padded.Values()[f * 14 + t] == doctest::Approx(10.0f * t + f));
    for (int t = 10; t < 14; ++t)
      CHECK(padded.Values()[f * 14 + t] == gdistill::kPadLogValue);
  }

  // Exactly one rng draw is consumed either way.
  Rng a(9), b(9);
  gdistill::CropOrPad(m, 14, a);
  b.UniformInt(1);
  CHECK(a.NextU64() == b.NextU64());
  Rng c(9), d(9);
  gdistill::CropOrPad(m, 4, c);
  d.UniformInt(7);
  CHECK(c.NextU64() == d.NextU64());
}

TEST_CASE("split: every tenth pair held out, sides partition the corpus") {
  auto split = gdistill::SplitPairs(100, 0.1);
  CHECK(split.heldout.size() == 10);
  CHECK(split.train.size() == 90);
  for (size_t i = 0; i < split.heldout.size(); ++i)
    CHECK(split.heldout[i] == static_cast<int>(10 * i + 9));
  std::vector<bool> seen(100, false);
  for (int i : split.train) seen[i] = true;
  for (int i : split.heldout) {
    CHECK_FALSE(seen[i]);
    seen[i] = true;
  }
  CHECK(std::count(seen.begin(), seen.end(), false) == 0);

  CHECK_THROWS_AS(gdistill::SplitPairs(0, 0.1), gdistill::DataError);
  CHECK_THROWS_AS(gdistill::SplitPairs(100, 0.0), gdistill::ConfigError);
  CHECK_THROWS_AS(gdistill::SplitPairs(1, 0.5), gdistill::DataError);
}

// ---------------------------------------------------------------------------
// Steps and loops

TEST_CASE("train step: duplicated pair gives exactly twice the margin") {
  auto corpus = SmallCorpus(4, 21);
  GroundingModel<float> model(TinyModel(), 3);
  gdistill::SgdMomentum<float> opt(model.Parameters(), 0.01f, 0.9f);
  TrainingConfig cfg;
  cfg.batch_size = 4;
  // Cover the whole utterance so every copy of the pair crops to the same
  // window. With shorter crops each copy would draw its own start frame.
  cfg.crop_frames =
      static_cast<int>(corpus.pairs[2].utterance.features.num_frames) + 4;
  Rng rng(1);
  // Same pair everywhere: all similarities coincide, each hinge equals the
  // margin, loss = 2 * margin regardless of the model.
  const double loss =
      gdistill::TrainStep(model, corpus, {2, 2, 2, 2}, cfg, rng, opt);
  CHECK(loss == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("train step: bit-exact reproducibility") {
  auto corpus = SmallCorpus(12, 22);
  TrainingConfig cfg;
  cfg.crop_frames = 16;
  std::vector<int> batch = {0, 3, 5, 7, 9, 11};
  double l1, l2;
  float p1, p2;
  {
    GroundingModel<float> model(TinyModel(), 3);
    gdistill::SgdMomentum<float> opt(model.Parameters(), 0.01f, 0.9f);
    Rng rng(4);
    l1 = gdistill::TrainStep(model, corpus, batch, cfg, rng, opt);
    p1 = model.Parameters()[0].Values()[0];
  }
  {
    GroundingModel<float> model(TinyModel(), 3);
    gdistill::SgdMomentum<float> opt(model.Parameters(), 0.01f, 0.9f);
    Rng rng(4);
    l2 = gdistill::TrainStep(model, corpus, batch, cfg, rng, opt);
    p2 = model.Parameters()[0].Values()[0];
  }
  CHECK(l1 == l2);
  CHECK(p1 == p2);
}

TEST_CASE("train step: non-finite loss aborts naming the batch") {
  auto corpus = SmallCorpus(4, 23);
  GroundingModel<float> model(TinyModel(), 3);
  const float witness = model.Parameters()[5].Values()[0];
  gdistill::SgdMomentum<float> opt(model.Parameters(), 0.01f, 0.9f);
  TrainingConfig cfg;
  cfg.crop_frames = 16;
  // A legal but absurd margin: six hinge terms of ~1e38 overflow the
  // 32-bit accumulator, so the loss itself comes out infinite. This is
  // the one reliable way to a non-finite loss; a NaN planted in a
  // parameter never gets this far because the hinge maps NaN to zero.
  cfg.margin = 1e38;
  Rng rng(1);
  CHECK_THROWS_WITH_AS(
      gdistill::TrainStep(model, corpus, {0, 1, 2}, cfg, rng, opt),
      doctest::Contains("pair-"), gdistill::NumericError);
  CHECK(model.Parameters()[5].Values()[0] == witness);
}

TEST_CASE("train step: non-finite gradient aborts without an update") {
  auto corpus = SmallCorpus(4, 23);
  GroundingModel<float> model(TinyModel(), 3);
  // A NaN in the image projection bias reaches the embeddings but not the
  // loss value (the hinge clamps it to zero); it resurfaces in the audio
  // gradients as 0 * NaN, and the optimizer must refuse the step.
  model.Parameters().back().MutableValues()[0] =
      std::numeric_limits<float>::quiet_NaN();
  const float witness = model.Parameters()[5].Values()[0];
  gdistill::SgdMomentum<float> opt(model.Parameters(), 0.01f, 0.9f);
  TrainingConfig cfg;
  cfg.crop_frames = 16;
  Rng rng(1);
  CHECK_THROWS_AS(gdistill::TrainStep(model, corpus, {0, 1, 2}, cfg, rng, opt),
                  gdistill::NumericError);
  CHECK(model.Parameters()[5].Values()[0] == witness);
}

TEST_CASE("train step: 50 steps on 64 pairs descend") {
  auto corpus = SmallCorpus(64, 24);
  GroundingModel<float> model(TinyModel(), 7);
  gdistill::SgdMomentum<float> opt(model.Parameters(), 0.02f, 0.9f);
  TrainingConfig cfg;
  cfg.batch_size = 8;
  cfg.crop_frames = 24;
  cfg.lr = 0.02;
  Rng rng(8);
  std::vector<int> order(64);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;
  for (int step = 0; step < 50; ++step) {
    std::vector<int> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(order[(step * 8 + i) % 64]);
    losses.push_back(gdistill::TrainStep(model, corpus, batch, cfg, rng, opt));
  }
  CHECK(losses[49] < losses[0]);
}

TEST_CASE("train loop: bookkeeping, checkpointing, determinism") {
  auto corpus = SmallCorpus(120, 25);
  TrainingConfig cfg;
  cfg.batch_size = 18;
  cfg.crop_frames = 24;
  cfg.epochs = 2;
  cfg.lr = 0.02;
  cfg.seed = 5;
  const auto path =
      (std::filesystem::temp_directory_path() / "gdistill_loop_ckpt.bin")
          .string();

  auto r1 = gdistill::TrainLoop(corpus, TinyModel(), cfg, path);
  // 120 pairs -> 12 held out -> 108 trainable -> 6 full batches per epoch.
  CHECK(r1.steps == 12);
  CHECK(r1.loss_curve.size() == 12);
  CHECK(r1.heldout_r10.size() == 2);
  CHECK(r1.best_epoch >= 0);
  CHECK(r1.best_r10 >= 0.0);
  auto model = gdistill::LoadCheckpoint(path, "resdavenet");
  CHECK(model.EmbedDim() == 16);
  const std::string csv = r1.CurveCsv();
  CHECK(csv.find("step,loss") == 0);

  auto r2 = gdistill::TrainLoop(corpus, TinyModel(), cfg, path);
  REQUIRE(r2.loss_curve.size() == r1.loss_curve.size());
  for (size_t i = 0; i < r1.loss_curve.size(); ++i)
    CHECK(r1.loss_curve[i] == r2.loss_curve[i]);
  for (size_t e = 0; e < r1.heldout_r10.size(); ++e)
    CHECK(r1.heldout_r10[e] == r2.heldout_r10[e]);
  std::filesystem::remove(path);
}

TEST_CASE("train loop: epochs=0 saves the initial model, empty curves") {
  auto corpus = SmallCorpus(40, 26);
  TrainingConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 8;
  const auto path =
      (std::filesystem::temp_directory_path() / "gdistill_loop0_ckpt.bin")
          .string();
  auto r = gdistill::TrainLoop(corpus, TinyModel(), cfg, path);
  CHECK(r.steps == 0);
  CHECK(r.loss_curve.empty());
  CHECK(r.heldout_r10.empty());
  uint64_t step = 99;
  auto model = gdistill::LoadCheckpoint(path, "", &step);
  CHECK(step == 0);
  // The stored model is the untouched seed-0 initialization.
  GroundingModel<float> fresh(TinyModel(), cfg.seed);
  CHECK(model.Parameters()[0].Values()[0] ==
        fresh.Parameters()[0].Values()[0]);
  std::filesystem::remove(path);
}

TEST_CASE("train loop: rejects impossible configurations") {
  auto corpus = SmallCorpus(20, 27);
  TrainingConfig cfg;
  cfg.batch_size = 64;  // larger than the training split
  cfg.epochs = 1;
  const auto path =
      (std::filesystem::temp_directory_path() / "gdistill_loop_bad.bin")
          .string();
  CHECK_THROWS_AS(gdistill::TrainLoop(corpus, TinyModel(), cfg, path),
                  gdistill::DataError);
  Corpus empty;
  empty.config = corpus.config;
  CHECK_THROWS_AS(gdistill::TrainLoop(empty, TinyModel(), cfg, path),
                  gdistill::DataError);
  TrainingConfig bad;
  bad.margin = 0;
  CHECK_THROWS_AS(gdistill::TrainLoop(corpus, TinyModel(), bad, path),
                  gdistill::ConfigError);
}

// ---------------------------------------------------------------------------
// Whole-model gradient check at reduced scale

TEST_CASE("tiny end-to-end triplet loss agrees with finite differences") {
  ModelConfig mcfg;
  mcfg.resdavenet.input_mels = 6;
  mcfg.resdavenet.stem_channels = 4;
  mcfg.resdavenet.stack_channels = {4, 4, 6, 8};
  mcfg.image.conv_channels = {3};
  mcfg.image.embed_dim = 8;
  mcfg.image.image_size = 8;
  GroundingModel<double> model(mcfg, 17);

  const int64_t b = 3;
  auto audio = Tensor<double>::Zeros({b, 6, 10}, true);
  auto images = Tensor<double>::Zeros({b, 3, 8, 8}, true);
  Rng rng(18);
  for (auto &v : audio.MutableValues()) v = rng.Normal();
  for (auto &v : images.MutableValues()) v = 0.5 * rng.Uniform();
  std::vector<int32_t> neg_img = {1, 2, 0};
  std::vector<int32_t> neg_aud = {2, 0, 1};

  auto fn = [&]() {
    auto ae = model.AudioForward(audio, gdistill::BnMode::kTrain);
    auto ie = model.ImageForward(images, gdistill::BnMode::kTrain);
    return TripletMarginLoss<double>(ae, ie, neg_img, neg_aud, 1.0);
  };
  std::vector<Tensor<double>> inputs = model.Parameters();
  inputs.push_back(audio);
  inputs.push_back(images);
  auto res = gdistill::FiniteDiffCheck(fn, inputs, /*eps=*/1e-4,
                                       /*tol=*/1e-4,
                                       /*max_coords_per_input=*/6,
                                       /*sample_seed=*/99);
  INFO(res.Describe());
  CHECK(res.ok);
}
