// tests/test_probe.cc

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

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "gdistill/distill.h"
#include "gdistill/probe.h"
#include "gdistill/rng.h"

using gdistill::ConditionFer;
using gdistill::Corpus;
using gdistill::CorpusConfig;
using gdistill::FeatureArchive;
using gdistill::FrameDataset;
using gdistill::InvarianceTable;
using gdistill::Pca2d;
using gdistill::ProbeConfig;
using gdistill::ProbeModel;
using gdistill::ProbeReport;
using gdistill::Rng;

namespace {

Corpus SmallCorpus(int n_pairs, uint64_t seed) {
  CorpusConfig cfg;
  cfg.n_pairs = n_pairs;
  cfg.vocab_size = 10;
  cfg.n_phones = 8;
  cfg.n_speakers = 4;
  cfg.seed = seed;
  return gdistill::GenerateCorpus(cfg);
}

// A dataset whose classes sit on well-separated one-hot directions, so any
// sane probe can drive its training error to zero.
FrameDataset SeparableToy(int64_t n, int64_t dim, int64_t classes,
                          uint64_t seed) {
  REQUIRE(classes <= dim);
  FrameDataset ds;
  ds.dim = dim;
  ds.n_classes = classes;
  Rng rng(seed);
  for (int64_t i = 0; i < n; ++i) {
    int32_t label = static_cast<int32_t>(i % classes);
    for (int64_t j = 0; j < dim; ++j) {
      float v = static_cast<float>(rng.Normal()) * 0.1f;
      if (j == label) v += 5.0f;
      ds.x.push_back(v);
    }
    ds.y.push_back(label);
    ds.condition.push_back("ABCD"[i % 4]);
    ds.speaker.push_back(static_cast<int32_t>(i % 6));
  }
  return ds;
}

// Frames carry no information at all: every row is the same constant vector.
FrameDataset ConstantToy(int64_t n, int64_t dim, int64_t classes) {
  FrameDataset ds;
  ds.dim = dim;
  ds.n_classes = classes;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < dim; ++j) ds.x.push_back(1.0f);
    ds.y.push_back(static_cast<int32_t>(i % classes));
    ds.condition.push_back("ABCD"[i % 4]);
    ds.speaker.push_back(static_cast<int32_t>(i % 6));
  }
  return ds;
}

ProbeConfig QuickConfig(uint64_t seed) {
  ProbeConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.lr = 0.5;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("frame dataset: assembled rows match the archive and corpus") {
  Corpus corpus = SmallCorpus(6, 71);
  FeatureArchive raw = gdistill::RawFeatureArchive(corpus);
  FrameDataset ds = gdistill::DatasetFromArchive(raw, corpus);

  int64_t total = 0;
  for (const auto &rec : raw.records) total += rec.num_frames;
  CHECK(ds.Size() == total);
  CHECK(ds.dim == corpus.config.num_bins);
  CHECK(ds.n_classes == corpus.config.n_phones);

  // Walk the pairs in order; the dataset must be their frame-level concat.
  int64_t row = 0;
  for (const auto &pair : corpus.pairs) {
    const auto &utt = pair.utterance;
    for (int64_t t = 0; t < utt.features.num_frames; ++t, ++row) {
      CHECK(ds.y[row] == utt.phone_labels[static_cast<size_t>(t)]);
      CHECK(ds.condition[row] == utt.condition);
      CHECK(ds.speaker[row] == utt.speaker_id);
      for (int64_t f = 0; f < ds.dim; ++f)
        CHECK(ds.Row(row)[f] == utt.features.At(t, f));
    }
  }
  CHECK(row == ds.Size());
}

TEST_CASE("frame dataset: malformed archives are rejected") {
  Corpus corpus = SmallCorpus(3, 72);
  FeatureArchive raw = gdistill::RawFeatureArchive(corpus);

  SUBCASE("record naming no corpus pair") {
    raw.records[1].id = "pair-999999";
    CHECK_THROWS_WITH_AS(gdistill::DatasetFromArchive(raw, corpus),
                         doctest::Contains("names no pair"),
                         gdistill::DataError);
  }
  SUBCASE("record without labels") {
    raw.records[0].has_labels = false;
    raw.records[0].labels.clear();
    CHECK_THROWS_WITH_AS(gdistill::DatasetFromArchive(raw, corpus),
                         doctest::Contains("no per-frame labels"),
                         gdistill::DataError);
  }
  SUBCASE("label outside the phone inventory") {
    raw.records[2].labels[0] = 200;
    CHECK_THROWS_WITH_AS(gdistill::DatasetFromArchive(raw, corpus),
                         doctest::Contains("phone classes"),
                         gdistill::DataError);
  }
  SUBCASE("record channels disagree with the header") {
    raw.records[0].channels += 1;
    CHECK_THROWS_AS(gdistill::DatasetFromArchive(raw, corpus),
                    gdistill::ShapeError);
  }
  SUBCASE("condition tag out of range") {
    raw.records[0].condition = 'E';
    CHECK_THROWS_WITH_AS(gdistill::DatasetFromArchive(raw, corpus),
                         doctest::Contains("outside A..D"),
                         gdistill::DataError);
  }
}

TEST_CASE("frame dataset: filters select exactly the matching rows") {
  FrameDataset ds = SeparableToy(40, 5, 3, 5);

  int64_t by_condition = 0;
  for (char c : {'A', 'B', 'C', 'D'}) {
    FrameDataset sub = gdistill::FilterCondition(ds, c);
    by_condition += sub.Size();
    for (int64_t i = 0; i < sub.Size(); ++i) CHECK(sub.condition[i] == c);
  }
  CHECK(by_condition == ds.Size());

  FrameDataset g1 = gdistill::FilterSpeakerGroup(ds, 1);
  FrameDataset g2 = gdistill::FilterSpeakerGroup(ds, 2);
  CHECK(g1.Size() + g2.Size() == ds.Size());
  for (int64_t i = 0; i < g1.Size(); ++i) CHECK(g1.speaker[i] % 2 == 0);
  for (int64_t i = 0; i < g2.Size(); ++i) CHECK(g2.speaker[i] % 2 == 1);

  // Filtered rows keep their feature vectors intact.
  FrameDataset a = gdistill::FilterCondition(ds, 'A');
  CHECK(a.Row(0)[0] == ds.Row(0)[0]);

  CHECK_THROWS_AS(gdistill::FilterSpeakerGroup(ds, 3), gdistill::ConfigError);
}

TEST_CASE("probe config: bad values rejected") {
  ProbeConfig cfg;
  SUBCASE("negative hidden") { cfg.hidden = -1; }
  SUBCASE("negative epochs") { cfg.epochs = -2; }
  SUBCASE("zero batch") { cfg.batch_size = 0; }
  SUBCASE("zero lr") { cfg.lr = 0.0; }
  CHECK_THROWS_AS(cfg.Validate(), gdistill::ConfigError);
}

TEST_CASE("frame probe: separable toy reaches zero training error") {
  FrameDataset ds = SeparableToy(120, 6, 4, 9);
  ProbeModel probe = gdistill::TrainFrameProbe(ds, QuickConfig(1));
  ConditionFer fer = gdistill::EvalFrameProbe(probe, ds);
  CHECK(fer.overall == 0.0);

  SUBCASE("a hidden layer solves it too") {
    ProbeConfig cfg = QuickConfig(1);
    cfg.hidden = 16;
    cfg.lr = 0.2;
    ProbeModel deep = gdistill::TrainFrameProbe(ds, cfg);
    CHECK(gdistill::EvalFrameProbe(deep, ds).overall == 0.0);
  }
}

TEST_CASE("frame probe: zero epochs predicts the majority class") {
  // Class 0 holds 60 of 100 frames, so the untrained probe, which starts at
  // the class priors, must be wrong on exactly the other 40.
  FrameDataset ds;
  ds.dim = 3;
  ds.n_classes = 4;
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 3; ++j)
      ds.x.push_back(static_cast<float>(rng.Normal()));
    ds.y.push_back(i < 60 ? 0 : (i < 90 ? 1 : 2));
    ds.condition.push_back('A');
    ds.speaker.push_back(0);
  }
  ProbeConfig cfg;
  cfg.epochs = 0;
  ProbeModel probe = gdistill::TrainFrameProbe(ds, cfg);
  for (int64_t i = 0; i < ds.Size(); ++i) CHECK(probe.Predict(ds.Row(i)) == 0);
  ConditionFer fer = gdistill::EvalFrameProbe(probe, ds);
  CHECK(fer.overall == doctest::Approx(0.40).epsilon(1e-12));
}

TEST_CASE("frame probe: deterministic given the seed") {
  FrameDataset ds = SeparableToy(80, 5, 3, 21);
  ProbeConfig cfg = QuickConfig(7);
  cfg.hidden = 8;
  ProbeModel a = gdistill::TrainFrameProbe(ds, cfg);
  ProbeModel b = gdistill::TrainFrameProbe(ds, cfg);
  CHECK(a.w1 == b.w1);
  CHECK(a.b1 == b.b1);
  CHECK(a.w2 == b.w2);
  CHECK(a.b2 == b.b2);

  cfg.seed = 8;
  ProbeModel c = gdistill::TrainFrameProbe(ds, cfg);
  CHECK(a.w1 != c.w1);
}

TEST_CASE("frame probe: degenerate inputs rejected") {
  FrameDataset empty;
  empty.dim = 4;
  empty.n_classes = 3;
  CHECK_THROWS_AS(gdistill::TrainFrameProbe(empty, ProbeConfig{}),
                  gdistill::DataError);

  FrameDataset bad = SeparableToy(10, 4, 2, 3);
  bad.y[4] = 9;
  CHECK_THROWS_WITH_AS(gdistill::TrainFrameProbe(bad, ProbeConfig{}),
                       doctest::Contains("outside [0, 2)"),
                       gdistill::DataError);
}

TEST_CASE("probe evaluation: matches a naive per-frame recount") {
  FrameDataset ds = SeparableToy(150, 6, 4, 31);
  ProbeConfig cfg = QuickConfig(3);
  cfg.epochs = 2;  // deliberately undertrained so errors remain
  ProbeModel probe = gdistill::TrainFrameProbe(ds, cfg);
  ConditionFer fer = gdistill::EvalFrameProbe(probe, ds);

  // Independent recount with none of the library's bookkeeping.
  int64_t miss[4] = {0, 0, 0, 0};
  int64_t count[4] = {0, 0, 0, 0};
  int64_t miss_all = 0;
  for (int64_t i = 0; i < ds.Size(); ++i) {
    int c = ds.condition[i] - 'A';
    count[c] += 1;
    if (probe.Predict(ds.Row(i)) != ds.y[i]) {
      miss[c] += 1;
      miss_all += 1;
    }
  }
  for (int c = 0; c < 4; ++c) {
    CHECK(fer.count[c] == count[c]);
    CHECK(fer.fer[c] ==
          static_cast<double>(miss[c]) / static_cast<double>(count[c]));
  }
  CHECK(fer.total == ds.Size());
  CHECK(fer.overall ==
        static_cast<double>(miss_all) / static_cast<double>(ds.Size()));

  SUBCASE("width mismatch is rejected") {
    FrameDataset wrong = SeparableToy(10, 7, 4, 31);
    CHECK_THROWS_AS(gdistill::EvalFrameProbe(probe, wrong),
                    gdistill::ShapeError);
  }
}

TEST_CASE("invariance gap: worked example and missing conditions") {
  ConditionFer fer;
  fer.fer = {0.20, 0.45, 0.50, 0.55};
  fer.count = {100, 100, 100, 100};
  CHECK(gdistill::InvarianceGap(fer) == doctest::Approx(0.30).epsilon(1e-12));

  fer.count[2] = 0;
  CHECK_THROWS_WITH_AS(gdistill::InvarianceGap(fer),
                       doctest::Contains("condition C"),
                       gdistill::DataError);
}

TEST_CASE("domain probe: featureless data scores at chance") {
  // 400 frames, four perfectly balanced conditions, all rows identical.
  FrameDataset train = ConstantToy(400, 5, 2);
  FrameDataset test = ConstantToy(200, 5, 2);
  double acc = gdistill::TrainDomainProbe(train, test, QuickConfig(2));
  CHECK(std::abs(acc - 0.25) <= 0.05);  // chance for four balanced conditions
}

TEST_CASE("domain probe: condition leakage is detected") {
  // Condition is written directly into the features; the probe must find it.
  FrameDataset ds;
  ds.dim = 4;
  ds.n_classes = 2;
  Rng rng(17);
  for (int i = 0; i < 400; ++i) {
    char cond = "ABCD"[i % 4];
    for (int j = 0; j < 4; ++j) {
      float v = static_cast<float>(rng.Normal()) * 0.05f;
      if (j == cond - 'A') v += 1.0f;
      ds.x.push_back(v);
    }
    ds.y.push_back(0);
    ds.condition.push_back(cond);
    ds.speaker.push_back(i % 6);
  }
  double acc = gdistill::TrainDomainProbe(ds, ds, QuickConfig(4));
  CHECK(acc > 0.95);
}

TEST_CASE("domain probe: degenerate condition sets rejected") {
  FrameDataset ds = SeparableToy(40, 4, 2, 13);
  FrameDataset only_a = gdistill::FilterCondition(ds, 'A');

  CHECK_THROWS_WITH_AS(gdistill::TrainDomainProbe(only_a, ds, ProbeConfig{}),
                       doctest::Contains("at least two conditions"),
                       gdistill::DataError);

  // Test rows with a condition the probe never saw cannot be scored.
  FrameDataset no_d = gdistill::FilterCondition(ds, 'A');
  FrameDataset b = gdistill::FilterCondition(ds, 'B');
  no_d.x.insert(no_d.x.end(), b.x.begin(), b.x.end());
  no_d.y.insert(no_d.y.end(), b.y.begin(), b.y.end());
  no_d.condition.insert(no_d.condition.end(), b.condition.begin(),
                        b.condition.end());
  no_d.speaker.insert(no_d.speaker.end(), b.speaker.begin(), b.speaker.end());
  CHECK_THROWS_WITH_AS(gdistill::TrainDomainProbe(no_d, ds, ProbeConfig{}),
                       doctest::Contains("never seen"),
                       gdistill::DataError);
}

TEST_CASE("domain probe: raw synthetic features leak the condition") {
  // Conditions B/C/D perturb the raw filterbanks additively, so a probe on
  // raw features should beat chance by a wide margin.
  CorpusConfig cfg;
  cfg.n_pairs = 80;
  cfg.vocab_size = 10;
  cfg.n_phones = 8;
  cfg.n_speakers = 4;
  cfg.condition_mix = {0.25, 0.25, 0.25, 0.25};
  cfg.seed = 91;
  Corpus corpus = gdistill::GenerateCorpus(cfg);
  FrameDataset ds = gdistill::DatasetFromArchive(
      gdistill::RawFeatureArchive(corpus), corpus);

  ProbeConfig pc = QuickConfig(6);
  pc.epochs = 10;
  double acc = gdistill::TrainDomainProbe(ds, ds, pc);
  CHECK(acc > 0.45);  // chance would be ~0.25
}

TEST_CASE("invariance table: sorted, flagged, validated") {
  auto row = [](const char *name, double a, double b, double c, double d,
                double dom) {
    ProbeReport r;
    r.feature_name = name;
    r.fer_a = a;
    r.fer_b = b;
    r.fer_c = c;
    r.fer_d = d;
    r.gap = (b + c + d) / 3.0 - a;
    r.domain_accuracy = dom;
    return r;
  };

  SUBCASE("rows are ordered by name and headline rows flagged") {
    std::vector<ProbeReport> rows = {
        row("raw", 0.10, 0.60, 0.60, 0.60, 0.90),
        row("L2", 0.20, 0.30, 0.30, 0.30, 0.40),
        row("L1", 0.15, 0.40, 0.42, 0.41, 0.60),
    };
    InvarianceTable table = gdistill::BuildInvarianceTable(rows);
    REQUIRE(table.rows.size() == 3);
    CHECK(table.rows[0].feature_name == "L1");
    CHECK(table.rows[1].feature_name == "L2");
    CHECK(table.rows[2].feature_name == "raw");
    CHECK(table.best_gap_row == 1);        // L2 gap 0.10
    CHECK(table.best_in_domain_row == 2);  // raw fer_a 0.10

    std::string text = table.TextTable();
    CHECK(text.find("smallest gap") != std::string::npos);
    CHECK(text.find("best in-domain") != std::string::npos);

    std::string csv = table.Csv();
    CHECK(csv.find("feature,fer_a") == 0);
    // Three data lines plus the header.
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("L2,") != std::string::npos);
  }

  SUBCASE("single row carries no comparison flags") {
    InvarianceTable table = gdistill::BuildInvarianceTable(
        {row("raw", 0.10, 0.20, 0.20, 0.20, 0.5)});
    CHECK(table.best_gap_row == -1);
    CHECK(table.best_in_domain_row == -1);
    CHECK(table.TextTable().find("smallest gap") == std::string::npos);
  }

  SUBCASE("inconsistent gap rejected") {
    ProbeReport bad = row("raw", 0.10, 0.20, 0.20, 0.20, 0.5);
    bad.gap += 0.01;
    CHECK_THROWS_WITH_AS(gdistill::BuildInvarianceTable({bad}),
                         doctest::Contains("stores gap"),
                         gdistill::DataError);
  }
  SUBCASE("error rate outside the unit interval rejected") {
    CHECK_THROWS_AS(
        gdistill::BuildInvarianceTable({row("raw", -0.1, 0.2, 0.2, 0.2, 0.5)}),
        gdistill::DataError);
  }
  SUBCASE("duplicate feature names rejected") {
    CHECK_THROWS_WITH_AS(
        gdistill::BuildInvarianceTable({row("raw", 0.1, 0.2, 0.2, 0.2, 0.5),
                                        row("raw", 0.2, 0.3, 0.3, 0.3, 0.5)}),
        doctest::Contains("duplicate"), gdistill::DataError);
  }
  SUBCASE("empty table rejected") {
    CHECK_THROWS_AS(gdistill::BuildInvarianceTable({}), gdistill::DataError);
  }
}

TEST_CASE("pca: recovers planar data up to rotation") {
  // Points live on a 2-D plane inside R^6; the projection must preserve all
  // pairwise distances (the plane is spanned by two orthonormal vectors).
  const int64_t n = 60, dim = 6;
  std::vector<double> u = {0.5, 0.5, 0.5, 0.5, 0.0, 0.0};
  std::vector<double> w = {0.5, -0.5, 0.5, -0.5, 0.0, 0.0};
  Rng rng(23);
  std::vector<float> data(n * dim);
  std::vector<double> ab(n * 2);
  for (int64_t i = 0; i < n; ++i) {
    double a = rng.Normal() * 3.0;
    double b = rng.Normal() * 1.0;
    ab[i * 2] = a;
    ab[i * 2 + 1] = b;
    for (int64_t j = 0; j < dim; ++j)
      data[i * dim + j] = static_cast<float>(a * u[j] + b * w[j] + 0.25);
  }

  Pca2d pca = gdistill::PcaProject2d(data, n, dim);

  // Components orthonormal within 1e-8.
  double n0 = 0, n1 = 0, dot = 0;
  for (int64_t j = 0; j < dim; ++j) {
    n0 += pca.components[0][j] * pca.components[0][j];
    n1 += pca.components[1][j] * pca.components[1][j];
    dot += pca.components[0][j] * pca.components[1][j];
  }
  CHECK(std::abs(n0 - 1.0) < 1e-8);
  CHECK(std::abs(n1 - 1.0) < 1e-8);
  CHECK(std::abs(dot) < 1e-8);

  CHECK(pca.explained[0] >= pca.explained[1]);
  CHECK(pca.explained[1] > 0.0);

  // Distance preservation, checked against the generating coordinates.
  for (int64_t i = 0; i < 10; ++i) {
    for (int64_t k = i + 1; k < 10; ++k) {
      double da = ab[i * 2] - ab[k * 2];
      double db = ab[i * 2 + 1] - ab[k * 2 + 1];
      double want = std::sqrt(da * da + db * db);
      double dx = pca.coords[i * 2] - pca.coords[k * 2];
      double dy = pca.coords[i * 2 + 1] - pca.coords[k * 2 + 1];
      double got = std::sqrt(dx * dx + dy * dy);
      CHECK(got == doctest::Approx(want).epsilon(1e-4));
    }
  }
}

TEST_CASE("pca: explained variances match a closed-form eigensolve") {
  // Two data-bearing columns embedded in four dims. The nonzero block of the
  // covariance is 2 x 2, so its eigenvalues have a closed form the power
  // iteration result must reproduce.
  const int64_t n = 200, dim = 4;
  Rng rng(29);
  std::vector<float> data(n * dim, 0.0f);
  for (int64_t i = 0; i < n; ++i) {
    data[i * dim + 1] = static_cast<float>(rng.Normal() * 2.0);
    data[i * dim + 3] = static_cast<float>(rng.Normal() * 0.5);
  }
  double ma = 0, mb = 0;
  for (int64_t i = 0; i < n; ++i) {
    ma += data[i * dim + 1];
    mb += data[i * dim + 3];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double saa = 0, sbb = 0, sab = 0;
  for (int64_t i = 0; i < n; ++i) {
    double da = data[i * dim + 1] - ma;
    double db = data[i * dim + 3] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  saa /= static_cast<double>(n - 1);
  sbb /= static_cast<double>(n - 1);
  sab /= static_cast<double>(n - 1);
  double tr = saa + sbb;
  double det = saa * sbb - sab * sab;
  double disc = std::sqrt(tr * tr - 4.0 * det);
  double want_hi = (tr + disc) / 2.0;
  double want_lo = (tr - disc) / 2.0;

  Pca2d pca = gdistill::PcaProject2d(data, n, dim);
  CHECK(pca.explained[0] == doctest::Approx(want_hi).epsilon(1e-9));
  CHECK(pca.explained[1] == doctest::Approx(want_lo).epsilon(1e-9));
}

TEST_CASE("pca: degenerate inputs rejected") {
  SUBCASE("too few rows") {
    std::vector<float> data(2 * 3, 1.0f);
    CHECK_THROWS_WITH_AS(gdistill::PcaProject2d(data, 2, 3),
                         doctest::Contains("more than 2 rows"),
                         gdistill::DataError);
  }
  SUBCASE("rank zero") {
    std::vector<float> data(5 * 3, 2.5f);
    CHECK_THROWS_WITH_AS(gdistill::PcaProject2d(data, 5, 3),
                         doctest::Contains("zero variance"),
                         gdistill::DataError);
  }
  SUBCASE("buffer size mismatch") {
    std::vector<float> data(5 * 3 - 1, 0.0f);
    CHECK_THROWS_AS(gdistill::PcaProject2d(data, 5, 3), gdistill::ShapeError);
  }
  SUBCASE("one-dimensional input") {
    std::vector<float> data(5, 0.0f);
    CHECK_THROWS_AS(gdistill::PcaProject2d(data, 5, 1), gdistill::DataError);
  }
}

TEST_CASE("frame sampling: bounded, deterministic, order preserving") {
  FrameDataset ds = SeparableToy(100, 4, 4, 41);
  for (int64_t i = 0; i < ds.Size(); ++i) ds.speaker[i] = static_cast<int32_t>(i);

  FrameDataset s1 = gdistill::SampleFrames(ds, 30, 5);
  FrameDataset s2 = gdistill::SampleFrames(ds, 30, 5);
  CHECK(s1.Size() == 30);
  CHECK(s1.speaker == s2.speaker);
  CHECK(s1.x == s2.x);

  // Selected rows keep their original relative order (speaker == row index).
  CHECK(std::is_sorted(s1.speaker.begin(), s1.speaker.end()));
  // Distinct rows: sampling is without replacement.
  std::set<int32_t> uniq(s1.speaker.begin(), s1.speaker.end());
  CHECK(uniq.size() == 30);

  FrameDataset s3 = gdistill::SampleFrames(ds, 19, 6);
  CHECK(s3.Size() == 19);
  FrameDataset all = gdistill::SampleFrames(ds, 1000, 7);
  CHECK(all.Size() == ds.Size());
  CHECK_THROWS_AS(gdistill::SampleFrames(ds, 0, 8), gdistill::ConfigError);
}

TEST_CASE("pca csv: one tagged line per frame") {
  Corpus corpus = SmallCorpus(4, 77);
  FrameDataset ds = gdistill::DatasetFromArchive(
      gdistill::RawFeatureArchive(corpus), corpus);
  FrameDataset sample = gdistill::SampleFrames(ds, 50, 9);
  Pca2d pca =
      gdistill::PcaProject2d(sample.x, sample.Size(), sample.dim);

  std::string csv = gdistill::PcaCsv(pca, sample, corpus.inventory);
  CHECK(csv.rfind("x,y,phone,manner,speaker,condition\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') ==
        static_cast<int64_t>(sample.Size()) + 1);

  // Every line carries a known phone name and a known manner class name.
  size_t second_line = csv.find('\n') + 1;
  std::string line = csv.substr(second_line, csv.find('\n', second_line) -
                                                 second_line);
  const gdistill::PhoneInfo &info =
      corpus.inventory.phones.phones[static_cast<size_t>(sample.y[0])];
  CHECK(line.find("," + info.name + ",") != std::string::npos);
  CHECK(line.find(gdistill::kMannerNames[info.manner]) != std::string::npos);

  SUBCASE("size mismatch rejected") {
    FrameDataset wrong = gdistill::SampleFrames(ds, 49, 9);
    CHECK_THROWS_AS(gdistill::PcaCsv(pca, wrong, corpus.inventory),
                    gdistill::ShapeError);
  }
  SUBCASE("phone class outside the inventory rejected") {
    FrameDataset bad = sample;
    bad.y[0] = 1000;
    CHECK_THROWS_AS(gdistill::PcaCsv(pca, bad, corpus.inventory),
                    gdistill::DataError);
  }
}
