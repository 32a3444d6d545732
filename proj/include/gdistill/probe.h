// include/gdistill/probe.h

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

#ifndef GDISTILL_PROBE_H_
#define GDISTILL_PROBE_H_

// Frame-level diagnostic probes over feature archives. A small softmax
// classifier is trained to predict the phone label of every frame; comparing
// its error rate on in-domain (condition A) versus shifted (B/C/D) speech
// measures how much nuisance variation the features carry. A second probe
// trained to predict the condition tag itself measures leakage directly:
// accuracy near chance means the conditions are indistinguishable in feature
// space. A 2-D PCA projection of sampled frames supports visual inspection.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gdistill/archive.h"
#include "gdistill/corpus.h"

namespace gdistill {

// Per-frame rows assembled from one feature archive, joined with the corpus
// metadata the archive does not carry (speaker ids). Row t of `x` is a
// `dim`-sized feature vector; `y`, `condition`, and `speaker` align with it.
struct FrameDataset {
  int64_t dim = 0;
  int64_t n_classes = 0;            // label domain size, labels in [0, n)
  std::vector<float> x;             // Size() x dim, row-major
  std::vector<int32_t> y;
  std::vector<char> condition;      // 'A'..'D'
  std::vector<int32_t> speaker;

  int64_t Size() const { return static_cast<int64_t>(y.size()); }
  const float *Row(int64_t i) const { return x.data() + i * dim; }
};

// Flattens an archive into per-frame rows. Every record must name a corpus
// pair (that is where the speaker id comes from) and carry one label per
// frame; records that do not are rejected. Labels become phone classes, so
// n_classes is the corpus phone count.
FrameDataset DatasetFromArchive(const FeatureArchive &archive,
                                const Corpus &corpus);

// Row filters; each returns a copy with only the selected rows.
FrameDataset FilterCondition(const FrameDataset &ds, char condition);
FrameDataset FilterSpeakerGroup(const FrameDataset &ds, int group);

// Speakers are split into two disjoint groups by id parity. Probes train on
// group 1 and are evaluated on group 2, so a probe can never memorize the
// exact voices it is tested on.
inline int SpeakerGroup(int speaker_id) { return speaker_id % 2 == 0 ? 1 : 2; }

struct ProbeConfig {
  int hidden = 0;        // 0 = linear probe; otherwise one ReLU layer
  int epochs = 10;
  int batch_size = 256;
  double lr = 0.1;
  uint64_t seed = 0;

  void Validate() const;
};

// Softmax classifier over single frames, trained with plain minibatch SGD.
// Weights are doubles so repeated runs with one thread are bit-identical.
struct ProbeModel {
  int64_t dim = 0;
  int64_t n_classes = 0;
  int64_t hidden = 0;
  // Linear: w1 is (n_classes x dim), b1 is n_classes, w2/b2 empty.
  // Hidden: w1 (hidden x dim), b1 hidden, w2 (n_classes x hidden), b2.
  std::vector<double> w1, b1, w2, b2;

  std::vector<double> Logits(const float *frame) const;
  int32_t Predict(const float *frame) const;  // argmax, ties to lowest index
};

// Trains a phone classifier on the given frames. Deterministic for a fixed
// seed: initialization and the per-epoch shuffle both derive from it.
// Rejects empty datasets and labels outside [0, n_classes).
ProbeModel TrainFrameProbe(const FrameDataset &train, const ProbeConfig &cfg);

// Frame error rate split by condition tag. fer[k] is for condition 'A' + k
// and is NaN when that condition has no frames (count[k] == 0).
struct ConditionFer {
  std::array<double, 4> fer{};
  std::array<int64_t, 4> count{};
  double overall = 0.0;
  int64_t total = 0;
};

// Counts misclassified frames per condition. The probe's input width must
// match the dataset's.
ConditionFer EvalFrameProbe(const ProbeModel &probe, const FrameDataset &test);

// Invariance gap: mean error on shifted conditions minus error at home.
// All four conditions must be populated.
double InvarianceGap(const ConditionFer &fer);

// Trains a classifier to predict the condition tag of each frame and returns
// its accuracy on `test`. Both datasets must contain at least two distinct
// conditions; with only one the task is vacuous and is rejected. Accuracy
// near chance (1 / #conditions) means the features hide the condition.
double TrainDomainProbe(const FrameDataset &train, const FrameDataset &test,
                        const ProbeConfig &cfg);

// One comparison row: how one feature type fares under the probes.
struct ProbeReport {
  std::string feature_name;
  double fer_a = 0.0, fer_b = 0.0, fer_c = 0.0, fer_d = 0.0;
  double gap = 0.0;              // mean(fer_b, fer_c, fer_d) - fer_a
  double domain_accuracy = 0.0;  // condition-probe accuracy
};

// Rows sorted by feature name plus the two headline row indices. Flags are
// -1 for a single-row table, where "best" would be meaningless.
struct InvarianceTable {
  std::vector<ProbeReport> rows;
  int best_gap_row = -1;       // smallest gap
  int best_in_domain_row = -1; // smallest fer_a

  std::string Csv() const;
  std::string TextTable() const;
};

// Validates each row (FERs in [0,1], gap consistent with the stored FERs),
// sorts by feature name, and marks the headline rows. Empty input rejected.
InvarianceTable BuildInvarianceTable(std::vector<ProbeReport> rows);

// Top-2 principal components of a frame sample.
struct Pca2d {
  std::array<std::vector<double>, 2> components;  // each `dim` long, unit norm
  std::array<double, 2> explained{};              // variances, descending
  std::vector<double> coords;                     // n x 2, row-major
};

// Projects n rows of width dim onto their top-2 covariance eigenvectors
// (power iteration with deflation). Needs n > 2 and at least one direction
// of nonzero variance; all-constant data is rejected.
Pca2d PcaProject2d(const std::vector<float> &data, int64_t n, int64_t dim);

// Uniform sample of `max_rows` rows without replacement (identity when the
// dataset is already small enough). Keeps PCA input sizes bounded.
FrameDataset SampleFrames(const FrameDataset &ds, int64_t max_rows,
                          uint64_t seed);

// Projection coordinates with the tags a plotting tool needs, one line per
// frame: x, y, phone class, manner class, speaker, condition.
std::string PcaCsv(const Pca2d &pca, const FrameDataset &ds,
                   const SynthInventory &inventory);

}  // namespace gdistill

#endif  // GDISTILL_PROBE_H_
