// src/probe.cc

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

#include "gdistill/probe.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "gdistill/common.h"
#include "gdistill/rng.h"

namespace gdistill {

FrameDataset DatasetFromArchive(const FeatureArchive &archive,
                                const Corpus &corpus) {
  std::unordered_map<std::string, const PairedExample *> by_id;
  for (const auto &pair : corpus.pairs) by_id[pair.pair_id] = &pair;

  FrameDataset ds;
  ds.dim = archive.header.channels;
  ds.n_classes = corpus.config.n_phones;

  int64_t total = 0;
  for (const auto &rec : archive.records) total += rec.num_frames;
  ds.x.reserve(total * ds.dim);
  ds.y.reserve(total);
  ds.condition.reserve(total);
  ds.speaker.reserve(total);

  for (const auto &rec : archive.records) {
    auto it = by_id.find(rec.id);
    if (it == by_id.end())
      throw DataError(Cat("archive record '", rec.id,
                          "' names no pair in the corpus"));
    if (!rec.has_labels || rec.labels.size() != static_cast<size_t>(rec.num_frames))
      throw DataError(Cat("record '", rec.id, "' has no per-frame labels (",
                          rec.has_labels ? rec.labels.size() : 0, " labels for ",
                          rec.num_frames, " frames); probes need them"));
    if (rec.channels != ds.dim)
      throw ShapeError(Cat("record '", rec.id, "' has ", rec.channels,
                           " channels but the archive header says ", ds.dim));
    if (rec.condition < 'A' || rec.condition > 'D')
      throw DataError(Cat("record '", rec.id, "' has condition tag '",
                          rec.condition, "', outside A..D"));
    for (uint32_t lab : rec.labels) {
      if (lab >= static_cast<uint32_t>(ds.n_classes))
        throw DataError(Cat("record '", rec.id, "' has label ", lab,
                            " but the corpus defines ", ds.n_classes,
                            " phone classes"));
    }
    int speaker = it->second->utterance.speaker_id;
    ds.x.insert(ds.x.end(), rec.frames.begin(), rec.frames.end());
    for (int64_t t = 0; t < rec.num_frames; ++t) {
      ds.y.push_back(static_cast<int32_t>(rec.labels[t]));
      ds.condition.push_back(rec.condition);
      ds.speaker.push_back(speaker);
    }
  }
  return ds;
}

namespace {

// Copies the rows of `ds` whose index passes `keep`.
template <class Pred>
FrameDataset FilterRows(const FrameDataset &ds, Pred keep) {
  FrameDataset out;
  out.dim = ds.dim;
  out.n_classes = ds.n_classes;
  for (int64_t i = 0; i < ds.Size(); ++i) {
    if (!keep(i)) continue;
    const float *row = ds.Row(i);
    out.x.insert(out.x.end(), row, row + ds.dim);
    out.y.push_back(ds.y[i]);
    out.condition.push_back(ds.condition[i]);
    out.speaker.push_back(ds.speaker[i]);
  }
  return out;
}

}  // namespace

FrameDataset FilterCondition(const FrameDataset &ds, char condition) {
  return FilterRows(ds, [&](int64_t i) { return ds.condition[i] == condition; });
}

FrameDataset FilterSpeakerGroup(const FrameDataset &ds, int group) {
  if (group != 1 && group != 2)
    throw ConfigError(Cat("speaker group must be 1 or 2, got ", group));
  return FilterRows(ds,
                    [&](int64_t i) { return SpeakerGroup(ds.speaker[i]) == group; });
}

void ProbeConfig::Validate() const {
  if (hidden < 0) throw ConfigError(Cat("probe hidden width ", hidden, " < 0"));
  if (epochs < 0) throw ConfigError(Cat("probe epochs ", epochs, " < 0"));
  if (batch_size < 1)
    throw ConfigError(Cat("probe batch size ", batch_size, " < 1"));
  if (!(lr > 0.0)) throw ConfigError(Cat("probe lr ", lr, " must be positive"));
}

std::vector<double> ProbeModel::Logits(const float *frame) const {
  if (hidden == 0) {
    std::vector<double> out(b1);
    for (int64_t k = 0; k < n_classes; ++k) {
      const double *wrow = w1.data() + k * dim;
      double acc = 0.0;
      for (int64_t j = 0; j < dim; ++j) acc += wrow[j] * frame[j];
      out[k] += acc;
    }
    return out;
  }
  std::vector<double> h(b1);
  for (int64_t u = 0; u < hidden; ++u) {
    const double *wrow = w1.data() + u * dim;
    double acc = 0.0;
    for (int64_t j = 0; j < dim; ++j) acc += wrow[j] * frame[j];
    h[u] = std::max(0.0, h[u] + acc);
  }
  std::vector<double> out(b2);
  for (int64_t k = 0; k < n_classes; ++k) {
    const double *wrow = w2.data() + k * hidden;
    double acc = 0.0;
    for (int64_t u = 0; u < hidden; ++u) acc += wrow[u] * h[u];
    out[k] += acc;
  }
  return out;
}

int32_t ProbeModel::Predict(const float *frame) const {
  std::vector<double> logits = Logits(frame);
  int32_t best = 0;
  for (int64_t k = 1; k < n_classes; ++k)
    if (logits[k] > logits[best]) best = static_cast<int32_t>(k);
  return best;
}

namespace {

// Turns logits into probabilities in place (numerically stable softmax).
void SoftmaxInPlace(std::vector<double> &v) {
  double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double &e : v) {
    e = std::exp(e - mx);
    sum += e;
  }
  for (double &e : v) e /= sum;
}

// Class log-priors with light smoothing, used to initialize the output bias.
// Starting at the prior-matching point means an untrained probe predicts the
// majority class, and training only has to learn the feature-dependent part.
std::vector<double> LogPriors(const FrameDataset &ds) {
  std::vector<double> counts(ds.n_classes, 0.5);
  for (int32_t lab : ds.y) counts[lab] += 1.0;
  double total = static_cast<double>(ds.Size()) + 0.5 * ds.n_classes;
  std::vector<double> out(ds.n_classes);
  for (int64_t k = 0; k < ds.n_classes; ++k) out[k] = std::log(counts[k] / total);
  return out;
}

}  // namespace

ProbeModel TrainFrameProbe(const FrameDataset &train, const ProbeConfig &cfg) {
  cfg.Validate();
  if (train.Size() == 0) throw DataError("probe training set has no frames");
  if (train.dim <= 0 || train.n_classes <= 0)
    throw DataError(Cat("probe training set malformed: dim ", train.dim,
                        ", classes ", train.n_classes));
  for (int32_t lab : train.y)
    if (lab < 0 || lab >= train.n_classes)
      throw DataError(Cat("training label ", lab, " outside [0, ",
                          train.n_classes, ")"));

  ProbeModel m;
  m.dim = train.dim;
  m.n_classes = train.n_classes;
  m.hidden = cfg.hidden;

  Rng init_rng(DeriveSeed(cfg.seed, "probe-init"));
  if (m.hidden == 0) {
    // Zero weights make the initial logits exactly the class priors.
    m.w1.assign(m.n_classes * m.dim, 0.0);
    m.b1 = LogPriors(train);
  } else {
    // The hidden layer needs asymmetric weights or its units never diverge;
    // the output layer starts at zero so the prior-matching property of the
    // linear case still holds before the first update.
    double scale = 1.0 / std::sqrt(static_cast<double>(m.dim));
    m.w1.resize(m.hidden * m.dim);
    for (double &w : m.w1) w = init_rng.Uniform(-scale, scale);
    m.b1.assign(m.hidden, 0.0);
    m.w2.assign(m.n_classes * m.hidden, 0.0);
    m.b2 = LogPriors(train);
  }

  int64_t n = train.Size();
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  // Gradient accumulators, reused across batches.
  std::vector<double> gw1(m.w1.size()), gb1(m.b1.size());
  std::vector<double> gw2(m.w2.size()), gb2(m.b2.size());
  std::vector<double> h, gh;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(DeriveSeed(cfg.seed, "probe-order",
                               static_cast<uint64_t>(epoch)));
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.UniformInt(i + 1)]);

    for (int64_t start = 0; start < n; start += cfg.batch_size) {
      int64_t stop = std::min<int64_t>(start + cfg.batch_size, n);
      std::fill(gw1.begin(), gw1.end(), 0.0);
      std::fill(gb1.begin(), gb1.end(), 0.0);
      std::fill(gw2.begin(), gw2.end(), 0.0);
      std::fill(gb2.begin(), gb2.end(), 0.0);

      for (int64_t i = start; i < stop; ++i) {
        const float *x = train.Row(order[i]);
        int32_t label = train.y[order[i]];

        if (m.hidden == 0) {
          std::vector<double> p = m.Logits(x);
          SoftmaxInPlace(p);
          p[label] -= 1.0;  // now the gradient of CE wrt the logits
          for (int64_t k = 0; k < m.n_classes; ++k) {
            double g = p[k];
            gb1[k] += g;
            double *grow = gw1.data() + k * m.dim;
            for (int64_t j = 0; j < m.dim; ++j) grow[j] += g * x[j];
          }
        } else {
          // Forward, keeping the hidden activations for the backward pass.
          h.assign(m.b1.begin(), m.b1.end());
          for (int64_t u = 0; u < m.hidden; ++u) {
            const double *wrow = m.w1.data() + u * m.dim;
            double acc = 0.0;
            for (int64_t j = 0; j < m.dim; ++j) acc += wrow[j] * x[j];
            h[u] = std::max(0.0, h[u] + acc);
          }
          std::vector<double> p(m.b2);
          for (int64_t k = 0; k < m.n_classes; ++k) {
            const double *wrow = m.w2.data() + k * m.hidden;
            double acc = 0.0;
            for (int64_t u = 0; u < m.hidden; ++u) acc += wrow[u] * h[u];
            p[k] += acc;
          }
          SoftmaxInPlace(p);
          p[label] -= 1.0;

          gh.assign(m.hidden, 0.0);
          for (int64_t k = 0; k < m.n_classes; ++k) {
            double g = p[k];
            gb2[k] += g;
            const double *wrow = m.w2.data() + k * m.hidden;
            double *grow = gw2.data() + k * m.hidden;
            for (int64_t u = 0; u < m.hidden; ++u) {
              grow[u] += g * h[u];
              gh[u] += g * wrow[u];
            }
          }
          for (int64_t u = 0; u < m.hidden; ++u) {
            if (h[u] <= 0.0) continue;  // ReLU gate
            gb1[u] += gh[u];
            double *grow = gw1.data() + u * m.dim;
            for (int64_t j = 0; j < m.dim; ++j) grow[j] += gh[u] * x[j];
          }
        }
      }

      double step = cfg.lr / static_cast<double>(stop - start);
      for (size_t j = 0; j < m.w1.size(); ++j) m.w1[j] -= step * gw1[j];
      for (size_t j = 0; j < m.b1.size(); ++j) m.b1[j] -= step * gb1[j];
      for (size_t j = 0; j < m.w2.size(); ++j) m.w2[j] -= step * gw2[j];
      for (size_t j = 0; j < m.b2.size(); ++j) m.b2[j] -= step * gb2[j];
    }
  }
  return m;
}

ConditionFer EvalFrameProbe(const ProbeModel &probe, const FrameDataset &test) {
  if (probe.dim != test.dim)
    throw ShapeError(Cat("probe expects ", probe.dim,
                         "-dim frames but the dataset has ", test.dim));
  if (test.Size() == 0) throw DataError("probe evaluation set has no frames");

  ConditionFer out;
  std::array<int64_t, 4> miss{};
  int64_t miss_total = 0;
  for (int64_t i = 0; i < test.Size(); ++i) {
    int c = test.condition[i] - 'A';
    if (c < 0 || c > 3)
      throw DataError(Cat("frame ", i, " has condition tag '",
                          test.condition[i], "', outside A..D"));
    bool wrong = probe.Predict(test.Row(i)) != test.y[i];
    out.count[c] += 1;
    if (wrong) {
      miss[c] += 1;
      miss_total += 1;
    }
  }
  out.total = test.Size();
  out.overall = static_cast<double>(miss_total) / static_cast<double>(out.total);
  for (int c = 0; c < 4; ++c)
    out.fer[c] = out.count[c] == 0
                     ? std::numeric_limits<double>::quiet_NaN()
                     : static_cast<double>(miss[c]) /
                           static_cast<double>(out.count[c]);
  return out;
}

double InvarianceGap(const ConditionFer &fer) {
  for (int c = 0; c < 4; ++c)
    if (fer.count[c] == 0)
      throw DataError(Cat("no frames for condition ",
                          static_cast<char>('A' + c),
                          "; the gap needs all four conditions"));
  return (fer.fer[1] + fer.fer[2] + fer.fer[3]) / 3.0 - fer.fer[0];
}

double TrainDomainProbe(const FrameDataset &train, const FrameDataset &test,
                        const ProbeConfig &cfg) {
  if (train.Size() == 0 || test.Size() == 0)
    throw DataError("domain probe needs non-empty train and test sets");

  // The classes of this probe are the condition tags seen in training.
  std::array<int32_t, 4> class_of;
  class_of.fill(-1);
  int32_t n_cond = 0;
  for (char c : train.condition)
    if (class_of[c - 'A'] < 0) class_of[c - 'A'] = n_cond++;
  if (n_cond < 2)
    throw DataError(Cat("domain probe needs at least two conditions, got ",
                        n_cond));
  for (char c : test.condition)
    if (class_of[c - 'A'] < 0)
      throw DataError(Cat("test set has condition ", c,
                          " never seen in domain-probe training"));

  auto relabel = [&](const FrameDataset &ds) {
    FrameDataset out = ds;
    out.n_classes = n_cond;
    for (int64_t i = 0; i < out.Size(); ++i)
      out.y[i] = class_of[out.condition[i] - 'A'];
    return out;
  };
  FrameDataset dtrain = relabel(train);
  FrameDataset dtest = relabel(test);
  ProbeModel probe = TrainFrameProbe(dtrain, cfg);
  ConditionFer fer = EvalFrameProbe(probe, dtest);
  return 1.0 - fer.overall;
}

namespace {

void CheckReportRow(const ProbeReport &r) {
  const double fers[4] = {r.fer_a, r.fer_b, r.fer_c, r.fer_d};
  for (double f : fers)
    if (!(f >= 0.0 && f <= 1.0))
      throw DataError(Cat("report row '", r.feature_name,
                          "' has a frame error rate outside [0, 1]: ", f));
  double want = (r.fer_b + r.fer_c + r.fer_d) / 3.0 - r.fer_a;
  if (std::abs(want - r.gap) > 1e-9)
    throw DataError(Cat("report row '", r.feature_name, "' stores gap ", r.gap,
                        " but its error rates give ", want));
  if (!(r.domain_accuracy >= 0.0 && r.domain_accuracy <= 1.0))
    throw DataError(Cat("report row '", r.feature_name,
                        "' has domain accuracy outside [0, 1]: ",
                        r.domain_accuracy));
}

std::string FormatDouble(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace

InvarianceTable BuildInvarianceTable(std::vector<ProbeReport> rows) {
  if (rows.empty()) throw DataError("invariance table needs at least one row");
  for (const auto &r : rows) CheckReportRow(r);
  std::sort(rows.begin(), rows.end(),
            [](const ProbeReport &a, const ProbeReport &b) {
              return a.feature_name < b.feature_name;
            });
  for (size_t i = 1; i < rows.size(); ++i)
    if (rows[i].feature_name == rows[i - 1].feature_name)
      throw DataError(Cat("duplicate report row '", rows[i].feature_name, "'"));

  InvarianceTable table;
  table.rows = std::move(rows);
  if (table.rows.size() > 1) {
    table.best_gap_row = 0;
    table.best_in_domain_row = 0;
    for (size_t i = 1; i < table.rows.size(); ++i) {
      if (table.rows[i].gap < table.rows[table.best_gap_row].gap)
        table.best_gap_row = static_cast<int>(i);
      if (table.rows[i].fer_a < table.rows[table.best_in_domain_row].fer_a)
        table.best_in_domain_row = static_cast<int>(i);
    }
  }
  return table;
}

std::string InvarianceTable::Csv() const {
  std::string out =
      "feature,fer_a,fer_b,fer_c,fer_d,gap,domain_accuracy,"
      "best_gap,best_in_domain\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const ProbeReport &r = rows[i];
    out += r.feature_name;
    for (double v : {r.fer_a, r.fer_b, r.fer_c, r.fer_d, r.gap,
                     r.domain_accuracy})
      out += "," + FormatDouble(v, 6);
    out += static_cast<int>(i) == best_gap_row ? ",1" : ",0";
    out += static_cast<int>(i) == best_in_domain_row ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

std::string InvarianceTable::TextTable() const {
  size_t name_w = 7;  // "feature"
  for (const auto &r : rows) name_w = std::max(name_w, r.feature_name.size());

  auto pad = [](std::string s, size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::string out = pad("feature", name_w) +
                    "  fer_A   fer_B   fer_C   fer_D   gap      dom_acc  notes\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const ProbeReport &r = rows[i];
    out += pad(r.feature_name, name_w);
    for (double v : {r.fer_a, r.fer_b, r.fer_c, r.fer_d})
      out += "  " + FormatDouble(v, 4);
    out += "  " + pad(FormatDouble(r.gap, 4), 7);
    out += "  " + pad(FormatDouble(r.domain_accuracy, 4), 7);
    std::string notes;
    if (static_cast<int>(i) == best_gap_row) notes = "smallest gap";
    if (static_cast<int>(i) == best_in_domain_row) {
      if (!notes.empty()) notes += ", ";
      notes += "best in-domain";
    }
    out += "  " + notes;
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += "\n";
  }
  return out;
}

namespace {

// One power-iteration eigenpair of the covariance matrix `cov`, constrained
// to be orthogonal to `orth` (the already-found eigenvector, with eigenvalue
// `orth_lambda`) when given. Deterministic: no random restarts.
std::pair<std::vector<double>, double> TopEigenpair(
    const std::vector<double> &cov, int64_t dim,
    const std::vector<double> *orth, double orth_lambda) {
  auto project = [&](std::vector<double> &v) {
    if (!orth) return;
    double d = 0.0;
    for (int64_t j = 0; j < dim; ++j) d += v[j] * (*orth)[j];
    for (int64_t j = 0; j < dim; ++j) v[j] -= d * (*orth)[j];
  };
  auto norm = [&](const std::vector<double> &v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return std::sqrt(s);
  };

  // Start on the coordinate axis with the largest variance left after the
  // found component is removed; for the first pass that is just the largest
  // diagonal entry. Axes are tried best-first until one survives projection.
  std::vector<int64_t> axes(dim);
  std::iota(axes.begin(), axes.end(), 0);
  std::vector<double> resid(dim);
  for (int64_t j = 0; j < dim; ++j) {
    resid[j] = cov[j * dim + j];
    if (orth) resid[j] -= orth_lambda * (*orth)[j] * (*orth)[j];
  }
  std::stable_sort(axes.begin(), axes.end(),
                   [&](int64_t a, int64_t b) { return resid[a] > resid[b]; });

  std::vector<double> v(dim, 0.0);
  double nv = 0.0;
  for (int64_t axis : axes) {
    v.assign(dim, 0.0);
    v[axis] = 1.0;
    project(v);
    nv = norm(v);
    if (nv > 1e-9) break;
  }
  if (nv <= 1e-9) {
    // Every axis collapses onto `orth`, which cannot happen for dim >= 2
    // with a unit orth vector; guard anyway.
    throw NumericError("power iteration found no starting direction");
  }
  for (double &e : v) e /= nv;

  std::vector<double> w(dim);
  for (int iter = 0; iter < 1000; ++iter) {
    for (int64_t r = 0; r < dim; ++r) {
      const double *row = cov.data() + r * dim;
      double acc = 0.0;
      for (int64_t j = 0; j < dim; ++j) acc += row[j] * v[j];
      w[r] = acc;
    }
    project(w);
    double nw = norm(w);
    if (nw < 1e-300) break;  // no variance left in the allowed subspace
    double dot = 0.0;
    for (int64_t j = 0; j < dim; ++j) dot += w[j] * v[j] / nw;
    for (int64_t j = 0; j < dim; ++j) v[j] = w[j] / nw;
    if (1.0 - std::abs(dot) < 1e-15) break;
  }

  // Rayleigh quotient of the converged direction.
  double lambda = 0.0;
  for (int64_t r = 0; r < dim; ++r) {
    const double *row = cov.data() + r * dim;
    double acc = 0.0;
    for (int64_t j = 0; j < dim; ++j) acc += row[j] * v[j];
    lambda += v[r] * acc;
  }
  return {v, std::max(lambda, 0.0)};
}

}  // namespace

Pca2d PcaProject2d(const std::vector<float> &data, int64_t n, int64_t dim) {
  if (n <= 2)
    throw DataError(Cat("PCA needs more than 2 rows, got ", n));
  if (dim < 2)
    throw DataError(Cat("PCA to 2 components needs at least 2 input dims, got ",
                        dim));
  if (data.size() != static_cast<size_t>(n * dim))
    throw ShapeError(Cat("PCA input should hold ", n * dim, " values (", n,
                         " x ", dim, "), got ", data.size()));

  std::vector<double> mean(dim, 0.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < dim; ++j) mean[j] += data[i * dim + j];
  for (double &m : mean) m /= static_cast<double>(n);

  // Unbiased covariance, accumulated in doubles.
  std::vector<double> cov(dim * dim, 0.0);
  std::vector<double> centered(dim);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < dim; ++j) centered[j] = data[i * dim + j] - mean[j];
    for (int64_t r = 0; r < dim; ++r) {
      double cr = centered[r];
      double *row = cov.data() + r * dim;
      for (int64_t j = 0; j < dim; ++j) row[j] += cr * centered[j];
    }
  }
  for (double &c : cov) c /= static_cast<double>(n - 1);

  double trace = 0.0;
  for (int64_t j = 0; j < dim; ++j) trace += cov[j * dim + j];
  if (!(trace > 0.0))
    throw DataError("PCA input has zero variance (all rows identical)");

  Pca2d out;
  auto [v1, l1] = TopEigenpair(cov, dim, nullptr, 0.0);
  auto [v2, l2] = TopEigenpair(cov, dim, &v1, l1);
  out.components[0] = std::move(v1);
  out.components[1] = std::move(v2);
  out.explained[0] = l1;
  out.explained[1] = std::min(l2, l1);  // deflation noise must not reorder

  out.coords.resize(n * 2);
  for (int64_t i = 0; i < n; ++i) {
    double a = 0.0, b = 0.0;
    for (int64_t j = 0; j < dim; ++j) {
      double c = data[i * dim + j] - mean[j];
      a += c * out.components[0][j];
      b += c * out.components[1][j];
    }
    out.coords[i * 2] = a;
    out.coords[i * 2 + 1] = b;
  }
  return out;
}

FrameDataset SampleFrames(const FrameDataset &ds, int64_t max_rows,
                          uint64_t seed) {
  if (max_rows < 1)
    throw ConfigError(Cat("frame sample size ", max_rows, " < 1"));
  if (ds.Size() <= max_rows) return ds;

  std::vector<int64_t> idx(ds.Size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(DeriveSeed(seed, "frame-sample"));
  for (int64_t i = 0; i < max_rows; ++i)
    std::swap(idx[i], idx[i + rng.UniformInt(ds.Size() - i)]);
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());  // keep original frame order

  std::vector<char> keep(ds.Size(), 0);
  for (int64_t i : idx) keep[i] = 1;
  return FilterRows(ds, [&](int64_t i) { return keep[i] != 0; });
}

std::string PcaCsv(const Pca2d &pca, const FrameDataset &ds,
                   const SynthInventory &inventory) {
  if (pca.coords.size() != static_cast<size_t>(ds.Size()) * 2)
    throw ShapeError(Cat("projection has ", pca.coords.size() / 2,
                         " points but the dataset has ", ds.Size(), " frames"));
  std::string out = "x,y,phone,manner,speaker,condition\n";
  for (int64_t i = 0; i < ds.Size(); ++i) {
    int32_t phone = ds.y[i];
    if (phone < 0 ||
        phone >= static_cast<int32_t>(inventory.phones.phones.size()))
      throw DataError(Cat("frame ", i, " has phone class ", phone,
                          " outside the inventory"));
    const PhoneInfo &info = inventory.phones.phones[phone];
    out += FormatDouble(pca.coords[i * 2], 6) + "," +
           FormatDouble(pca.coords[i * 2 + 1], 6) + "," + info.name + "," +
           kMannerNames[info.manner] + "," + std::to_string(ds.speaker[i]) +
           "," + ds.condition[i];
    out += "\n";
  }
  return out;
}

}  // namespace gdistill
