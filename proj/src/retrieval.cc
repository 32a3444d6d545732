// src/retrieval.cc

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

#include "gdistill/retrieval.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gdistill {

namespace {

double MedianOf(std::vector<int64_t> ranks) {
  std::sort(ranks.begin(), ranks.end());
  const size_t n = ranks.size();
  if (n % 2 == 1) return static_cast<double>(ranks[n / 2]);
  return 0.5 * (static_cast<double>(ranks[n / 2 - 1]) +
                static_cast<double>(ranks[n / 2]));
}

DirectionMetrics MetricsFromRanks(const std::vector<int64_t> &ranks) {
  DirectionMetrics m;
  double sum = 0;
  for (int64_t r : ranks) {
    sum += static_cast<double>(r);
    if (r <= 1) m.recall1 += 1;
    if (r <= 5) m.recall5 += 1;
    if (r <= 10) m.recall10 += 1;
  }
  const double n = static_cast<double>(ranks.size());
  m.recall1 /= n;
  m.recall5 /= n;
  m.recall10 /= n;
  m.mean_rank = sum / n;
  m.median_rank = MedianOf(ranks);
  return m;
}

}  // namespace

std::vector<double> SimilarityMatrixOf(const Tensor<float> &audio,
                                       const Tensor<float> &image) {
  if (audio.Rank() != 2 || image.Rank() != 2)
    throw ShapeError(Cat("similarity matrix needs (N,D) embeddings, got ",
                         ShapeStr(audio.Shape()), " and ",
                         ShapeStr(image.Shape())));
  if (audio.Dim(0) != image.Dim(0) || audio.Dim(1) != image.Dim(1))
    throw ShapeError(Cat("embedding shapes disagree: ",
                         ShapeStr(audio.Shape()), " vs ",
                         ShapeStr(image.Shape())));
  const int64_t n = audio.Dim(0), d = audio.Dim(1);
  auto av = audio.Values();
  auto iv = image.Values();
  std::vector<double> s(static_cast<size_t>(n) * n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0;
      for (int64_t q = 0; q < d; ++q)
        acc += static_cast<double>(av[i * d + q]) *
               static_cast<double>(iv[j * d + q]);
      s[i * n + j] = acc;
    }
  return s;
}

std::vector<int64_t> MatchRanks(const std::vector<double> &s, int64_t n,
                                RetrievalDirection dir) {
  if (n < 1) throw ShapeError("MatchRanks: empty pool");
  if (static_cast<int64_t>(s.size()) != n * n)
    throw ShapeError(Cat("MatchRanks: matrix size ", s.size(),
                         " does not match pool ", n));
  // Index helper: rows are queries in the audio->image direction, columns in
  // the other.
  auto at = [&](int64_t q, int64_t c) {
    return dir == RetrievalDirection::kAudioToImage ? s[q * n + c]
                                                    : s[c * n + q];
  };
  std::vector<int64_t> ranks(n);
  for (int64_t q = 0; q < n; ++q) {
    const double truth = at(q, q);
    int64_t rank = 1;
    for (int64_t c = 0; c < n; ++c) {
      if (c == q) continue;
      if (at(q, c) > truth || (at(q, c) == truth && c < q)) ++rank;
    }
    ranks[q] = rank;
  }
  return ranks;
}

double RecallAtK(const std::vector<double> &s, int64_t n, int64_t k,
                 RetrievalDirection dir) {
  if (k < 1 || k > n)
    throw ConfigError(Cat("RecallAtK: k must be in [1, ", n, "], got ", k));
  const auto ranks = MatchRanks(s, n, dir);
  int64_t hits = 0;
  for (int64_t r : ranks) hits += (r <= k) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(n);
}

Tensor<float> ImageInputOf(const ImageRecord &image,
                           const ImageEncoderConfig &cfg) {
  if (cfg.presence_input) {
    if (static_cast<int>(image.presence.size()) != cfg.presence_dim)
      throw ShapeError(Cat("presence vector has ", image.presence.size(),
                           " entries, model expects ", cfg.presence_dim));
    auto t = Tensor<float>::Zeros({cfg.presence_dim});
    auto v = t.MutableValues();
    for (size_t i = 0; i < image.presence.size(); ++i)
      v[i] = image.presence[i] ? 1.0f : 0.0f;
    return t;
  }
  if (image.height != cfg.image_size || image.width != cfg.image_size)
    throw ShapeError(Cat("image is ", image.height, "x", image.width,
                         ", model expects ", cfg.image_size, "x",
                         cfg.image_size));
  auto t = Tensor<float>::Zeros({3, image.height, image.width});
  std::copy(image.pixels.begin(), image.pixels.end(),
            t.MutableValues().begin());
  return t;
}

RetrievalReport ReportFromEmbeddings(const Tensor<float> &audio,
                                     const Tensor<float> &image) {
  const auto s = SimilarityMatrixOf(audio, image);
  const int64_t n = audio.Dim(0);
  if (n < 10)
    throw ConfigError(Cat("retrieval pool of ", n,
                          " is too small for recall@10"));
  RetrievalReport rep;
  rep.pool_size = n;
  rep.audio_to_image = MetricsFromRanks(
      MatchRanks(s, n, RetrievalDirection::kAudioToImage));
  rep.image_to_audio = MetricsFromRanks(
      MatchRanks(s, n, RetrievalDirection::kImageToAudio));
  rep.mean_recall1 =
      0.5 * (rep.audio_to_image.recall1 + rep.image_to_audio.recall1);
  rep.mean_recall5 =
      0.5 * (rep.audio_to_image.recall5 + rep.image_to_audio.recall5);
  rep.mean_recall10 =
      0.5 * (rep.audio_to_image.recall10 + rep.image_to_audio.recall10);
  return rep;
}

RetrievalReport EvaluateRetrieval(GroundingModel<float> &model,
                                  const Corpus &corpus,
                                  const std::vector<int> &indices) {
  if (indices.empty()) throw DataError("EvaluateRetrieval: empty pool");
  const int64_t n = static_cast<int64_t>(indices.size());
  const int64_t d = model.EmbedDim();
  auto audio = Tensor<float>::Zeros({n, d});
  auto image = Tensor<float>::Zeros({n, d});
  auto av = audio.MutableValues();
  auto iv = image.MutableValues();

  NoGradGuard ng;
  for (int64_t row = 0; row < n; ++row) {
    const int idx = indices[row];
    if (idx < 0 || idx >= static_cast<int>(corpus.pairs.size()))
      throw DataError(Cat("EvaluateRetrieval: pair index ", idx,
                          " outside corpus of ", corpus.pairs.size()));
    const auto &pair = corpus.pairs[idx];
    const auto &feat = pair.utterance.features;
    auto x = Tensor<float>::Zeros({feat.num_bins, feat.num_frames});
    auto xv = x.MutableValues();
    // Features are stored frame-major; the audio branch wants mel x time.
    for (int64_t t = 0; t < feat.num_frames; ++t)
      for (int64_t f = 0; f < feat.num_bins; ++f)
        xv[f * feat.num_frames + t] = feat.At(t, f);
    auto emb = model.AudioForward(x, BnMode::kInfer);
    std::copy(emb.Values().begin(), emb.Values().end(),
              av.begin() + row * d);
    auto img_emb = model.ImageForward(
        ImageInputOf(pair.image, model.Config().image), BnMode::kInfer);
    std::copy(img_emb.Values().begin(), img_emb.Values().end(),
              iv.begin() + row * d);
  }
  return ReportFromEmbeddings(audio, image);
}

std::string RetrievalReport::Csv() const {
  std::ostringstream out;
  out << "direction,recall1,recall5,recall10,mean_rank,median_rank\n";
  auto line = [&](const char *name, const DirectionMetrics &m) {
    out << name << ',' << m.recall1 << ',' << m.recall5 << ',' << m.recall10
        << ',' << m.mean_rank << ',' << m.median_rank << '\n';
  };
  line("audio_to_image", audio_to_image);
  line("image_to_audio", image_to_audio);
  out << "mean," << mean_recall1 << ',' << mean_recall5 << ','
      << mean_recall10 << ",,\n";
  return out.str();
}

std::string RetrievalReport::TextTable() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "retrieval pool: %lld\n",
                static_cast<long long>(pool_size));
  out << buf;
  std::snprintf(buf, sizeof(buf), "%-16s %8s %8s %8s %10s %12s\n", "direction",
                "R@1", "R@5", "R@10", "mean rank", "median rank");
  out << buf;
  auto line = [&](const char *name, const DirectionMetrics &m) {
    std::snprintf(buf, sizeof(buf), "%-16s %8.4f %8.4f %8.4f %10.2f %12.2f\n",
                  name, m.recall1, m.recall5, m.recall10, m.mean_rank,
                  m.median_rank);
    out << buf;
  };
  line("audio->image", audio_to_image);
  line("image->audio", image_to_audio);
  std::snprintf(buf, sizeof(buf), "%-16s %8.4f %8.4f %8.4f\n", "mean",
                mean_recall1, mean_recall5, mean_recall10);
  out << buf;
  return out.str();
}

}  // namespace gdistill
