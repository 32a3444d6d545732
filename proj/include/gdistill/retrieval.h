// include/gdistill/retrieval.h

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

#ifndef GDISTILL_RETRIEVAL_H_
#define GDISTILL_RETRIEVAL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "gdistill/corpus.h"
#include "gdistill/models.h"

namespace gdistill {

enum class RetrievalDirection { kAudioToImage, kImageToAudio };

struct DirectionMetrics {
  double recall1 = 0, recall5 = 0, recall10 = 0;
  double mean_rank = 0, median_rank = 0;
};

struct RetrievalReport {
  int64_t pool_size = 0;
  DirectionMetrics audio_to_image;
  DirectionMetrics image_to_audio;
  double mean_recall1 = 0, mean_recall5 = 0, mean_recall10 = 0;

  std::string Csv() const;
  std::string TextTable() const;
};

// S[i*n+j] = <audio_i, image_j> accumulated in double. Both inputs (N, D).
std::vector<double> SimilarityMatrixOf(const Tensor<float> &audio,
                                       const Tensor<float> &image);

// Rank of the true match for each row (audio->image) or column
// (image->audio): 1 + count of strictly better candidates, with equal scores
// at a lower index ranking first. Length n.
std::vector<int64_t> MatchRanks(const std::vector<double> &s, int64_t n,
                                RetrievalDirection dir);

// Fraction of queries whose true match ranks within the top k.
double RecallAtK(const std::vector<double> &s, int64_t n, int64_t k,
                 RetrievalDirection dir);

// Embeds every listed pair once in infer mode and scores both directions.
RetrievalReport EvaluateRetrieval(GroundingModel<float> &model,
                                  const Corpus &corpus,
                                  const std::vector<int> &indices);

// Convenience wrapper over precomputed embeddings.
RetrievalReport ReportFromEmbeddings(const Tensor<float> &audio,
                                     const Tensor<float> &image);

// Builds the (N, F_or_V...) batched image-branch input for one pair.
Tensor<float> ImageInputOf(const ImageRecord &image,
                           const ImageEncoderConfig &cfg);

}  // namespace gdistill

#endif  // GDISTILL_RETRIEVAL_H_
