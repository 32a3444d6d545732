// gdistill/fbank.h

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

#ifndef GDISTILL_FBANK_H_
#define GDISTILL_FBANK_H_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gdistill/common.h"
#include "gdistill/wav.h"

namespace gdistill {

// A T x F matrix of per-frame feature vectors, row-major. Produced by the
// filterbank front end or synthesized directly by the corpus generator.
struct FeatureMatrix {
  int64_t num_frames = 0;  // T
  int64_t num_bins = 0;    // F
  std::vector<float> values;
  float shift_ms = 10.0f;
  float window_ms = 25.0f;
  std::string kind = "fbank";

  float &At(int64_t t, int64_t f) { return values[t * num_bins + f]; }
  float At(int64_t t, int64_t f) const { return values[t * num_bins + f]; }

  void Validate() const {
    if (num_frames < 1 || num_bins < 1)
      throw DataError(Cat("feature matrix must be at least 1x1, got ",
                          num_frames, "x", num_bins));
    if (static_cast<int64_t>(values.size()) != num_frames * num_bins)
      throw DataError(Cat("feature matrix size ", values.size(),
                          " does not match ", num_frames, "x", num_bins));
    for (float v : values)
      if (!std::isfinite(v))
        throw DataError("feature matrix contains non-finite values");
  }
};

struct FbankOptions {
  int n_mels = 40;
  float window_ms = 25.0f;
  float shift_ms = 10.0f;
  float preemphasis = 0.97f;
  double log_floor = 1e-10;
  // Per-utterance mean/variance normalization. Off by default: the first
  // norm layer of the audio branch absorbs input scale and offset anyway.
  bool mean_var_norm = false;
};

// Log Mel filterbank features: pre-emphasis, Hamming window, magnitude
// spectrum (radix-2 FFT), triangular Mel filters spanning 0 Hz to Nyquist,
// natural log with a floor. T = floor((N - window) / shift) + 1.
// A waveform shorter than one analysis window is rejected.
FeatureMatrix ComputeFbank(const Waveform &w, const FbankOptions &opts = {});

// HTK Mel scale.
inline double MelFromHz(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}
inline double HzFromMel(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Center frequency of each triangular filter; exposed so tests can locate
// the expected peak bin for a pure tone without touching the filter code.
std::vector<double> MelCenterFrequenciesHz(int n_mels, double sample_rate);

}  // namespace gdistill

#endif  // GDISTILL_FBANK_H_
