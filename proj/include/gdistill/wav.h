// gdistill/wav.h

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

#ifndef GDISTILL_WAV_H_
#define GDISTILL_WAV_H_

#include <string>
#include <vector>

namespace gdistill {

struct Waveform {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate = 0;
};

// Reads a 16-bit PCM mono RIFF/WAVE file. Samples are scaled by 1/32768, so
// the int16 range maps to [-1, 32767/32768]. Malformed headers, non-PCM or
// non-16-bit encodings, stereo files, and truncation each raise a DataError
// whose message names the failing byte offset.
Waveform LoadWav(const std::string &path);

}  // namespace gdistill

#endif  // GDISTILL_WAV_H_
