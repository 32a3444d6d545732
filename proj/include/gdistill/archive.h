// include/gdistill/archive.h

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

#ifndef GDISTILL_ARCHIVE_H_
#define GDISTILL_ARCHIVE_H_

// Binary feature archives (.gdfa). An archive holds frame matrices for many
// utterances plus enough header context to know where they came from: the
// producing layer, its channel count and downsampling ratio, and the hash of
// the source checkpoint. The same container stores raw filterbank features
// (layer name "fbank", ratio 1, hash 0) and persisted corpus payloads.
//
// File layout, all integers little-endian:
//   magic "GDFA", version u16,
//   layer-name (u32 length + UTF-8), channels u32, ratio u32, hash u64,
//   record count u32, then per record:
//     id (u32 length + UTF-8), T u32, C u32, T*C float32 row-major,
//     label flag u8, [label count u32, labels u32 each], condition u8.

#include <cstdint>
#include <string>
#include <vector>

#include "gdistill/common.h"

namespace gdistill {

struct ArchiveHeader {
  std::string layer_name;
  uint32_t channels = 0;
  uint32_t ratio = 1;
  // Fnv1a64 of the checkpoint file the features came out of; zero when the
  // archive was not produced by a model (raw features, corpus payloads).
  uint64_t checkpoint_hash = 0;
};

struct ArchiveRecord {
  std::string id;
  uint32_t num_frames = 0;      // T
  uint32_t channels = 0;        // C, must match the header
  std::vector<float> frames;    // T * C, row-major
  bool has_labels = false;
  std::vector<uint32_t> labels;  // per-frame when produced by distillation
  char condition = 'A';

  float At(uint32_t t, uint32_t c) const {
    return frames[static_cast<size_t>(t) * channels + c];
  }
};

struct FeatureArchive {
  ArchiveHeader header;
  std::vector<ArchiveRecord> records;
};

// Writes the archive to `path`, replacing any existing file. Every record's
// channel count and frame buffer size are validated against the header
// first, so a malformed in-memory archive never reaches the disk.
void WriteArchive(const FeatureArchive &archive, const std::string &path);

// Reads an archive back. Bad magic, unsupported version, and truncation are
// reported as distinct DataErrors; truncation messages name the byte offset.
FeatureArchive ReadArchive(const std::string &path);

// Rejects archives whose header checkpoint hashes disagree, which happens
// when features distilled from different models are mixed in one experiment.
// Archives with hash zero (raw features) are exempt.
void RequireSameCheckpoint(const std::vector<const FeatureArchive *> &archives);

}  // namespace gdistill

#endif  // GDISTILL_ARCHIVE_H_
