// src/archive.cc

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

#include "gdistill/archive.h"

#include <cstring>

#include "byte_io.h"

namespace gdistill {

namespace {

constexpr char kMagic[4] = {'G', 'D', 'F', 'A'};
constexpr uint16_t kVersion = 1;

}  // namespace

void WriteArchive(const FeatureArchive &archive, const std::string &path) {
  for (size_t i = 0; i < archive.records.size(); ++i) {
    const ArchiveRecord &rec = archive.records[i];
    if (rec.channels != archive.header.channels)
      throw DataError(Cat("archive record ", i, " ('", rec.id, "') has ",
                          rec.channels, " channels but the header says ",
                          archive.header.channels));
    const size_t want =
        static_cast<size_t>(rec.num_frames) * rec.channels;
    if (rec.frames.size() != want)
      throw ShapeError(Cat("archive record '", rec.id, "' stores ",
                           rec.frames.size(), " floats for a ",
                           rec.num_frames, "x", rec.channels, " matrix"));
  }

  std::string out;
  PutBytes(out, kMagic, sizeof(kMagic));
  PutPod<uint16_t>(out, kVersion);
  PutString(out, archive.header.layer_name);
  PutPod<uint32_t>(out, archive.header.channels);
  PutPod<uint32_t>(out, archive.header.ratio);
  PutPod<uint64_t>(out, archive.header.checkpoint_hash);
  PutPod<uint32_t>(out, static_cast<uint32_t>(archive.records.size()));
  for (const ArchiveRecord &rec : archive.records) {
    PutString(out, rec.id);
    PutPod<uint32_t>(out, rec.num_frames);
    PutPod<uint32_t>(out, rec.channels);
    PutBytes(out, rec.frames.data(), rec.frames.size() * sizeof(float));
    PutPod<uint8_t>(out, rec.has_labels ? 1 : 0);
    if (rec.has_labels) {
      PutPod<uint32_t>(out, static_cast<uint32_t>(rec.labels.size()));
      PutBytes(out, rec.labels.data(), rec.labels.size() * sizeof(uint32_t));
    }
    PutPod<uint8_t>(out, static_cast<uint8_t>(rec.condition));
  }
  WriteFileBytes(path, out);
}

FeatureArchive ReadArchive(const std::string &path) {
  const std::string data = ReadFileBytes(path);
  if (data.size() < sizeof(kMagic) + sizeof(uint16_t))
    throw DataError(Cat(path, ": too short to be a feature archive (",
                        data.size(), " bytes)"));
  if (std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError(Cat(path, ": bad magic bytes, not a feature archive"));

  ByteReader r(data, path);
  r.Take(sizeof(kMagic));
  const uint16_t version = r.Pod<uint16_t>();
  if (version != kVersion)
    throw DataError(Cat(path, ": unsupported archive version ", version,
                        " (this build reads version ", kVersion, ")"));

  FeatureArchive archive;
  archive.header.layer_name = r.Str();
  archive.header.channels = r.Pod<uint32_t>();
  archive.header.ratio = r.Pod<uint32_t>();
  archive.header.checkpoint_hash = r.Pod<uint64_t>();

  const uint32_t n_records = r.Pod<uint32_t>();
  archive.records.resize(n_records);
  for (uint32_t i = 0; i < n_records; ++i) {
    ArchiveRecord &rec = archive.records[i];
    rec.id = r.Str();
    rec.num_frames = r.Pod<uint32_t>();
    rec.channels = r.Pod<uint32_t>();
    if (rec.channels != archive.header.channels)
      throw DataError(Cat(path, ": record ", i, " ('", rec.id, "') has ",
                          rec.channels, " channels but the header says ",
                          archive.header.channels, " (near byte ", r.pos(),
                          ")"));
    const size_t count =
        static_cast<size_t>(rec.num_frames) * rec.channels;
    rec.frames.resize(count);
    std::memcpy(rec.frames.data(), r.Take(count * sizeof(float)),
                count * sizeof(float));
    rec.has_labels = r.Pod<uint8_t>() != 0;
    if (rec.has_labels) {
      const uint32_t n_labels = r.Pod<uint32_t>();
      rec.labels.resize(n_labels);
      std::memcpy(rec.labels.data(), r.Take(n_labels * sizeof(uint32_t)),
                  n_labels * sizeof(uint32_t));
    }
    rec.condition = static_cast<char>(r.Pod<uint8_t>());
  }
  if (r.pos() != data.size())
    throw DataError(Cat(path, ": ", data.size() - r.pos(),
                        " trailing bytes after the last record"));
  return archive;
}

void RequireSameCheckpoint(
    const std::vector<const FeatureArchive *> &archives) {
  uint64_t hash = 0;
  const FeatureArchive *first = nullptr;
  for (const FeatureArchive *a : archives) {
    if (a->header.checkpoint_hash == 0) continue;
    if (hash == 0) {
      hash = a->header.checkpoint_hash;
      first = a;
      continue;
    }
    if (a->header.checkpoint_hash != hash)
      throw DataError(Cat("archive '", a->header.layer_name,
                          "' was distilled from a different checkpoint than '",
                          first->header.layer_name,
                          "' (hashes differ); refusing to mix them"));
  }
}

}  // namespace gdistill
