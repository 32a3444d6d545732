// src/wav.cc

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

#include "gdistill/wav.h"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "gdistill/common.h"

namespace gdistill {

namespace {

uint32_t ReadU32(const std::vector<char> &buf, size_t off) {
  uint32_t v;
  std::memcpy(&v, buf.data() + off, 4);
  return v;  // little-endian host assumed (x86/ARM)
}

uint16_t ReadU16(const std::vector<char> &buf, size_t off) {
  uint16_t v;
  std::memcpy(&v, buf.data() + off, 2);
  return v;
}

bool TagIs(const std::vector<char> &buf, size_t off, const char *tag) {
  return std::memcmp(buf.data() + off, tag, 4) == 0;
}

}  // namespace

Waveform LoadWav(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(Cat("cannot open wav file: ", path));
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());

  if (buf.size() < 12)
    throw DataError(Cat(path, ": truncated RIFF header at byte ", buf.size(),
                        " (need 12)"));
  if (!TagIs(buf, 0, "RIFF"))
    throw DataError(Cat(path, ": missing RIFF tag at byte 0"));
  if (!TagIs(buf, 8, "WAVE"))
    throw DataError(Cat(path, ": missing WAVE tag at byte 8"));

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  size_t data_off = 0, data_len = 0;
  bool have_data = false;

  size_t off = 12;
  while (off + 8 <= buf.size()) {
    const uint32_t chunk_len = ReadU32(buf, off + 4);
    const size_t body = off + 8;
    if (body + chunk_len > buf.size())
      throw DataError(Cat(path, ": truncated chunk at byte ", off, ": declares ",
                          chunk_len, " bytes but file ends at ", buf.size()));
    if (TagIs(buf, off, "fmt ")) {
      if (chunk_len < 16)
        throw DataError(Cat(path, ": fmt chunk at byte ", off, " too short"));
      format = ReadU16(buf, body);
      channels = ReadU16(buf, body + 2);
      sample_rate = ReadU32(buf, body + 4);
      bits = ReadU16(buf, body + 14);
      have_fmt = true;
    } else if (TagIs(buf, off, "data")) {
      data_off = body;
      data_len = chunk_len;
      have_data = true;
    }
    off = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (off != buf.size() && off + 8 > buf.size() && !have_data)
    throw DataError(Cat(path, ": truncated chunk header at byte ", off));

  if (!have_fmt) throw DataError(Cat(path, ": no fmt chunk found"));
  if (!have_data) throw DataError(Cat(path, ": no data chunk found"));
  if (format != 1)
    throw DataError(Cat(path, ": unsupported encoding ", format,
                        " (only PCM = 1)"));
  if (bits != 16)
    throw DataError(Cat(path, ": unsupported sample width ", bits,
                        " bits (only 16)"));
  if (channels != 1)
    throw DataError(Cat(path, ": expected mono, got ", channels, " channels"));
  if (sample_rate == 0) throw DataError(Cat(path, ": zero sample rate"));
  if (data_len % 2 != 0)
    throw DataError(Cat(path, ": odd data length ", data_len, " at byte ",
                        data_off));

  Waveform w;
  w.sample_rate = static_cast<int>(sample_rate);
  const size_t n = data_len / 2;
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    int16_t s;
    std::memcpy(&s, buf.data() + data_off + 2 * i, 2);
    w.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return w;
}

}  // namespace gdistill
