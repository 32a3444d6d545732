// src/byte_io.h

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

#ifndef GDISTILL_SRC_BYTE_IO_H_
#define GDISTILL_SRC_BYTE_IO_H_

// Private helpers shared by the binary file writers (checkpoints, feature
// archives). All on-disk integers are little-endian, so raw memcpy of PODs
// is only correct on little-endian hosts.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "gdistill/common.h"

namespace gdistill {

static_assert(std::endian::native == std::endian::little,
              "binary file formats are little-endian; big-endian hosts need "
              "byte swaps here");

inline void PutBytes(std::string &out, const void *p, size_t n) {
  out.append(static_cast<const char *>(p), n);
}

template <typename V>
void PutPod(std::string &out, V v) {
  PutBytes(out, &v, sizeof(V));
}

inline void PutString(std::string &out, const std::string &s) {
  PutPod<uint32_t>(out, static_cast<uint32_t>(s.size()));
  PutBytes(out, s.data(), s.size());
}

// Bounds-checked reader over an in-memory file image. Error messages name
// the absolute byte offset so corrupt files are easy to inspect.
class ByteReader {
 public:
  ByteReader(const std::string &data, const std::string &path)
      : data_(data), path_(path) {}

  const char *Take(size_t n) {
    if (pos_ + n > data_.size())
      throw DataError(Cat(path_, ": truncated at byte ", pos_, ": need ", n,
                          " bytes but file ends at ", data_.size()));
    const char *p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

  template <typename V>
  V Pod() {
    V v;
    std::memcpy(&v, Take(sizeof(V)), sizeof(V));
    return v;
  }

  std::string Str() {
    const uint32_t n = Pod<uint32_t>();
    return std::string(Take(n), n);
  }

  size_t pos() const { return pos_; }

 private:
  const std::string &data_;
  std::string path_;
  size_t pos_ = 0;
};

inline std::string ReadFileBytes(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(Cat("cannot open '", path, "' for reading"));
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

inline void WriteFileBytes(const std::string &path, const std::string &data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(Cat("cannot open '", path, "' for writing"));
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw DataError(Cat("short write to '", path, "'"));
}

}  // namespace gdistill

#endif  // GDISTILL_SRC_BYTE_IO_H_
