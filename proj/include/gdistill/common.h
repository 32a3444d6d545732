// gdistill/common.h

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

#ifndef GDISTILL_COMMON_H_
#define GDISTILL_COMMON_H_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gdistill {

inline constexpr const char *kVersionString = "gdistill 0.1.0";

// Defined in version.cc so the library has one canonical version symbol.
const char *VersionString();

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

// Operand shapes are incompatible with an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A configuration value violates a precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data (file, archive, corpus) is malformed or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

// A numeric failure at run time (NaN loss, NaN gradients, degenerate data).
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline void CatInto(std::ostringstream &) {}
template <typename A, typename... Rest>
void CatInto(std::ostringstream &os, A &&a, Rest &&...rest) {
  os << a;
  CatInto(os, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <typename... Args>
std::string Cat(Args &&...args) {
  std::ostringstream os;
  detail::CatInto(os, std::forward<Args>(args)...);
  return os.str();
}

inline std::string ShapeStr(const std::vector<int64_t> &shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

// 64-bit FNV-1a; used for content hashes and seed derivation.
inline uint64_t Fnv1a64(const void *data, size_t n,
                        uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char *p = static_cast<const unsigned char *>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t Fnv1a64(std::string_view s) {
  return Fnv1a64(s.data(), s.size());
}

inline std::string HexU64(uint64_t v) {
  static const char *digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace gdistill

#endif  // GDISTILL_COMMON_H_
