// Copyright 2026 The RealMotion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REALMOTION__HASHING_HPP_
#define REALMOTION__HASHING_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace realmotion
{

inline uint64_t fnv1a64(const void * data, size_t n, uint64_t seed = 0xcbf29ce484222325ULL)
{
  const auto * bytes = static_cast<const unsigned char *>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

std::string to_hex(uint64_t value);

/// FNV-1a digest of a file's bytes, as a 16-char hex string.
std::string hash_file(const std::string & path);

}  // namespace realmotion

#endif  // REALMOTION__HASHING_HPP_
