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

#include "realmotion/hashing.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace realmotion
{

std::string to_hex(uint64_t value)
{
  static const char * digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return s;
}

std::string hash_file(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file for hashing: " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  return to_hex(fnv1a64(buf.data(), buf.size()));
}

}  // namespace realmotion
