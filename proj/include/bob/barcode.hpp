// Copyright 2026 The BoB Search Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bob/error.hpp"
#include "bob/features.hpp"
#include "bob/mosaic.hpp"

namespace bob {

// Fixed-length bit vector. Bit i lives in word i / 64 at position i % 64
// (little-endian); padding bits in the last word are always zero.
class Barcode {
 public:
  Barcode() = default;
  explicit Barcode(std::size_t length)
      : length_(length), words_((length + 63) / 64, 0) {}

  std::size_t size() const { return length_; }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool v = true) {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (v) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }

  std::span<const std::uint64_t> words() const { return words_; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  // ceil(size / 8) bytes, bit i at byte i / 8, position i % 8.
  std::vector<std::uint8_t> to_bytes() const;
  static Barcode from_bytes(std::span<const std::uint8_t> bytes,
                            std::size_t length);

  // "0101..." with bit 0 first.
  std::string to_string() const;
  static Barcode from_string(const std::string& bits);

  bool operator==(const Barcode&) const = default;

 private:
  std::size_t length_ = 0;
  std::vector<std::uint64_t> words_;
};

// Bit i = 1 iff f[i+1] - f[i] > 0 (ties give 0); length d - 1.
template <typename Derived>
Barcode minmax_barcode(const Eigen::DenseBase<Derived>& f) {
  const Eigen::Index d = f.size();
  if (d < 2) fail(ErrorCode::kInvalidArgument, "minmax_barcode: need d >= 2");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!std::isfinite(static_cast<double>(f(i))))
      fail(ErrorCode::kNonFinite,
           "minmax_barcode: non-finite value at " + std::to_string(i));
  }
  Barcode b(static_cast<std::size_t>(d - 1));
  for (Eigen::Index i = 0; i + 1 < d; ++i) {
    if (f(i + 1) - f(i) > 0) b.set(static_cast<std::size_t>(i));
  }
  return b;
}

inline Barcode minmax_barcode(const FeatureVector& f) {
  return minmax_barcode(f.values);
}

// Packed XOR + popcount.
inline std::size_t hamming_unchecked(const Barcode& a, const Barcode& b) {
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t n = 0;
  for (std::size_t i = 0; i < wa.size(); ++i)
    n += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
  return n;
}

// Throws kLengthMismatch on unequal lengths.
inline std::size_t hamming(const Barcode& a, const Barcode& b) {
  if (a.size() != b.size())
    fail(ErrorCode::kLengthMismatch,
         "hamming: lengths " + std::to_string(a.size()) + " and " +
             std::to_string(b.size()));
  return hamming_unchecked(a, b);
}

struct BobEntry {
  PatchRef patch;
  Barcode barcode;
  bool clamped = false;  // high-magnification window was clamped to fit

  bool operator==(const BobEntry&) const = default;
};

struct BunchOfBarcodes {
  std::string slide_id;
  std::vector<BobEntry> entries;

  std::size_t barcode_length() const {
    return entries.empty() ? 0 : entries.front().barcode.size();
  }
  // Throws if empty or lengths differ.
  void validate() const;

  bool operator==(const BunchOfBarcodes&) const = default;
};

}  // namespace bob
