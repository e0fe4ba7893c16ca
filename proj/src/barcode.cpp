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

#include "bob/barcode.hpp"

namespace bob {

std::vector<std::uint8_t> Barcode::to_bytes() const {
  std::vector<std::uint8_t> bytes((length_ + 7) / 8, 0);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(words_[i / 8] >> (8 * (i % 8)));
  }
  return bytes;
}

Barcode Barcode::from_bytes(std::span<const std::uint8_t> bytes, std::size_t length) {
  if (bytes.size() != (length + 7) / 8)
    fail(ErrorCode::kLengthMismatch, "barcode byte count does not match length");
  Barcode b(length);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    b.words_[i / 8] |= static_cast<std::uint64_t>(bytes[i]) << (8 * (i % 8));
  }
  // Padding must stay zero so packed comparisons ignore it.
  if (length % 64 != 0 && !b.words_.empty()) {
    const std::uint64_t keep = (std::uint64_t{1} << (length % 64)) - 1;
    if (b.words_.back() & ~keep)
      fail(ErrorCode::kLengthMismatch, "barcode padding bits are set");
  }
  return b;
}

std::string Barcode::to_string() const {
  std::string s(length_, '0');
  for (std::size_t i = 0; i < length_; ++i) {
    if (test(i)) s[i] = '1';
  }
  return s;
}

Barcode Barcode::from_string(const std::string& bits) {
  Barcode b(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      b.set(i);
    } else if (bits[i] != '0') {
      fail(ErrorCode::kInvalidArgument, "barcode string must contain only 0 and 1");
    }
  }
  return b;
}

void BunchOfBarcodes::validate() const {
  if (entries.empty())
    fail(ErrorCode::kEmptySlide, "bunch of barcodes for '" + slide_id + "' is empty");
  const std::size_t length = entries.front().barcode.size();
  for (const auto& e : entries) {
    if (e.barcode.size() != length)
      fail(ErrorCode::kLengthMismatch, "bunch '" + slide_id + "' mixes barcode lengths");
  }
}

}  // namespace bob
