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

#include "bob/error.hpp"

namespace bob {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kMissingManifest: return "missing manifest";
    case ErrorCode::kBadManifest: return "bad manifest";
    case ErrorCode::kInsufficientPyramid: return "insufficient pyramid";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kOutOfBounds: return "out of bounds";
    case ErrorCode::kImageIo: return "image i/o";
    case ErrorCode::kEmptySlide: return "empty slide";
    case ErrorCode::kLengthMismatch: return "length mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kUnknownKey: return "unknown key";
    case ErrorCode::kBadFeatureFile: return "bad feature file";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kChecksumMismatch: return "checksum mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kEmptyCandidates: return "empty candidate set";
    case ErrorCode::kNotFound: return "not found";
    case ErrorCode::kDuplicate: return "duplicate";
  }
  return "unknown";
}

}  // namespace bob
