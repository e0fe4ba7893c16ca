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

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <tuple>

#include <Eigen/Dense>

#include "bob/image.hpp"
#include "bob/mosaic.hpp"

namespace bob {

struct FeatureVector {
  Eigen::VectorXd values;
  std::string extractor_id;
  bool degenerate = false;  // all-zero descriptor

  Eigen::Index dim() const { return values.size(); }
};

enum class ExtractorKind { kBuiltIn, kExternal };

struct ExtractorDescriptor {
  std::string extractor_id;
  int d = 0;
  ExtractorKind kind = ExtractorKind::kBuiltIn;
};

// (slide_id, grid_x, grid_y)
using PatchKey = std::tuple<std::string, int, int>;

inline PatchKey key_of(const PatchRef& p) {
  return {p.slide_id, p.grid_x, p.grid_y};
}

// Pluggable boundary between the indexer and whatever turns a patch into a
// feature vector.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual ExtractorDescriptor descriptor() const = 0;
  // Whether extract() reads the raster; external extractors only need keys.
  virtual bool needs_pixels() const { return true; }
  virtual FeatureVector extract(const PatchRef& patch,
                                const RgbImage& raster) const = 0;
};

// Reference descriptor "ref-v1", 256 values, L2-normalized. Layout:
//
//   [  0,  32)  4x4 cells, row-major: (mean, std) of luminance / 255
//   [ 32,  80)  16-bin histograms of R, G, B, each summing to 1
//   [ 80, 208)  2x2 quadrants, row-major; per quadrant 2 magnitude bands
//               (|grad| < 8, then >= 8) x 16 orientation bins, the 32
//               values summing to 1
//   [208, 256)  4x4 cells, row-major: mean R, G, B / 255
//
// Gradients are central differences of luminance (one-sided at borders);
// orientation bin = floor((atan2(gy, gx) + pi) / (2 pi) * 16) mod 16.
namespace ref_v1 {
inline constexpr const char* kId = "ref-v1";
inline constexpr int kDim = 256;
inline constexpr int kLumOffset = 0;
inline constexpr int kColorHistOffset = 32;
inline constexpr int kGradientOffset = 80;
inline constexpr int kCellColorOffset = 208;
inline constexpr int kGrid = 4;
inline constexpr int kColorBins = 16;
inline constexpr int kOrientationBins = 16;
inline constexpr double kMagnitudeSplit = 8.0;
}  // namespace ref_v1

// Unnormalized ref-v1 layout; exposed for tests and debugging sidecars.
Eigen::VectorXd reference_descriptor_raw(const RgbImage& raster);

// Throws kDimensionMismatch when the raster is not s_h x s_h.
FeatureVector extract_reference_features(const RgbImage& raster, int s_h);

class ReferenceExtractor : public FeatureExtractor {
 public:
  explicit ReferenceExtractor(int s_h) : s_h_(s_h) {}
  ExtractorDescriptor descriptor() const override {
    return {ref_v1::kId, ref_v1::kDim, ExtractorKind::kBuiltIn};
  }
  FeatureVector extract(const PatchRef& patch,
                        const RgbImage& raster) const override;

 private:
  int s_h_;
};

struct ExternalFeatures {
  std::string extractor_id;
  int d = 0;
  std::map<PatchKey, FeatureVector> vectors;
};

// Parses the external feature text format:
//   #extractor_id=<id> d=<int>
//   slide_id grid_x grid_y v_1 ... v_d
// Throws kBadFeatureFile (header, parse, duplicate key, id mismatch),
// kLengthMismatch or kNonFinite, naming the 1-based line.
ExternalFeatures import_external_features(std::istream& in,
                                          const std::string& expected_id = {});
ExternalFeatures import_external_features(const std::filesystem::path& path,
                                          const std::string& expected_id = {});

// Serves imported vectors by patch key; kUnknownKey when one is missing.
class ExternalExtractor : public FeatureExtractor {
 public:
  explicit ExternalExtractor(ExternalFeatures features)
      : features_(std::move(features)) {}
  ExtractorDescriptor descriptor() const override {
    return {features_.extractor_id, features_.d, ExtractorKind::kExternal};
  }
  bool needs_pixels() const override { return false; }
  FeatureVector extract(const PatchRef& patch,
                        const RgbImage& raster) const override;

  const ExternalFeatures& features() const { return features_; }

 private:
  ExternalFeatures features_;
};

}  // namespace bob
