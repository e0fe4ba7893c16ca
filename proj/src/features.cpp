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

#include "bob/features.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "bob/error.hpp"

namespace bob {

Eigen::VectorXd reference_descriptor_raw(const RgbImage& raster) {
  using namespace ref_v1;
  const int w = raster.width;
  const int h = raster.height;
  if (w < kGrid || h < kGrid)
    fail(ErrorCode::kDimensionMismatch, "reference descriptor needs at least 4x4 pixels");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kDim);

  Eigen::MatrixXd lum(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) lum(y, x) = luminance(raster.pixel(x, y));

  // Cell statistics on a 4x4 grid; the last row/column absorbs remainders.
  auto cell_span = [](int extent, int i) {
    const int size = extent / kGrid;
    const int begin = i * size;
    const int end = i == kGrid - 1 ? extent : begin + size;
    return std::pair{begin, end};
  };
  for (int cy = 0; cy < kGrid; ++cy) {
    const auto [y0, y1] = cell_span(h, cy);
    for (int cx = 0; cx < kGrid; ++cx) {
      const auto [x0, x1] = cell_span(w, cx);
      const auto block = lum.block(y0, x0, y1 - y0, x1 - x0);
      const double mean = block.mean();
      const double var = (block.array() - mean).square().mean();
      const int cell = cy * kGrid + cx;
      v(kLumOffset + 2 * cell) = mean / 255.0;
      v(kLumOffset + 2 * cell + 1) = std::sqrt(var) / 255.0;

      double rgb[3] = {0, 0, 0};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          for (int c = 0; c < 3; ++c) rgb[c] += raster.pixel(x, y)[c];
      const double area = static_cast<double>((y1 - y0) * (x1 - x0));
      for (int c = 0; c < 3; ++c) v(kCellColorOffset + 3 * cell + c) = rgb[c] / area / 255.0;
    }
  }

  const double n = static_cast<double>(w) * h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto* p = raster.pixel(x, y);
      for (int c = 0; c < 3; ++c) v(kColorHistOffset + c * kColorBins + p[c] * kColorBins / 256) += 1.0 / n;
    }
  }

  // Orientation histograms per quadrant and magnitude band.
  const int qw = w / 2, qh = h / 2;
  double quadrant_px[4] = {0, 0, 0, 0};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
      const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
      const double gx = (lum(y, xr) - lum(y, xl)) / (xr - xl);
      const double gy = (lum(yd, x) - lum(yu, x)) / (yd - yu);
      const double mag = std::hypot(gx, gy);
      const double theta = std::atan2(gy, gx);
      int bin = static_cast<int>(std::floor((theta + std::numbers::pi) / (2 * std::numbers::pi) * kOrientationBins));
      bin = ((bin % kOrientationBins) + kOrientationBins) % kOrientationBins;
      const int band = mag < kMagnitudeSplit ? 0 : 1;
      const int quadrant = (y >= qh ? 2 : 0) + (x >= qw ? 1 : 0);
      v(kGradientOffset + quadrant * 2 * kOrientationBins + band * kOrientationBins + bin) += 1.0;
      quadrant_px[quadrant] += 1.0;
    }
  }
  for (int q = 0; q < 4; ++q) {
    if (quadrant_px[q] > 0) v.segment(kGradientOffset + q * 2 * kOrientationBins, 2 * kOrientationBins) /= quadrant_px[q];
  }
  return v;
}

FeatureVector extract_reference_features(const RgbImage& raster, int s_h) {
  if (raster.width != s_h || raster.height != s_h)
    fail(ErrorCode::kDimensionMismatch,
         "reference extractor expects " + std::to_string(s_h) + "x" + std::to_string(s_h) +
             " raster, got " + std::to_string(raster.width) + "x" + std::to_string(raster.height));
  FeatureVector f;
  f.extractor_id = ref_v1::kId;
  f.values = reference_descriptor_raw(raster);
  const double norm = f.values.norm();
  if (norm > 0) {
    f.values /= norm;
  } else {
    f.degenerate = true;
  }
  return f;
}

FeatureVector ReferenceExtractor::extract(const PatchRef&, const RgbImage& raster) const {
  return extract_reference_features(raster, s_h_);
}

ExternalFeatures import_external_features(std::istream& in, const std::string& expected_id) {
  ExternalFeatures out;
  std::string line;
  std::size_t line_no = 0;
  auto bad = [&](ErrorCode code, const std::string& what) {
    fail(code, "feature file line " + std::to_string(line_no) + ": " + what);
  };

  // Header.
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (line.rfind("#", 0) != 0) bad(ErrorCode::kBadFeatureFile, "missing '#extractor_id=<id> d=<int>' header");
  {
    std::istringstream header(line.substr(1));
    std::string token;
    bool have_d = false;
    while (header >> token) {
      if (token.rfind("extractor_id=", 0) == 0) {
        out.extractor_id = token.substr(13);
      } else if (token.rfind("d=", 0) == 0) {
        try {
          out.d = std::stoi(token.substr(2));
          have_d = true;
        } catch (const std::exception&) {
          bad(ErrorCode::kBadFeatureFile, "bad dimension '" + token + "'");
        }
      }
    }
    if (out.extractor_id.empty() || !have_d || out.d < 2)
      bad(ErrorCode::kBadFeatureFile, "header needs extractor_id and d >= 2");
  }
  if (!expected_id.empty() && out.extractor_id != expected_id)
    bad(ErrorCode::kBadFeatureFile,
        "extractor_id '" + out.extractor_id + "' does not match expected '" + expected_id + "'");

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::string slide_id;
    int gx = 0, gy = 0;
    if (!(row >> slide_id >> gx >> gy)) bad(ErrorCode::kBadFeatureFile, "expected 'slide_id grid_x grid_y v_1 ... v_d'");
    std::vector<double> values;
    std::string token;
    while (row >> token) {
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0') bad(ErrorCode::kBadFeatureFile, "bad number '" + token + "'");
      if (!std::isfinite(v)) bad(ErrorCode::kNonFinite, "non-finite value '" + token + "'");
      values.push_back(v);
    }
    if (static_cast<int>(values.size()) != out.d)
      bad(ErrorCode::kLengthMismatch,
          "row has " + std::to_string(values.size()) + " values, header says d=" + std::to_string(out.d));
    FeatureVector f;
    f.extractor_id = out.extractor_id;
    f.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (!out.vectors.emplace(PatchKey{slide_id, gx, gy}, std::move(f)).second)
      bad(ErrorCode::kBadFeatureFile, "duplicate row for " + slide_id + " " + std::to_string(gx) + " " + std::to_string(gy));
  }
  return out;
}

ExternalFeatures import_external_features(const std::filesystem::path& path, const std::string& expected_id) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kBadFeatureFile, "cannot open feature file " + path.string());
  return import_external_features(in, expected_id);
}

FeatureVector ExternalExtractor::extract(const PatchRef& patch, const RgbImage&) const {
  auto it = features_.vectors.find(key_of(patch));
  if (it == features_.vectors.end())
    fail(ErrorCode::kUnknownKey, "no external feature for " + patch.slide_id + " (" +
                                     std::to_string(patch.grid_x) + ", " + std::to_string(patch.grid_y) + ")");
  return it->second;
}

}  // namespace bob
