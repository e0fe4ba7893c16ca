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

#include "bob/index_store.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bob/error.hpp"
#include "bob/parallel.hpp"
#include "bob/tissue.hpp"

namespace bob {

void ArchiveIndex::add(IndexedSlide slide) {
  slide.bob.validate();
  const std::size_t length = slide.bob.barcode_length();
  if (entries.empty() && barcode_length == 0) barcode_length = length;
  if (length != barcode_length)
    fail(ErrorCode::kLengthMismatch,
         "slide '" + slide.slide_id + "' has barcode length " + std::to_string(length) +
             ", index uses " + std::to_string(barcode_length));
  const std::string id = slide.slide_id;
  if (!entries.emplace(id, std::move(slide)).second)
    fail(ErrorCode::kDuplicate, "slide '" + id + "' is already indexed");
}

const IndexedSlide* ArchiveIndex::find(const std::string& slide_id) const {
  auto it = entries.find(slide_id);
  return it == entries.end() ? nullptr : &it->second;
}

std::size_t ArchiveIndex::barcode_count() const {
  std::size_t n = 0;
  for (const auto& [id, slide] : entries) n += slide.bob.entries.size();
  return n;
}

WindowPlacement map_to_index_level(const PatchRef& patch, int s_l, int s_h,
                                   double clustering_mag, double indexing_mag,
                                   int level_width, int level_height) {
  if (s_h > level_width || s_h > level_height)
    fail(ErrorCode::kOutOfBounds, "s_h window does not fit the indexing level");
  const double ratio = indexing_mag / clustering_mag;
  auto place = [&](int origin, int extent, bool& clamped) {
    const double center = (origin + s_l / 2.0) * ratio;
    const long start = std::lround(center - s_h / 2.0);
    const long fitted = std::clamp(start, 0L, static_cast<long>(extent - s_h));
    clamped = clamped || fitted != start;
    return static_cast<int>(fitted);
  };
  WindowPlacement w;
  w.x = place(patch.origin_x, level_width, w.clamped);
  w.y = place(patch.origin_y, level_height, w.clamped);
  return w;
}

IndexedSlide index_slide(const SlidePyramid& slide, const IndexingConfig& cfg,
                         const FeatureExtractor& extractor) {
  cfg.validate();
  const Level& cluster_level = select_magnification(slide, cfg.m_x_c);
  std::optional<TissueMask> mask = load_mask_override(slide, cluster_level);
  if (!mask) mask = segment_tissue(cluster_level, cfg.segmentation);
  const Mosaic mosaic = build_mosaic(slide, *mask, cfg);

  const Level& index_level = select_magnification(slide, cfg.m_x_idx);
  const ExtractorDescriptor desc = extractor.descriptor();

  IndexedSlide out;
  out.slide_id = slide.slide_id();
  out.labels = slide.labels();
  out.bob.slide_id = slide.slide_id();
  out.bob.entries.resize(mosaic.patches.size());
  parallel_for(mosaic.patches.size(), [&](std::size_t i) {
    const PatchRef& patch = mosaic.patches[i];
    const WindowPlacement w =
        map_to_index_level(patch, cfg.s_l, cfg.s_h, cluster_level.magnification(),
                           index_level.magnification(), index_level.width(), index_level.height());
    const RgbImage raster =
        extractor.needs_pixels() ? read_region(index_level, w.x, w.y, cfg.s_h) : RgbImage{};
    const FeatureVector f = extractor.extract(patch, raster);
    if (f.dim() != desc.d || f.extractor_id != desc.extractor_id)
      fail(ErrorCode::kLengthMismatch, "extractor returned an inconsistent feature vector");
    out.bob.entries[i] = BobEntry{patch, minmax_barcode(f.values), w.clamped};
  });
  return out;
}

std::vector<std::filesystem::path> list_slide_dirs(const std::filesystem::path& corpus_dir) {
  if (!std::filesystem::is_directory(corpus_dir))
    fail(ErrorCode::kNotFound, "corpus directory not found: " + corpus_dir.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(corpus_dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "manifest.json"))
      dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

ArchiveIndex index_corpus(const std::filesystem::path& corpus_dir, const IndexingConfig& cfg,
                          const FeatureExtractor& extractor) {
  const auto dirs = list_slide_dirs(corpus_dir);
  std::vector<IndexedSlide> slides(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t i) {
    const SlidePyramid slide = open_slide(dirs[i]);
    slides[i] = index_slide(slide, cfg, extractor);
  });
  ArchiveIndex index;
  index.config = cfg;
  index.extractor_id = extractor.descriptor().extractor_id;
  for (auto& s : slides) index.add(std::move(s));
  return index;
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const std::vector<std::uint8_t>& b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  std::span<const std::uint8_t> raw(std::size_t n) { return {take(n), n}; }
  std::size_t position() const { return pos_; }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - pos_) fail(ErrorCode::kTruncated, "index file is truncated");
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

constexpr std::uint8_t kHasSite = 1;
constexpr std::uint8_t kHasDiagnosis = 2;
constexpr std::uint8_t kClamped = 1;

std::uint32_t crc_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, data, static_cast<uInt>(size));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> serialize_index(const ArchiveIndex& index) {
  Writer w;
  for (char c : kIndexMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kIndexVersion);

  const IndexingConfig& c = index.config;
  w.u32(static_cast<std::uint32_t>(c.k_ch));
  w.f64(c.p_m);
  w.f64(c.m_x_c);
  w.f64(c.m_x_idx);
  w.u32(static_cast<std::uint32_t>(c.s_l));
  w.u32(static_cast<std::uint32_t>(c.s_h));
  w.u32(static_cast<std::uint32_t>(c.hist_bins));
  w.f64(c.tissue_threshold);
  w.u32(static_cast<std::uint32_t>(c.kmeans.max_iters));
  w.f64(c.kmeans.rel_tol);
  w.u64(c.kmeans.seed);
  w.f64(c.segmentation.t_lo);
  w.f64(c.segmentation.t_hi);
  w.u32(static_cast<std::uint32_t>(c.segmentation.close_iters));
  w.u32(static_cast<std::uint32_t>(c.segmentation.min_component_px));
  w.str(index.extractor_id);
  w.u32(static_cast<std::uint32_t>(index.barcode_length));

  w.u32(static_cast<std::uint32_t>(index.entries.size()));
  for (const auto& [id, slide] : index.entries) {
    w.str(slide.slide_id);
    const std::uint8_t flags = (slide.labels.primary_site ? kHasSite : 0) |
                               (slide.labels.primary_diagnosis ? kHasDiagnosis : 0);
    w.u8(flags);
    if (slide.labels.primary_site) w.str(*slide.labels.primary_site);
    if (slide.labels.primary_diagnosis) w.str(*slide.labels.primary_diagnosis);
    w.u32(static_cast<std::uint32_t>(slide.bob.entries.size()));
    for (const BobEntry& e : slide.bob.entries) {
      w.i32(e.patch.grid_x);
      w.i32(e.patch.grid_y);
      w.i32(e.patch.origin_x);
      w.i32(e.patch.origin_y);
      w.u32(static_cast<std::uint32_t>(e.patch.color_cluster));
      w.u8(e.clamped ? kClamped : 0);
      if (e.barcode.size() != index.barcode_length)
        fail(ErrorCode::kLengthMismatch, "barcode length differs from index header");
      w.raw(e.barcode.to_bytes());
    }
  }
  w.u32(crc_of(w.bytes().data(), w.bytes().size()));
  return std::move(w.bytes());
}

namespace {

ArchiveIndex parse_body(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes.data(), bytes.size() - 4);
  r.raw(8);  // magic + version, checked by the caller

  ArchiveIndex index;
  IndexingConfig& c = index.config;
  c.k_ch = static_cast<int>(r.u32());
  c.p_m = r.f64();
  c.m_x_c = r.f64();
  c.m_x_idx = r.f64();
  c.s_l = static_cast<int>(r.u32());
  c.s_h = static_cast<int>(r.u32());
  c.hist_bins = static_cast<int>(r.u32());
  c.tissue_threshold = r.f64();
  c.kmeans.max_iters = static_cast<int>(r.u32());
  c.kmeans.rel_tol = r.f64();
  c.kmeans.seed = r.u64();
  c.segmentation.t_lo = r.f64();
  c.segmentation.t_hi = r.f64();
  c.segmentation.close_iters = static_cast<int>(r.u32());
  c.segmentation.min_component_px = static_cast<int>(r.u32());
  index.extractor_id = r.str();
  index.barcode_length = r.u32();

  const std::uint32_t n_slides = r.u32();
  const std::size_t barcode_bytes = (index.barcode_length + 7) / 8;
  for (std::uint32_t s = 0; s < n_slides; ++s) {
    IndexedSlide slide;
    slide.slide_id = r.str();
    const std::uint8_t flags = r.u8();
    if (flags & kHasSite) slide.labels.primary_site = r.str();
    if (flags & kHasDiagnosis) slide.labels.primary_diagnosis = r.str();
    slide.bob.slide_id = slide.slide_id;
    const std::uint32_t n_patches = r.u32();
    for (std::uint32_t p = 0; p < n_patches; ++p) {
      BobEntry e;
      e.patch.slide_id = slide.slide_id;
      e.patch.grid_x = r.i32();
      e.patch.grid_y = r.i32();
      e.patch.origin_x = r.i32();
      e.patch.origin_y = r.i32();
      e.patch.color_cluster = static_cast<int>(r.u32());
      e.clamped = (r.u8() & kClamped) != 0;
      e.barcode = Barcode::from_bytes(r.raw(barcode_bytes), index.barcode_length);
      slide.bob.entries.push_back(std::move(e));
    }
    index.entries.emplace(slide.slide_id, std::move(slide));
  }
  if (r.position() != bytes.size() - 4)
    fail(ErrorCode::kChecksumMismatch, "index file has trailing bytes");
  if (index.entries.size() != n_slides)
    fail(ErrorCode::kDuplicate, "index contains duplicate slide ids");
  return index;
}

}  // namespace

ArchiveIndex deserialize_index(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) fail(ErrorCode::kTruncated, "index file is truncated");
  if (std::memcmp(bytes.data(), kIndexMagic, 4) != 0)
    fail(ErrorCode::kVersionMismatch, "not a BoB index (bad magic)");
  std::uint32_t version = 0;
  for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(bytes[4 + i]) << (8 * i);
  if (version != kIndexVersion)
    fail(ErrorCode::kVersionMismatch,
         "unsupported index version " + std::to_string(version) + ", expected " +
             std::to_string(kIndexVersion));

  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
  const bool crc_ok = stored == crc_of(bytes.data(), bytes.size() - 4);

  // A short file fails parsing before the checksum means anything, so
  // truncation is reported as such; any other damage is a checksum error.
  ArchiveIndex index;
  try {
    index = parse_body(bytes);
  } catch (const Error& e) {
    if (crc_ok || e.code() == ErrorCode::kTruncated) throw;
    fail(ErrorCode::kChecksumMismatch, "index checksum mismatch");
  }
  if (!crc_ok) fail(ErrorCode::kChecksumMismatch, "index checksum mismatch");
  return index;
}

void save_index(const ArchiveIndex& index, const std::filesystem::path& path) {
  const auto bytes = serialize_index(index);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kInvalidArgument, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kInvalidArgument, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ArchiveIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kNotFound, "cannot open index " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_index(bytes);
}

std::vector<std::string> filter_by_site(const ArchiveIndex& index, const std::string& site) {
  const std::string wanted = normalize_label(site);
  std::vector<std::string> ids;
  for (const auto& [id, slide] : index.entries) {
    if (slide.labels.primary_site && normalize_label(*slide.labels.primary_site) == wanted)
      ids.push_back(id);
  }
  return ids;
}

}  // namespace bob
