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
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace bob {

// Five-point scale from strong disagreement to strong agreement.
enum class Rating { kVeryBad = 1, kBad = 2, kNeutral = 3, kGood = 4, kGreat = 5 };

std::optional<Rating> parse_rating(const std::string& token);
std::string to_string(Rating rating);

enum class RaterRole { kExpert, kNonExpert };

std::optional<RaterRole> parse_rater_role(const std::string& token);
std::string to_string(RaterRole role);

struct FeedbackRecord {
  std::string session_id;
  int question_id = 0;
  std::string query_ref;        // query slide id
  std::string result_slide_id;
  int result_rank = 1;          // true rank, 1..3, resolved server-side
  std::size_t distance = 0;     // scan distance of the rated result
  Rating rating = Rating::kNeutral;
  RaterRole rater_role = RaterRole::kNonExpert;
  std::string timestamp;        // ISO 8601 UTC

  nlohmann::json to_json() const;
  static FeedbackRecord from_json(const nlohmann::json& j);

  bool operator==(const FeedbackRecord&) const = default;
};

// Spearman rank correlation with average ranks for ties; 0 when either
// side is constant or there are fewer than two pairs.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// Per-rank rating frequencies, per-rating median distance and the
// rating-vs-distance rank correlation. Depends only on the records, so a
// replayed log gives identical aggregates.
nlohmann::json summarize_feedback(const std::vector<FeedbackRecord>& records);

// Append-only JSON-lines log. Appends are serialized and flushed per record.
class FeedbackLog {
 public:
  // In-memory only when no path is given; otherwise existing records are
  // replayed and new ones appended.
  explicit FeedbackLog(std::optional<std::filesystem::path> path = std::nullopt);

  void append(const FeedbackRecord& record);
  std::vector<FeedbackRecord> records() const;

  static std::vector<FeedbackRecord> replay(const std::filesystem::path& path);

 private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> path_;
  std::vector<FeedbackRecord> records_;
};

std::string utc_timestamp();

}  // namespace bob
