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

#include "bob/feedback.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>

#include "bob/error.hpp"

namespace bob {

using nlohmann::json;

namespace {

constexpr Rating kAllRatings[] = {Rating::kVeryBad, Rating::kBad, Rating::kNeutral, Rating::kGood,
                                  Rating::kGreat};

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<Rating> parse_rating(const std::string& token) {
  for (Rating r : kAllRatings) {
    if (to_string(r) == token) return r;
  }
  return std::nullopt;
}

std::string to_string(Rating rating) {
  switch (rating) {
    case Rating::kVeryBad: return "VeryBad";
    case Rating::kBad: return "Bad";
    case Rating::kNeutral: return "Neutral";
    case Rating::kGood: return "Good";
    case Rating::kGreat: return "Great";
  }
  return "Neutral";
}

std::optional<RaterRole> parse_rater_role(const std::string& token) {
  if (token == "expert") return RaterRole::kExpert;
  if (token == "non-expert") return RaterRole::kNonExpert;
  return std::nullopt;
}

std::string to_string(RaterRole role) {
  return role == RaterRole::kExpert ? "expert" : "non-expert";
}

json FeedbackRecord::to_json() const {
  return json{{"session_id", session_id},
              {"question_id", question_id},
              {"query_ref", query_ref},
              {"result_slide_id", result_slide_id},
              {"result_rank", result_rank},
              {"distance", distance},
              {"rating", to_string(rating)},
              {"rater_role", to_string(rater_role)},
              {"timestamp", timestamp}};
}

FeedbackRecord FeedbackRecord::from_json(const json& j) {
  FeedbackRecord r;
  r.session_id = j.at("session_id").get<std::string>();
  r.question_id = j.at("question_id").get<int>();
  r.query_ref = j.at("query_ref").get<std::string>();
  r.result_slide_id = j.at("result_slide_id").get<std::string>();
  r.result_rank = j.at("result_rank").get<int>();
  r.distance = j.at("distance").get<std::size_t>();
  const auto rating = parse_rating(j.at("rating").get<std::string>());
  const auto role = parse_rater_role(j.at("rater_role").get<std::string>());
  if (!rating || !role) fail(ErrorCode::kInvalidArgument, "feedback record has an invalid rating or role");
  r.rating = *rating;
  r.rater_role = *role;
  r.timestamp = j.value("timestamp", std::string());
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(ErrorCode::kInvalidArgument, "spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

json summarize_feedback(const std::vector<FeedbackRecord>& records) {
  std::map<int, std::map<std::string, int>> per_rank;
  std::map<Rating, std::vector<double>> distances;
  std::vector<double> ordinal, dist;
  json all = json::array();
  for (const auto& r : records) {
    ++per_rank[r.result_rank][to_string(r.rating)];
    distances[r.rating].push_back(static_cast<double>(r.distance));
    ordinal.push_back(static_cast<double>(static_cast<int>(r.rating)));
    dist.push_back(static_cast<double>(r.distance));
    all.push_back(r.to_json());
  }

  json ranks = json::object();
  for (const auto& [rank, counts] : per_rank) {
    json row = json::object();
    for (Rating rt : kAllRatings) {
      auto it = counts.find(to_string(rt));
      row[to_string(rt)] = it == counts.end() ? 0 : it->second;
    }
    ranks[std::to_string(rank)] = row;
  }

  json ratings = json::object();
  for (Rating rt : kAllRatings) {
    auto values = distances[rt];
    json entry{{"count", values.size()}};
    if (!values.empty()) {
      std::sort(values.begin(), values.end());
      const std::size_t n = values.size();
      entry["median_distance"] = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    } else {
      entry["median_distance"] = nullptr;
    }
    ratings[to_string(rt)] = entry;
  }

  return json{{"total", records.size()},
              {"per_rank", ranks},
              {"per_rating", ratings},
              {"spearman_rating_vs_distance", spearman(ordinal, dist)},
              {"records", all}};
}

FeedbackLog::FeedbackLog(std::optional<std::filesystem::path> path) : path_(std::move(path)) {
  if (path_ && std::filesystem::exists(*path_)) records_ = replay(*path_);
}

void FeedbackLog::append(const FeedbackRecord& record) {
  std::lock_guard lock(mutex_);
  if (path_) {
    std::ofstream out(*path_, std::ios::app | std::ios::binary);
    if (!out) fail(ErrorCode::kInvalidArgument, "cannot append to feedback log " + path_->string());
    out << record.to_json().dump() << '\n';
    out.flush();
  }
  records_.push_back(record);
}

std::vector<FeedbackRecord> FeedbackLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<FeedbackRecord> FeedbackLog::replay(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "cannot open feedback log " + path.string());
  std::vector<FeedbackRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(FeedbackRecord::from_json(json::parse(line)));
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace bob
