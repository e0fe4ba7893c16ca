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

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "bob/feedback.hpp"
#include "bob/index_store.hpp"
#include "bob/search.hpp"

namespace httplib {
class Server;
}

namespace bob {

struct ServiceOptions {
  // Slide directories for thumbnails; thumbnails return 404 without it.
  std::optional<std::filesystem::path> corpus_dir;
  // Durable feedback log; in-memory when unset.
  std::optional<std::filesystem::path> feedback_log;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// One question of a feedback session: a query and its top three results,
// shown in a per-session shuffled order.
struct SessionQuestion {
  std::string query_id;
  std::vector<ScanHit> top;               // true rank order
  std::vector<std::size_t> display_order;  // indices into `top`
};

struct Session {
  std::string session_id;
  std::uint64_t seed = 0;
  std::vector<SessionQuestion> questions;
  std::set<std::pair<int, std::string>> rated;  // (question_id, slide_id)
};

// Transport-independent request handlers. Every method takes the raw body
// (or path parameter) and returns a complete response, so tests can drive
// it in process and the HTTP layer only routes.
class SearchService {
 public:
  SearchService(ArchiveIndex index, ServiceOptions options = {});

  std::shared_ptr<const ArchiveIndex> index() const;
  // Replaces the index; requests already running keep the old generation.
  void reload_index(ArchiveIndex index);
  std::uint64_t generation() const;

  Response list_slides() const;
  Response thumbnail(const std::string& slide_id) const;
  Response search_scan(const std::string& body) const;
  Response search_patch(const std::string& body) const;
  Response create_session(const std::string& body);
  Response next_question(const std::string& session_id) const;
  Response record_feedback(const std::string& body);
  Response feedback_summary() const;

  const FeedbackLog& feedback_log() const { return log_; }

 private:
  std::optional<std::filesystem::path> slide_dir(const std::string& slide_id) const;

  mutable std::mutex index_mutex_;
  std::shared_ptr<const ArchiveIndex> index_;
  std::uint64_t generation_ = 1;

  ServiceOptions options_;
  std::map<std::string, std::filesystem::path> slide_dirs_;

  mutable std::mutex session_mutex_;
  std::map<std::string, Session> sessions_;
  std::uint64_t next_session_ = 1;

  FeedbackLog log_;
};

// Maps the handlers onto the documented routes.
void bind_routes(httplib::Server& server, SearchService& service);

// Blocks serving on host:port.
void serve(SearchService& service, const std::string& host, int port);

}  // namespace bob
