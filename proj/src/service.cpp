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

#include "bob/service.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>

#include <unistd.h>

#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include "httplib.h"

#include "bob/error.hpp"
#include "bob/features.hpp"
#include "bob/json_codec.hpp"
#include "bob/random.hpp"

namespace bob {

using nlohmann::json;

namespace {

Response json_response(int status, const json& j) {
  return {status, "application/json", j.dump()};
}

Response error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", {{"status", status}, {"message", message}}}});
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kEmptyCandidates:
    case ErrorCode::kDuplicate:
      return 409;
    default:
      return 422;
  }
}

template <typename F>
Response guarded(F&& handler) {
  try {
    return handler();
  } catch (const json::parse_error& e) {
    return error_response(400, std::string("malformed JSON: ") + e.what());
  } catch (const json::exception& e) {
    return error_response(422, std::string("invalid request: ") + e.what());
  } catch (const Error& e) {
    return error_response(status_for(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

json parse_object(const std::string& body) {
  json j = json::parse(body);
  if (!j.is_object()) fail(ErrorCode::kInvalidArgument, "request body must be a JSON object");
  return j;
}

std::string decode_base64(std::string text) {
  namespace it = boost::archive::iterators;
  using Decoder = it::transform_width<it::binary_from_base64<std::string::const_iterator>, 8, 6>;
  std::erase_if(text, [](char c) { return c == '\n' || c == '\r' || c == ' ' || c == '\t'; });
  if (text.size() % 4 != 0) fail(ErrorCode::kInvalidArgument, "base64 length is not a multiple of 4");
  const std::size_t pad = text.empty() ? 0 : static_cast<std::size_t>(std::count(text.end() - 2, text.end(), '='));
  std::replace(text.end() - static_cast<std::ptrdiff_t>(pad), text.end(), '=', 'A');
  std::string out;
  try {
    out.assign(Decoder(text.cbegin()), Decoder(text.cend()));
  } catch (const std::exception&) {
    fail(ErrorCode::kInvalidArgument, "invalid base64 payload");
  }
  out.resize(out.size() - pad);
  return out;
}

// Removes the directory on scope exit.
struct ScratchDir {
  std::filesystem::path path;
  ScratchDir() {
    static std::atomic<std::uint64_t> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("bob-upload-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

// Writes the uploaded manifest and level files to a scratch directory,
// validates them as a slide and indexes it with the index's settings.
IndexedSlide index_upload(const json& upload, const ArchiveIndex& index) {
  if (index.extractor_id != ref_v1::kId)
    fail(ErrorCode::kInvalidArgument,
         "uploads need the built-in extractor; this index uses '" + index.extractor_id + "'");
  ScratchDir scratch;
  for (const auto& [name, data] : upload.at("files").items()) {
    const std::filesystem::path p(name);
    if (name.empty() || p.has_parent_path() || name == ".." || name == "." || name == "manifest.json")
      fail(ErrorCode::kInvalidArgument, "invalid upload file name '" + name + "'");
    std::ofstream(scratch.path / p, std::ios::binary) << decode_base64(data.get<std::string>());
  }
  std::ofstream(scratch.path / "manifest.json", std::ios::binary) << upload.at("manifest").dump();
  const SlidePyramid slide = open_slide(scratch.path);
  return index_slide(slide, index.config, ReferenceExtractor(index.config.s_h));
}

ModeFilter make_filter(const json& req, const SlideLabels& query_labels) {
  const SearchMode mode = parse_mode(req.value("mode", std::string("horizontal")));
  if (mode == SearchMode::kHorizontal) return ModeFilter::horizontal();
  std::string site = req.value("site", query_labels.primary_site.value_or(""));
  if (site.empty()) fail(ErrorCode::kInvalidArgument, "vertical search needs a site");
  return ModeFilter::vertical(std::move(site));
}

json question_json(const Session& s, std::size_t q) {
  const SessionQuestion& question = s.questions[q];
  json results = json::array();
  for (std::size_t i = 0; i < question.display_order.size(); ++i) {
    const ScanHit& hit = question.top[question.display_order[i]];
    results.push_back({{"display_index", i},
                       {"slide_id", hit.slide_id},
                       {"thumbnail", thumbnail_url(hit.slide_id)},
                       {"rated", s.rated.contains({static_cast<int>(q), hit.slide_id})}});
  }
  return json{{"session_id", s.session_id},
              {"done", false},
              {"question_id", q},
              {"total", s.questions.size()},
              {"query", {{"slide_id", question.query_id}, {"thumbnail", thumbnail_url(question.query_id)}}},
              {"results", results}};
}

}  // namespace

SearchService::SearchService(ArchiveIndex index, ServiceOptions options)
    : index_(std::make_shared<const ArchiveIndex>(std::move(index))),
      options_(std::move(options)),
      log_(options_.feedback_log) {
  if (options_.corpus_dir) {
    for (const auto& dir : list_slide_dirs(*options_.corpus_dir)) {
      slide_dirs_.emplace(open_slide(dir).slide_id(), dir);
    }
  }
}

std::shared_ptr<const ArchiveIndex> SearchService::index() const {
  std::lock_guard lock(index_mutex_);
  return index_;
}

void SearchService::reload_index(ArchiveIndex index) {
  auto next = std::make_shared<const ArchiveIndex>(std::move(index));
  std::lock_guard lock(index_mutex_);
  index_ = std::move(next);
  ++generation_;
}

std::uint64_t SearchService::generation() const {
  std::lock_guard lock(index_mutex_);
  return generation_;
}

std::optional<std::filesystem::path> SearchService::slide_dir(const std::string& slide_id) const {
  auto it = slide_dirs_.find(slide_id);
  if (it == slide_dirs_.end()) return std::nullopt;
  return it->second;
}

Response SearchService::list_slides() const {
  return guarded([&] {
    const auto idx = index();
    json slides = json::array();
    for (const auto& [id, slide] : idx->entries) slides.push_back(slide_summary_json(slide));
    return json_response(200, json{{"extractor_id", idx->extractor_id},
                                   {"barcode_length", idx->barcode_length},
                                   {"slides", slides}});
  });
}

Response SearchService::thumbnail(const std::string& slide_id) const {
  return guarded([&] {
    const auto dir = slide_dir(slide_id);
    if (!dir) fail(ErrorCode::kNotFound, "no thumbnail for slide '" + slide_id + "'");
    const SlidePyramid slide = open_slide(*dir);
    return Response{200, "image/png", encode_png(slide.thumbnail_level().pixels())};
  });
}

Response SearchService::search_scan(const std::string& body) const {
  return guarded([&] {
    const auto idx = index();
    const json req = parse_object(body);
    const int k = req.value("k", 10);
    ScanQuery query;
    if (req.contains("slide_id")) {
      const std::string id = req.at("slide_id").get<std::string>();
      const IndexedSlide* slide = idx->find(id);
      if (!slide) fail(ErrorCode::kNotFound, "unknown slide '" + id + "'");
      query = ScanQuery::from_slide(*slide, make_filter(req, slide->labels), k);
    } else if (req.contains("upload")) {
      const IndexedSlide slide = index_upload(req.at("upload"), *idx);
      query = ScanQuery::from_slide(slide, make_filter(req, slide.labels), k);
    } else {
      fail(ErrorCode::kInvalidArgument, "request needs 'slide_id' or 'upload'");
    }
    query.mosaic_fraction = req.value("fraction", 1.0);
    query.seed = req.value("seed", std::uint64_t{0});
    const SearchResult result = scan_knn(query, *idx);
    return json_response(200, search_result_json(result, query, *idx));
  });
}

Response SearchService::search_patch(const std::string& body) const {
  return guarded([&] {
    const auto idx = index();
    const json req = parse_object(body);
    const std::string id = req.at("slide_id").get<std::string>();
    const int gx = req.at("grid_x").get<int>();
    const int gy = req.at("grid_y").get<int>();
    const IndexedSlide* slide = idx->find(id);
    if (!slide) fail(ErrorCode::kNotFound, "unknown slide '" + id + "'");
    auto it = std::find_if(slide->bob.entries.begin(), slide->bob.entries.end(), [&](const BobEntry& e) {
      return e.patch.grid_x == gx && e.patch.grid_y == gy;
    });
    if (it == slide->bob.entries.end())
      fail(ErrorCode::kNotFound, "slide '" + id + "' has no mosaic patch at (" + std::to_string(gx) + ", " +
                                     std::to_string(gy) + ")");
    const PatchResult result = patch_knn(it->barcode, *idx, req.value("k", 10), make_filter(req, slide->labels));
    return json_response(200, patch_result_json(result, *idx));
  });
}

Response SearchService::create_session(const std::string& body) {
  return guarded([&] {
    const auto idx = index();
    const json req = parse_object(body.empty() ? "{}" : body);
    std::vector<std::string> pool;
    if (req.contains("queries")) {
      pool = req.at("queries").get<std::vector<std::string>>();
      for (const auto& id : pool) {
        if (!idx->find(id)) fail(ErrorCode::kNotFound, "unknown slide '" + id + "'");
      }
    } else {
      for (const auto& [id, slide] : idx->entries) pool.push_back(id);
    }
    if (pool.empty()) fail(ErrorCode::kEmptyCandidates, "no query slides available");
    const int n_questions = req.value("n_questions", req.contains("queries") ? static_cast<int>(pool.size()) : 48);
    if (n_questions < 1) fail(ErrorCode::kInvalidArgument, "n_questions must be >= 1");

    Session session;
    session.seed = req.value("seed", std::uint64_t{0});
    Rng rng(session.seed);
    // Shuffled pass over the pool, repeated when more questions than slides.
    std::vector<std::string> order;
    while (static_cast<int>(order.size()) < n_questions) {
      for (std::size_t i : rng.sample_without_replacement(pool.size(), pool.size())) order.push_back(pool[i]);
    }
    order.resize(static_cast<std::size_t>(n_questions));
    for (const auto& id : order) {
      const IndexedSlide& slide = *idx->find(id);
      const ScanQuery query = ScanQuery::from_slide(slide, make_filter(req, slide.labels), 3);
      SessionQuestion q{id, scan_knn(query, *idx).ranked, {}};
      q.display_order = rng.sample_without_replacement(q.top.size(), q.top.size());
      session.questions.push_back(std::move(q));
    }

    std::lock_guard lock(session_mutex_);
    session.session_id = "session-" + std::to_string(next_session_++);
    const std::string sid = session.session_id;
    sessions_.emplace(sid, std::move(session));
    return json_response(201, json{{"session_id", sid}, {"n_questions", n_questions}});
  });
}

Response SearchService::next_question(const std::string& session_id) const {
  return guarded([&] {
    std::lock_guard lock(session_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) fail(ErrorCode::kNotFound, "unknown session '" + session_id + "'");
    const Session& s = it->second;
    for (std::size_t q = 0; q < s.questions.size(); ++q) {
      for (const auto& hit : s.questions[q].top) {
        if (!s.rated.contains({static_cast<int>(q), hit.slide_id})) return json_response(200, question_json(s, q));
      }
    }
    return json_response(200, json{{"session_id", s.session_id}, {"done", true}, {"total", s.questions.size()}});
  });
}

Response SearchService::record_feedback(const std::string& body) {
  return guarded([&] {
    const json req = parse_object(body);
    const std::string sid = req.at("session_id").get<std::string>();
    const int qid = req.at("question_id").get<int>();
    const std::string result_id = req.at("result_slide_id").get<std::string>();
    const std::string rating_token = req.at("rating").get<std::string>();
    const std::string role_token = req.value("rater_role", std::string("non-expert"));

    std::lock_guard lock(session_mutex_);
    auto it = sessions_.find(sid);
    if (it == sessions_.end()) fail(ErrorCode::kNotFound, "unknown session '" + sid + "'");
    Session& s = it->second;
    if (qid < 0 || static_cast<std::size_t>(qid) >= s.questions.size())
      fail(ErrorCode::kNotFound, "session '" + sid + "' has no question " + std::to_string(qid));
    const auto rating = parse_rating(rating_token);
    if (!rating) fail(ErrorCode::kInvalidArgument, "invalid rating '" + rating_token + "'");
    const auto role = parse_rater_role(role_token);
    if (!role) fail(ErrorCode::kInvalidArgument, "invalid rater role '" + role_token + "'");

    const SessionQuestion& question = s.questions[static_cast<std::size_t>(qid)];
    auto hit = std::find_if(question.top.begin(), question.top.end(),
                            [&](const ScanHit& h) { return h.slide_id == result_id; });
    if (hit == question.top.end())
      fail(ErrorCode::kInvalidArgument, "slide '" + result_id + "' was not presented in question " + std::to_string(qid));
    if (s.rated.contains({qid, result_id}))
      fail(ErrorCode::kDuplicate, "question " + std::to_string(qid) + " result '" + result_id + "' already rated");

    FeedbackRecord record;
    record.session_id = sid;
    record.question_id = qid;
    record.query_ref = question.query_id;
    record.result_slide_id = result_id;
    record.result_rank = static_cast<int>(hit - question.top.begin()) + 1;
    record.distance = hit->distance;
    record.rating = *rating;
    record.rater_role = *role;
    record.timestamp = utc_timestamp();
    log_.append(record);
    s.rated.insert({qid, result_id});
    return json_response(201, json{{"status", "recorded"}});
  });
}

Response SearchService::feedback_summary() const {
  return guarded([&] { return json_response(200, summarize_feedback(log_.records())); });
}

void bind_routes(httplib::Server& server, SearchService& service) {
  const auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, r.content_type);
  };
  server.Get("/slides", [&, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.list_slides());
  });
  server.Get(R"(/slides/([^/]+)/thumbnail)", [&, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.thumbnail(req.matches[1]));
  });
  server.Post("/search/scan", [&, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.search_scan(req.body));
  });
  server.Post("/search/patch", [&, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.search_patch(req.body));
  });
  server.Post("/sessions", [&, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.create_session(req.body));
  });
  server.Get(R"(/sessions/([^/]+)/next)", [&, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.next_question(req.matches[1]));
  });
  server.Post("/feedback", [&, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.record_feedback(req.body));
  });
  server.Get("/feedback/summary", [&, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.feedback_summary());
  });
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

void serve(SearchService& service, const std::string& host, int port) {
  httplib::Server server;
  bind_routes(server, service);
  if (!server.listen(host, port))
    fail(ErrorCode::kInvalidArgument, "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace bob
