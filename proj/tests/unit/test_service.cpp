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

#include <algorithm>
#include <map>
#include <thread>

#include "doctest.h"
#include "json.hpp"

#include "bob/json_codec.hpp"
#include "bob/service.hpp"
#include "test_support.hpp"

// After Eigen: the system resolver headers it pulls in define macros that
// collide with Eigen template parameter names.
#include "httplib.h"

using namespace bob;
using nlohmann::json;

namespace {

std::string base64(const std::string& bytes) {
  static const char* table = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) | static_cast<unsigned char>(bytes[i + 2]);
    for (int s = 18; s >= 0; s -= 6) out.push_back(table[(v >> s) & 63]);
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    if (rest == 2) v |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back(rest == 2 ? table[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

json body(const Response& r) { return json::parse(r.body); }

int error_status(const Response& r) { return body(r)["error"]["status"].get<int>(); }

std::string first_id() { return testing::shared_small_corpus().index.entries.begin()->first; }

// Three-slide index where "q" matches "same" exactly and "far" not at all.
ArchiveIndex distance_index() {
  ArchiveIndex index;
  auto add = [&](const std::string& id, const std::vector<std::string>& bits) {
    IndexedSlide s;
    s.slide_id = id;
    s.labels = SlideLabels::from_raw("lung", "x");
    s.bob = testing::make_bunch(id, bits);
    index.add(s);
  };
  add("q", {"00000000", "00001111"});
  add("same", {"00000000", "00001111"});
  add("near", {"00000001", "00011111"});
  add("far", {"11111111", "11110000"});
  return index;
}

}  // namespace

TEST_CASE("scan search returns the same bytes as the in-process result") {
  const ArchiveIndex& index = testing::shared_small_corpus().index;
  SearchService service(index);
  for (const auto& [id, slide] : index.entries) {
    const Response r = service.search_scan(json{{"slide_id", id}, {"k", 3}}.dump());
    REQUIRE(r.status == 200);
    const ScanQuery q = ScanQuery::from_slide(slide, ModeFilter::horizontal(), 3);
    CHECK(r.body == search_result_json(scan_knn(q, index), q, index).dump());
    CHECK(body(r)["ranked"].size() == 3);
  }
  // Vertical defaults to the query's own site.
  const IndexedSlide& s = index.entries.begin()->second;
  const Response v = service.search_scan(json{{"slide_id", s.slide_id}, {"mode", "vertical"}}.dump());
  REQUIRE(v.status == 200);
  CHECK(body(v)["site"] == *s.labels.primary_site);
  for (const auto& hit : body(v)["ranked"]) CHECK(hit["labels"]["primary_site"] == *s.labels.primary_site);
}

TEST_CASE("error statuses") {
  SearchService service(testing::shared_small_corpus().index);
  const std::string id = first_id();
  CHECK(service.search_scan(R"({"slide_id":"nope"})").status == 404);
  CHECK(error_status(service.search_scan(R"({"slide_id":"nope"})")) == 404);
  CHECK(service.search_scan(json{{"slide_id", id}, {"mode", "vertical"}, {"site", "mars"}}.dump()).status == 409);
  CHECK(service.search_scan("{not json").status == 400);
  CHECK(service.search_scan("[1, 2]").status == 422);
  CHECK(service.search_scan(R"({"k": 3})").status == 422);
  CHECK(service.search_scan(json{{"slide_id", id}, {"k", 0}}.dump()).status == 422);
  CHECK(service.search_scan(json{{"slide_id", id}, {"mode", "diagonal"}}.dump()).status == 422);
  CHECK(service.search_scan(json{{"slide_id", id}, {"k", "ten"}}.dump()).status == 422);
  CHECK(service.search_patch(json{{"slide_id", id}, {"grid_x", -5}, {"grid_y", -5}}.dump()).status == 404);
  CHECK(service.thumbnail(id).status == 404);  // no corpus configured
  CHECK(service.next_question("session-99").status == 404);
}

TEST_CASE("patch search and slide listing") {
  const ArchiveIndex& index = testing::shared_small_corpus().index;
  SearchService service(index);
  const IndexedSlide& s = index.entries.begin()->second;
  const PatchRef& p = s.bob.entries.front().patch;
  const Response r = service.search_patch(json{{"slide_id", s.slide_id}, {"grid_x", p.grid_x}, {"grid_y", p.grid_y}, {"k", 4}}.dump());
  REQUIRE(r.status == 200);
  CHECK(r.body == patch_result_json(patch_knn(s.bob.entries.front().barcode, index, 4), index).dump());
  CHECK(body(r)["ranked"][0]["distance"] == 0);

  const json slides = body(service.list_slides());
  CHECK(slides["slides"].size() == index.entries.size());
  CHECK(slides["barcode_length"] == index.barcode_length);
}

TEST_CASE("thumbnails and uploads with a corpus") {
  const auto& corpus = testing::shared_small_corpus();
  SearchService service(corpus.index, ServiceOptions{corpus.dir, std::nullopt});
  const std::string id = first_id();
  const Response t = service.thumbnail(id);
  REQUIRE(t.status == 200);
  CHECK(t.content_type == "image/png");
  CHECK(t.body.substr(1, 3) == "PNG");
  CHECK(service.thumbnail("missing").status == 404);

  // Uploading an archived slide's files reproduces its own barcodes, so
  // the result equals the by-id search apart from the query exclusion.
  const auto dir = corpus.dir / id;
  json files = json::object();
  for (const char* f : {"level_0.png", "level_1.png", "level_2.png"})
    if (std::filesystem::exists(dir / f)) files[f] = base64(testing::read_file(dir / f));
  json manifest = json::parse(testing::read_file(dir / "manifest.json"));
  manifest["slide_id"] = "uploaded";
  const Response up = service.search_scan(json{{"upload", {{"manifest", manifest}, {"files", files}}}, {"k", 1}}.dump());
  REQUIRE(up.status == 200);
  CHECK(body(up)["query_id"] == "uploaded");
  CHECK(body(up)["ranked"][0]["slide_id"] == id);
  CHECK(body(up)["ranked"][0]["distance"] == 0);

  files["level_0.png"] = "!!!!";
  CHECK(service.search_scan(json{{"upload", {{"manifest", manifest}, {"files", files}}}}.dump()).status == 422);
  files["../evil"] = "AAAA";
  CHECK(service.search_scan(json{{"upload", {{"manifest", manifest}, {"files", files}}}}.dump()).status == 422);
}

TEST_CASE("a scripted 48-question session round-trips through the summary") {
  const ArchiveIndex& index = testing::shared_small_corpus().index;
  SearchService service(index);
  const Response created = service.create_session(R"({"n_questions": 48, "seed": 5})");
  REQUIRE(created.status == 201);
  const std::string sid = body(created)["session_id"];
  CHECK(body(created)["n_questions"] == 48);

  Rng rng(17);
  const char* ratings[] = {"VeryBad", "Bad", "Neutral", "Good", "Great"};
  std::map<std::string, int> per_rating;
  std::map<int, int> per_rank;
  int posted = 0;
  while (true) {
    const json next = body(service.next_question(sid));
    if (next["done"].get<bool>()) break;
    const int qid = next["question_id"];
    CHECK(next["total"] == 48);
    const std::string query = next["query"]["slide_id"];
    const ScanQuery q = ScanQuery::from_slide(*index.find(query), ModeFilter::horizontal(), 3);
    const auto truth = scan_knn(q, index).ranked;
    REQUIRE(next["results"].size() == 3);
    for (const auto& r : next["results"]) {
      const std::string rid = r["slide_id"];
      CHECK_FALSE(r["rated"].get<bool>());
      const auto it = std::find_if(truth.begin(), truth.end(), [&](const ScanHit& h) { return h.slide_id == rid; });
      REQUIRE(it != truth.end());
      const std::string rating = ratings[rng.index(5)];
      const Response fb = service.record_feedback(
          json{{"session_id", sid}, {"question_id", qid}, {"result_slide_id", rid}, {"rating", rating},
               {"rater_role", "expert"}}
              .dump());
      REQUIRE(fb.status == 201);
      ++per_rating[rating];
      ++per_rank[static_cast<int>(it - truth.begin()) + 1];
      ++posted;
    }
  }
  CHECK(posted == 144);
  const json summary = body(service.feedback_summary());
  CHECK(summary["total"] == 144);
  CHECK(summary["records"].size() == 144);
  for (const auto& [rating, n] : per_rating) CHECK(summary["per_rating"][rating]["count"] == n);
  for (const auto& [rank, n] : per_rank) {
    int sum = 0;
    for (const auto& [k, v] : summary["per_rank"][std::to_string(rank)].items()) sum += v.get<int>();
    CHECK(sum == n);
  }
  CHECK(summary == summarize_feedback(service.feedback_log().records()));

  // Duplicates, unknown ids and bad tokens.
  const json again{{"session_id", sid}, {"question_id", 0}, {"result_slide_id", summary["records"][0]["result_slide_id"]},
                   {"rating", "Good"}};
  CHECK(service.record_feedback(again.dump()).status == 409);
  json bad = again;
  bad["rating"] = "Excellent";
  CHECK(service.record_feedback(bad.dump()).status == 422);
  bad = again;
  bad["rater_role"] = "admin";
  CHECK(service.record_feedback(bad.dump()).status == 422);
  bad = again;
  bad["result_slide_id"] = "not-shown";
  CHECK(service.record_feedback(bad.dump()).status == 422);
  bad = again;
  bad["question_id"] = 48;
  CHECK(service.record_feedback(bad.dump()).status == 404);
  bad = again;
  bad["session_id"] = "session-404";
  CHECK(service.record_feedback(bad.dump()).status == 404);
  CHECK(service.create_session(R"({"queries": ["ghost"]})").status == 404);
  CHECK(service.create_session(R"({"n_questions": 0})").status == 422);
}

TEST_CASE("ratings that fall with distance give a negative correlation") {
  SearchService service(distance_index());
  const std::string sid = body(service.create_session(R"({"queries": ["q"], "seed": 1})"))["session_id"];
  const std::map<std::string, std::string> rating{{"same", "Great"}, {"near", "Neutral"}, {"far", "VeryBad"}};
  const json next = body(service.next_question(sid));
  for (const auto& r : next["results"]) {
    const std::string id = r["slide_id"];
    REQUIRE(service
                .record_feedback(json{{"session_id", sid}, {"question_id", 0}, {"result_slide_id", id},
                                      {"rating", rating.at(id)}}
                                     .dump())
                .status == 201);
  }
  const json summary = body(service.feedback_summary());
  CHECK(summary["spearman_rating_vs_distance"].get<double>() < 0);
  CHECK(summary["per_rating"]["Great"]["median_distance"] == 0.0);
  CHECK(summary["per_rank"]["1"]["Great"] == 1);
  CHECK(body(service.next_question(sid))["done"] == true);
}

TEST_CASE("feedback persists to the log file") {
  testing::TempDir dir("svc");
  const auto log = dir / "fb.jsonl";
  {
    SearchService service(distance_index(), ServiceOptions{std::nullopt, log});
    const std::string sid = body(service.create_session(R"({"queries": ["q"]})"))["session_id"];
    service.record_feedback(json{{"session_id", sid}, {"question_id", 0}, {"result_slide_id", "far"}, {"rating", "Bad"}}.dump());
  }
  SearchService reopened(distance_index(), ServiceOptions{std::nullopt, log});
  CHECK(body(reopened.feedback_summary())["total"] == 1);
}

TEST_CASE("index reload swaps the generation") {
  SearchService service(distance_index());
  const auto before = service.index();
  CHECK(service.generation() == 1);
  ArchiveIndex next = distance_index();
  next.entries.erase("far");
  service.reload_index(next);
  CHECK(service.generation() == 2);
  CHECK(before->entries.size() == 4);
  CHECK(service.index()->entries.size() == 3);
  CHECK(service.search_scan(R"({"slide_id":"far"})").status == 404);
}

TEST_CASE("routes over HTTP") {
  const auto& corpus = testing::shared_small_corpus();
  SearchService service(corpus.index, ServiceOptions{corpus.dir, std::nullopt});
  httplib::Server server;
  bind_routes(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const std::string id = first_id();
  auto slides = client.Get("/slides");
  REQUIRE(slides);
  CHECK(slides->status == 200);
  CHECK(slides->get_header_value("Access-Control-Allow-Origin") == "*");

  const std::string req = json{{"slide_id", id}, {"k", 3}}.dump();
  auto scan = client.Post("/search/scan", req, "application/json");
  REQUIRE(scan);
  CHECK(scan->status == 200);
  CHECK(scan->body == service.search_scan(req).body);

  auto missing = client.Post("/search/scan", R"({"slide_id":"nope"})", "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto malformed = client.Post("/search/scan", "{", "application/json");
  REQUIRE(malformed);
  CHECK(malformed->status == 400);

  auto thumb = client.Get("/slides/" + id + "/thumbnail");
  REQUIRE(thumb);
  CHECK(thumb->status == 200);
  CHECK(thumb->get_header_value("Content-Type") == "image/png");

  auto session = client.Post("/sessions", R"({"n_questions": 2, "seed": 3})", "application/json");
  REQUIRE(session);
  CHECK(session->status == 201);
  const std::string sid = json::parse(session->body)["session_id"];
  auto next = client.Get("/sessions/" + sid + "/next");
  REQUIRE(next);
  const json q = json::parse(next->body);
  auto fb = client.Post("/feedback",
                        json{{"session_id", sid}, {"question_id", q["question_id"]},
                             {"result_slide_id", q["results"][0]["slide_id"]}, {"rating", "Good"}}
                            .dump(),
                        "application/json");
  REQUIRE(fb);
  CHECK(fb->status == 201);
  auto summary = client.Get("/feedback/summary");
  REQUIRE(summary);
  CHECK(json::parse(summary->body)["total"] == 1);

  auto patch = client.Post("/search/patch", R"({"slide_id":"nope","grid_x":0,"grid_y":0})", "application/json");
  REQUIRE(patch);
  CHECK(patch->status == 404);

  auto options = client.Options("/search/scan");
  REQUIRE(options);
  CHECK(options->status == 204);

  server.stop();
  worker.join();
}
