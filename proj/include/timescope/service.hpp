#pragma once

// HTTP/JSON front end over Engine. Handlers only decode requests, call the
// engine and encode the result.

#include <atomic>
#include <thread>

#include <httplib.h>

#include "timescope/api_json.hpp"

namespace timescope {

struct ServiceOptions {
  std::uint64_t max_upload_bytes = 2ull << 30;
};

class Service {
 public:
  explicit Service(Engine& engine, ServiceOptions opts = {}) : engine_(engine), opts_(opts) { routes(); }

  ~Service() {
    stop();
    std::lock_guard lock(jobs_mutex_);
    for (auto& t : workers_)
      if (t.joinable()) t.join();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  httplib::Server& server() { return server_; }

  /// Binds without serving; port 0 picks a free port. Returns the port or -1.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }
  bool serve() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  struct ImportJob {
    std::string state = "running";  // running | done | failed
    std::atomic<std::uint64_t> lines_read{0};
    json result;
  };

  static void send(Res& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static json body_json(const Req& req) {
    if (req.body.empty()) return json::object();
    try {
      json j = json::parse(req.body);
      if (!j.is_object()) throw Error(ErrorCode::BadRequest, "request body must be a JSON object");
      return j;
    } catch (const json::parse_error& ex) {
      throw Error(ErrorCode::BadRequest, std::string("request body is not valid JSON: ") + ex.what());
    }
  }

  static FilterState filter_of(const json& body) {
    auto it = body.find("filter");
    return it == body.end() ? FilterState{} : filter_from_json(*it);
  }

  std::vector<Bookmark> bookmarks_of(const json& body, const std::string& dataset_id) {
    auto it = body.find("session_id");
    if (it == body.end() || it->is_null()) return {};
    return engine_.session_bookmarks(decode("session_id", [&] { return it->get<std::string>(); }), dataset_id);
  }

  template <class Fn>
  auto guarded(Fn fn) {
    return [fn](const Req& req, Res& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send(res, http_status(e.code()), error_payload(e));
      } catch (const std::exception& e) {
        send(res, 500, json{{"code", "internal_error"}, {"message", e.what()}});
      }
    };
  }

  void routes() {
    server_.set_payload_max_length(opts_.max_upload_bytes);
    // httplib's default also sets SO_REUSEPORT, which lets a second server
    // share a port that is already taken; binding must fail instead
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    // fills in a JSON payload for statuses httplib produces on its own (413, 404 on unknown routes, ...)
    server_.set_error_handler([](const Req&, Res& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      const char* code = res.status == 413 ? "payload_too_large" : res.status == 404 ? "not_found" : "bad_request";
      send(res, res.status, json{{"code", code}, {"message", httplib::status_message(res.status)}});
      return httplib::Server::HandlerResponse::Handled;
    });

    const std::string ds = R"(/api/v1/datasets/([^/]+))";
    const std::string ss = R"(/api/v1/sessions/([^/]+))";

    server_.Get("/api/v1/datasets", guarded([this](const Req&, Res& res) {
                  json out = json::array();
                  for (const auto& d : engine_.list_datasets()) out.push_back(to_json(d));
                  send(res, 200, out);
                }));
    server_.Post("/api/v1/datasets", guarded([this](const Req& req, Res& res) { import(req, res); }));
    server_.Get(R"(/api/v1/imports/([^/]+))", guarded([this](const Req& req, Res& res) {
                  std::lock_guard lock(jobs_mutex_);
                  auto it = jobs_.find(req.matches[1].str());
                  if (it == jobs_.end()) throw Error(ErrorCode::NotFound, "unknown import job");
                  json j{{"job_id", it->first}, {"state", it->second->state},
                         {"lines_read", it->second->lines_read.load()}};
                  if (it->second->state != "running") j["result"] = it->second->result;
                  send(res, 200, j);
                }));
    server_.Get("/api/v1/clusters", guarded([this](const Req&, Res& res) {
                  json out = json::array();
                  for (const auto& c : engine_.registry()) out.push_back(to_json(c.def()));
                  send(res, 200, out);
                }));
    server_.Get(ds, guarded([this](const Req& req, Res& res) {
                  send(res, 200, dataset_payload(*engine_.dataset(req.matches[1].str())));
                }));

    server_.Post(ds + "/query", guarded([this](const Req& req, Res& res) {
                   const std::string id = req.matches[1].str();
                   const json body = body_json(req);
                   const auto d = engine_.dataset(id);
                   const FilterState fs = engine_.clamp(filter_of(body));
                   if (req.get_param_value("format") == "csv") {
                     res.status = 200;
                     res.set_content(engine_.export_csv(*d, fs), "text/csv");
                     return;
                   }
                   const auto marks = bookmarks_of(body, id);
                   send(res, 200, query_payload(engine_.query(*d, fs, marks), fs));
                 }));
    server_.Post(ds + "/skip", guarded([this](const Req& req, Res& res) {
                   const json body = body_json(req);
                   const auto d = engine_.dataset(req.matches[1].str());
                   const FilterState fs = filter_of(body);
                   const auto current = decode("current", [&] { return body.at("current").get<std::uint64_t>(); });
                   if (!d->index.contains(current)) throw Error(ErrorCode::ValidationError, "current entry out of range");
                   const SkipKey key = skip_key_from_json(body.value("key", json("day")));
                   const Direction dir = parse_direction(body.value("direction", "forward"));
                   send(res, 200, skip_payload(engine_.skip(*d, current, key, dir, fs)));
                 }));
    server_.Post(ds + "/histogram", guarded([this](const Req& req, Res& res) {
                   const std::string id = req.matches[1].str();
                   const json body = body_json(req);
                   const auto d = engine_.dataset(id);
                   std::optional<TimeSpan> span;
                   std::optional<Granularity> g;
                   if (auto it = body.find("span"); it != body.end() && !it->is_null())
                     span = decode("span", [&] { return span_from_json(*it); });
                   if (auto it = body.find("granularity"); it != body.end() && !it->is_null())
                     g = parse_granularity(decode("granularity", [&] { return it->get<std::string>(); }));
                   const auto marks = bookmarks_of(body, id);
                   send(res, 200, histogram_payload(engine_.histogram(*d, filter_of(body), span, g, marks)));
                 }));
    server_.Post(ds + "/clusters", guarded([this](const Req& req, Res& res) {
                   const json body = body_json(req);
                   const auto d = engine_.dataset(req.matches[1].str());
                   send(res, 200, clusters_payload(engine_.clusters(*d, filter_of(body))));
                 }));
    server_.Post(ds + "/bursts", guarded([this](const Req& req, Res& res) {
                   const json body = body_json(req);
                   const auto d = engine_.dataset(req.matches[1].str());
                   const auto [window, min_count] = decode("burst parameters", [&] {
                     return std::pair{body.value("window", kDefaultBurstWindow),
                                      body.value("min_count", kDefaultBurstMinCount)};
                   });
                   send(res, 200, bursts_payload(engine_.bursts(*d, filter_of(body), window, min_count)));
                 }));

    // sessions
    server_.Get("/api/v1/sessions", guarded([this](const Req&, Res& res) {
                  json out = json::array();
                  for (const auto& s : engine_.store().list_sessions()) out.push_back(to_json(s));
                  send(res, 200, out);
                }));
    server_.Post("/api/v1/sessions", guarded([this](const Req& req, Res& res) {
                   const json body = body_json(req);
                   const auto dataset_id = decode("dataset_id", [&] { return body.at("dataset_id").get<std::string>(); });
                   auto it = body.find("filter_state");
                   const FilterState fs = it == body.end() ? FilterState{} : filter_from_json(*it);
                   send(res, 201, to_json(engine_.store().create_session(dataset_id, fs)));
                 }));
    server_.Get(ss, guarded([this](const Req& req, Res& res) {
                  send(res, 200, to_json(engine_.store().load_session(req.matches[1].str())));
                }));
    server_.Put(ss, guarded([this](const Req& req, Res& res) {
                  const std::string id = req.matches[1].str();
                  json body = body_json(req);
                  auto& store = engine_.store();
                  if (body.contains("dataset_id")) {
                    // full replacement, last writer by updated_at wins
                    body["session_id"] = id;
                    store.save_session(session_from_json(body));
                  } else if (auto it = body.find("filter_state"); it != body.end()) {
                    store.set_filter(id, filter_from_json(*it));
                  } else {
                    throw Error(ErrorCode::ValidationError, "expected a session document or a filter_state");
                  }
                  send(res, 200, to_json(store.load_session(id)));
                }));
    server_.Delete(ss, guarded([this](const Req& req, Res& res) {
                     engine_.store().delete_session(req.matches[1].str());
                     res.status = 204;
                   }));
    server_.Post(ss + "/notes", guarded([this](const Req& req, Res& res) {
                   const json body = body_json(req);
                   auto text = decode("note", [&] { return body.at("text").get<std::string>(); });
                   const Note n = engine_.store().add_note(req.matches[1].str(), std::move(text));
                   send(res, 201, json{{"at", n.at}, {"text", n.text}});
                 }));

    server_.Get(ss + "/bookmarks", guarded([this](const Req& req, Res& res) {
                  json out = json::array();
                  for (const auto& b : engine_.store().list_bookmarks(req.matches[1].str())) out.push_back(to_json(b));
                  send(res, 200, out);
                }));
    server_.Post(ss + "/bookmarks", guarded([this](const Req& req, Res& res) {
                   const std::string sid = req.matches[1].str();
                   const json body = body_json(req);
                   auto& store = engine_.store();
                   const auto entry = decode("entry_id", [&] { return body.at("entry_id").get<std::uint64_t>(); });
                   const auto current = store.list_bookmarks(sid);
                   const bool existed = std::any_of(current.begin(), current.end(),
                                                    [&](const Bookmark& b) { return b.entry_id == entry; });
                   const Bookmark b = store.add_bookmark(sid, entry, optional_from_json<std::string>(body, "color"),
                                                         optional_from_json<std::string>(body, "note"));
                   send(res, existed ? 200 : 201, to_json(b));
                 }));
    server_.Put(ss + "/bookmarks/([^/]+)", guarded([this](const Req& req, Res& res) {
                  const json body = body_json(req);
                  const Bookmark b = engine_.store().update_bookmark(
                      req.matches[1].str(), req.matches[2].str(),
                      decode("color", [&] { return optional_from_json<std::string>(body, "color"); }),
                      decode("note", [&] { return optional_from_json<std::string>(body, "note"); }));
                  send(res, 200, to_json(b));
                }));
    server_.Delete(ss + "/bookmarks/([^/]+)", guarded([this](const Req& req, Res& res) {
                     engine_.store().remove_bookmark(req.matches[1].str(), req.matches[2].str());
                     res.status = 204;
                   }));
  }

  void import(const Req& req, Res& res) {
    std::string content, name, format_text;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("file")) throw Error(ErrorCode::BadRequest, "multipart upload needs a 'file' part");
      const auto file = req.get_file_value("file");
      content = file.content;
      name = req.has_file("name") ? req.get_file_value("name").content : file.filename;
      if (req.has_file("format")) format_text = req.get_file_value("format").content;
    } else {
      content = req.body;
      name = req.get_param_value("name");
      format_text = req.get_param_value("format");
    }
    if (content.size() > opts_.max_upload_bytes) throw Error(ErrorCode::PayloadTooLarge, "upload exceeds the size cap");
    std::optional<InputFormat> format;
    if (!format_text.empty()) format = parse_input_format(format_text);
    if (name.empty()) name = "upload";

    const auto param = req.get_param_value("async");
    if (param != "true" && param != "1") {
      const auto loaded = engine_.import_text(content, name, name, format);
      send(res, 201, dataset_payload(*loaded));
      return;
    }

    std::lock_guard lock(jobs_mutex_);
    const std::string job_id = "job" + std::to_string(++job_counter_);
    auto job = std::make_shared<ImportJob>();
    jobs_[job_id] = job;
    workers_.emplace_back([this, job, content = std::move(content), name, format] {
      json result;
      std::string state = "done";
      try {
        const auto loaded =
            engine_.import_text(content, name, name, format, [&](std::uint64_t lines) { job->lines_read = lines; });
        result = dataset_payload(*loaded);
      } catch (const Error& e) {
        state = "failed";
        result = error_payload(e);
        result["status"] = http_status(e.code());
      } catch (const std::exception& e) {
        state = "failed";
        result = json{{"code", "internal_error"}, {"message", e.what()}, {"status", 500}};
      }
      std::lock_guard done(jobs_mutex_);
      job->result = std::move(result);
      job->state = state;
    });
    send(res, 202, json{{"job_id", job_id}, {"status_url", "/api/v1/imports/" + job_id}});
  }

  Engine& engine_;
  ServiceOptions opts_;
  httplib::Server server_;
  std::mutex jobs_mutex_;
  std::uint64_t job_counter_ = 0;
  std::map<std::string, std::shared_ptr<ImportJob>> jobs_;
  std::vector<std::thread> workers_;
};

}  // namespace timescope
