#pragma once

// HTTP/JSON front end for Engine.
//
//   POST /batches                          create (JSON body or multipart upload)
//   GET  /batches/:id                      status and summary
//   GET  /batches/:id/candidates?page=N    LDA candidates, one list per topic
//   POST /batches/:id/labels               {"selections": {"category": ["doc", ...]}}
//   POST /batches/:id/classify
//   GET  /batches/:id/predictions?category=C&page=N&page_size=M
//
// Errors are `{"code", "message", "detail"}` with a 4xx status.

#include <charconv>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>

#include "fstc/corpus.hpp"
#include "fstc/io.hpp"
#include "fstc/service/engine.hpp"

namespace fstc::service {

namespace detail {

inline io::json parse_body(const std::string& body) {
  try {
    return io::json::parse(body);
  } catch (const io::json::exception& e) {
    throw ServiceError(ErrorCode::bad_request, std::string("malformed JSON body: ") + e.what());
  }
}

inline Dataset parse_upload(const std::string& jsonl, const std::string& batch_name) {
  std::istringstream in(jsonl);
  try {
    return parse_dataset(in, batch_name);
  } catch (const Error& e) {
    throw ServiceError(ErrorCode::bad_request, e.what());
  }
}

inline std::vector<std::string> parse_categories(const io::json& j) {
  if (!j.is_array()) throw ServiceError(ErrorCode::bad_request, "'categories' must be a list of names");
  std::vector<std::string> out;
  for (const auto& c : j) {
    if (!c.is_string() || c.get<std::string>().empty())
      throw ServiceError(ErrorCode::bad_request, "category names must be non-empty strings");
    out.push_back(c.get<std::string>());
  }
  return out;
}

inline std::optional<std::size_t> query_index(const httplib::Request& req, const std::string& key) {
  if (!req.has_param(key)) return std::nullopt;
  const auto v = req.get_param_value(key);
  std::size_t value = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ServiceError(ErrorCode::bad_request, "query parameter '" + key + "' must be a non-negative integer");
  return value;
}

inline void reply(httplib::Response& res, const io::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      reply(res, e.body(), http_status(e.code()));
    } catch (const Error& e) {
      reply(res, io::json{{"code", "unprocessable"}, {"message", e.what()}, {"detail", nullptr}}, 422);
    } catch (const std::exception& e) {
      reply(res, io::json{{"code", "internal"}, {"message", e.what()}, {"detail", nullptr}}, 500);
    }
  };
}

}  // namespace detail

/// Creation request: either a JSON object
///   {"categories": [...], "documents": [{"id", "text"}, ...], "config": {...}}
/// or multipart form data with a `file` part (JSONL), a `categories` part
/// (JSON list) and an optional `config` part.
inline void register_routes(httplib::Server& server, Engine& engine) {
  using detail::guarded;
  using detail::reply;

  server.Post("/batches", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    io::json categories, config;
    std::string jsonl;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("file")) throw ServiceError(ErrorCode::bad_request, "multipart upload needs a 'file' part");
      if (!req.has_file("categories")) throw ServiceError(ErrorCode::bad_request, "missing 'categories' part");
      jsonl = req.get_file_value("file").content;
      categories = detail::parse_body(req.get_file_value("categories").content);
      if (req.has_file("config")) config = detail::parse_body(req.get_file_value("config").content);
    } else {
      const auto body = detail::parse_body(req.body);
      if (!body.is_object()) throw ServiceError(ErrorCode::bad_request, "request body must be an object");
      if (!body.contains("categories")) throw ServiceError(ErrorCode::bad_request, "missing 'categories'");
      if (!body.contains("documents") || !body["documents"].is_array())
        throw ServiceError(ErrorCode::bad_request, "'documents' must be a list");
      categories = body["categories"];
      if (body.contains("config")) config = body["config"];
      for (const auto& d : body["documents"]) jsonl += d.dump() + "\n";
    }
    auto upload = detail::parse_upload(jsonl, "upload");
    const auto id = engine.create_batch(upload, detail::parse_categories(categories), config);
    reply(res, engine.get_batch(id), 201);
  }));

  server.Get("/batches/:id", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    reply(res, engine.get_batch(req.path_params.at("id")));
  }));

  server.Get("/batches/:id/candidates", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    reply(res, engine.get_candidates(req.path_params.at("id"), detail::query_index(req, "page").value_or(0)));
  }));

  server.Post("/batches/:id/labels", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    const auto body = detail::parse_body(req.body);
    if (!body.is_object() || !body.contains("selections"))
      throw ServiceError(ErrorCode::bad_request, "body must be {\"selections\": {category: [ids]}}");
    Selection sel;
    try {
      sel = io::selection_from_json(body["selections"]);
    } catch (const Error& e) {
      throw ServiceError(ErrorCode::bad_request, e.what());
    }
    reply(res, engine.submit_labels(req.path_params.at("id"), sel).batch);
  }));

  server.Post("/batches/:id/classify", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    reply(res, engine.run_classification(req.path_params.at("id")));
  }));

  server.Get("/batches/:id/predictions", guarded([&engine](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> category;
    if (req.has_param("category")) category = req.get_param_value("category");
    reply(res, engine.get_predictions(req.path_params.at("id"), category, detail::query_index(req, "page"),
                                      detail::query_index(req, "page_size").value_or(50)));
  }));
}

/// Splits "host:port". The port defaults to 8080.
inline std::pair<std::string, int> parse_listen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) return {listen, 8080};
  int port = 0;
  const auto p = listen.substr(colon + 1);
  auto [end, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
  if (ec != std::errc() || end != p.data() + p.size() || port < 0 || port > 65535)
    throw Error("service", "bad listen address '" + listen + "'");
  return {listen.substr(0, colon), port};
}

}  // namespace fstc::service
