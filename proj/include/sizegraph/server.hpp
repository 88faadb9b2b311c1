#pragma once

#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "sizegraph/bundle.hpp"
#include "sizegraph/service.hpp"

namespace sizegraph {

/// Parses a POST /recommend body: {brand, size, target, method?}.
inline std::optional<Query> parse_query_body(const std::string& body, std::string& problem) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    problem = "body must be a JSON object";
    return std::nullopt;
  }
  Query q;
  if (!j.contains("brand") || !j["brand"].is_string()) {
    problem = "brand must be a string";
    return std::nullopt;
  }
  if (!j.contains("target") || !j["target"].is_string()) {
    problem = "target must be a string";
    return std::nullopt;
  }
  if (!j.contains("size") || !j["size"].is_number()) {
    problem = "size must be a number";
    return std::nullopt;
  }
  q.brand = j["brand"].get<std::string>();
  q.target = j["target"].get<std::string>();
  q.size = j["size"].get<double>();
  const auto method = j.value("method", std::string("wbsr"));
  auto m = parse_query_method(method);
  if (!m) {
    problem = "method must be wbsr, skipgram or both";
    return std::nullopt;
  }
  q.method = *m;
  return q;
}

/// Routes for the recommendation server. The bundle is shared read-only by all
/// handler threads and must outlive the server.
inline void install_routes(httplib::Server& server, const ModelBundle& bundle) {
  const auto health = health_body(bundle).dump();
  server.Get("/healthz", [health](const httplib::Request&, httplib::Response& res) {
    res.set_content(health, "application/json");
  });
  server.Post("/recommend", [&bundle](const httplib::Request& req, httplib::Response& res) {
    std::string problem;
    auto q = parse_query_body(req.body, problem);
    if (!q) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", "InvalidArgument"}, {"message", problem}}.dump(),
                      "application/json");
      return;
    }
    const auto answer = answer_query(bundle, *q);
    res.status = answer.http_status;
    res.set_content(answer.body, "application/json");
  });
}

}  // namespace sizegraph
