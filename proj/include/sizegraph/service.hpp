#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sizegraph/bundle.hpp"
#include "sizegraph/error.hpp"
#include "sizegraph/skipgram.hpp"
#include "sizegraph/wbsr.hpp"

namespace sizegraph {

enum class QueryMethod { Wbsr, SkipGram, Both };

inline std::optional<QueryMethod> parse_query_method(std::string_view s) {
  if (s == "wbsr") return QueryMethod::Wbsr;
  if (s == "skipgram") return QueryMethod::SkipGram;
  if (s == "both") return QueryMethod::Both;
  return std::nullopt;
}

struct Query {
  std::string brand;
  double size = 0.0;
  std::string target;
  QueryMethod method = QueryMethod::Wbsr;
};

/// Exit codes shared by the CLI.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kIo = 2;
inline constexpr int kDegenerate = 3;
inline constexpr int kNoPath = 4;
inline constexpr int kUnknownBrand = 5;
}  // namespace exit_code

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::Format: return exit_code::kIo;
    case ErrorCode::DegenerateMatrix:
    case ErrorCode::DegenerateGraph:
    case ErrorCode::RankTooLarge:
    case ErrorCode::InsufficientEvents:
    case ErrorCode::InsufficientData: return exit_code::kDegenerate;
    case ErrorCode::NoPath:
    case ErrorCode::NoDirectEdge:
    case ErrorCode::NoCandidates: return exit_code::kNoPath;
    case ErrorCode::UnknownBrand:
    case ErrorCode::UnknownPreference: return exit_code::kUnknownBrand;
    default: return exit_code::kUsage;
  }
}

inline int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoPath:
    case ErrorCode::NoDirectEdge:
    case ErrorCode::NoCandidates: return 422;
    case ErrorCode::UnknownBrand:
    case ErrorCode::UnknownPreference: return 404;
    default: return 400;
  }
}

inline nlohmann::json to_json(const Recommendation& r) {
  nlohmann::json trail = nlohmann::json::array();
  for (const auto& t : r.trail) trail.push_back({{"brand", t.brand}, {"contribution", t.contribution}});
  return {{"size", r.size.value()},
          {"method", std::string(to_string(r.method))},
          {"confidence", r.confidence},
          {"chosen_delta", r.delta_halves / 2.0},
          {"trail", std::move(trail)},
          {"clamped", r.clamped}};
}

inline nlohmann::json to_json(const SkipGramResult& r, UkSize query) {
  nlohmann::json skipped = nlohmann::json::array();
  for (auto s : r.skipped) skipped.push_back(s.value());
  return {{"size", r.size.value()},
          {"method", "SkipGram"},
          {"confidence", r.score},
          {"chosen_delta", (query.halves() - r.size.halves()) / 2.0},
          {"trail", nlohmann::json::array()},
          {"clamped", false},
          {"skipped", std::move(skipped)}};
}

struct Answer {
  int exit_code = exit_code::kOk;
  int http_status = 200;
  std::string body;  // one JSON document, no trailing newline
};

inline nlohmann::json error_body(const Error& e) {
  return {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
}

/// Runs one query against a loaded bundle. The CLI and the HTTP server both go
/// through here, so their bodies are byte-identical for the same query.
inline Answer answer_query(const ModelBundle& bundle, const Query& q) {
  Answer a;
  try {
    const Preference pref{bundle.category, q.brand, UkSize::from_value(q.size)};
    auto run_wbsr = [&] {
      return to_json(recommend(pref, q.target, bundle.size_graph, bundle.brand_graph,
                               bundle.hyperparams));
    };
    auto run_skipgram = [&] {
      if (!bundle.skipgram) {
        throw Error(ErrorCode::InvalidArgument, "bundle has no skip-gram model");
      }
      return to_json(recommend_skipgram(*bundle.skipgram, pref, all_grid_sizes(), q.target),
                     pref.size);
    };
    switch (q.method) {
      case QueryMethod::Wbsr: a.body = run_wbsr().dump(); break;
      case QueryMethod::SkipGram: a.body = run_skipgram().dump(); break;
      case QueryMethod::Both: {
        auto w = run_wbsr();
        auto s = run_skipgram();
        a.body = nlohmann::json{{"wbsr", std::move(w)}, {"skipgram", std::move(s)}}.dump();
        break;
      }
    }
  } catch (const Error& e) {
    a.exit_code = exit_code_for(e.code());
    a.http_status = http_status_for(e.code());
    a.body = error_body(e).dump();
  }
  return a;
}

inline nlohmann::json health_body(const ModelBundle& b) {
  return {{"status", "ok"},
          {"gender", std::string(to_string(b.category.gender()))},
          {"article_type", b.category.article_type()},
          {"events_fingerprint", b.metadata.events_fingerprint},
          {"bundle_fingerprint", hex64(fnv1a(serialize_bundle(b)))}};
}

}  // namespace sizegraph
