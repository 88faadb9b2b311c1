#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sizegraph/brand_similarity.hpp"
#include "sizegraph/error.hpp"
#include "sizegraph/ingest.hpp"
#include "sizegraph/size_graph.hpp"
#include "sizegraph/skipgram.hpp"
#include "sizegraph/types.hpp"
#include "sizegraph/wbsr.hpp"

namespace sizegraph {

inline constexpr int kBundleFormatVersion = 1;

struct BuildMetadata {
  std::string events_fingerprint;  // FNV-1a over the normalized in-category events
  std::int64_t window_start = 0;   // earliest event timestamp used
  std::int64_t window_end = 0;     // latest event timestamp used
  std::size_t n_events = 0;
  std::array<double, 4> importance{1.0, 1.0, 1.0, 1.0};
  std::size_t rank_requested = 0;
  std::size_t nmf_iterations = 0;
  std::uint64_t nmf_seed = 0;
  double nmf_objective = 0.0;
  std::optional<double> alpha_percentile;
  bool similarity_normalized = false;
  SizeGraphBuildReport size_report;
  std::optional<std::uint64_t> skipgram_seed;
};

/// Everything needed to answer queries for one category.
struct ModelBundle {
  Category category;
  BrandEmbeddings brand_embeddings;
  BrandSimilarityGraph brand_graph;
  SizeGraph size_graph;
  Hyperparams hyperparams;
  std::optional<SkipGramModel> skipgram;
  BuildMetadata metadata;
};

// ---------------------------------------------------------------------------
// Fingerprints

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string fingerprint_events(const std::vector<InteractionEvent>& events) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& e : events) {
    h = fnv1a(event_to_json(e).dump(), h);
    h = fnv1a("\n", h);
  }
  return hex64(h);
}

// ---------------------------------------------------------------------------
// Build pipeline

struct BuildOptions {
  std::size_t rank = 16;
  std::size_t nmf_max_iters = 500;
  double nmf_tol = 1e-7;
  std::uint64_t seed = 42;
  std::optional<double> alpha;  // explicit threshold; overrides the percentile
  double alpha_percentile = 75.0;
  double lambda = kDefaultLambda;
  LegWeighting leg_weighting = LegWeighting::Frequency;
  bool normalize_similarity = false;
};

/// Offline build: importance weights, user-brand matrix, NMF brand graph and
/// the co-purchase size graph, all from one in-category event window.
/// The NMF rank is capped at min(users, brands).
inline ModelBundle build_bundle(const std::vector<InteractionEvent>& events,
                                const Category& category, const BuildOptions& opt) {
  const auto window = filter_category(events, category);
  if (window.empty()) {
    throw Error(ErrorCode::DegenerateMatrix, "no events for " + category.label());
  }
  ModelBundle b;
  b.category = category;
  auto& meta = b.metadata;
  meta.events_fingerprint = fingerprint_events(window);
  meta.n_events = window.size();
  meta.window_start = std::numeric_limits<std::int64_t>::max();
  meta.window_end = std::numeric_limits<std::int64_t>::min();
  for (const auto& e : window) {
    meta.window_start = std::min(meta.window_start, e.timestamp);
    meta.window_end = std::max(meta.window_end, e.timestamp);
  }

  const auto importance = compute_importance(window);
  meta.importance = importance.weights();
  const auto priorities = reduce_highest_priority(window, category);
  const auto matrix = build_matrix(priorities, importance);

  NmfOptions nmf_opt;
  nmf_opt.rank = std::min({opt.rank, matrix.n_users(), matrix.n_brands()});
  nmf_opt.max_iters = opt.nmf_max_iters;
  nmf_opt.tol = opt.nmf_tol;
  nmf_opt.seed = opt.seed;
  const auto nmf = nmf_factorize(matrix, nmf_opt);
  meta.rank_requested = opt.rank;
  meta.nmf_iterations = nmf.iterations;
  meta.nmf_seed = opt.seed;
  meta.nmf_objective = nmf.objective.back();
  meta.similarity_normalized = opt.normalize_similarity;

  b.brand_embeddings = BrandEmbeddings::from_nmf(category, matrix, nmf, opt.seed);
  b.brand_graph = build_brand_graph(b.brand_embeddings, category, opt.normalize_similarity);

  std::vector<std::string> catalog = matrix.brands;
  auto built = build_size_graph(extract_copurchases(window, category), category, catalog);
  b.size_graph = std::move(built.graph);
  meta.size_report = built.report;

  b.hyperparams.lambda = opt.lambda;
  b.hyperparams.leg_weighting = opt.leg_weighting;
  if (opt.alpha) {
    b.hyperparams.alpha.alpha = *opt.alpha;
  } else {
    b.hyperparams.alpha = alpha_from_percentile(b.size_graph, opt.alpha_percentile);
    meta.alpha_percentile = opt.alpha_percentile;
  }
  b.hyperparams.validate();
  return b;
}

/// Trains the skip-gram baseline on the in-category purchases and attaches it.
inline void attach_skipgram(ModelBundle& bundle, const std::vector<InteractionEvent>& events,
                            const SkipGramConfig& cfg) {
  const auto docs = build_documents(events, bundle.category);
  bundle.skipgram = train_skipgram(docs, cfg);
  bundle.metadata.skipgram_seed = cfg.seed;
}

// ---------------------------------------------------------------------------
// JSON persistence. Doubles are written in shortest round-trip form, so a
// save/load cycle reproduces every value bitwise.

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.data().size()) throw Error(ErrorCode::Format, "matrix size mismatch");
  m.data() = std::move(data);
  return m;
}

inline nlohmann::json category_to_json(const Category& c) {
  return {{"gender", std::string(to_string(c.gender()))}, {"article_type", c.article_type()}};
}

inline Category category_from_json(const nlohmann::json& j) {
  auto g = parse_gender(j.at("gender").get<std::string>());
  if (!g) throw Error(ErrorCode::Format, "bad gender in bundle");
  return Category(*g, j.at("article_type").get<std::string>());
}

}  // namespace detail

inline nlohmann::json to_json(const BrandEmbeddings& e) {
  return {{"category", detail::category_to_json(e.category())},
          {"rank", e.rank()},
          {"seed", e.seed()},
          {"brands", e.brands()},
          {"vectors", detail::matrix_to_json(e.vectors())}};
}

inline BrandEmbeddings brand_embeddings_from_json(const nlohmann::json& j) {
  auto vectors = detail::matrix_from_json(j.at("vectors"));
  if (vectors.cols() != j.at("rank").get<std::size_t>()) {
    throw Error(ErrorCode::Format, "embedding rank mismatch");
  }
  return BrandEmbeddings(detail::category_from_json(j.at("category")),
                         j.at("brands").get<std::vector<std::string>>(), std::move(vectors),
                         j.at("seed").get<std::uint64_t>());
}

inline nlohmann::json to_json(const BrandSimilarityGraph& g) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [key, w] : g.weights()) pairs.push_back({key.first, key.second, w});
  return {{"category", detail::category_to_json(g.category())},
          {"brands", g.brands()},
          {"pairs", std::move(pairs)}};
}

inline BrandSimilarityGraph brand_graph_from_json(const nlohmann::json& j) {
  std::map<std::pair<std::string, std::string>, double> sim;
  for (const auto& p : j.at("pairs")) {
    auto a = p.at(0).get<std::string>();
    auto b = p.at(1).get<std::string>();
    if (!(a < b)) throw Error(ErrorCode::Format, "similarity pair not in canonical order");
    sim.emplace(std::make_pair(std::move(a), std::move(b)), p.at(2).get<double>());
  }
  return BrandSimilarityGraph(detail::category_from_json(j.at("category")),
                              j.at("brands").get<std::vector<std::string>>(), std::move(sim));
}

/// Edges are written once per unordered pair (u < v) as [u, v, label, count];
/// the mirror direction is rebuilt on load.
inline nlohmann::json to_json(const SizeGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [key, counts] : g.edges()) {
    if (!(key.first < key.second)) continue;
    for (int i = 0; i < kLabelCount; ++i) {
      if (counts[i] != 0) {
        edges.push_back({key.first, key.second, label_halves(i) / 2.0, counts[i]});
      }
    }
  }
  return {{"category", detail::category_to_json(g.category())},
          {"vertices", g.brands()},
          {"edges", std::move(edges)}};
}

inline SizeGraph size_graph_from_json(const nlohmann::json& j) {
  SizeGraph g(detail::category_from_json(j.at("category")));
  for (const auto& v : j.at("vertices")) g.add_vertex(v.get<std::string>());
  for (const auto& e : j.at("edges")) {
    const auto u = e.at(0).get<std::string>();
    const auto v = e.at(1).get<std::string>();
    const double label = e.at(2).get<double>();
    const auto count = e.at(3).get<std::int64_t>();
    const double halves = label * 2.0;
    if (!(u < v) || halves != std::round(halves) || std::abs(halves) > 2 || count < 0) {
      throw Error(ErrorCode::Format, "malformed size-graph edge");
    }
    g.add(u, v, static_cast<int>(halves), count);
  }
  return g;
}

inline nlohmann::json to_json(const SkipGramModel& m) {
  return {{"vocab", m.vocab()},
          {"counts", m.counts()},
          {"dims", m.dims()},
          {"window", m.window()},
          {"seed", m.seed()},
          {"input_vectors", detail::matrix_to_json(m.input_vectors())},
          {"output_vectors", detail::matrix_to_json(m.output_vectors())}};
}

inline SkipGramModel skipgram_from_json(const nlohmann::json& j) {
  auto in = detail::matrix_from_json(j.at("input_vectors"));
  auto out = detail::matrix_from_json(j.at("output_vectors"));
  if (in.cols() != j.at("dims").get<std::size_t>()) {
    throw Error(ErrorCode::Format, "skip-gram dims mismatch");
  }
  return SkipGramModel(j.at("vocab").get<std::vector<std::string>>(),
                       j.at("counts").get<std::vector<std::uint64_t>>(), std::move(in),
                       std::move(out), j.at("window").get<std::size_t>(),
                       j.at("seed").get<std::uint64_t>());
}

inline nlohmann::json to_json(const Hyperparams& h) {
  return {{"alpha", h.alpha.alpha},
          {"lambda", h.lambda},
          {"leg_weighting", std::string(to_string(h.leg_weighting))}};
}

inline Hyperparams hyperparams_from_json(const nlohmann::json& j) {
  Hyperparams h;
  h.alpha.alpha = j.at("alpha").get<double>();
  h.lambda = j.at("lambda").get<double>();
  auto w = parse_leg_weighting(j.at("leg_weighting").get<std::string>());
  if (!w) throw Error(ErrorCode::Format, "unknown leg weighting");
  h.leg_weighting = *w;
  h.validate();
  return h;
}

inline nlohmann::json to_json(const BuildMetadata& m) {
  nlohmann::json j{{"events_fingerprint", m.events_fingerprint},
                   {"window_start", m.window_start},
                   {"window_end", m.window_end},
                   {"n_events", m.n_events},
                   {"importance",
                    {{"click", m.importance[0]},
                     {"cart", m.importance[1]},
                     {"wishlist", m.importance[2]},
                     {"purchase", m.importance[3]}}},
                   {"rank_requested", m.rank_requested},
                   {"nmf_iterations", m.nmf_iterations},
                   {"nmf_seed", m.nmf_seed},
                   {"nmf_objective", m.nmf_objective},
                   {"alpha_percentile", nullptr},
                   {"similarity_normalized", m.similarity_normalized},
                   {"size_pairs_retained", m.size_report.retained},
                   {"size_pairs_dropped", m.size_report.dropped},
                   {"skipgram_seed", nullptr}};
  if (m.alpha_percentile) j["alpha_percentile"] = *m.alpha_percentile;
  if (m.skipgram_seed) j["skipgram_seed"] = *m.skipgram_seed;
  return j;
}

inline BuildMetadata metadata_from_json(const nlohmann::json& j) {
  BuildMetadata m;
  m.events_fingerprint = j.at("events_fingerprint").get<std::string>();
  m.window_start = j.at("window_start").get<std::int64_t>();
  m.window_end = j.at("window_end").get<std::int64_t>();
  m.n_events = j.at("n_events").get<std::size_t>();
  const auto& imp = j.at("importance");
  m.importance = {imp.at("click").get<double>(), imp.at("cart").get<double>(),
                  imp.at("wishlist").get<double>(), imp.at("purchase").get<double>()};
  m.rank_requested = j.at("rank_requested").get<std::size_t>();
  m.nmf_iterations = j.at("nmf_iterations").get<std::size_t>();
  m.nmf_seed = j.at("nmf_seed").get<std::uint64_t>();
  m.nmf_objective = j.at("nmf_objective").get<double>();
  if (!j.at("alpha_percentile").is_null()) m.alpha_percentile = j["alpha_percentile"].get<double>();
  m.similarity_normalized = j.at("similarity_normalized").get<bool>();
  m.size_report.retained = j.at("size_pairs_retained").get<std::size_t>();
  m.size_report.dropped = j.at("size_pairs_dropped").get<std::size_t>();
  if (!j.at("skipgram_seed").is_null()) m.skipgram_seed = j["skipgram_seed"].get<std::uint64_t>();
  return m;
}

inline nlohmann::json to_json(const ModelBundle& b) {
  nlohmann::json j{{"format", "sizegraph-bundle"},
                   {"version", kBundleFormatVersion},
                   {"category", detail::category_to_json(b.category)},
                   {"hyperparams", to_json(b.hyperparams)},
                   {"metadata", to_json(b.metadata)},
                   {"brand_embeddings", to_json(b.brand_embeddings)},
                   {"brand_graph", to_json(b.brand_graph)},
                   {"size_graph", to_json(b.size_graph)},
                   {"skipgram", nullptr}};
  if (b.skipgram) j["skipgram"] = to_json(*b.skipgram);
  return j;
}

inline ModelBundle bundle_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "sizegraph-bundle") {
    throw Error(ErrorCode::Format, "not a sizegraph bundle");
  }
  const int version = j.at("version").get<int>();
  if (version > kBundleFormatVersion) {
    throw Error(ErrorCode::Format, "bundle version " + std::to_string(version) +
                                       " is newer than supported version " +
                                       std::to_string(kBundleFormatVersion));
  }
  ModelBundle b;
  b.category = detail::category_from_json(j.at("category"));
  b.hyperparams = hyperparams_from_json(j.at("hyperparams"));
  b.metadata = metadata_from_json(j.at("metadata"));
  b.brand_embeddings = brand_embeddings_from_json(j.at("brand_embeddings"));
  b.brand_graph = brand_graph_from_json(j.at("brand_graph"));
  b.size_graph = size_graph_from_json(j.at("size_graph"));
  if (!j.at("skipgram").is_null()) b.skipgram = skipgram_from_json(j["skipgram"]);
  if (!(b.brand_embeddings.category() == b.category) || !(b.brand_graph.category() == b.category) ||
      !(b.size_graph.category() == b.category)) {
    throw Error(ErrorCode::Format, "sub-models disagree on category");
  }
  return b;
}

inline std::string serialize_bundle(const ModelBundle& b) { return to_json(b).dump(1) + "\n"; }

inline void save_bundle(const ModelBundle& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << serialize_bundle(b);
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

inline ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::Format, "bundle is not valid JSON: " + path);
  return bundle_from_json(j);
}

}  // namespace sizegraph
