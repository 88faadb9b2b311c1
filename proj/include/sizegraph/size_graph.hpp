#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sizegraph/error.hpp"
#include "sizegraph/types.hpp"

namespace sizegraph {

/// Co-purchase counts for the five size-difference labels, indexed by label_index().
using LabelCounts = std::array<std::int64_t, kLabelCount>;

inline std::int64_t label_total(const LabelCounts& c) {
  std::int64_t s = 0;
  for (auto x : c) s += x;
  return s;
}

/// Directed multigraph over brands. count(u, v, d) is how often a user bought
/// brand u at a size exactly d above their purchase of brand v. Both directions
/// are stored, so count(u, v, d) == count(v, u, -d) always holds.
class SizeGraph {
 public:
  using Key = std::pair<std::string, std::string>;

  SizeGraph() = default;
  explicit SizeGraph(Category category) : category_(std::move(category)) {}

  const Category& category() const noexcept { return category_; }
  const std::vector<std::string>& brands() const noexcept { return brands_; }
  const std::map<Key, LabelCounts>& edges() const noexcept { return edges_; }

  bool contains(const std::string& brand) const {
    return std::binary_search(brands_.begin(), brands_.end(), brand);
  }

  void add_vertex(const std::string& brand) {
    auto it = std::lower_bound(brands_.begin(), brands_.end(), brand);
    if (it == brands_.end() || *it != brand) brands_.insert(it, brand);
  }

  /// Adds `times` co-purchases with size(u) - size(v) == delta_halves / 2, plus the mirror.
  void add(const std::string& u, const std::string& v, int delta_halves, std::int64_t times = 1) {
    if (u == v) throw Error(ErrorCode::InvalidArgument, "self-loop on brand " + u);
    if (std::abs(delta_halves) > 2) {
      throw Error(ErrorCode::InvalidArgument, "size difference outside the label alphabet");
    }
    if (times < 0) throw Error(ErrorCode::InvalidArgument, "negative count");
    add_vertex(u);
    add_vertex(v);
    edges_[{u, v}][label_index(delta_halves)] += times;
    edges_[{v, u}][label_index(-delta_halves)] += times;
  }

  LabelCounts counts(const std::string& u, const std::string& v) const {
    auto it = edges_.find({u, v});
    return it == edges_.end() ? LabelCounts{} : it->second;
  }

  std::int64_t count(const std::string& u, const std::string& v, int delta_halves) const {
    return counts(u, v)[label_index(delta_halves)];
  }

 private:
  Category category_;
  std::vector<std::string> brands_;  // sorted
  std::map<Key, LabelCounts> edges_;
};

struct SizeGraphBuildReport {
  std::size_t retained = 0;
  std::size_t dropped = 0;  // |size difference| > 1
};

struct SizeGraphBuild {
  SizeGraph graph;
  SizeGraphBuildReport report;
};

/// `catalog` lists extra brands that become (possibly isolated) vertices.
inline SizeGraphBuild build_size_graph(const std::vector<CoPurchasePair>& pairs,
                                       const Category& category,
                                       const std::vector<std::string>& catalog = {}) {
  SizeGraphBuild out{SizeGraph(category), {}};
  for (const auto& b : catalog) out.graph.add_vertex(b);
  for (const auto& p : pairs) {
    if (!(p.category == category)) {
      throw Error(ErrorCode::InvalidArgument, "pair from another category: " + p.category.label());
    }
    const int delta = p.size_u.halves() - p.size_v.halves();
    if (std::abs(delta) > 2) {
      ++out.report.dropped;
      continue;
    }
    out.graph.add(p.brand_u, p.brand_v, delta);
    ++out.report.retained;
  }
  return out;
}

inline std::int64_t total_edge_weight(const SizeGraph& g, const std::string& u,
                                      const std::string& v) {
  return label_total(g.counts(u, v));
}

/// e_t of every connected unordered pair, in canonical (u < v) order.
inline std::vector<std::int64_t> connected_pair_weights(const SizeGraph& g) {
  std::vector<std::int64_t> out;
  for (const auto& [key, counts] : g.edges()) {
    if (key.first < key.second) {
      const auto t = label_total(counts);
      if (t > 0) out.push_back(t);
    }
  }
  return out;
}

/// 1 - (connected unordered pairs / all unordered pairs).
inline double sparsity(const SizeGraph& g) {
  const std::size_t n = g.brands().size();
  if (n < 2) throw Error(ErrorCode::DegenerateGraph, "sparsity needs at least two vertices");
  const double connected = static_cast<double>(connected_pair_weights(g).size());
  const double complete = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return 1.0 - connected / complete;
}

struct EdgeCountReport {
  std::size_t n_vertices = 0;
  std::size_t n_edges = 0;  // nonzero (unordered pair, label) combinations
};

inline EdgeCountReport edge_count_report(const SizeGraph& g) {
  EdgeCountReport r{g.brands().size(), 0};
  for (const auto& [key, counts] : g.edges()) {
    if (!(key.first < key.second)) continue;
    for (auto c : counts) r.n_edges += c > 0 ? 1 : 0;
  }
  return r;
}

struct EdgeStrengthThreshold {
  double alpha = 0.0;
};

/// Nearest-rank percentile of the connected-pair total edge weights.
inline EdgeStrengthThreshold alpha_from_percentile(const SizeGraph& g, double percentile) {
  if (!(percentile > 0.0 && percentile < 100.0)) {
    throw Error(ErrorCode::InvalidArgument, "percentile must lie in (0, 100)");
  }
  auto weights = connected_pair_weights(g);
  if (weights.empty()) throw Error(ErrorCode::DegenerateGraph, "no connected brand pairs");
  std::sort(weights.begin(), weights.end());
  const double n = static_cast<double>(weights.size());
  // The 1e-9 guard stops products like 0.7 * 10 rounding up past an exact rank.
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, weights.size());
  return {static_cast<double>(weights[rank - 1])};
}

}  // namespace sizegraph
