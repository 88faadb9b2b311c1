#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sizegraph/brand_similarity.hpp"
#include "sizegraph/error.hpp"
#include "sizegraph/size_graph.hpp"
#include "sizegraph/types.hpp"

namespace sizegraph {

/// How a leg u -> z turns its label counts into the weights used by marginalization.
enum class LegWeighting { Frequency, RawCount, Softmax };

inline std::string_view to_string(LegWeighting w) {
  switch (w) {
    case LegWeighting::Frequency: return "frequency";
    case LegWeighting::RawCount: return "raw-count";
    case LegWeighting::Softmax: return "softmax";
  }
  return "frequency";
}

inline std::optional<LegWeighting> parse_leg_weighting(std::string_view s) {
  for (auto w : {LegWeighting::Frequency, LegWeighting::RawCount, LegWeighting::Softmax}) {
    if (s == to_string(w)) return w;
  }
  return std::nullopt;
}

inline constexpr double kDefaultLambda = 0.7;

struct Hyperparams {
  EdgeStrengthThreshold alpha;
  double lambda = kDefaultLambda;
  LegWeighting leg_weighting = LegWeighting::Frequency;

  void validate() const {
    if (!(alpha.alpha >= 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 0");
    if (!(lambda > 0.0 && lambda < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "lambda must lie in (0, 1)");
    }
  }
};

enum class Method { Identity, Direct, Marginal };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Identity: return "Identity";
    case Method::Direct: return "Direct";
    case Method::Marginal: return "Marginal";
  }
  return "Identity";
}

struct TrailEntry {
  std::string brand;
  double contribution = 0.0;
};

struct Recommendation {
  UkSize size;
  Method method = Method::Identity;
  double confidence = 0.0;
  int delta_halves = 0;  // query size - recommended size, before clamping
  std::vector<TrailEntry> trail;
  bool clamped = false;
};

/// Numerically stable softmax of the five raw label counts of edge u -> v.
inline std::array<double, kLabelCount> softmax_counts(const LabelCounts& counts) {
  std::array<double, kLabelCount> out{};
  double hi = static_cast<double>(counts[0]);
  for (auto c : counts) hi = std::max(hi, static_cast<double>(c));
  double sum = 0.0;
  for (int i = 0; i < kLabelCount; ++i) {
    out[i] = std::exp(static_cast<double>(counts[i]) - hi);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

inline std::array<double, kLabelCount> edge_softmax(const SizeGraph& g, const std::string& u,
                                                    const std::string& v) {
  const auto counts = g.counts(u, v);
  if (label_total(counts) <= 0) {
    throw Error(ErrorCode::NoDirectEdge, u + " -> " + v);
  }
  return softmax_counts(counts);
}

namespace detail {

// Visits label offsets in tie-break order: 0, -1, +1, -2, +2, ... (half sizes).
// The first maximum encountered wins, so ties go to the smallest |delta|, negatives first.
template <std::size_t N>
int argmax_delta(const std::array<double, N>& values, int center) {
  int best = center;
  for (int mag = 0; mag <= center; ++mag) {
    for (int sign : {-1, 1}) {
      if (mag == 0 && sign == 1) continue;
      const int idx = center + sign * mag;
      if (values[idx] > values[best]) best = idx;
    }
  }
  return best - center;
}

inline Recommendation finish(UkSize query, int delta_halves, Method method, double confidence,
                             std::vector<TrailEntry> trail = {}) {
  Recommendation r;
  const int raw = query.halves() - delta_halves;
  const int bounded = std::clamp(raw, UkSize::kMinHalves, UkSize::kMaxHalves);
  r.size = UkSize::from_halves(bounded);
  r.clamped = bounded != raw;
  r.method = method;
  r.confidence = confidence;
  r.delta_halves = delta_halves;
  r.trail = std::move(trail);
  return r;
}

}  // namespace detail

/// Delta with the highest softmax probability; ties resolve like marginal_recommend.
inline int softmax_argmax_delta(const std::array<double, kLabelCount>& probs) {
  return detail::argmax_delta(probs, 2);
}

/// Strong-edge route: needs e_t(u, v) > alpha and a top softmax probability > lambda.
inline std::optional<Recommendation> direct_recommend(const SizeGraph& g, const std::string& u,
                                                      UkSize s_u, const std::string& v,
                                                      const Hyperparams& params) {
  if (u == v) throw Error(ErrorCode::InvalidArgument, "direct route needs two distinct brands");
  const auto counts = g.counts(u, v);
  const auto total = label_total(counts);
  if (total <= 0 || !(static_cast<double>(total) > params.alpha.alpha)) return std::nullopt;
  const auto probs = softmax_counts(counts);
  const int delta = softmax_argmax_delta(probs);
  const double top = probs[label_index(delta)];
  if (!(top > params.lambda)) return std::nullopt;
  return detail::finish(s_u, delta, Method::Direct, top);
}

struct MarginalScores {
  std::array<double, kCompositeCount> score{};  // indexed by composite_index()
  std::vector<TrailEntry> trail;                // per intermediary, ascending brand id
};

/// Per-label leg weights P(.|a, b) for the chosen weighting.
inline std::array<double, kLabelCount> leg_weights(const LabelCounts& counts,
                                                   LegWeighting weighting) {
  std::array<double, kLabelCount> out{};
  switch (weighting) {
    case LegWeighting::Frequency: {
      const double total = static_cast<double>(label_total(counts));
      for (int i = 0; i < kLabelCount; ++i) out[i] = static_cast<double>(counts[i]) / total;
      break;
    }
    case LegWeighting::RawCount:
      for (int i = 0; i < kLabelCount; ++i) out[i] = static_cast<double>(counts[i]);
      break;
    case LegWeighting::Softmax:
      out = softmax_counts(counts);
      break;
  }
  return out;
}

/// Two-hop marginalization: for every intermediary z connected to both u and v,
/// score[i + j] += P(i | u, z) * sim(u, z) * P(j | z, v) * sim(z, v).
/// Intermediaries are visited in ascending brand id, then i, then j.
/// Brands missing from the similarity graph contribute zero similarity.
inline MarginalScores marginal_scores(const SizeGraph& size_graph,
                                      const BrandSimilarityGraph& brand_graph,
                                      const std::string& u, const std::string& v,
                                      LegWeighting weighting = LegWeighting::Frequency) {
  if (u == v) throw Error(ErrorCode::InvalidArgument, "marginalization needs two distinct brands");
  MarginalScores out;
  for (const auto& z : size_graph.brands()) {
    if (z == u || z == v) continue;
    const auto uz = size_graph.counts(u, z);
    const auto zv = size_graph.counts(z, v);
    if (label_total(uz) <= 0 || label_total(zv) <= 0) continue;
    const double sim_uz = brand_graph.find(u, z).value_or(0.0);
    const double sim_zv = brand_graph.find(z, v).value_or(0.0);
    const auto p_uz = leg_weights(uz, weighting);
    const auto p_zv = leg_weights(zv, weighting);
    double z_total = 0.0;
    for (int i = 0; i < kLabelCount; ++i) {
      for (int j = 0; j < kLabelCount; ++j) {
        const double contribution = p_uz[i] * sim_uz * p_zv[j] * sim_zv;
        out.score[composite_index(label_halves(i) + label_halves(j))] += contribution;
        z_total += contribution;
      }
    }
    out.trail.push_back({z, z_total});
  }
  if (out.trail.empty()) {
    throw Error(ErrorCode::NoPath, u + " and " + v + " share no intermediary brand");
  }
  return out;
}

/// Normalizes the scores and picks the largest; ties go to the smallest |delta|,
/// then the negative one.
inline Recommendation marginal_recommend(const MarginalScores& scores, UkSize s_u) {
  double total = 0.0;
  for (double s : scores.score) total += s;
  if (!(total > 0.0)) throw Error(ErrorCode::NoPath, "all marginal scores are zero");
  const int delta = detail::argmax_delta(scores.score, 4);
  const double confidence = scores.score[composite_index(delta)] / total;
  auto trail = scores.trail;
  if (trail.empty()) trail.push_back({"", total});
  return detail::finish(s_u, delta, Method::Marginal, confidence, std::move(trail));
}

/// Full decision procedure: identity, then direct, then two-hop marginalization.
inline Recommendation recommend(const Preference& pref, const std::string& target,
                                const SizeGraph& size_graph,
                                const BrandSimilarityGraph& brand_graph,
                                const Hyperparams& params) {
  if (pref.brand == target) return detail::finish(pref.size, 0, Method::Identity, 1.0);
  auto known = [&](const std::string& b) { return size_graph.contains(b) || brand_graph.contains(b); };
  if (!known(target)) throw Error(ErrorCode::UnknownBrand, target);
  if (!known(pref.brand)) throw Error(ErrorCode::UnknownBrand, pref.brand);
  if (auto direct = direct_recommend(size_graph, pref.brand, pref.size, target, params)) {
    return *direct;
  }
  const auto scores = marginal_scores(size_graph, brand_graph, pref.brand, target,
                                      params.leg_weighting);
  return marginal_recommend(scores, pref.size);
}

}  // namespace sizegraph
