#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sizegraph/bundle.hpp"
#include "sizegraph/error.hpp"
#include "sizegraph/skipgram.hpp"
#include "sizegraph/types.hpp"
#include "sizegraph/wbsr.hpp"

namespace sizegraph {

// ---------------------------------------------------------------------------
// Synthetic world with known ground truth

struct SynthConfig {
  Category category{Gender::Men, "Sports Shoes"};
  std::size_t n_users = 2000;
  std::size_t n_brands = 20;
  double purchases_per_user = 8.0;
  std::vector<int> brand_offsets;  // half sizes in [-2, 2], one per brand
  std::vector<int> price_band;     // band index, one per brand
  double in_band_rate = 0.9;
  double noise_rate = 0.0;         // chance a purchase is off by half a size
  double clicks_per_purchase = 6.0;
  double carts_per_purchase = 2.0;
  double wishlists_per_purchase = 1.0;
  std::int64_t start_ts = 1'700'000'000;
  std::uint64_t seed = 7;

  /// Offsets cycle through -1, -0.5, 0, 0.5, 1; brands are dealt round-robin into bands.
  static SynthConfig with_defaults(std::size_t n_brands, std::size_t n_bands, std::uint64_t seed) {
    SynthConfig c;
    c.n_brands = n_brands;
    c.seed = seed;
    for (std::size_t b = 0; b < n_brands; ++b) {
      c.brand_offsets.push_back(static_cast<int>(b % 5) - 2);
      c.price_band.push_back(static_cast<int>(b % std::max<std::size_t>(n_bands, 1)));
    }
    return c;
  }

  void validate() const {
    if (n_brands == 0 || n_users == 0) throw Error(ErrorCode::InvalidArgument, "empty world");
    if (brand_offsets.size() != n_brands || price_band.size() != n_brands) {
      throw Error(ErrorCode::InvalidArgument, "every brand needs an offset and a band");
    }
    for (int o : brand_offsets) {
      if (std::abs(o) > 2) throw Error(ErrorCode::InvalidArgument, "offset outside [-1, 1]");
    }
    if (!(noise_rate >= 0.0 && noise_rate < 0.5)) {
      throw Error(ErrorCode::InvalidArgument, "noise_rate must lie in [0, 0.5)");
    }
    if (!(in_band_rate >= 0.0 && in_band_rate <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "in_band_rate must lie in [0, 1]");
    }
    if (!(purchases_per_user >= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "purchases_per_user must be >= 1");
    }
  }
};

struct GroundTruth {
  std::map<std::string, int> brand_offset_halves;
  std::map<std::string, UkSize> user_foot;
};

struct SynthData {
  std::vector<InteractionEvent> events;  // clicks, carts and wishlists
  std::vector<InteractionEvent> orders;  // purchases
  GroundTruth truth;
};

inline std::string synth_brand_name(std::size_t b) {
  std::ostringstream os;
  os << "Brand " << std::setw(2) << std::setfill('0') << b;
  return os.str();
}

inline std::string synth_user_name(std::size_t u) {
  std::ostringstream os;
  os << "u" << std::setw(5) << std::setfill('0') << u;
  return os.str();
}

/// Users have a foot size in [4, 12]; a purchase of brand b is recorded at
/// foot + offset(b), off by half a size with probability noise_rate. Users shop
/// mostly inside their own price band. Fully determined by the seed.
inline SynthData synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&rng] { return detail::uniform01(rng); };
  auto pick = [&](const std::vector<std::size_t>& pool) {
    return pool[static_cast<std::size_t>(uniform() * static_cast<double>(pool.size()))];
  };

  SynthData data;
  std::vector<std::string> brands;
  std::map<int, std::vector<std::size_t>> by_band;
  for (std::size_t b = 0; b < cfg.n_brands; ++b) {
    brands.push_back(synth_brand_name(b));
    data.truth.brand_offset_halves[brands.back()] = cfg.brand_offsets[b];
    by_band[cfg.price_band[b]].push_back(b);
  }
  std::vector<int> bands;
  for (const auto& [band, members] : by_band) bands.push_back(band);

  std::poisson_distribution<int> extra_purchases(cfg.purchases_per_user - 1.0);
  auto draw_count = [&](double mean) {
    // Fractional means: floor plus a Bernoulli for the remainder.
    double whole = std::floor(mean);
    return static_cast<std::size_t>(whole) + (uniform() < mean - whole ? 1 : 0);
  };

  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    const auto user = synth_user_name(u);
    const int foot = 8 + static_cast<int>(uniform() * 17.0);  // halves 8..24
    const int band = bands[static_cast<std::size_t>(uniform() * static_cast<double>(bands.size()))];
    std::vector<std::size_t> outside;
    for (const auto& [other, members] : by_band) {
      if (other != band) outside.insert(outside.end(), members.begin(), members.end());
    }
    const auto& inside = by_band[band];
    auto choose_brand = [&] {
      if (outside.empty() || uniform() < cfg.in_band_rate) return pick(inside);
      return pick(outside);
    };
    data.truth.user_foot[user] = UkSize::from_halves(foot);

    const std::size_t n_purchases = 1 + static_cast<std::size_t>(extra_purchases(rng));
    std::int64_t ts = cfg.start_ts + static_cast<std::int64_t>(uniform() * 86400.0);
    for (std::size_t k = 0; k < n_purchases; ++k) {
      const std::size_t b = choose_brand();
      auto browse = [&](EventKind kind, double mean) {
        const std::size_t n = draw_count(mean);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t target = uniform() < 0.5 ? b : choose_brand();
          data.events.push_back({user, brands[target], cfg.category, kind, ts, std::nullopt, std::nullopt});
          ts += 1 + static_cast<std::int64_t>(uniform() * 600.0);
        }
      };
      browse(EventKind::Click, cfg.clicks_per_purchase);
      browse(EventKind::Wishlist, cfg.wishlists_per_purchase);
      browse(EventKind::Cart, cfg.carts_per_purchase);

      int size = foot + cfg.brand_offsets[b];
      if (uniform() < cfg.noise_rate) size += uniform() < 0.5 ? -1 : 1;
      size = std::clamp(size, UkSize::kMinHalves, UkSize::kMaxHalves);
      data.orders.push_back({user, brands[b], cfg.category, EventKind::Purchase, ts,
                             UkSize::from_halves(size), user + "-o" + std::to_string(k)});
      ts += 86400 + static_cast<std::int64_t>(uniform() * 86400.0 * 30.0);
    }
  }
  return data;
}

inline void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
  for (const auto& [brand, halves] : truth.brand_offset_halves) {
    out << nlohmann::json{{"type", "brand"}, {"brand", brand}, {"offset", halves / 2.0}}.dump()
        << '\n';
  }
  for (const auto& [user, foot] : truth.user_foot) {
    out << nlohmann::json{{"type", "user"}, {"user", user}, {"foot", foot.value()}}.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Splitting

struct OrderSplit {
  std::vector<InteractionEvent> train;
  std::vector<InteractionEvent> test;
};

/// Samples round(fraction * n) orders (floored) for test, then returns to train
/// every test order whose user would otherwise have no train purchase in that
/// category. Both halves keep the input order.
inline OrderSplit split_orders(const std::vector<InteractionEvent>& orders, double test_fraction,
                               std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "test fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(orders.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with our own index draw, for portable determinism.
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(detail::uniform01(rng) * static_cast<double>(i));
    std::swap(idx[i - 1], idx[j]);
  }
  const auto n_test = static_cast<std::size_t>(
      std::floor(test_fraction * static_cast<double>(orders.size()) + 1e-9));
  std::vector<bool> is_test(orders.size(), false);
  for (std::size_t k = 0; k < n_test; ++k) is_test[idx[k]] = true;

  auto anchor_key = [](const InteractionEvent& e) {
    return std::make_tuple(e.user_id, std::string(to_string(e.category.gender())),
                           detail::lower(e.category.article_type()));
  };
  std::set<std::tuple<std::string, std::string, std::string>> anchored;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (!is_test[i]) anchored.insert(anchor_key(orders[i]));
  }
  OrderSplit out;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (is_test[i] && anchored.count(anchor_key(orders[i]))) {
      out.test.push_back(orders[i]);
    } else {
      out.train.push_back(orders[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

enum class EvalMethod { Wbsr, DirectOnly, SkipGram };

inline std::string_view to_string(EvalMethod m) {
  switch (m) {
    case EvalMethod::Wbsr: return "wbsr";
    case EvalMethod::DirectOnly: return "direct-only";
    case EvalMethod::SkipGram: return "skipgram";
  }
  return "wbsr";
}

struct RouteStats {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const { return count == 0 ? 0.0 : static_cast<double>(correct) / count; }
};

struct EvalReport {
  Category category;
  EvalMethod method = EvalMethod::Wbsr;
  std::size_t n_queries = 0;
  std::size_t n_covered = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;  // over covered queries; 0 when nothing is covered
  double coverage = 0.0;  // covered / queries; 0 when there are no queries
  std::map<std::string, RouteStats> per_method;
  std::optional<double> sparsity;
};

/// The questionnaire stand-in: each user's earliest in-category train purchase.
inline std::map<std::string, Preference> earliest_preferences(
    const std::vector<InteractionEvent>& train_orders, const Category& category) {
  std::map<std::string, const InteractionEvent*> first;
  for (const auto& e : train_orders) {
    if (e.kind != EventKind::Purchase || !(e.category == category) || !e.size) continue;
    auto [it, inserted] = first.try_emplace(e.user_id, &e);
    if (inserted) continue;
    const auto* cur = it->second;
    if (std::tie(e.timestamp, e.order_id, e.brand_id, *e.size) <
        std::tie(cur->timestamp, cur->order_id, cur->brand_id, *cur->size)) {
      it->second = &e;
    }
  }
  std::map<std::string, Preference> out;
  for (const auto& [user, e] : first) out.emplace(user, Preference{category, e->brand_id, *e->size});
  return out;
}

struct Prediction {
  UkSize size;
  std::string route;
};

/// One query through the chosen method; nullopt when the method abstains.
inline std::optional<Prediction> predict(EvalMethod method, const ModelBundle& bundle,
                                         const Preference& pref, const std::string& target) {
  try {
    switch (method) {
      case EvalMethod::Wbsr: {
        auto r = recommend(pref, target, bundle.size_graph, bundle.brand_graph, bundle.hyperparams);
        return Prediction{r.size, std::string(to_string(r.method))};
      }
      case EvalMethod::DirectOnly: {
        if (pref.brand == target) return Prediction{pref.size, "Identity"};
        auto r = direct_recommend(bundle.size_graph, pref.brand, pref.size, target,
                                  bundle.hyperparams);
        if (!r) return std::nullopt;
        return Prediction{r->size, "Direct"};
      }
      case EvalMethod::SkipGram: {
        if (!bundle.skipgram) throw Error(ErrorCode::InvalidArgument, "bundle has no skip-gram model");
        auto r = recommend_skipgram(*bundle.skipgram, pref, all_grid_sizes(), target);
        return Prediction{r.size, "SkipGram"};
      }
    }
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::NoPath:
      case ErrorCode::UnknownBrand:
      case ErrorCode::UnknownPreference:
      case ErrorCode::NoCandidates:
        return std::nullopt;
      default:
        throw;
    }
  }
  return std::nullopt;
}

/// Per-test-order exact-match accuracy over answered queries, plus coverage.
inline EvalReport evaluate(EvalMethod method, const ModelBundle& bundle,
                           const std::vector<InteractionEvent>& train_orders,
                           const std::vector<InteractionEvent>& test_orders) {
  EvalReport report;
  report.category = bundle.category;
  report.method = method;
  if (bundle.size_graph.brands().size() >= 2) report.sparsity = sparsity(bundle.size_graph);
  const auto prefs = earliest_preferences(train_orders, bundle.category);
  for (const auto& order : test_orders) {
    if (order.kind != EventKind::Purchase || !(order.category == bundle.category) || !order.size) {
      continue;
    }
    ++report.n_queries;
    auto pref = prefs.find(order.user_id);
    if (pref == prefs.end()) continue;
    auto pred = predict(method, bundle, pref->second, order.brand_id);
    if (!pred) continue;
    ++report.n_covered;
    const bool hit = pred->size == *order.size;
    report.n_correct += hit ? 1 : 0;
    auto& route = report.per_method[pred->route];
    ++route.count;
    route.correct += hit ? 1 : 0;
  }
  if (report.n_covered > 0) {
    report.accuracy = static_cast<double>(report.n_correct) / static_cast<double>(report.n_covered);
  }
  if (report.n_queries > 0) {
    report.coverage = static_cast<double>(report.n_covered) / static_cast<double>(report.n_queries);
  }
  return report;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json routes = nlohmann::json::object();
  for (const auto& [name, s] : r.per_method) {
    routes[name] = {{"count", s.count}, {"correct", s.correct}, {"accuracy", s.accuracy()}};
  }
  return {{"gender", std::string(to_string(r.category.gender()))},
          {"article_type", r.category.article_type()},
          {"method", std::string(to_string(r.method))},
          {"n_queries", r.n_queries},
          {"n_covered", r.n_covered},
          {"n_correct", r.n_correct},
          {"accuracy", r.accuracy},
          {"coverage", r.coverage},
          {"per_method", std::move(routes)},
          {"sparsity", r.sparsity ? nlohmann::json(*r.sparsity) : nlohmann::json(nullptr)}};
}

// ---------------------------------------------------------------------------
// Hyperparameter sweeps

struct SweepRow {
  double parameter = 0.0;  // percentile for alpha sweeps, lambda for lambda sweeps
  double alpha = 0.0;
  double lambda = 0.0;
  EvalReport report;
};

inline std::vector<SweepRow> sweep_alpha(const std::vector<double>& percentiles, double lambda,
                                         const ModelBundle& bundle,
                                         const std::vector<InteractionEvent>& train_orders,
                                         const std::vector<InteractionEvent>& validation_orders) {
  std::vector<SweepRow> rows;
  for (double p : percentiles) {
    ModelBundle point = bundle;
    point.hyperparams.alpha = alpha_from_percentile(bundle.size_graph, p);
    point.hyperparams.lambda = lambda;
    point.hyperparams.validate();
    rows.push_back({p, point.hyperparams.alpha.alpha, lambda,
                    evaluate(EvalMethod::Wbsr, point, train_orders, validation_orders)});
  }
  return rows;
}

inline std::vector<SweepRow> sweep_lambda(std::vector<double> lambdas, double alpha,
                                          const ModelBundle& bundle,
                                          const std::vector<InteractionEvent>& train_orders,
                                          const std::vector<InteractionEvent>& validation_orders) {
  std::sort(lambdas.begin(), lambdas.end());
  std::vector<SweepRow> rows;
  for (double l : lambdas) {
    ModelBundle point = bundle;
    point.hyperparams.alpha.alpha = alpha;
    point.hyperparams.lambda = l;
    point.hyperparams.validate();
    rows.push_back({l, alpha, l, evaluate(EvalMethod::Wbsr, point, train_orders, validation_orders)});
  }
  return rows;
}

inline nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows, bool alpha_sweep) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row{{alpha_sweep ? "percentile" : "lambda", r.parameter},
                       {"alpha", r.alpha},
                       {"lambda", r.lambda},
                       {"accuracy", r.report.accuracy},
                       {"coverage", r.report.coverage},
                       {"n_queries", r.report.n_queries}};
    if (!alpha_sweep) row["production_choice"] = std::abs(r.lambda - kDefaultLambda) < 1e-12;
    out.push_back(std::move(row));
  }
  return out;
}

inline std::string format_percent(double fraction) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << fraction * 100.0;
  return os.str();
}

/// Plain-text table: Gender | Article Type | Skip Gram Accuracy % | WBSR Accuracy %.
inline std::string accuracy_table(const Category& category, const std::optional<EvalReport>& skipgram,
                                  const std::optional<EvalReport>& wbsr) {
  std::ostringstream os;
  os << "Gender | Article Type | Skip Gram Accuracy % | WBSR Accuracy %\n";
  os << to_string(category.gender()) << " | " << category.article_type() << " | "
     << (skipgram ? format_percent(skipgram->accuracy) : "-") << " | "
     << (wbsr ? format_percent(wbsr->accuracy) : "-") << "\n";
  return os.str();
}

inline std::string sweep_table(const std::vector<SweepRow>& rows, bool alpha_sweep) {
  std::ostringstream os;
  os << (alpha_sweep ? "Percentile | Alpha | Accuracy % | Coverage %\n"
                     : "Lambda | Alpha | Accuracy % | Coverage %\n");
  for (const auto& r : rows) {
    os << r.parameter << " | " << r.alpha << " | " << format_percent(r.report.accuracy) << " | "
       << format_percent(r.report.coverage);
    if (!alpha_sweep && std::abs(r.lambda - kDefaultLambda) < 1e-12) os << " | production choice";
    os << "\n";
  }
  return os.str();
}

}  // namespace sizegraph
