#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sizegraph/error.hpp"
#include "sizegraph/matrix.hpp"
#include "sizegraph/types.hpp"

namespace sizegraph {

namespace detail {

inline std::string underscored(std::string_view s) {
  std::string out = trim(s);
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

}  // namespace detail

struct SkuParts {
  Gender gender = Gender::Men;
  std::string article_type;
  std::string brand;
  UkSize size;

  friend bool operator==(const SkuParts&, const SkuParts&) = default;
};

/// Known brands, keyed by their underscored token form. Decoding needs it
/// because brand names may themselves contain underscores.
class BrandRegistry {
 public:
  BrandRegistry() = default;
  explicit BrandRegistry(const std::vector<std::string>& brands) {
    for (const auto& b : brands) add(b);
  }

  void add(const std::string& brand) {
    const auto token = detail::underscored(brand);
    if (token.empty()) throw Error(ErrorCode::InvalidArgument, "empty brand name");
    auto [it, inserted] = by_token_.emplace(token, brand);
    if (!inserted && it->second != brand) {
      throw Error(ErrorCode::InvalidArgument,
                  "brands '" + it->second + "' and '" + brand + "' share the token " + token);
    }
  }

  bool contains(const std::string& brand) const {
    auto it = by_token_.find(detail::underscored(brand));
    return it != by_token_.end() && it->second == brand;
  }

  const std::map<std::string, std::string>& tokens() const noexcept { return by_token_; }

 private:
  std::map<std::string, std::string> by_token_;
};

/// "Men_Casual_Shoes_Vans_8": gender, article type, brand, size with spaces as underscores.
inline std::string encode_sku(Gender gender, std::string_view article_type, std::string_view brand,
                              UkSize size) {
  return std::string(to_string(gender)) + "_" + detail::underscored(article_type) + "_" +
         detail::underscored(brand) + "_" + size.to_string();
}

inline std::string encode_sku(const Category& c, std::string_view brand, UkSize size) {
  return encode_sku(c.gender(), c.article_type(), brand, size);
}

/// Inverse of encode_sku. The longest registered brand token that ends the middle
/// segment wins; article-type underscores are read back as spaces.
inline std::optional<SkuParts> decode_sku(std::string_view token, const BrandRegistry& registry) {
  const auto first = token.find('_');
  const auto last = token.rfind('_');
  if (first == std::string_view::npos || last == first) return std::nullopt;
  auto gender = parse_gender(token.substr(0, first));
  if (!gender) return std::nullopt;
  auto size_text = std::string(token.substr(last + 1));
  double size_value = 0.0;
  try {
    std::size_t pos = 0;
    size_value = std::stod(size_text, &pos);
    if (pos != size_text.size()) return std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  auto size = UkSize::try_from_value(size_value);
  if (!size) return std::nullopt;

  const std::string middle(token.substr(first + 1, last - first - 1));
  const std::string* best_brand = nullptr;
  std::size_t best_len = 0;
  for (const auto& [brand_token, brand] : registry.tokens()) {
    if (brand_token.size() + 2 > middle.size()) continue;  // need "<article>_" before it
    if (brand_token.size() <= best_len) continue;
    const auto split = middle.size() - brand_token.size();
    if (middle.compare(split, std::string::npos, brand_token) == 0 && middle[split - 1] == '_') {
      best_brand = &brand;
      best_len = brand_token.size();
    }
  }
  if (!best_brand) return std::nullopt;
  std::string article = middle.substr(0, middle.size() - best_len - 1);
  std::replace(article.begin(), article.end(), '_', ' ');
  return SkuParts{*gender, article, *best_brand, *size};
}

struct SkuDocument {
  std::string user_id;
  std::vector<std::string> words;
};

/// One document per purchasing user: their in-category purchases as SKU words,
/// oldest first (ties by order id, then token). Users appear in id order.
inline std::vector<SkuDocument> build_documents(const std::vector<InteractionEvent>& events,
                                                const Category& category) {
  struct Item {
    std::int64_t ts;
    std::string order;
    std::string word;
  };
  std::map<std::string, std::vector<Item>> by_user;
  for (const auto& e : events) {
    if (e.kind != EventKind::Purchase || !(e.category == category) || !e.size) continue;
    by_user[e.user_id].push_back(
        {e.timestamp, e.order_id.value_or(""), encode_sku(category, e.brand_id, *e.size)});
  }
  std::vector<SkuDocument> docs;
  for (auto& [user, items] : by_user) {
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
      return std::tie(a.ts, a.order, a.word) < std::tie(b.ts, b.order, b.word);
    });
    SkuDocument doc{user, {}};
    for (auto& it : items) doc.words.push_back(std::move(it.word));
    docs.push_back(std::move(doc));
  }
  return docs;
}

struct SkipGramConfig {
  std::size_t dims = 32;
  std::size_t window = 5;
  std::size_t epochs = 10;
  double learning_rate = 0.025;
  std::size_t negatives = 5;
  std::uint64_t seed = 1;
};

class SkipGramModel {
 public:
  SkipGramModel() = default;
  SkipGramModel(std::vector<std::string> vocab, std::vector<std::uint64_t> counts, Matrix input,
                Matrix output, std::size_t window, std::uint64_t seed)
      : vocab_(std::move(vocab)),
        counts_(std::move(counts)),
        input_(std::move(input)),
        output_(std::move(output)),
        window_(window),
        seed_(seed) {
    if (input_.rows() != vocab_.size() || output_.rows() != vocab_.size() ||
        counts_.size() != vocab_.size() || input_.cols() != output_.cols()) {
      throw Error(ErrorCode::InvalidArgument, "skip-gram matrices do not match the vocabulary");
    }
    for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], i);
  }

  const std::vector<std::string>& vocab() const noexcept { return vocab_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  const Matrix& input_vectors() const noexcept { return input_; }
  const Matrix& output_vectors() const noexcept { return output_; }
  Matrix& input_vectors() noexcept { return input_; }
  Matrix& output_vectors() noexcept { return output_; }
  std::size_t dims() const noexcept { return input_.cols(); }
  std::size_t window() const noexcept { return window_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::optional<std::size_t> index_of(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> vocab_;
  std::vector<std::uint64_t> counts_;
  Matrix input_;
  Matrix output_;
  std::size_t window_ = 0;
  std::uint64_t seed_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Negative-sampling loss of one (center, context) pair:
///   -log s(u_c . v_o) - sum_n log s(-u_c . v_n)
inline double negative_sampling_loss(std::span<const double> center,
                                     std::span<const double> context,
                                     const std::vector<std::span<const double>>& negatives) {
  double loss = -detail::log_sigmoid(dot(center, context));
  for (const auto& neg : negatives) loss -= detail::log_sigmoid(-dot(center, neg));
  return loss;
}

struct NegativeSamplingGradient {
  std::vector<double> center;
  std::vector<double> context;
  std::vector<std::vector<double>> negatives;
};

inline NegativeSamplingGradient negative_sampling_gradient(
    std::span<const double> center, std::span<const double> context,
    const std::vector<std::span<const double>>& negatives) {
  const std::size_t d = center.size();
  NegativeSamplingGradient g;
  g.center.assign(d, 0.0);
  g.context.assign(d, 0.0);
  const double pos = detail::sigmoid(dot(center, context)) - 1.0;
  for (std::size_t k = 0; k < d; ++k) {
    g.center[k] += pos * context[k];
    g.context[k] = pos * center[k];
  }
  for (const auto& neg : negatives) {
    const double s = detail::sigmoid(dot(center, neg));
    std::vector<double> gn(d);
    for (std::size_t k = 0; k < d; ++k) {
      g.center[k] += s * neg[k];
      gn[k] = s * center[k];
    }
    g.negatives.push_back(std::move(gn));
  }
  return g;
}

/// Full-softmax loss -log p(context | center) over every output vector. Only
/// practical for tiny vocabularies; kept as a reference for gradient checks.
inline double full_softmax_loss(std::span<const double> center, const Matrix& output,
                                std::size_t context) {
  std::vector<double> logits(output.rows());
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < output.rows(); ++w) {
    logits[w] = dot(center, output.row(w));
    hi = std::max(hi, logits[w]);
  }
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - hi);
  return -(logits[context] - hi - std::log(sum));
}

/// Gradient of full_softmax_loss with respect to the center vector.
inline std::vector<double> full_softmax_center_gradient(std::span<const double> center,
                                                        const Matrix& output,
                                                        std::size_t context) {
  std::vector<double> logits(output.rows());
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < output.rows(); ++w) {
    logits[w] = dot(center, output.row(w));
    hi = std::max(hi, logits[w]);
  }
  double sum = 0.0;
  for (double& l : logits) {
    l = std::exp(l - hi);
    sum += l;
  }
  std::vector<double> g(center.size(), 0.0);
  for (std::size_t w = 0; w < output.rows(); ++w) {
    const double p = logits[w] / sum - (w == context ? 1.0 : 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += p * output(w, k);
  }
  return g;
}

/// A training example with its negatives already drawn; used for frozen-batch losses.
struct SkipGramExample {
  std::size_t center = 0;
  std::size_t context = 0;
  std::vector<std::size_t> negatives;
};

inline double batch_loss(const SkipGramModel& model, const std::vector<SkipGramExample>& batch) {
  double total = 0.0;
  for (const auto& ex : batch) {
    std::vector<std::span<const double>> negs;
    for (auto n : ex.negatives) negs.push_back(model.output_vectors().row(n));
    total += negative_sampling_loss(model.input_vectors().row(ex.center),
                                    model.output_vectors().row(ex.context), negs);
  }
  return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
}

/// Draws word indices from the unigram^(3/4) distribution.
class NegativeSampler {
 public:
  explicit NegativeSampler(const std::vector<std::uint64_t>& counts) {
    double acc = 0.0;
    for (auto c : counts) {
      acc += std::pow(static_cast<double>(c), 0.75);
      cumulative_.push_back(acc);
    }
  }

  std::size_t operator()(std::mt19937_64& rng) const {
    const double r = detail::uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

using EpochCallback = std::function<void(std::size_t epoch, const SkipGramModel&)>;

/// Single-threaded SGD on the negative-sampling objective over (center, context)
/// pairs within +-window positions. The learning rate decays linearly towards zero
/// (floored at 1e-4 of the initial rate). Bitwise reproducible for a fixed seed.
inline SkipGramModel train_skipgram(const std::vector<SkuDocument>& documents,
                                    const SkipGramConfig& cfg,
                                    const EpochCallback& on_epoch = {}) {
  if (cfg.dims == 0 || cfg.window == 0) {
    throw Error(ErrorCode::InvalidArgument, "dims and window must be >= 1");
  }
  std::map<std::string, std::uint64_t> freq;
  std::size_t pairs_per_epoch = 0;
  for (const auto& doc : documents) {
    for (const auto& w : doc.words) ++freq[w];
    const std::size_t n = doc.words.size();
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t lo = c >= cfg.window ? c - cfg.window : 0;
      const std::size_t hi = std::min(n - 1, c + cfg.window);
      pairs_per_epoch += hi - lo;
    }
  }
  if (pairs_per_epoch == 0) {
    throw Error(ErrorCode::InsufficientData, "no document has two or more words");
  }

  std::vector<std::string> vocab;
  std::vector<std::uint64_t> counts;
  for (const auto& [w, c] : freq) {
    vocab.push_back(w);
    counts.push_back(c);
  }
  std::mt19937_64 rng(cfg.seed);
  Matrix input(vocab.size(), cfg.dims), output(vocab.size(), cfg.dims, 0.0);
  for (double& x : input.data()) x = (detail::uniform01(rng) - 0.5) / static_cast<double>(cfg.dims);
  SkipGramModel model(vocab, counts, std::move(input), std::move(output), cfg.window, cfg.seed);

  std::vector<std::vector<std::size_t>> encoded;
  for (const auto& doc : documents) {
    std::vector<std::size_t> ids;
    for (const auto& w : doc.words) ids.push_back(*model.index_of(w));
    encoded.push_back(std::move(ids));
  }

  const NegativeSampler sampler(counts);
  const double total_steps = static_cast<double>(pairs_per_epoch * std::max<std::size_t>(cfg.epochs, 1));
  double done = 0.0;
  std::vector<double> center_grad(cfg.dims);
  Matrix& in = model.input_vectors();
  Matrix& out = model.output_vectors();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& ids : encoded) {
      const std::size_t n = ids.size();
      for (std::size_t c = 0; c < n; ++c) {
        const std::size_t lo = c >= cfg.window ? c - cfg.window : 0;
        const std::size_t hi = std::min(n - 1, c + cfg.window);
        for (std::size_t o = lo; o <= hi; ++o) {
          if (o == c) continue;
          const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - done / total_steps);
          done += 1.0;
          auto u = in.row(ids[c]);
          std::fill(center_grad.begin(), center_grad.end(), 0.0);
          for (std::size_t s = 0; s <= cfg.negatives; ++s) {
            std::size_t target = ids[o];
            double label = 1.0;
            if (s > 0) {
              target = sampler(rng);
              if (target == ids[o]) continue;
              label = 0.0;
            }
            auto v = out.row(target);
            const double g = (label - detail::sigmoid(dot(u, v))) * lr;
            for (std::size_t k = 0; k < cfg.dims; ++k) {
              center_grad[k] += g * v[k];
              v[k] += g * u[k];
            }
          }
          for (std::size_t k = 0; k < cfg.dims; ++k) u[k] += center_grad[k];
        }
      }
    }
    if (on_epoch) on_epoch(epoch, model);
  }
  return model;
}

enum class SkipGramScore { Cosine, InnerProduct };

struct SkipGramResult {
  UkSize size;
  double score = 0.0;
  std::vector<UkSize> skipped;  // candidates whose word is not in the vocabulary
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

/// Candidate size whose input vector is closest (cosine) to the preference word's.
/// Candidates are scanned in ascending size so ties keep the smaller size.
inline SkipGramResult recommend_skipgram(const SkipGramModel& model, const Preference& pref,
                                         std::vector<UkSize> candidates,
                                         const std::string& target_brand,
                                         SkipGramScore scoring = SkipGramScore::Cosine) {
  const auto pref_word = encode_sku(pref.category, pref.brand, pref.size);
  auto pref_idx = model.index_of(pref_word);
  if (!pref_idx) throw Error(ErrorCode::UnknownPreference, pref_word);
  const auto u = model.input_vectors().row(*pref_idx);

  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  SkipGramResult result;
  bool found = false;
  for (auto size : candidates) {
    auto idx = model.index_of(encode_sku(pref.category, target_brand, size));
    if (!idx) {
      result.skipped.push_back(size);
      continue;
    }
    const auto v = model.input_vectors().row(*idx);
    const double score = scoring == SkipGramScore::Cosine ? cosine(u, v) : dot(u, v);
    if (!found || score > result.score) {
      result.size = size;
      result.score = score;
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::NoCandidates, "no candidate size of " + target_brand);
  return result;
}

/// Every size on the 0.5 grid, ascending.
inline std::vector<UkSize> all_grid_sizes() {
  std::vector<UkSize> out;
  for (int h = UkSize::kMinHalves; h <= UkSize::kMaxHalves; ++h) out.push_back(UkSize::from_halves(h));
  return out;
}

}  // namespace sizegraph
