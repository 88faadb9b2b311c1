#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sizegraph/error.hpp"
#include "sizegraph/ingest.hpp"
#include "sizegraph/matrix.hpp"
#include "sizegraph/types.hpp"

namespace sizegraph {

/// Sparse user x brand matrix of importance weights; absent cells are zero.
struct UserBrandMatrix {
  struct Entry {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
  };

  std::vector<std::string> users;   // row index -> user id (sorted)
  std::vector<std::string> brands;  // col index -> brand id (sorted)
  std::vector<Entry> entries;       // row-major order, values > 0

  std::size_t n_users() const noexcept { return users.size(); }
  std::size_t n_brands() const noexcept { return brands.size(); }
};

inline UserBrandMatrix build_matrix(const std::map<UserBrandKey, EventKind>& priority_map,
                                    const EventImportance& importance) {
  if (priority_map.empty()) {
    throw Error(ErrorCode::InvalidArgument, "priority map is empty");
  }
  UserBrandMatrix m;
  std::map<std::string, std::size_t> brand_index;
  for (const auto& [key, kind] : priority_map) brand_index.emplace(key.second, 0);
  for (auto& [brand, idx] : brand_index) {
    idx = m.brands.size();
    m.brands.push_back(brand);
  }
  // std::map iterates (user, brand) in sorted order, so rows come out sorted.
  for (const auto& [key, kind] : priority_map) {
    if (m.users.empty() || m.users.back() != key.first) m.users.push_back(key.first);
    m.entries.push_back({m.users.size() - 1, brand_index.at(key.second), importance.weight(kind)});
  }
  return m;
}

struct NmfOptions {
  std::size_t rank = 16;
  std::size_t max_iters = 500;
  double tol = 1e-7;
  std::uint64_t seed = 42;
};

struct NmfResult {
  Matrix user_factors;   // m x d
  Matrix brand_factors;  // d x n
  std::vector<double> objective;  // objective[0] is the value at initialization
  std::size_t iterations = 0;
};

namespace detail {

inline constexpr double kNmfEpsilon = 1e-12;

/// Uniform draw in (0, 1] from the top 53 bits of a 64-bit engine output.
inline double uniform_open_closed(std::mt19937_64& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

inline double frobenius_objective(const UserBrandMatrix& v, const Matrix& w, const Matrix& h) {
  const std::size_t m = v.n_users(), n = v.n_brands(), d = w.cols();
  std::vector<double> dense_row(n);
  double total = 0.0;
  std::size_t e = 0;
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(dense_row.begin(), dense_row.end(), 0.0);
    for (; e < v.entries.size() && v.entries[e].row == i; ++e) {
      dense_row[v.entries[e].col] = v.entries[e].value;
    }
    for (std::size_t j = 0; j < n; ++j) {
      double approx = 0.0;
      for (std::size_t k = 0; k < d; ++k) approx += w(i, k) * h(k, j);
      const double r = dense_row[j] - approx;
      total += r * r;
    }
  }
  return total;
}

}  // namespace detail

/// Seeded uniform(0,1] initialization: W row-major, then H row-major.
inline std::pair<Matrix, Matrix> nmf_initialize(std::size_t m, std::size_t n, std::size_t rank,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix w(m, rank), h(rank, n);
  for (double& x : w.data()) x = detail::uniform_open_closed(rng);
  for (double& x : h.data()) x = detail::uniform_open_closed(rng);
  return {std::move(w), std::move(h)};
}

/// Lee-Seung multiplicative updates for min ||V - WH||_F^2 from explicit starting
/// factors. The dense objective counts every absent cell as a true zero.
inline NmfResult nmf_factorize_from(const UserBrandMatrix& v, Matrix w, Matrix h,
                                    std::size_t max_iters, double tol) {
  const std::size_t m = v.n_users(), n = v.n_brands(), d = w.cols();
  if (w.rows() != m || h.rows() != d || h.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "initial factor shapes do not match the matrix");
  }
  if (d == 0 || max_iters == 0) {
    throw Error(ErrorCode::InvalidArgument, "rank and max_iters must be >= 1");
  }
  if (d > std::min(m, n)) {
    throw Error(ErrorCode::RankTooLarge, "rank " + std::to_string(d) + " exceeds min(m, n) = " +
                                             std::to_string(std::min(m, n)));
  }
  bool any_positive = false;
  for (const auto& e : v.entries) any_positive = any_positive || e.value > 0.0;
  if (!any_positive) throw Error(ErrorCode::DegenerateMatrix, "matrix has no positive entry");

  using detail::kNmfEpsilon;
  NmfResult result;
  result.objective.push_back(detail::frobenius_objective(v, w, h));

  Matrix wtv(d, n), wtw(d, d), vht(m, d), hht(d, d);
  std::vector<double> col(d);  // one column of H or row of W, updated from the old values
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    // H <- H * (W'V) / (W'W H)
    std::fill(wtv.data().begin(), wtv.data().end(), 0.0);
    for (const auto& e : v.entries) {
      for (std::size_t k = 0; k < d; ++k) wtv(k, e.col) += w(e.row, k) * e.value;
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += w(i, a) * w(i, b);
        wtw(a, b) = s;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < d; ++k) {
        double denom = 0.0;
        for (std::size_t l = 0; l < d; ++l) denom += wtw(k, l) * h(l, j);
        col[k] = h(k, j) * wtv(k, j) / (denom + kNmfEpsilon);
      }
      for (std::size_t k = 0; k < d; ++k) h(k, j) = col[k];
    }

    // W <- W * (V H') / (W H H')
    std::fill(vht.data().begin(), vht.data().end(), 0.0);
    for (const auto& e : v.entries) {
      for (std::size_t k = 0; k < d; ++k) vht(e.row, k) += e.value * h(k, e.col);
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += h(a, j) * h(b, j);
        hht(a, b) = s;
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        double denom = 0.0;
        for (std::size_t l = 0; l < d; ++l) denom += w(i, l) * hht(l, k);
        col[k] = w(i, k) * vht(i, k) / (denom + kNmfEpsilon);
      }
      for (std::size_t k = 0; k < d; ++k) w(i, k) = col[k];
    }

    const double prev = result.objective.back();
    const double cur = detail::frobenius_objective(v, w, h);
    result.objective.push_back(cur);
    result.iterations = iter + 1;
    if (cur == 0.0) break;
    if (prev > 0.0 && (prev - cur) / prev < tol) break;
  }
  result.user_factors = std::move(w);
  result.brand_factors = std::move(h);
  return result;
}

inline NmfResult nmf_factorize(const UserBrandMatrix& v, const NmfOptions& opt) {
  if (opt.rank == 0 || opt.max_iters == 0) {
    throw Error(ErrorCode::InvalidArgument, "rank and max_iters must be >= 1");
  }
  if (opt.rank > std::min(v.n_users(), v.n_brands())) {
    throw Error(ErrorCode::RankTooLarge,
                "rank " + std::to_string(opt.rank) + " exceeds min(m, n) = " +
                    std::to_string(std::min(v.n_users(), v.n_brands())));
  }
  auto [w, h] = nmf_initialize(v.n_users(), v.n_brands(), opt.rank, opt.seed);
  return nmf_factorize_from(v, std::move(w), std::move(h), opt.max_iters, opt.tol);
}

/// Learned brand coordinates (one row per brand) for one category.
class BrandEmbeddings {
 public:
  BrandEmbeddings() = default;

  BrandEmbeddings(Category category, std::vector<std::string> brands, Matrix vectors,
                  std::uint64_t seed)
      : category_(std::move(category)),
        brands_(std::move(brands)),
        vectors_(std::move(vectors)),
        seed_(seed) {
    if (vectors_.rows() != brands_.size()) {
      throw Error(ErrorCode::InvalidArgument, "embedding rows do not match brand list");
    }
    for (std::size_t i = 0; i < brands_.size(); ++i) index_.emplace(brands_[i], i);
  }

  /// Brand factors are the columns of H.
  static BrandEmbeddings from_nmf(Category category, const UserBrandMatrix& matrix,
                                  const NmfResult& nmf, std::uint64_t seed) {
    const Matrix& h = nmf.brand_factors;
    Matrix vectors(h.cols(), h.rows());
    for (std::size_t j = 0; j < h.cols(); ++j) {
      for (std::size_t k = 0; k < h.rows(); ++k) vectors(j, k) = h(k, j);
    }
    return BrandEmbeddings(std::move(category), matrix.brands, std::move(vectors), seed);
  }

  const Category& category() const noexcept { return category_; }
  const std::vector<std::string>& brands() const noexcept { return brands_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::size_t rank() const noexcept { return vectors_.cols(); }
  std::uint64_t seed() const noexcept { return seed_; }
  bool contains(const std::string& brand) const { return index_.count(brand) != 0; }

  std::span<const double> vector(const std::string& brand) const {
    auto it = index_.find(brand);
    if (it == index_.end()) throw Error(ErrorCode::UnknownBrand, brand);
    return vectors_.row(it->second);
  }

 private:
  Category category_;
  std::vector<std::string> brands_;
  Matrix vectors_;
  std::uint64_t seed_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Dot product of two brand vectors, computed in canonical (sorted) brand order.
/// With `normalize` the cosine is returned instead.
inline double similarity(const BrandEmbeddings& model, const std::string& a, const std::string& b,
                         bool normalize = false) {
  const auto& lo = a <= b ? a : b;
  const auto& hi = a <= b ? b : a;
  auto va = model.vector(lo);
  auto vb = model.vector(hi);
  const double raw = dot(va, vb);
  if (!normalize) return raw;
  const double na = std::sqrt(dot(va, va));
  const double nb = std::sqrt(dot(vb, vb));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return raw / (na * nb);
}

/// Undirected weighted brand graph; one weight per unordered pair (lo < hi).
class BrandSimilarityGraph {
 public:
  BrandSimilarityGraph() = default;
  BrandSimilarityGraph(Category category, std::vector<std::string> brands,
                       std::map<std::pair<std::string, std::string>, double> sim)
      : category_(std::move(category)), brands_(std::move(brands)), sim_(std::move(sim)) {
    std::sort(brands_.begin(), brands_.end());
  }

  const Category& category() const noexcept { return category_; }
  const std::vector<std::string>& brands() const noexcept { return brands_; }
  const std::map<std::pair<std::string, std::string>, double>& weights() const noexcept {
    return sim_;
  }

  bool contains(const std::string& brand) const {
    return std::binary_search(brands_.begin(), brands_.end(), brand);
  }

  /// Weight of the pair, or nullopt when either brand is absent or a == b.
  std::optional<double> find(const std::string& a, const std::string& b) const {
    auto it = sim_.find(a < b ? std::make_pair(a, b) : std::make_pair(b, a));
    if (it == sim_.end()) return std::nullopt;
    return it->second;
  }

  double sim(const std::string& a, const std::string& b) const {
    if (!contains(a)) throw Error(ErrorCode::UnknownBrand, a);
    if (!contains(b)) throw Error(ErrorCode::UnknownBrand, b);
    auto w = find(a, b);
    if (!w) throw Error(ErrorCode::InvalidArgument, "self-similarity is not stored: " + a);
    return *w;
  }

 private:
  Category category_;
  std::vector<std::string> brands_;
  std::map<std::pair<std::string, std::string>, double> sim_;
};

inline BrandSimilarityGraph build_brand_graph(const BrandEmbeddings& model, const Category& category,
                                              bool normalize = false) {
  if (model.brands().empty()) throw Error(ErrorCode::InvalidArgument, "empty brand model");
  std::vector<std::string> brands = model.brands();
  std::sort(brands.begin(), brands.end());
  std::map<std::pair<std::string, std::string>, double> sim;
  for (std::size_t i = 0; i < brands.size(); ++i) {
    for (std::size_t j = i + 1; j < brands.size(); ++j) {
      sim.emplace(std::make_pair(brands[i], brands[j]),
                  similarity(model, brands[i], brands[j], normalize));
    }
  }
  return BrandSimilarityGraph(category, std::move(brands), std::move(sim));
}

}  // namespace sizegraph
