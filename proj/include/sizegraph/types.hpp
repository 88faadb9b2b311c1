#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "sizegraph/error.hpp"

namespace sizegraph {

namespace detail {

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace detail

enum class Gender { Men, Women };

inline std::string_view to_string(Gender g) { return g == Gender::Men ? "Men" : "Women"; }

inline std::optional<Gender> parse_gender(std::string_view s) {
  const auto key = detail::lower(detail::trim(s));
  if (key == "men") return Gender::Men;
  if (key == "women") return Gender::Women;
  return std::nullopt;
}

/// A gender / article-type slice; every model is built per category.
/// Article types compare case-insensitively after trimming.
class Category {
 public:
  Category() = default;
  Category(Gender gender, std::string_view article_type)
      : gender_(gender), article_type_(detail::trim(article_type)) {
    if (article_type_.empty()) {
      throw Error(ErrorCode::InvalidArgument, "article_type must be non-empty");
    }
    key_ = detail::lower(article_type_);
  }

  Gender gender() const noexcept { return gender_; }
  const std::string& article_type() const noexcept { return article_type_; }

  std::string label() const { return std::string(to_string(gender_)) + " " + article_type_; }

  friend bool operator==(const Category& a, const Category& b) {
    return a.gender_ == b.gender_ && a.key_ == b.key_;
  }

 private:
  Gender gender_ = Gender::Men;
  std::string article_type_;
  std::string key_;
};

// Declaration order is the priority order.
enum class EventKind : std::uint8_t { Click = 0, Cart = 1, Wishlist = 2, Purchase = 3 };

inline constexpr std::array<EventKind, 4> kAllEventKinds{EventKind::Click, EventKind::Cart,
                                                         EventKind::Wishlist, EventKind::Purchase};

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Click: return "click";
    case EventKind::Cart: return "cart";
    case EventKind::Wishlist: return "wishlist";
    case EventKind::Purchase: return "purchase";
  }
  return "click";
}

inline std::optional<EventKind> parse_event_kind(std::string_view s) {
  const auto key = detail::lower(detail::trim(s));
  for (auto k : kAllEventKinds) {
    if (key == to_string(k)) return k;
  }
  return std::nullopt;
}

/// UK unified shoe size on the 0.5 grid, stored as an integer count of half sizes.
class UkSize {
 public:
  static constexpr int kMinHalves = 2;   // UK 1
  static constexpr int kMaxHalves = 30;  // UK 15

  constexpr UkSize() = default;

  static UkSize from_halves(int halves) {
    if (halves < kMinHalves || halves > kMaxHalves) {
      throw Error(ErrorCode::InvalidArgument,
                  "size out of range [1,15]: " + std::to_string(halves / 2.0));
    }
    UkSize s;
    s.halves_ = halves;
    return s;
  }

  static std::optional<UkSize> try_from_value(double value) {
    if (!std::isfinite(value)) return std::nullopt;
    const double twice = value * 2.0;
    const double rounded = std::round(twice);
    if (std::abs(twice - rounded) > 1e-9) return std::nullopt;
    if (rounded < kMinHalves || rounded > kMaxHalves) return std::nullopt;
    UkSize s;
    s.halves_ = static_cast<int>(rounded);
    return s;
  }

  static UkSize from_value(double value) {
    auto s = try_from_value(value);
    if (!s) {
      throw Error(ErrorCode::InvalidArgument,
                  "size must be a multiple of 0.5 within [1,15], got " + std::to_string(value));
    }
    return *s;
  }

  constexpr int halves() const noexcept { return halves_; }
  constexpr double value() const noexcept { return halves_ / 2.0; }

  /// "8" for whole sizes, "4.5" for half sizes.
  std::string to_string() const {
    std::string out = std::to_string(halves_ / 2);
    if (halves_ % 2 != 0) out += ".5";
    return out;
  }

  friend constexpr auto operator<=>(const UkSize&, const UkSize&) = default;

 private:
  int halves_ = 18;  // UK 9
};

/// Size-difference labels of the size graph: -1, -0.5, 0, 0.5, 1 (in half sizes -2..2).
inline constexpr int kLabelCount = 5;
inline constexpr std::array<int, kLabelCount> kLabelHalves{-2, -1, 0, 1, 2};

inline constexpr int label_index(int delta_halves) { return delta_halves + 2; }
inline constexpr int label_halves(int index) { return index - 2; }

/// Composite differences over a two-hop path: -2 .. 2 in 0.5 steps (half sizes -4..4).
inline constexpr int kCompositeCount = 9;
inline constexpr int composite_index(int delta_halves) { return delta_halves + 4; }
inline constexpr int composite_halves(int index) { return index - 4; }

inline std::string format_delta(int delta_halves) {
  if (delta_halves == 0) return "0";
  std::string out = delta_halves < 0 ? "-" : "";
  const int mag = std::abs(delta_halves);
  out += std::to_string(mag / 2);
  if (mag % 2 != 0) out += ".5";
  return out;
}

struct InteractionEvent {
  std::string user_id;
  std::string brand_id;
  Category category;
  EventKind kind = EventKind::Click;
  std::int64_t timestamp = 0;
  std::optional<UkSize> size;
  std::optional<std::string> order_id;
};

/// One unordered co-purchase of two different brands by the same user.
struct CoPurchasePair {
  std::string user_id;
  Category category;
  std::string brand_u;
  UkSize size_u;
  std::string brand_v;
  UkSize size_v;
};

/// Questionnaire answer: the size a user wears in one brand.
struct Preference {
  Category category;
  std::string brand;
  UkSize size;
};

}  // namespace sizegraph
