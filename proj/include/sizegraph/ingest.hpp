#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sizegraph/error.hpp"
#include "sizegraph/types.hpp"

namespace sizegraph {

enum class EventFormat { Jsonl, Csv };

struct ParseRejection {
  std::size_t line_no = 0;  // 1-based
  std::string reason;
};

struct ParseResult {
  std::vector<InteractionEvent> events;
  std::vector<ParseRejection> rejected;
};

namespace detail {

// RFC-4180 style field splitting: quoted fields, doubled quotes as escapes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

struct RawRecord {
  std::optional<std::string> user, brand, gender, article_type, kind, order;
  std::optional<std::int64_t> ts;
  std::optional<double> size;
  bool ts_malformed = false;
  bool size_malformed = false;
};

// Returns an empty string on success, otherwise the rejection reason.
inline std::string validate_record(const RawRecord& r, InteractionEvent& out) {
  if (!r.user || r.user->empty()) return "missing user";
  if (!r.brand || trim(*r.brand).empty()) return "missing brand";
  if (!r.gender) return "missing gender";
  auto gender = parse_gender(*r.gender);
  if (!gender) return "invalid gender";
  if (!r.article_type || trim(*r.article_type).empty()) return "missing article_type";
  if (!r.kind) return "missing kind";
  auto kind = parse_event_kind(*r.kind);
  if (!kind) return "invalid kind";
  if (r.ts_malformed) return "invalid ts";
  if (!r.ts) return "missing ts";
  if (*r.ts < 0) return "negative ts";
  if (r.size_malformed) return "invalid size";
  std::optional<UkSize> size;
  if (r.size) {
    size = UkSize::try_from_value(*r.size);
    if (!size) return "size off grid or out of range";
  }
  if (*kind == EventKind::Purchase && !size) return "purchase missing size";

  out.user_id = *r.user;
  out.brand_id = trim(*r.brand);
  out.category = Category(*gender, *r.article_type);
  out.kind = *kind;
  out.timestamp = *r.ts;
  out.size = size;
  out.order_id = r.order && !r.order->empty() ? r.order : std::nullopt;
  return {};
}

inline std::string record_from_json(const std::string& line, RawRecord& r) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) return "malformed json";
  if (!j.is_object()) return "record is not an object";
  auto str = [&](const char* key, std::optional<std::string>& dst) -> bool {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return true;
    if (!it->is_string()) return false;
    dst = it->get<std::string>();
    return true;
  };
  if (!str("user", r.user)) return "user must be a string";
  if (!str("brand", r.brand)) return "brand must be a string";
  if (!str("gender", r.gender)) return "gender must be a string";
  if (!str("article_type", r.article_type)) return "article_type must be a string";
  if (!str("kind", r.kind)) return "kind must be a string";
  if (!str("order", r.order)) return "order must be a string";
  if (auto it = j.find("ts"); it != j.end() && !it->is_null()) {
    if (it->is_number_integer()) {
      r.ts = it->get<std::int64_t>();
    } else {
      r.ts_malformed = true;
    }
  }
  if (auto it = j.find("size"); it != j.end() && !it->is_null()) {
    if (it->is_number()) {
      r.size = it->get<double>();
    } else {
      r.size_malformed = true;
    }
  }
  return {};
}

inline std::string record_from_csv(const std::vector<std::string>& header,
                                   const std::vector<std::string>& fields, RawRecord& r) {
  if (fields.size() != header.size()) return "column count mismatch";
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& name = header[i];
    const std::string value = trim(fields[i]);
    if (value.empty()) continue;
    if (name == "user") r.user = value;
    else if (name == "brand") r.brand = value;
    else if (name == "gender") r.gender = value;
    else if (name == "article_type") r.article_type = value;
    else if (name == "kind") r.kind = value;
    else if (name == "order") r.order = value;
    else if (name == "ts") {
      try {
        std::size_t pos = 0;
        r.ts = std::stoll(value, &pos);
        if (pos != value.size()) r.ts_malformed = true;
      } catch (const std::exception&) {
        r.ts_malformed = true;
      }
    } else if (name == "size") {
      try {
        std::size_t pos = 0;
        r.size = std::stod(value, &pos);
        if (pos != value.size()) r.size_malformed = true;
      } catch (const std::exception&) {
        r.size_malformed = true;
      }
    }
  }
  return {};
}

}  // namespace detail

/// Parses line-delimited event records. Malformed lines are skipped and listed
/// in the result's rejection report; blank lines are ignored.
inline ParseResult parse_events(std::istream& in, EventFormat format) {
  if (!in) throw Error(ErrorCode::Io, "event source is not readable");
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;

    detail::RawRecord raw;
    std::string reason;
    if (format == EventFormat::Csv) {
      auto fields = detail::split_csv_line(line);
      if (header.empty()) {
        for (auto& f : fields) header.push_back(detail::lower(detail::trim(f)));
        continue;
      }
      reason = detail::record_from_csv(header, fields, raw);
    } else {
      reason = detail::record_from_json(line, raw);
    }
    InteractionEvent ev;
    if (reason.empty()) reason = detail::validate_record(raw, ev);
    if (!reason.empty()) {
      result.rejected.push_back({line_no, std::move(reason)});
      continue;
    }
    result.events.push_back(std::move(ev));
  }
  if (in.bad()) throw Error(ErrorCode::Io, "read failure on event source");
  return result;
}

inline nlohmann::json event_to_json(const InteractionEvent& e) {
  nlohmann::json j;
  j["user"] = e.user_id;
  j["brand"] = e.brand_id;
  j["gender"] = std::string(to_string(e.category.gender()));
  j["article_type"] = e.category.article_type();
  j["kind"] = std::string(to_string(e.kind));
  j["ts"] = e.timestamp;
  if (e.size) {
    if (e.size->halves() % 2 == 0) {
      j["size"] = e.size->halves() / 2;
    } else {
      j["size"] = e.size->value();
    }
  }
  if (e.order_id) j["order"] = *e.order_id;
  return j;
}

inline void write_events_jsonl(std::ostream& out, const std::vector<InteractionEvent>& events) {
  for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

inline void write_parse_report(std::ostream& out, const std::vector<ParseRejection>& rejected) {
  for (const auto& r : rejected) {
    out << nlohmann::json{{"line_no", r.line_no}, {"reason", r.reason}}.dump() << '\n';
  }
}

inline std::vector<InteractionEvent> filter_category(const std::vector<InteractionEvent>& events,
                                                     const Category& category) {
  std::vector<InteractionEvent> out;
  for (const auto& e : events) {
    if (e.category == category) out.push_back(e);
  }
  return out;
}

using UserBrandKey = std::pair<std::string, std::string>;

/// Highest-priority event kind per (user, brand) within one category.
inline std::map<UserBrandKey, EventKind> reduce_highest_priority(
    const std::vector<InteractionEvent>& events, const Category& category) {
  std::map<UserBrandKey, EventKind> out;
  for (const auto& e : events) {
    if (!(e.category == category)) continue;
    auto [it, inserted] = out.try_emplace({e.user_id, e.brand_id}, e.kind);
    if (!inserted && e.kind > it->second) it->second = e.kind;
  }
  return out;
}

/// Importance score of each event kind: clicks per event of that kind.
class EventImportance {
 public:
  EventImportance() : weights_{1.0, 1.0, 1.0, 1.0} {}

  explicit EventImportance(const std::array<double, 4>& weights) : weights_(weights) {
    if (weights_[0] != 1.0) {
      throw Error(ErrorCode::InvalidArgument, "click importance must be exactly 1");
    }
    for (double w : weights_) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw Error(ErrorCode::InvalidArgument, "importance weights must be positive and finite");
      }
    }
  }

  double weight(EventKind k) const { return weights_[static_cast<std::size_t>(k)]; }
  const std::array<double, 4>& weights() const noexcept { return weights_; }

 private:
  std::array<double, 4> weights_;
};

/// Raw event counts per kind over the supplied window.
inline std::array<std::uint64_t, 4> count_event_kinds(const std::vector<InteractionEvent>& events) {
  std::array<std::uint64_t, 4> counts{};
  for (const auto& e : events) ++counts[static_cast<std::size_t>(e.kind)];
  return counts;
}

inline EventImportance compute_importance(const std::vector<InteractionEvent>& events) {
  const auto counts = count_event_kinds(events);
  for (auto k : kAllEventKinds) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw Error(ErrorCode::InsufficientEvents,
                  "no " + std::string(to_string(k)) + " events in window");
    }
  }
  const double clicks = static_cast<double>(counts[0]);
  return EventImportance({1.0, clicks / static_cast<double>(counts[1]),
                          clicks / static_cast<double>(counts[2]),
                          clicks / static_cast<double>(counts[3])});
}

/// Every unordered pair of a user's in-category purchases with different brands.
/// Users are visited in id order and purchases in (ts, order, brand, size) order.
inline std::vector<CoPurchasePair> extract_copurchases(const std::vector<InteractionEvent>& events,
                                                       const Category& category) {
  std::map<std::string, std::vector<const InteractionEvent*>> by_user;
  for (const auto& e : events) {
    if (e.kind != EventKind::Purchase || !(e.category == category) || !e.size) continue;
    by_user[e.user_id].push_back(&e);
  }
  std::vector<CoPurchasePair> pairs;
  for (auto& [user, purchases] : by_user) {
    std::stable_sort(purchases.begin(), purchases.end(), [](const auto* a, const auto* b) {
      return std::tie(a->timestamp, a->order_id, a->brand_id, *a->size) <
             std::tie(b->timestamp, b->order_id, b->brand_id, *b->size);
    });
    for (std::size_t i = 0; i < purchases.size(); ++i) {
      for (std::size_t j = i + 1; j < purchases.size(); ++j) {
        const auto* a = purchases[i];
        const auto* b = purchases[j];
        if (a->brand_id == b->brand_id) continue;
        pairs.push_back({user, category, a->brand_id, *a->size, b->brand_id, *b->size});
      }
    }
  }
  return pairs;
}

}  // namespace sizegraph
