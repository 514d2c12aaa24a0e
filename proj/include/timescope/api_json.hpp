#pragma once

// Wire payloads for engine results. The HTTP service and the CLI's --json
// output both go through these, so the two front ends print the same numbers.

#include <charconv>

#include "timescope/engine.hpp"
#include "timescope/json_io.hpp"

namespace timescope {

inline json to_json(const ParseError& e) {
  json j{{"code", error_token(e.code)}, {"line", e.line_no}, {"message", e.message}};
  if (e.code == ErrorCode::MalformedLine) j["field_count"] = e.field_count;
  if (!e.field.empty()) j["field"] = e.field;
  return j;
}

inline json dataset_payload(const LoadedDataset& ds, std::size_t max_rejects = 50) {
  json rejects = json::array();
  for (std::size_t i = 0; i < ds.rejects.size() && i < max_rejects; ++i) rejects.push_back(to_json(ds.rejects[i]));
  json j = to_json(ds.meta);
  j["stats"] = to_json(ds.stats);
  j["ts_bounds"] = span_to_json(ds.index.ts_bounds());
  j["rejects"] = rejects;
  return j;
}

inline json row_payload(const QueryRow& r) {
  json hl = json::array();
  for (auto [b, e] : r.highlight) hl.push_back(json::array({b, e}));
  const auto& rec = *r.record;
  return json{{"entry_id", r.entry_id},
              {"ts", r.ts},
              {"time", format_utc(r.ts)},
              {"flags", render_flags(r.flags)},
              {"path", rec.path},
              {"inode", rec.inode},
              {"mode", rec.mode},
              {"uid", rec.uid},
              {"gid", rec.gid},
              {"size", rec.size},
              {"highlight", hl},
              {"bookmarked", r.bookmarked},
              {"context_only", r.context_only}};
}

inline json query_payload(const QueryResult& q, const FilterState& fs) {
  json rows = json::array();
  for (const auto& r : q.rows) rows.push_back(row_payload(r));
  return json{{"rows", rows},
              {"total_matching", q.total_matching},
              {"visible_span", span_to_json(q.visible_span)},
              {"offset", fs.offset},
              {"limit", fs.limit}};
}

inline json skip_payload(const SkipResult& s) {
  if (!s.entry_id) return json{{"at_end", true}, {"entry_id", nullptr}, {"offset", nullptr}};
  return json{{"at_end", false}, {"entry_id", *s.entry_id}, {"offset", s.offset}};
}

inline json histogram_payload(const HistogramResult& h) {
  json buckets = json::array(), pins = json::array();
  for (const auto& b : h.buckets) buckets.push_back(to_json(b));
  for (const auto& p : h.pins)
    pins.push_back(json{{"bucket_start", p.group.bucket_start},
                        {"bookmark_ids", p.group.bookmark_ids},
                        {"count", p.group.count},
                        {"first_entry_id", p.group.first_entry_id},
                        {"clickable", p.clickable}});
  return json{{"granularity", granularity_token(h.granularity)},
              {"span", span_to_json(h.span)},
              {"buckets", buckets},
              {"pin_groups", pins},
              {"dangling_bookmarks", h.dangling_bookmarks}};
}

inline json clusters_payload(const std::vector<ClusterCount>& counts) {
  json out = json::array();
  for (const auto& c : counts) out.push_back(to_json(c));
  return out;
}

inline json bursts_payload(const std::vector<Burst>& bursts) {
  json out = json::array();
  for (const auto& b : bursts) out.push_back(to_json(b));
  return out;
}

inline json error_payload(const Error& e) { return json{{"code", error_token(e.code())}, {"message", e.what()}}; }

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::EmptyDataset:
    case ErrorCode::NoTimestamps: return 422;
    case ErrorCode::PayloadTooLarge: return 413;
    case ErrorCode::MismatchError: return 409;
    case ErrorCode::IoError:
    case ErrorCode::PersistError:
    case ErrorCode::ContractViolation: return 500;
    default: return 400;
  }
}

// -- request decoding --------------------------------------------------------

inline SkipKind parse_skip_kind(std::string_view text) {
  if (text == "year") return SkipKind::year;
  if (text == "month") return SkipKind::month;
  if (text == "day") return SkipKind::day;
  if (text == "hour") return SkipKind::hour;
  if (text == "minute") return SkipKind::minute;
  if (text == "path" || text == "path_prefix") return SkipKind::path_prefix;
  throw Error(ErrorCode::ValidationError, "unknown skip key '" + std::string(text) + "'");
}

/// "day", "path:3", or {"kind": "path", "depth": 3}.
inline SkipKey skip_key_from_json(const json& j) {
  return decode("skip key", [&] {
    std::string kind;
    unsigned depth = 0;
    if (j.is_string()) {
      kind = j.get<std::string>();
      if (auto colon = kind.find(':'); colon != std::string::npos) {
        const auto digits = std::string_view(kind).substr(colon + 1);
        const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), depth);
        if (ec != std::errc() || end != digits.data() + digits.size())
          throw Error(ErrorCode::ValidationError, "invalid path depth in skip key '" + kind + "'");
        kind.resize(colon);
      }
    } else {
      kind = j.at("kind").get<std::string>();
      depth = j.value("depth", 0u);
    }
    const SkipKind k = parse_skip_kind(kind);
    return k == SkipKind::path_prefix ? SkipKey::path_prefix(depth) : SkipKey::time(k);
  });
}

inline Direction parse_direction(std::string_view text) {
  if (text == "forward" || text == "next") return Direction::forward;
  if (text == "backward" || text == "prev" || text == "previous") return Direction::backward;
  throw Error(ErrorCode::ValidationError, "unknown direction '" + std::string(text) + "'");
}

}  // namespace timescope
