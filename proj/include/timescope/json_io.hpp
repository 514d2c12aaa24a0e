#pragma once

// JSON encodings shared by the session store file and the HTTP API.

#include <nlohmann/json.hpp>

#include "timescope/core.hpp"
#include "timescope/histogram.hpp"
#include "timescope/ingest.hpp"
#include "timescope/query.hpp"

namespace timescope {

using nlohmann::json;

inline std::string_view sort_token(SortOrder s) { return s == SortOrder::time ? "time" : "path"; }
inline SortOrder parse_sort(std::string_view text) {
  if (text == "time") return SortOrder::time;
  if (text == "path") return SortOrder::path;
  throw Error(ErrorCode::ValidationError, "unknown sort order '" + std::string(text) + "'");
}

inline std::string_view name_mode_token(NameMode m) { return m == NameMode::filter ? "filter" : "highlight"; }
inline NameMode parse_name_mode(std::string_view text) {
  if (text == "filter") return NameMode::filter;
  if (text == "highlight") return NameMode::highlight;
  throw Error(ErrorCode::ValidationError, "unknown name mode '" + std::string(text) + "'");
}

inline std::string_view format_token(InputFormat f) { return f == InputFormat::csv ? "csv" : "body"; }

inline json span_to_json(const TimeSpan& s) { return json{{"start", s.start}, {"end", s.end}}; }

inline TimeSpan span_from_json(const json& j) {
  if (j.is_array() && j.size() == 2) return TimeSpan::make(j[0].get<Timestamp>(), j[1].get<Timestamp>());
  return TimeSpan::make(j.at("start").get<Timestamp>(), j.at("end").get<Timestamp>());
}

template <class T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> optional_from_json(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

/// Runs `fn`, turning JSON shape errors into ValidationError.
template <class Fn>
auto decode(const char* what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ValidationError, std::string("invalid ") + what + ": " + ex.what());
  }
}

inline json to_json(const FilterState& fs) {
  json spans = json::array();
  for (const auto& s : fs.spans) spans.push_back(span_to_json(s));
  return json{{"flags", flags_to_letters(fs.flags_on)},
              {"name_query", optional_to_json(fs.name_query)},
              {"name_mode", name_mode_token(fs.name_mode)},
              {"spans", spans},
              {"cluster_id", optional_to_json(fs.cluster_id)},
              {"sort", sort_token(fs.sort)},
              {"offset", fs.offset},
              {"limit", fs.limit}};
}

inline FilterState filter_from_json(const json& j) {
  return decode("filter state", [&] {
    FilterState fs;
    if (j.is_null()) return fs;
    if (!j.is_object()) throw Error(ErrorCode::ValidationError, "filter state must be an object");
    if (auto it = j.find("flags"); it != j.end() && !it->is_null()) {
      if (it->is_array()) {
        std::string letters;
        for (const auto& f : *it) letters += f.get<std::string>();
        fs.flags_on = flags_from_letters(letters);
      } else {
        fs.flags_on = flags_from_letters(it->get<std::string>());
      }
    }
    fs.name_query = optional_from_json<std::string>(j, "name_query");
    if (auto it = j.find("name_mode"); it != j.end() && !it->is_null())
      fs.name_mode = parse_name_mode(it->get<std::string>());
    if (auto it = j.find("spans"); it != j.end() && !it->is_null())
      for (const auto& s : *it) fs.spans.push_back(span_from_json(s));
    fs.cluster_id = optional_from_json<std::string>(j, "cluster_id");
    if (auto it = j.find("sort"); it != j.end() && !it->is_null()) fs.sort = parse_sort(it->get<std::string>());
    fs.offset = j.value("offset", std::uint64_t{0});
    if (auto it = j.find("limit"); it != j.end() && !it->is_null()) {
      if (it->is_number_integer() && it->get<std::int64_t>() < 1)
        throw Error(ErrorCode::ValidationError, "limit must be positive");
      fs.limit = it->get<std::uint64_t>();
    }
    fs.validate();
    return fs;
  });
}

inline json to_json(const Bookmark& b) {
  return json{{"bookmark_id", b.bookmark_id},
              {"entry_id", b.entry_id},
              {"created_at", b.created_at},
              {"color", optional_to_json(b.color)},
              {"note", optional_to_json(b.note)}};
}

inline Bookmark bookmark_from_json(const json& j) {
  return decode("bookmark", [&] {
    Bookmark b;
    b.bookmark_id = j.at("bookmark_id").get<std::string>();
    b.entry_id = j.at("entry_id").get<std::uint64_t>();
    b.created_at = j.value("created_at", Timestamp{0});
    b.color = optional_from_json<std::string>(j, "color");
    b.note = optional_from_json<std::string>(j, "note");
    return b;
  });
}

inline json to_json(const Dataset& d) {
  return json{{"dataset_id", d.dataset_id},     {"name", d.name},
              {"source", d.source},             {"record_count", d.record_count},
              {"entry_count", d.entry_count},   {"rejected_lines", d.rejected_lines},
              {"imported_at", d.imported_at}};
}

inline Dataset dataset_from_json(const json& j) {
  return decode("dataset", [&] {
    Dataset d;
    d.dataset_id = j.at("dataset_id").get<std::string>();
    d.name = j.value("name", "");
    d.source = j.value("source", "");
    d.record_count = j.at("record_count").get<std::uint64_t>();
    d.entry_count = j.at("entry_count").get<std::uint64_t>();
    d.rejected_lines = j.value("rejected_lines", std::uint64_t{0});
    d.imported_at = j.value("imported_at", Timestamp{0});
    return d;
  });
}

inline json to_json(const ImportStats& s) {
  return json{{"lines_read", s.lines_read},
              {"records_parsed", s.records_parsed},
              {"lines_rejected", s.lines_rejected},
              {"lines_skipped", s.lines_skipped},
              {"entries_emitted", s.entries_emitted},
              {"min_ts", optional_to_json(s.min_ts)},
              {"max_ts", optional_to_json(s.max_ts)}};
}

inline json to_json(const ClusterCount& c) {
  return json{{"cluster_id", c.cluster_id}, {"label", c.label}, {"total", c.total}, {"filtered", c.filtered}};
}

inline json to_json(const Burst& b) {
  return json{{"start", b.span.start}, {"end", b.span.end}, {"count", b.count}};
}

inline json to_json(const FlagCounts& c) {
  return json{{"m", c.counts[0]}, {"a", c.counts[1]}, {"c", c.counts[2]}, {"b", c.counts[3]}};
}

inline json to_json(const Bucket& b) {
  return json{{"start", b.start}, {"matched", to_json(b.matched)}, {"context", to_json(b.context)}};
}

inline json to_json(const ClusterDef& d) {
  return json{{"id", d.id},
              {"label", d.label},
              {"flags", flags_to_letters(d.flag_mask)},
              {"pattern", d.path_pattern},
              {"exclude", d.exclude_pattern},
              {"mode_rule", mode_rule_token(d.mode_rule)},
              {"description", d.description}};
}

}  // namespace timescope
