#pragma once

// Per-flag time bucketing with automatic granularity, grayed context
// counts and bookmark pin grouping.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "timescope/calendar.hpp"
#include "timescope/core.hpp"
#include "timescope/timeline_index.hpp"

namespace timescope {

enum class Granularity { year, month, day, hour };

inline constexpr std::uint64_t kMaxBucketsPerView = 240;
inline constexpr std::uint64_t kMaxBucketsHard = 200000;

inline TimeUnit granularity_unit(Granularity g) {
  switch (g) {
    case Granularity::year: return TimeUnit::year;
    case Granularity::month: return TimeUnit::month;
    case Granularity::day: return TimeUnit::day;
    case Granularity::hour: break;
  }
  return TimeUnit::hour;
}

inline std::string_view granularity_token(Granularity g) {
  switch (g) {
    case Granularity::year: return "year";
    case Granularity::month: return "month";
    case Granularity::day: return "day";
    case Granularity::hour: break;
  }
  return "hour";
}

inline Granularity parse_granularity(std::string_view text) {
  if (text == "year") return Granularity::year;
  if (text == "month") return Granularity::month;
  if (text == "day") return Granularity::day;
  if (text == "hour") return Granularity::hour;
  throw Error(ErrorCode::ValidationError, "unknown granularity '" + std::string(text) + "'");
}

inline std::uint64_t bucket_count(const TimeSpan& span, Granularity g) {
  return interval_count(span.start, span.end, granularity_unit(g));
}

/// Finest granularity that keeps the span within 240 buckets; year otherwise.
inline Granularity choose_granularity(const TimeSpan& span) {
  for (Granularity g : {Granularity::hour, Granularity::day, Granularity::month})
    if (bucket_count(span, g) <= kMaxBucketsPerView) return g;
  return Granularity::year;
}

struct FlagCounts {
  std::array<std::uint64_t, 4> counts{};  // m, a, c, b

  std::uint64_t operator[](Flag f) const { return counts[index(f)]; }
  void add(MacbFlags flags) {
    for (std::size_t i = 0; i < 4; ++i)
      if (flags.has(kAllFlags[i])) ++counts[i];
  }
  std::uint64_t sum() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
  bool operator==(const FlagCounts&) const = default;

  static constexpr std::size_t index(Flag f) {
    switch (f) {
      case Flag::m: return 0;
      case Flag::a: return 1;
      case Flag::c: return 2;
      case Flag::b: break;
    }
    return 3;
  }
};

struct Bucket {
  Timestamp start = 0;
  FlagCounts matched;
  FlagCounts context;  // passes context_pred but not matched_pred

  bool operator==(const Bucket&) const = default;
};

/// Granularity-aligned buckets tiling `span`, empty buckets included. Only
/// entries inside the span are counted. Throws ContractViolation if an entry
/// passes matched_pred but not context_pred.
template <class Matched, class Context>
std::vector<Bucket> aggregate(const TimelineIndex& index, Matched&& matched_pred, Context&& context_pred,
                              Granularity g, const TimeSpan& span) {
  if (span.start > span.end) throw Error(ErrorCode::ValidationError, "time span start is after end");
  if (bucket_count(span, g) > kMaxBucketsHard)
    throw Error(ErrorCode::ValidationError, "too many histogram buckets for this span and granularity");

  const TimeUnit unit = granularity_unit(g);
  std::vector<Bucket> buckets;
  for (Timestamp t = truncate(span.start, unit); t <= span.end; t = next_boundary(t, unit))
    buckets.push_back({t, {}, {}});

  const auto entries = index.entries();
  std::size_t b = 0;
  Timestamp next = buckets.size() > 1 ? buckets[1].start : next_boundary(buckets[0].start, unit);
  for (std::uint64_t pos = index.lower_bound_ts(span.start); pos < entries.size(); ++pos) {
    const auto& e = entries[pos];
    if (e.ts > span.end) break;
    while (e.ts >= next) {
      ++b;
      next = b + 1 < buckets.size() ? buckets[b + 1].start : next_boundary(buckets[b].start, unit);
    }
    const bool in_context = context_pred(e);
    if (matched_pred(e)) {
      if (!in_context)
        throw Error(ErrorCode::ContractViolation,
                    "entry " + std::to_string(e.entry_id) + " matches the filter but not its context");
      buckets[b].matched.add(e.flags);
    } else if (in_context) {
      buckets[b].context.add(e.flags);
    }
  }
  return buckets;
}

struct PinGroup {
  Timestamp bucket_start = 0;
  std::vector<std::string> bookmark_ids;  // entry order
  std::uint64_t count = 0;
  std::uint64_t first_entry_id = 0;

  bool operator==(const PinGroup&) const = default;
};

struct PinAggregation {
  std::vector<PinGroup> groups;
  std::vector<std::string> dangling;  // bookmarks whose entry does not exist
};

/// Groups in-span bookmarks by the bucket holding their entry.
inline PinAggregation aggregate_bookmarks(std::span<const Bookmark> bookmarks, const TimelineIndex& index,
                                          Granularity g, const TimeSpan& span) {
  PinAggregation out;
  std::vector<const Bookmark*> live;
  for (const auto& bm : bookmarks) {
    if (!index.contains(bm.entry_id)) {
      out.dangling.push_back(bm.bookmark_id);
      continue;
    }
    if (span.contains(index.entry(bm.entry_id).ts)) live.push_back(&bm);
  }
  std::stable_sort(live.begin(), live.end(),
                   [](const Bookmark* l, const Bookmark* r) { return l->entry_id < r->entry_id; });

  const TimeUnit unit = granularity_unit(g);
  for (const Bookmark* bm : live) {
    const Timestamp start = truncate(index.entry(bm->entry_id).ts, unit);
    if (out.groups.empty() || out.groups.back().bucket_start != start)
      out.groups.push_back({start, {}, 0, bm->entry_id});
    out.groups.back().bookmark_ids.push_back(bm->bookmark_id);
    ++out.groups.back().count;
  }
  return out;
}

}  // namespace timescope
