#pragma once

// Immutable, canonically sorted index over timeline entries: paging,
// block skipping and visible-span computation.

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timescope/calendar.hpp"
#include "timescope/core.hpp"

namespace timescope {

/// Rank of every record's path under path_less; equal paths share a rank.
inline std::vector<std::uint32_t> path_ranks(const std::vector<FileRecord>& records) {
  std::vector<std::uint32_t> order(records.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t l, std::uint32_t r) {
    const int cmp = compare_paths(records[l].path, records[r].path);
    return cmp != 0 ? cmp < 0 : l < r;
  });
  std::vector<std::uint32_t> rank(records.size());
  std::uint32_t current = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && records[order[i]].path != records[order[i - 1]].path) ++current;
    rank[order[i]] = current;
  }
  return rank;
}

/// Sorts entries into canonical order (ts, path, flag text, record) and
/// renumbers entry_id to the resulting position.
inline void sort_canonical(const std::vector<FileRecord>& records, std::vector<TimelineEntry>& entries,
                           const std::vector<std::uint32_t>& ranks) {
  auto less = [&](const TimelineEntry& l, const TimelineEntry& r) {
    if (l.ts != r.ts) return l.ts < r.ts;
    const auto lr = ranks[l.record_ref], rr = ranks[r.record_ref];
    if (lr != rr) return lr < rr;
    const auto lf = flag_text_rank(l.flags), rf = flag_text_rank(r.flags);
    if (lf != rf) return lf < rf;
    return l.record_ref < r.record_ref;
  };
  if (!std::is_sorted(entries.begin(), entries.end(), less)) std::sort(entries.begin(), entries.end(), less);
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].entry_id = i;
}

inline void sort_canonical(const std::vector<FileRecord>& records, std::vector<TimelineEntry>& entries) {
  sort_canonical(records, entries, path_ranks(records));
}

enum class SkipKind { year, month, day, hour, minute, path_prefix };

struct SkipKey {
  SkipKind kind = SkipKind::day;
  unsigned depth = 0;  // path_prefix only

  static SkipKey time(SkipKind kind) { return {kind, 0}; }
  static SkipKey path_prefix(unsigned depth) {
    if (depth < 1) throw Error(ErrorCode::ValidationError, "path-prefix depth must be >= 1");
    return {SkipKind::path_prefix, depth};
  }
  bool is_time() const { return kind != SkipKind::path_prefix; }
};

enum class Direction { forward, backward };

inline TimeUnit skip_time_unit(SkipKind kind) {
  switch (kind) {
    case SkipKind::year: return TimeUnit::year;
    case SkipKind::month: return TimeUnit::month;
    case SkipKind::day: return TimeUnit::day;
    case SkipKind::hour: return TimeUnit::hour;
    default: return TimeUnit::minute;
  }
}

/// The first `depth` components of a path, rendered as "/c1/c2".
inline std::string path_prefix(std::string_view path, unsigned depth) {
  std::string out;
  unsigned taken = 0;
  for (auto comp : path_components(path)) {
    if (taken++ == depth) break;
    out.push_back('/');
    out.append(comp);
  }
  return out.empty() ? std::string("/") : out;
}

class TimelineIndex {
 public:
  TimelineIndex() = default;

  /// Takes ownership of the record table and entries; entries are put into
  /// canonical order (already-sorted input is left as is).
  static TimelineIndex build(std::vector<FileRecord> records, std::vector<TimelineEntry> entries) {
    if (entries.empty()) throw Error(ErrorCode::EmptyDataset, "no timeline entries to index");
    for (const auto& e : entries)
      if (e.record_ref >= records.size())
        throw Error(ErrorCode::ValidationError, "entry references a missing record");

    TimelineIndex idx;
    const auto ranks = path_ranks(records);
    sort_canonical(records, entries, ranks);

    idx.by_path_.resize(entries.size());
    std::iota(idx.by_path_.begin(), idx.by_path_.end(), std::uint64_t{0});
    std::sort(idx.by_path_.begin(), idx.by_path_.end(), [&](std::uint64_t l, std::uint64_t r) {
      const auto lr = ranks[entries[l].record_ref], rr = ranks[entries[r].record_ref];
      return lr != rr ? lr < rr : l < r;
    });
    idx.path_position_.resize(entries.size());
    for (std::size_t pos = 0; pos < idx.by_path_.size(); ++pos) idx.path_position_[idx.by_path_[pos]] = pos;

    idx.lower_paths_.reserve(records.size());
    for (const auto& rec : records) {
      std::string lower = rec.path;
      for (char& ch : lower)
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
      idx.lower_paths_.push_back(std::move(lower));
    }

    idx.bounds_ = {entries.front().ts, entries.back().ts};
    idx.records_ = std::move(records);
    idx.entries_ = std::move(entries);
    return idx;
  }

  std::span<const TimelineEntry> entries() const { return entries_; }
  std::span<const FileRecord> records() const { return records_; }
  std::size_t size() const { return entries_.size(); }
  const TimelineEntry& entry(std::uint64_t entry_id) const { return entries_.at(entry_id); }
  const FileRecord& record_of(const TimelineEntry& e) const { return records_[e.record_ref]; }
  const std::string& lower_path(std::uint32_t record_ref) const { return lower_paths_[record_ref]; }
  TimeSpan ts_bounds() const { return bounds_; }
  std::span<const std::uint64_t> by_path() const { return by_path_; }
  bool contains(std::uint64_t entry_id) const { return entry_id < entries_.size(); }

  /// entry_id at `position` of the given ordering.
  std::uint64_t at(std::uint64_t position, SortOrder order) const {
    return order == SortOrder::time ? position : by_path_[position];
  }
  std::uint64_t position_of(std::uint64_t entry_id, SortOrder order) const {
    return order == SortOrder::time ? entry_id : path_position_[entry_id];
  }

  /// First canonical position whose ts is >= value.
  std::uint64_t lower_bound_ts(Timestamp value) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), value,
                               [](const TimelineEntry& e, Timestamp v) { return e.ts < v; });
    return static_cast<std::uint64_t>(it - entries_.begin());
  }

  /// Key projection: truncated ts for time kinds, rendered prefix for paths.
  std::string projection(std::uint64_t entry_id, const SkipKey& key) const {
    const auto& e = entries_[entry_id];
    if (key.is_time()) return std::to_string(truncate(e.ts, skip_time_unit(key.kind)));
    return path_prefix(records_[e.record_ref].path, key.depth);
  }

 private:
  std::vector<FileRecord> records_;
  std::vector<TimelineEntry> entries_;
  std::vector<std::uint64_t> by_path_;
  std::vector<std::uint64_t> path_position_;
  std::vector<std::string> lower_paths_;
  TimeSpan bounds_;
};

// ---------------------------------------------------------------------------
// Paging

struct PageRow {
  std::uint64_t entry_id = 0;
  std::uint64_t position = 0;  // position in the requested ordering
  bool bookmarked = false;
  bool context_only = false;   // bookmarked row shown although it fails the filter
};

struct Page {
  std::vector<PageRow> rows;
  std::uint64_t total_matching = 0;
};

/// Matching entries [offset, offset + limit) in the requested order.
///
/// Bookmarked entries that fail the predicate are merged in as context-only
/// rows. Such a row belongs to the page holding the next matching entry
/// after it; rows after the last match belong to the last page (or to
/// page 0 when nothing matches). An offset sweep therefore shows every
/// bookmark exactly once.
template <class Pred>
Page page(const TimelineIndex& index, Pred&& pred, SortOrder order, std::uint64_t offset,
          std::uint64_t limit, std::span<const std::uint64_t> bookmarked = {}) {
  if (limit < 1) throw Error(ErrorCode::ValidationError, "limit must be positive");

  std::vector<std::uint64_t> marks;  // bookmark positions in `order`
  marks.reserve(bookmarked.size());
  for (auto id : bookmarked)
    if (index.contains(id)) marks.push_back(index.position_of(id, order));
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  struct Pending {
    PageRow row;
    std::uint64_t matches_before;
  };
  std::vector<Pending> context;
  Page out;
  std::uint64_t count = 0;
  std::size_t next_mark = 0;
  const std::uint64_t n = index.size();
  const auto entries = index.entries();

  for (std::uint64_t pos = 0; pos < n; ++pos) {
    const std::uint64_t id = index.at(pos, order);
    const bool is_mark = next_mark < marks.size() && marks[next_mark] == pos;
    if (is_mark) ++next_mark;
    if (pred(entries[id])) {
      if (count >= offset && count - offset < limit) out.rows.push_back({id, pos, is_mark, false});
      ++count;
    } else if (is_mark) {
      context.push_back({{id, pos, true, true}, count});
    }
  }
  out.total_matching = count;

  std::vector<PageRow> extra;
  for (const auto& c : context) {
    const std::uint64_t k = c.matches_before;
    bool include = false;
    if (count == 0) include = offset == 0;
    else if (k < count) include = k >= offset && k - offset < limit;
    else include = offset <= count - 1 && count - 1 - offset < limit;
    if (include) extra.push_back(c.row);
  }
  if (!extra.empty()) {
    std::vector<PageRow> merged;
    merged.reserve(out.rows.size() + extra.size());
    std::merge(out.rows.begin(), out.rows.end(), extra.begin(), extra.end(), std::back_inserter(merged),
               [](const PageRow& l, const PageRow& r) { return l.position < r.position; });
    out.rows = std::move(merged);
  }
  return out;
}

/// Time extent of a page window; an empty window collapses to the start of
/// the dataset bounds.
inline TimeSpan visible_span(const TimelineIndex& index, const Page& window) {
  if (window.rows.empty()) return {index.ts_bounds().start, index.ts_bounds().start};
  Timestamp lo = index.entry(window.rows.front().entry_id).ts, hi = lo;
  for (const auto& row : window.rows) {
    const Timestamp ts = index.entry(row.entry_id).ts;
    lo = std::min(lo, ts);
    hi = std::max(hi, ts);
  }
  return {lo, hi};
}

template <class Pred>
TimeSpan visible_span(const TimelineIndex& index, Pred&& pred, SortOrder order, std::uint64_t offset,
                      std::uint64_t limit, std::span<const std::uint64_t> bookmarked = {}) {
  return visible_span(index, page(index, pred, order, offset, limit, bookmarked));
}

// ---------------------------------------------------------------------------
// Block skipping

/// Nearest matching entry in `dir` (walking the given ordering) whose key
/// projection differs from that of `current`. nullopt marks AtEnd.
///
/// Time keys in time order locate the block boundary by binary search;
/// other combinations walk the ordering.
template <class Pred>
std::optional<std::uint64_t> skip_block(const TimelineIndex& index, std::uint64_t current, const SkipKey& key,
                                        Direction dir, Pred&& pred, SortOrder order = SortOrder::time) {
  if (!index.contains(current)) throw Error(ErrorCode::ValidationError, "current entry does not exist");
  if (key.kind == SkipKind::path_prefix && key.depth < 1)
    throw Error(ErrorCode::ValidationError, "path-prefix depth must be >= 1");
  const auto entries = index.entries();
  const std::uint64_t n = index.size();

  if (key.is_time() && order == SortOrder::time) {
    const TimeUnit unit = skip_time_unit(key.kind);
    const Timestamp block = truncate(entries[current].ts, unit);
    if (dir == Direction::forward) {
      for (std::uint64_t pos = index.lower_bound_ts(next_boundary(block, unit)); pos < n; ++pos)
        if (pred(entries[pos])) return pos;
    } else {
      for (std::uint64_t pos = index.lower_bound_ts(block); pos-- > 0;)
        if (pred(entries[pos])) return pos;
    }
    return std::nullopt;
  }

  const std::string proj = index.projection(current, key);
  const std::uint64_t start = index.position_of(current, order);
  if (dir == Direction::forward) {
    for (std::uint64_t pos = start + 1; pos < n; ++pos) {
      const auto id = index.at(pos, order);
      if (pred(entries[id]) && index.projection(id, key) != proj) return id;
    }
  } else {
    for (std::uint64_t pos = start; pos-- > 0;) {
      const auto id = index.at(pos, order);
      if (pred(entries[id]) && index.projection(id, key) != proj) return id;
    }
  }
  return std::nullopt;
}

/// Number of matching entries before `entry_id` in the given ordering.
template <class Pred>
std::uint64_t matching_offset(const TimelineIndex& index, std::uint64_t entry_id, Pred&& pred, SortOrder order) {
  const auto entries = index.entries();
  const std::uint64_t target = index.position_of(entry_id, order);
  std::uint64_t count = 0;
  for (std::uint64_t pos = 0; pos < target; ++pos)
    if (pred(entries[index.at(pos, order)])) ++count;
  return count;
}

}  // namespace timescope
