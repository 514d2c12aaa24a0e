#include <gtest/gtest.h>

#include <set>

#include "support/fixtures.hpp"
#include "support/properties.hpp"
#include "timescope/timeline_index.hpp"

using namespace timescope;
using fixtures::record;

namespace {

const auto kAll = [](const TimelineEntry&) { return true; };

const properties::Corpus& corpus() {
  static const properties::Corpus c = properties::make_corpus(21, 3000);
  return c;
}

void expect_none(const std::vector<std::string>& problems) {
  EXPECT_TRUE(problems.empty()) << problems.size() << " mismatches, first: " << problems.front();
}

}  // namespace

TEST(Index, TiesBreakOnPath) {
  auto b = fixtures::build({record("/b", 5, {}, {}, {}), record("/a", 5, {}, {}, {})});
  EXPECT_EQ(b.index.record_of(b.index.entry(0)).path, "/a");
  EXPECT_EQ(b.index.record_of(b.index.entry(1)).path, "/b");
  EXPECT_EQ(b.index.ts_bounds(), (TimeSpan{5, 5}));
}

TEST(Index, EntryIdEqualsPosition) {
  const auto& c = corpus();
  for (std::size_t i = 0; i < c.built.index.size(); ++i) ASSERT_EQ(c.built.index.entry(i).entry_id, i);
}

TEST(Index, MatchesOracleOrders) { expect_none(properties::check_alignment(corpus())); }

TEST(Index, RebuildIsIdentical) {
  const auto& c = corpus();
  auto again = fixtures::build(c.records);
  ASSERT_EQ(again.index.size(), c.built.index.size());
  for (std::size_t i = 0; i < again.index.size(); ++i) {
    ASSERT_EQ(again.index.entry(i), c.built.index.entry(i));
    ASSERT_EQ(again.index.at(i, SortOrder::path), c.built.index.at(i, SortOrder::path));
  }
}

TEST(Index, EmptyInputThrows) {
  try {
    TimelineIndex::build({}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
  }
}

TEST(Paging, FirstTwoOfFive) {
  std::vector<FileRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(record("/f" + std::to_string(i), 10 + i, {}, {}, {}));
  auto b = fixtures::build(recs);
  const auto p = page(b.index, kAll, SortOrder::time, 0, 2);
  ASSERT_EQ(p.rows.size(), 2u);
  EXPECT_EQ(p.rows[0].entry_id, 0u);
  EXPECT_EQ(p.rows[1].entry_id, 1u);
  EXPECT_EQ(p.total_matching, 5u);
  EXPECT_TRUE(page(b.index, kAll, SortOrder::time, 9, 2).rows.empty());
  EXPECT_THROW(page(b.index, kAll, SortOrder::time, 0, 0), Error);
}

TEST(Paging, BookmarkVisibleWhenNothingMatches) {
  auto b = fixtures::build({record("/x", 1, {}, {}, {}), record("/y", 2, {}, {}, {})});
  const std::vector<std::uint64_t> marks = {1};
  const auto p = page(b.index, [](const TimelineEntry&) { return false; }, SortOrder::time, 0, 10, marks);
  ASSERT_EQ(p.rows.size(), 1u);
  EXPECT_EQ(p.rows[0].entry_id, 1u);
  EXPECT_TRUE(p.rows[0].context_only);
  EXPECT_TRUE(p.rows[0].bookmarked);
  EXPECT_EQ(p.total_matching, 0u);
}

TEST(Paging, OffsetSweepShowsEveryMatchAndBookmarkOnce) {
  const auto& c = corpus();
  const auto pred = [](const TimelineEntry& e) { return e.flags.has(Flag::m) && e.ts % 3 == 0; };
  std::vector<std::uint64_t> marks;
  for (std::uint64_t i = 0; i < c.built.index.size(); i += 97) marks.push_back(i);
  for (auto order : {SortOrder::time, SortOrder::path}) {
    std::multiset<std::uint64_t> matched, context;
    const std::uint64_t limit = 37;
    const auto total = page(c.built.index, pred, order, 0, 1).total_matching;
    for (std::uint64_t off = 0; off < total; off += limit)
      for (const auto& r : page(c.built.index, pred, order, off, limit, marks).rows)
        (r.context_only ? context : matched).insert(r.entry_id);
    EXPECT_EQ(matched.size(), total);
    EXPECT_EQ(std::set<std::uint64_t>(matched.begin(), matched.end()).size(), total);
    std::size_t failing_marks = 0;
    for (auto m : marks) failing_marks += !pred(c.built.index.entry(m));
    EXPECT_EQ(context.size(), failing_marks);
    for (auto m : context) EXPECT_EQ(context.count(m), 1u);
  }
}

TEST(Paging, VisibleSpan) {
  auto b = fixtures::build({record("/a", 100, {}, {}, {}), record("/b", 250, {}, {}, {}), record("/c", 400, {}, {}, {})});
  EXPECT_EQ(visible_span(b.index, kAll, SortOrder::time, 0, 2), (TimeSpan{100, 250}));
  EXPECT_EQ(visible_span(b.index, kAll, SortOrder::time, 2, 1), (TimeSpan{400, 400}));
  EXPECT_EQ(visible_span(b.index, kAll, SortOrder::time, 7, 1), (TimeSpan{100, 100}));
}

TEST(Paging, RandomFiltersMatchOracle) {
  std::mt19937_64 rng(4);
  expect_none(properties::check_filters(corpus(), rng, 40));
}

TEST(Skip, HourAndMinuteExamples) {
  const Timestamp nine = utc_timestamp(2016, 5, 25, 9);
  auto b = fixtures::build({record("/a", nine + 1, {}, {}, {}), record("/b", nine + 1, {}, {}, {}),
                            record("/c", nine + 2, {}, {}, {}), record("/d", nine + 15 * 60 + 3600, {}, {}, {})});
  EXPECT_EQ(skip_block(b.index, 0, SkipKey::time(SkipKind::hour), Direction::forward, kAll), 3u);
  EXPECT_EQ(skip_block(b.index, 0, SkipKey::time(SkipKind::minute), Direction::forward, kAll), 3u);
  EXPECT_EQ(skip_block(b.index, 3, SkipKey::time(SkipKind::minute), Direction::backward, kAll), 2u);
  EXPECT_EQ(skip_block(b.index, 3, SkipKey::time(SkipKind::day), Direction::forward, kAll), std::nullopt);
}

TEST(Skip, PathPrefixExample) {
  auto b = fixtures::build({record("/var/tmp/a", 1, {}, {}, {}), record("/var/tmp/b", 2, {}, {}, {}),
                            record("/var/log/x", 3, {}, {}, {})});
  const std::uint64_t log = b.index.at(0, SortOrder::path);
  EXPECT_EQ(b.index.record_of(b.index.entry(log)).path, "/var/log/x");
  const auto got = skip_block(b.index, log, SkipKey::path_prefix(2), Direction::forward, kAll, SortOrder::path);
  ASSERT_TRUE(got);
  EXPECT_EQ(b.index.record_of(b.index.entry(*got)).path, "/var/tmp/a");
}

TEST(Skip, RespectsPredicate) {
  auto b = fixtures::build({record("/a", 10, {}, {}, {}), record("/b", 4000, {}, {}, {}), record("/c", 8000, {}, {}, {})});
  const auto not_b = [&](const TimelineEntry& e) { return e.ts != 4000; };
  EXPECT_EQ(skip_block(b.index, 0, SkipKey::time(SkipKind::hour), Direction::forward, not_b), 2u);
}

TEST(Skip, InvalidInput) {
  auto b = fixtures::build({record("/a", 10, {}, {}, {})});
  EXPECT_THROW(skip_block(b.index, 5, SkipKey::time(SkipKind::day), Direction::forward, kAll), Error);
  EXPECT_THROW(skip_block(b.index, 0, SkipKey{SkipKind::path_prefix, 0}, Direction::forward, kAll), Error);
}

TEST(Skip, RandomTriplesMatchOracle) {
  std::mt19937_64 rng(8);
  expect_none(properties::check_skips(corpus(), rng, 150));
}

TEST(Skip, ForwardThenBackwardReturnsToBlock) {
  const auto& c = corpus();
  const auto& idx = c.built.index;
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::uint64_t> pick(0, idx.size() - 1);
  for (int i = 0; i < 300; ++i) {
    const auto x = pick(rng);
    const int k = i % 8;
    const bool time_key = k < 5;
    const SkipKey key = time_key ? SkipKey::time(static_cast<SkipKind>(k)) : SkipKey::path_prefix(k - 4);
    const SortOrder order = time_key ? SortOrder::time : SortOrder::path;
    const auto fwd = skip_block(idx, x, key, Direction::forward, kAll, order);
    if (!fwd) continue;
    const auto back = skip_block(idx, *fwd, key, Direction::backward, kAll, order);
    ASSERT_TRUE(back);
    EXPECT_EQ(idx.projection(*back, key), idx.projection(x, key)) << "x=" << x << " k=" << k;
  }
}

TEST(Skip, DaySequenceVisitsEachMatchingDayOnce) {
  const auto& c = corpus();
  const auto& idx = c.built.index;
  const auto pred = [](const TimelineEntry& e) { return e.flags.has(Flag::a); };
  std::set<Timestamp> want;
  std::optional<std::uint64_t> first;
  for (const auto& e : idx.entries())
    if (pred(e)) {
      want.insert(truncate(e.ts, TimeUnit::day));
      if (!first) first = e.entry_id;
    }
  ASSERT_TRUE(first);
  std::vector<Timestamp> visited = {truncate(idx.entry(*first).ts, TimeUnit::day)};
  for (auto at = skip_block(idx, *first, SkipKey::time(SkipKind::day), Direction::forward, pred); at;
       at = skip_block(idx, *at, SkipKey::time(SkipKind::day), Direction::forward, pred))
    visited.push_back(truncate(idx.entry(*at).ts, TimeUnit::day));
  EXPECT_EQ(visited, std::vector<Timestamp>(want.begin(), want.end()));
}

TEST(Skip, MatchingOffset) {
  auto b = fixtures::build({record("/a", 1, {}, {}, {}), record("/b", 2, {}, {}, {}), record("/c", 3, {}, {}, {})});
  const auto odd = [](const TimelineEntry& e) { return e.ts % 2 == 1; };
  EXPECT_EQ(matching_offset(b.index, 2, odd, SortOrder::time), 1u);
  EXPECT_EQ(matching_offset(b.index, 0, odd, SortOrder::time), 0u);
}
