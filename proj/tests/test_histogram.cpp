#include <gtest/gtest.h>

#include <map>

#include "support/fixtures.hpp"
#include "support/properties.hpp"
#include "timescope/histogram.hpp"

using namespace timescope;
using fixtures::record;

namespace {

const auto kAll = [](const TimelineEntry&) { return true; };

const properties::Corpus& corpus() {
  static const properties::Corpus c = properties::make_corpus(45, 4000);
  return c;
}

Bookmark mark(std::uint64_t entry) { return {"bm-" + std::to_string(entry), entry, 0, {}, {}}; }

}  // namespace

TEST(Granularity, ChooseFinestWithin240) {
  const Timestamp t0 = utc_timestamp(2014, 1, 1);
  EXPECT_EQ(choose_granularity({t0, utc_timestamp(2016, 12, 31, 23, 59, 59)}), Granularity::month);
  EXPECT_EQ(choose_granularity({t0, t0 + 36 * 3600 - 1}), Granularity::hour);
  EXPECT_EQ(choose_granularity({t0, t0 + 6 * 86400 - 1}), Granularity::hour);
  EXPECT_EQ(choose_granularity({t0, t0 + 30 * 86400}), Granularity::day);
  EXPECT_EQ(choose_granularity({0, utc_timestamp(2500, 1, 1)}), Granularity::year);
}

TEST(Granularity, Tokens) {
  for (auto g : {Granularity::year, Granularity::month, Granularity::day, Granularity::hour})
    EXPECT_EQ(parse_granularity(granularity_token(g)), g);
  EXPECT_THROW(parse_granularity("week"), Error);
}

TEST(Aggregate, OneDayNoFilters) {
  const Timestamp day = utc_timestamp(2016, 5, 25);
  auto b = fixtures::build({record("/1", day + 10, {}, {}, {}), record("/2", day + 20, {}, {}, {}),
                            record("/3", {}, day + 30, {}, {}), record("/4", {}, {}, day + 40, {})});
  const auto got = aggregate(b.index, kAll, kAll, Granularity::day, {day, day + 86399});
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].start, day);
  EXPECT_EQ(got[0].matched.counts, (std::array<std::uint64_t, 4>{2, 1, 1, 0}));
  EXPECT_EQ(got[0].context.sum(), 0u);
}

TEST(Aggregate, NameFilterGraysOutTheRest) {
  const Timestamp day = utc_timestamp(2016, 5, 25);
  auto b = fixtures::build({record("/usr/bin/wget", {}, day + 5, {}, {}), record("/a", day + 10, {}, {}, {}),
                            record("/b", day + 20, {}, {}, {}), record("/c", day + 30, {}, {}, {})});
  FilterState fs;
  fs.name_query = "wget";
  fs.name_mode = NameMode::filter;
  FilterState context = fs;
  context.name_query.reset();
  const auto got = aggregate(b.index, compile_bound(fs, b.view()), compile_bound(context, b.view()), Granularity::day,
                             {day, day + 86399});
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].matched.counts, (std::array<std::uint64_t, 4>{0, 1, 0, 0}));
  EXPECT_EQ(got[0].context.counts, (std::array<std::uint64_t, 4>{3, 0, 0, 0}));
}

TEST(Aggregate, EmptyBucketsAndMonthLengths) {
  auto b = fixtures::build({record("/x", utc_timestamp(2016, 1, 15), {}, {}, {}),
                            record("/y", utc_timestamp(2016, 4, 2), {}, {}, {})});
  const auto got = aggregate(b.index, kAll, kAll, Granularity::month,
                             {utc_timestamp(2016, 1, 10), utc_timestamp(2016, 4, 3)});
  ASSERT_EQ(got.size(), 4u);
  EXPECT_EQ(got[1].start, utc_timestamp(2016, 2, 1));
  EXPECT_EQ(got[2].start, utc_timestamp(2016, 3, 1));
  EXPECT_EQ(got[1].matched.sum() + got[2].matched.sum(), 0u);
  EXPECT_EQ(got[3].matched.counts[0], 1u);
}

TEST(Aggregate, ContractViolation) {
  auto b = fixtures::build({record("/x", 5, {}, {}, {})});
  try {
    aggregate(b.index, kAll, [](const TimelineEntry&) { return false; }, Granularity::hour, {0, 10});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ContractViolation);
  }
}

TEST(Aggregate, RejectsBadSpans) {
  auto b = fixtures::build({record("/x", 5, {}, {}, {})});
  EXPECT_THROW(aggregate(b.index, kAll, kAll, Granularity::hour, {10, 0}), Error);
  EXPECT_THROW(aggregate(b.index, kAll, kAll, Granularity::hour, {0, utc_timestamp(2100, 1, 1)}), Error);
}

TEST(Aggregate, RandomCasesMatchOracle) {
  std::mt19937_64 rng(5);
  const auto problems = properties::check_histograms(corpus(), rng, 25);
  EXPECT_TRUE(problems.empty()) << problems.front();
}

TEST(Pins, SameHourGroupsTogether) {
  const Timestamp h = utc_timestamp(2016, 5, 25, 10);
  auto b = fixtures::build({record("/a", h + 1, {}, {}, {}), record("/b", h + 100, {}, {}, {}),
                            record("/c", h + 4000, {}, {}, {})});
  const std::vector<Bookmark> marks = {mark(1), mark(0), mark(2), mark(99)};
  const auto got = aggregate_bookmarks(marks, b.index, Granularity::hour, b.index.ts_bounds());
  ASSERT_EQ(got.groups.size(), 2u);
  EXPECT_EQ(got.groups[0].count, 2u);
  EXPECT_EQ(got.groups[0].bookmark_ids, (std::vector<std::string>{"bm-0", "bm-1"}));
  EXPECT_EQ(got.groups[0].first_entry_id, 0u);
  EXPECT_EQ(got.groups[1].bucket_start, h + 3600);
  EXPECT_EQ(got.dangling, std::vector<std::string>{"bm-99"});
  EXPECT_TRUE(aggregate_bookmarks({}, b.index, Granularity::hour, b.index.ts_bounds()).groups.empty());
}

TEST(Pins, RandomBookmarksMatchGroupBy) {
  const auto& c = corpus();
  const auto& idx = c.built.index;
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::uint64_t> pick(0, idx.size() - 1);
  for (int round = 0; round < 30; ++round) {
    std::vector<Bookmark> marks;
    for (int k = 0; k < 40; ++k) marks.push_back(mark(pick(rng)));
    std::sort(marks.begin(), marks.end(), [](auto& l, auto& r) { return l.entry_id < r.entry_id; });
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
    const auto g = static_cast<Granularity>(round % 4);
    const TimeSpan span{properties::kDenseLo, properties::kDenseHi};
    std::map<Timestamp, std::vector<std::string>> want;
    for (const auto& m : marks) {
      const auto ts = c.tl[m.entry_id].ts;
      if (span.contains(ts)) want[oracle::floor_to(ts, properties::unit_of(g))].push_back(m.bookmark_id);
    }
    std::shuffle(marks.begin(), marks.end(), rng);
    const auto got = aggregate_bookmarks(marks, idx, g, span);
    ASSERT_EQ(got.groups.size(), want.size());
    std::size_t i = 0;
    for (const auto& [start, ids] : want) {
      EXPECT_EQ(got.groups[i].bucket_start, start);
      EXPECT_EQ(got.groups[i].bookmark_ids, ids);
      EXPECT_EQ(got.groups[i].count, ids.size());
      ++i;
    }
  }
}
