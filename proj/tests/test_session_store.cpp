#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "support/crash.hpp"
#include "support/fixtures.hpp"
#include "timescope/session_store.hpp"

using namespace timescope;

namespace {

class StoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    clock_value = 1000;
    store = std::make_unique<SessionStore>(file(), [this] { return clock_value; });
    store->register_dataset(crash::dataset(500));
  }

  std::filesystem::path file() const { return dir.path() / "store.json"; }
  SessionStore reopen() const {
    return SessionStore(file(), [this] { return clock_value; });
  }

  fixtures::TempDir dir;
  Timestamp clock_value = 0;
  std::unique_ptr<SessionStore> store;
};

std::optional<ErrorCode> code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST_F(StoreTest, SaveLoadRoundTrip) {
  Session s = store->create_session("ds1");
  s.filter_state.name_query = "ssh";
  s.filter_state.spans = {{10, 20}};
  s.bookmarks = {{"bm-3", 3, 5, "red", "look here"}};
  s.notes = {{7, "first"}};
  s.updated_at = 2000;
  store->save_session(s);
  EXPECT_EQ(store->load_session(s.session_id), s);
  EXPECT_EQ(reopen().load_session(s.session_id), s);
  EXPECT_EQ(reopen().serialize(), store->serialize());
}

TEST_F(StoreTest, LastWriteWins) {
  Session s = store->create_session("ds1");
  Session newer = s, older = s;
  newer.updated_at = 5000;
  newer.notes = {{1, "newer"}};
  older.updated_at = 4000;
  older.notes = {{1, "older"}};
  store->save_session(newer);
  store->save_session(older);
  EXPECT_EQ(store->load_session(s.session_id).notes[0].text, "newer");
  newer.updated_at = 6000;
  newer.notes[0].text = "newest";
  store->save_session(newer);
  EXPECT_EQ(reopen().load_session(s.session_id).notes[0].text, "newest");
}

TEST_F(StoreTest, ValidationAndNotFound) {
  Session s = store->create_session("ds1");
  s.dataset_id = "ds404";
  EXPECT_EQ(code_of([&] { store->save_session(s); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([&] { store->load_session("nope"); }), ErrorCode::NotFound);
  EXPECT_EQ(code_of([&] { store->create_session("ds404"); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([&] { store->delete_session("nope"); }), ErrorCode::NotFound);
}

TEST_F(StoreTest, BookmarksAreIdempotentAndOrdered) {
  const auto sid = store->create_session("ds1").session_id;
  const auto first = store->add_bookmark(sid, 40, "red");
  const auto again = store->add_bookmark(sid, 40, "blue");
  EXPECT_EQ(first, again);
  store->add_bookmark(sid, 7);
  const auto list = store->list_bookmarks(sid);
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0].entry_id, 7u);
  EXPECT_EQ(list[1].bookmark_id, "bm-40");
  EXPECT_EQ(code_of([&] { store->add_bookmark(sid, 500); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([&] { store->remove_bookmark(sid, "bm-1"); }), ErrorCode::NotFound);
  store->remove_bookmark(sid, "bm-7");
  store->remove_bookmark(sid, "bm-40");
  EXPECT_TRUE(store->list_bookmarks(sid).empty());
}

TEST_F(StoreTest, UpdateBookmark) {
  const auto sid = store->create_session("ds1").session_id;
  store->add_bookmark(sid, 9);
  const auto b = store->update_bookmark(sid, "bm-9", "green", "why");
  EXPECT_EQ(b.color, "green");
  EXPECT_EQ(reopen().list_bookmarks(sid)[0].note, "why");
  EXPECT_EQ(code_of([&] { store->update_bookmark(sid, "bm-1", {}, {}); }), ErrorCode::NotFound);
}

TEST_F(StoreTest, FilterChangesKeepBookmarks) {
  const auto sid = store->create_session("ds1").session_id;
  store->add_bookmark(sid, 1);
  store->add_bookmark(sid, 2);
  FilterState fs;
  fs.flags_on = MacbFlags{Flag::a};
  fs.cluster_id = "user_ssh";
  store->set_filter(sid, fs);
  fs.flags_on = MacbFlags{Flag::m};
  store->set_filter(sid, fs);
  const auto s = reopen().load_session(sid);
  EXPECT_EQ(s.bookmarks.size(), 2u);
  EXPECT_EQ(s.filter_state, fs);
}

TEST_F(StoreTest, NotesAndTimestamps) {
  const auto sid = store->create_session("ds1").session_id;
  clock_value = 1234;
  const auto n = store->add_note(sid, "suspicious wget");
  EXPECT_EQ(n.at, 1234);
  EXPECT_EQ(store->load_session(sid).updated_at, 1234);
  EXPECT_EQ(reopen().load_session(sid).notes, std::vector<Note>{n});
}

TEST_F(StoreTest, RandomSaveLoadCycles) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> coin(0, 99);
  const auto sid = store->create_session("ds1").session_id;
  for (int i = 0; i < 100; ++i) {
    Session s = store->load_session(sid);
    s.updated_at += 1 + coin(rng);
    s.filter_state.offset = static_cast<std::uint64_t>(coin(rng));
    s.filter_state.flags_on = MacbFlags::from_bits(static_cast<std::uint8_t>(coin(rng) % 16));
    if (coin(rng) < 50) s.filter_state.name_query = "q" + std::to_string(coin(rng));
    else s.filter_state.name_query.reset();
    s.bookmarks.clear();
    std::set<std::uint64_t> ids;
    for (int k = coin(rng) % 6; k > 0; --k) ids.insert(static_cast<std::uint64_t>(coin(rng)));
    for (auto id : ids) s.bookmarks.push_back({"bm-" + std::to_string(id), id, 1, std::nullopt, "é\"\n"});
    s.notes.push_back({i, "note " + std::to_string(i)});
    store->save_session(s);
    ASSERT_EQ(reopen().load_session(sid), s) << "cycle " << i;
  }
}

TEST_F(StoreTest, BookmarkModel) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> entry(0, 60);
  std::uniform_int_distribution<int> coin(0, 99);
  const auto sid = store->create_session("ds1").session_id;
  SessionStore memory;  // same operations without the disk
  memory.register_dataset(crash::dataset(500));
  const auto msid = memory.create_session("ds1").session_id;
  std::set<std::uint64_t> model;
  for (int i = 0; i < 1000; ++i) {
    const auto e = entry(rng);
    if (coin(rng) < 55) {
      store->add_bookmark(sid, e);
      memory.add_bookmark(msid, e);
      model.insert(e);
    } else if (model.count(e)) {
      store->remove_bookmark(sid, "bm-" + std::to_string(e));
      memory.remove_bookmark(msid, "bm-" + std::to_string(e));
      model.erase(e);
    }
  }
  std::vector<std::uint64_t> got, mem;
  for (const auto& b : reopen().list_bookmarks(sid)) got.push_back(b.entry_id);
  for (const auto& b : memory.list_bookmarks(msid)) mem.push_back(b.entry_id);
  EXPECT_EQ(got, std::vector<std::uint64_t>(model.begin(), model.end()));
  EXPECT_EQ(mem, got);
}

TEST_F(StoreTest, DatasetIdsAndDelete) {
  const auto a = store->next_dataset_id();
  const auto b = store->next_dataset_id();
  EXPECT_NE(a, b);
  EXPECT_NE(a, "ds1");
  EXPECT_EQ(reopen().next_dataset_id(), "ds" + std::to_string(std::stoi(b.substr(2)) + 1));
  const auto sid = store->create_session("ds1").session_id;
  store->delete_session(sid);
  EXPECT_EQ(code_of([&] { reopen().load_session(sid); }), ErrorCode::NotFound);
}

TEST_F(StoreTest, CorruptOrForeignFileIsRejected) {
  {
    std::ofstream out(file(), std::ios::trunc);
    out << "{ not json";
  }
  EXPECT_EQ(code_of([&] { reopen(); }), ErrorCode::IoError);
  {
    std::ofstream out(file(), std::ios::trunc);
    out << R"({"format": "timescope-store", "version": 99, "datasets": [], "sessions": []})";
  }
  EXPECT_EQ(code_of([&] { reopen(); }), ErrorCode::IoError);
  {
    std::ofstream out(file(), std::ios::trunc);
    out << R"({"format": "other", "version": 1, "datasets": [], "sessions": []})";
  }
  EXPECT_EQ(code_of([&] { reopen(); }), ErrorCode::IoError);
}

TEST_F(StoreTest, UnwritableLocationRaisesPersistError) {
  SessionStore broken(dir.path() / "missing-parent-is-a-file" / "store.json");
  { std::ofstream(dir.path() / "missing-parent-is-a-file") << "x"; }
  EXPECT_EQ(code_of([&] { broken.register_dataset(crash::dataset(1)); }), ErrorCode::PersistError);
}

TEST(StoreCrash, AcknowledgedWritesSurviveKill) {
  fixtures::TempDir dir;
  for (int acks : {1, 17, 60}) {
    const auto problems = crash::kill_and_reopen(dir.path() / "store.json", acks);
    EXPECT_TRUE(problems.empty()) << problems.front();
  }
}
