#pragma once

// Durable store for dataset metadata and investigation sessions.
//
// One JSON document per deployment (format documented in
// docs/store-format.md). Every acknowledged write rewrites the document to
// a temporary file, fsyncs it and renames it over the previous version.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>

#include "timescope/json_io.hpp"

namespace timescope {

struct Note {
  Timestamp at = 0;
  std::string text;
  bool operator==(const Note&) const = default;
};

struct Session {
  std::string session_id;
  std::string dataset_id;
  FilterState filter_state;
  std::vector<Bookmark> bookmarks;  // ordered by entry_id
  std::vector<Note> notes;
  Timestamp updated_at = 0;

  bool operator==(const Session&) const = default;
};

/// A dataset known to the store, with the copy of its source file.
struct StoredDataset {
  Dataset dataset;
  std::string stored_file;  // relative to the store directory
  InputFormat format = InputFormat::body;
};

inline constexpr int kStoreVersion = 1;
inline constexpr std::string_view kStoreFormat = "timescope-store";

inline json to_json(const Session& s) {
  json bookmarks = json::array(), notes = json::array();
  for (const auto& b : s.bookmarks) bookmarks.push_back(to_json(b));
  for (const auto& n : s.notes) notes.push_back(json{{"at", n.at}, {"text", n.text}});
  return json{{"session_id", s.session_id},
              {"dataset_id", s.dataset_id},
              {"filter_state", to_json(s.filter_state)},
              {"bookmarks", bookmarks},
              {"notes", notes},
              {"updated_at", s.updated_at}};
}

inline Session session_from_json(const json& j) {
  return decode("session", [&] {
    Session s;
    s.session_id = j.at("session_id").get<std::string>();
    s.dataset_id = j.at("dataset_id").get<std::string>();
    if (auto it = j.find("filter_state"); it != j.end()) s.filter_state = filter_from_json(*it);
    if (auto it = j.find("bookmarks"); it != j.end())
      for (const auto& b : *it) s.bookmarks.push_back(bookmark_from_json(b));
    if (auto it = j.find("notes"); it != j.end())
      for (const auto& n : *it) s.notes.push_back({n.at("at").get<Timestamp>(), n.at("text").get<std::string>()});
    s.updated_at = j.value("updated_at", Timestamp{0});
    return s;
  });
}

inline Timestamp system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class SessionStore {
 public:
  using Clock = std::function<Timestamp()>;

  /// In-memory store; nothing is persisted.
  SessionStore() : clock_(system_now) {}

  /// Opens (or creates on first write) the store file.
  explicit SessionStore(std::filesystem::path file, Clock clock = system_now)
      : file_(std::move(file)), clock_(std::move(clock)) {
    load();
  }

  const std::filesystem::path& file() const { return file_; }
  Timestamp now() const { return clock_(); }

  // -- datasets ------------------------------------------------------------

  void register_dataset(const StoredDataset& entry) {
    std::unique_lock lock(mutex_);
    if (entry.dataset.dataset_id.empty()) throw Error(ErrorCode::ValidationError, "dataset id must not be empty");
    datasets_[entry.dataset.dataset_id] = entry;
    persist();
  }

  /// Reserves the next "dsN" id.
  std::string next_dataset_id() {
    std::unique_lock lock(mutex_);
    std::string id;
    do id = "ds" + std::to_string(++dataset_counter_);
    while (datasets_.count(id));
    persist();
    return id;
  }

  std::vector<StoredDataset> datasets() const {
    std::shared_lock lock(mutex_);
    std::vector<StoredDataset> out;
    for (const auto& [id, d] : datasets_) out.push_back(d);
    return out;
  }

  std::optional<StoredDataset> find_dataset(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = datasets_.find(id);
    if (it == datasets_.end()) return std::nullopt;
    return it->second;
  }

  // -- sessions ------------------------------------------------------------

  /// Last write wins by updated_at: an older incoming session leaves the
  /// stored one in place.
  void save_session(const Session& s) {
    std::unique_lock lock(mutex_);
    validate(s);
    auto it = sessions_.find(s.session_id);
    if (it != sessions_.end() && it->second.updated_at > s.updated_at) return;
    Session copy = s;
    sort_bookmarks(copy);
    sessions_[s.session_id] = std::move(copy);
    persist();
  }

  Session load_session(const std::string& id) const {
    std::shared_lock lock(mutex_);
    return get(id);
  }

  std::vector<Session> list_sessions() const {
    std::shared_lock lock(mutex_);
    std::vector<Session> out;
    for (const auto& [id, s] : sessions_) out.push_back(s);
    return out;
  }

  Session create_session(const std::string& dataset_id, const FilterState& fs = {}) {
    std::unique_lock lock(mutex_);
    Session s;
    do s.session_id = "s" + std::to_string(++session_counter_);
    while (sessions_.count(s.session_id));
    s.dataset_id = dataset_id;
    s.filter_state = fs;
    s.updated_at = clock_();
    validate(s);
    sessions_[s.session_id] = s;
    persist();
    return s;
  }

  void delete_session(const std::string& id) {
    std::unique_lock lock(mutex_);
    if (!sessions_.erase(id)) throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
    persist();
  }

  /// Idempotent per entry: re-adding returns the existing bookmark.
  Bookmark add_bookmark(const std::string& session_id, std::uint64_t entry_id,
                        std::optional<std::string> color = std::nullopt,
                        std::optional<std::string> note = std::nullopt) {
    std::unique_lock lock(mutex_);
    Session& s = get(session_id);
    check_entry(s.dataset_id, entry_id);
    for (const auto& b : s.bookmarks)
      if (b.entry_id == entry_id) return b;
    Bookmark b;
    b.bookmark_id = "bm-" + std::to_string(entry_id);
    for (int suffix = 2; has_bookmark_id(s, b.bookmark_id); ++suffix)
      b.bookmark_id = "bm-" + std::to_string(entry_id) + "-" + std::to_string(suffix);
    b.entry_id = entry_id;
    b.created_at = clock_();
    b.color = std::move(color);
    b.note = std::move(note);
    s.bookmarks.push_back(b);
    sort_bookmarks(s);
    touch(s);
    persist();
    return b;
  }

  Bookmark update_bookmark(const std::string& session_id, const std::string& bookmark_id,
                           std::optional<std::string> color, std::optional<std::string> note) {
    std::unique_lock lock(mutex_);
    Session& s = get(session_id);
    for (auto& b : s.bookmarks) {
      if (b.bookmark_id != bookmark_id) continue;
      b.color = std::move(color);
      b.note = std::move(note);
      touch(s);
      persist();
      return b;
    }
    throw Error(ErrorCode::NotFound, "unknown bookmark '" + bookmark_id + "'");
  }

  void remove_bookmark(const std::string& session_id, const std::string& bookmark_id) {
    std::unique_lock lock(mutex_);
    Session& s = get(session_id);
    auto it = std::find_if(s.bookmarks.begin(), s.bookmarks.end(),
                           [&](const Bookmark& b) { return b.bookmark_id == bookmark_id; });
    if (it == s.bookmarks.end()) throw Error(ErrorCode::NotFound, "unknown bookmark '" + bookmark_id + "'");
    s.bookmarks.erase(it);
    touch(s);
    persist();
  }

  std::vector<Bookmark> list_bookmarks(const std::string& session_id) const {
    std::shared_lock lock(mutex_);
    return get(session_id).bookmarks;
  }

  /// Replaces the session's filter; bookmarks are untouched.
  void set_filter(const std::string& session_id, const FilterState& fs) {
    std::unique_lock lock(mutex_);
    fs.validate();
    Session& s = get(session_id);
    s.filter_state = fs;
    touch(s);
    persist();
  }

  Note add_note(const std::string& session_id, std::string text) {
    std::unique_lock lock(mutex_);
    Session& s = get(session_id);
    Note n{clock_(), std::move(text)};
    s.notes.push_back(n);
    touch(s);
    persist();
    return n;
  }

  /// The whole store document, as written to disk.
  std::string serialize() const {
    std::shared_lock lock(mutex_);
    return document().dump(2) + "\n";
  }

 private:
  Session& get(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
    return it->second;
  }
  const Session& get(const std::string& id) const {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
    return it->second;
  }

  static bool has_bookmark_id(const Session& s, const std::string& id) {
    return std::any_of(s.bookmarks.begin(), s.bookmarks.end(), [&](const Bookmark& b) { return b.bookmark_id == id; });
  }

  static void sort_bookmarks(Session& s) {
    std::stable_sort(s.bookmarks.begin(), s.bookmarks.end(),
                     [](const Bookmark& l, const Bookmark& r) { return l.entry_id < r.entry_id; });
  }

  void touch(Session& s) const { s.updated_at = std::max(s.updated_at, clock_()); }

  void check_entry(const std::string& dataset_id, std::uint64_t entry_id) const {
    auto it = datasets_.find(dataset_id);
    if (it == datasets_.end()) throw Error(ErrorCode::ValidationError, "unknown dataset '" + dataset_id + "'");
    if (entry_id >= it->second.dataset.entry_count)
      throw Error(ErrorCode::ValidationError, "entry " + std::to_string(entry_id) + " does not exist in dataset '" +
                                                  dataset_id + "'");
  }

  void validate(const Session& s) const {
    if (s.session_id.empty()) throw Error(ErrorCode::ValidationError, "session id must not be empty");
    if (!datasets_.count(s.dataset_id))
      throw Error(ErrorCode::ValidationError, "unknown dataset '" + s.dataset_id + "'");
    s.filter_state.validate();
    std::vector<std::string> ids;
    for (const auto& b : s.bookmarks) {
      check_entry(s.dataset_id, b.entry_id);
      if (b.bookmark_id.empty()) throw Error(ErrorCode::ValidationError, "bookmark id must not be empty");
      ids.push_back(b.bookmark_id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw Error(ErrorCode::ValidationError, "duplicate bookmark id");
  }

  json document() const {
    json datasets = json::array(), sessions = json::array();
    for (const auto& [id, d] : datasets_) {
      json j = to_json(d.dataset);
      j["stored_file"] = d.stored_file;
      j["format"] = format_token(d.format);
      datasets.push_back(std::move(j));
    }
    for (const auto& [id, s] : sessions_) sessions.push_back(to_json(s));
    return json{{"format", kStoreFormat},
                {"version", kStoreVersion},
                {"dataset_counter", dataset_counter_},
                {"session_counter", session_counter_},
                {"datasets", datasets},
                {"sessions", sessions}};
  }

  void load() {
    if (file_.empty() || !std::filesystem::exists(file_)) return;
    std::ifstream in(file_, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read store '" + file_.string() + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::IoError, "store '" + file_.string() + "' is corrupt: " + ex.what());
    }
    decode("store", [&] {
      if (doc.at("format").get<std::string>() != kStoreFormat)
        throw Error(ErrorCode::IoError, "'" + file_.string() + "' is not a session store");
      const int version = doc.at("version").get<int>();
      if (version != kStoreVersion)
        throw Error(ErrorCode::IoError, "unsupported store version " + std::to_string(version));
      dataset_counter_ = doc.value("dataset_counter", std::uint64_t{0});
      session_counter_ = doc.value("session_counter", std::uint64_t{0});
      for (const auto& j : doc.at("datasets")) {
        StoredDataset d;
        d.dataset = dataset_from_json(j);
        d.stored_file = j.value("stored_file", "");
        d.format = parse_input_format(j.value("format", "body"));
        datasets_[d.dataset.dataset_id] = std::move(d);
      }
      for (const auto& j : doc.at("sessions")) {
        Session s = session_from_json(j);
        sessions_[s.session_id] = std::move(s);
      }
      return 0;
    });
  }

  /// Atomic replace: temp file, fsync, rename, fsync directory.
  void persist() const {
    if (file_.empty()) return;
    const std::string text = document().dump(2) + "\n";
    const std::filesystem::path tmp = file_.string() + ".tmp";
    std::error_code ec;
    if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path(), ec);

    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::PersistError, "cannot write '" + tmp.string() + "'");
    std::size_t done = 0;
    while (done < text.size()) {
      const ssize_t n = ::write(fd, text.data() + done, text.size() - done);
      if (n <= 0) {
        ::close(fd);
        throw Error(ErrorCode::PersistError, "short write to '" + tmp.string() + "'");
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
      ::close(fd);
      throw Error(ErrorCode::PersistError, "fsync failed for '" + tmp.string() + "'");
    }
    ::close(fd);
    if (::rename(tmp.c_str(), file_.c_str()) != 0)
      throw Error(ErrorCode::PersistError, "cannot replace '" + file_.string() + "'");
    const auto dir = file_.has_parent_path() ? file_.parent_path() : std::filesystem::path(".");
    const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (dfd >= 0) {
      ::fsync(dfd);
      ::close(dfd);
    }
  }

  std::filesystem::path file_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, StoredDataset> datasets_;
  std::map<std::string, Session> sessions_;
  std::uint64_t dataset_counter_ = 0;
  std::uint64_t session_counter_ = 0;
};

}  // namespace timescope
