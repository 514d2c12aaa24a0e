#pragma once

// Dataset catalog and the read operations shared by the CLI and the HTTP
// service. Neither front end computes anything itself.

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <sstream>

#include "timescope/histogram.hpp"
#include "timescope/ingest.hpp"
#include "timescope/query.hpp"
#include "timescope/session_store.hpp"
#include "timescope/timeline_index.hpp"

namespace timescope {

struct LoadedDataset {
  Dataset meta;
  ImportStats stats;
  std::vector<ParseError> rejects;
  TimelineIndex index;
  ClusterMembership membership;
};

struct QueryRow {
  std::uint64_t entry_id = 0;
  Timestamp ts = 0;
  MacbFlags flags;
  const FileRecord* record = nullptr;
  std::vector<HighlightRange> highlight;
  bool bookmarked = false;
  bool context_only = false;
};

struct QueryResult {
  std::vector<QueryRow> rows;
  std::uint64_t total_matching = 0;
  TimeSpan visible_span;
};

struct SkipResult {
  std::optional<std::uint64_t> entry_id;  // nullopt = at end
  std::uint64_t offset = 0;               // position among matching entries
};

struct PinView {
  PinGroup group;
  bool clickable = true;  // false when every member lies outside the span windows
};

struct HistogramResult {
  Granularity granularity = Granularity::day;
  TimeSpan span;
  std::vector<Bucket> buckets;
  std::vector<PinView> pins;
  std::vector<std::string> dangling_bookmarks;
};

struct EngineOptions {
  std::filesystem::path data_dir;  // empty: nothing is persisted
  std::uint64_t max_page_limit = 1000;
  std::optional<std::filesystem::path> cluster_config;
};

class Engine {
 public:
  explicit Engine(EngineOptions opts = {}) : opts_(std::move(opts)) {
    registry_ = builtin_clusters();
    if (opts_.cluster_config) {
      std::ifstream in(*opts_.cluster_config);
      if (!in) throw Error(ErrorCode::IoError, "cannot open cluster config '" + opts_.cluster_config->string() + "'");
      load_cluster_config(in, registry_);
    }
    if (opts_.data_dir.empty()) {
      store_ = std::make_unique<SessionStore>();
    } else {
      std::filesystem::create_directories(opts_.data_dir / "datasets");
      store_ = std::make_unique<SessionStore>(opts_.data_dir / "store.json");
    }
  }

  const ClusterRegistry& registry() const { return registry_; }
  SessionStore& store() { return *store_; }
  const EngineOptions& options() const { return opts_; }

  // -- datasets ------------------------------------------------------------

  /// Imports an in-memory upload. The text is kept under the data directory
  /// so the dataset can be reloaded later.
  std::shared_ptr<const LoadedDataset> import_text(const std::string& content, const std::string& name,
                                                   const std::string& source, std::optional<InputFormat> format,
                                                   std::function<void(std::uint64_t)> progress = {}) {
    const InputFormat fmt = format.value_or(sniff_format(std::string_view(content).substr(0, 4096)));
    const std::string id = store_->next_dataset_id();
    std::istringstream in(content);
    auto loaded = build(in, id, name, source, fmt, store_->now(), std::move(progress));
    persist_source(loaded->meta, fmt, [&](std::ostream& out) { out << content; });
    return publish(loaded);
  }

  std::shared_ptr<const LoadedDataset> import_file(const std::filesystem::path& path, const std::string& name,
                                                   std::optional<InputFormat> format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    InputFormat fmt;
    if (format) {
      fmt = *format;
    } else {
      std::string head(4096, '\0');
      in.read(head.data(), static_cast<std::streamsize>(head.size()));
      head.resize(static_cast<std::size_t>(in.gcount()));
      fmt = sniff_format(head);
      in.clear();
      in.seekg(0);
    }
    const std::string id = store_->next_dataset_id();
    auto loaded = build(in, id, name.empty() ? path.filename().string() : name, path.filename().string(), fmt,
                        store_->now(), {});
    persist_source(loaded->meta, fmt, [&](std::ostream& out) {
      std::ifstream src(path, std::ios::binary);
      out << src.rdbuf();
    });
    return publish(loaded);
  }

  std::vector<Dataset> list_datasets() const {
    std::vector<Dataset> out;
    std::set<std::string> seen;
    {
      std::shared_lock lock(mutex_);
      for (const auto& [id, d] : loaded_) {
        out.push_back(d->meta);
        seen.insert(id);
      }
    }
    for (const auto& d : store_->datasets())
      if (!seen.count(d.dataset.dataset_id)) out.push_back(d.dataset);
    std::sort(out.begin(), out.end(), [](const Dataset& l, const Dataset& r) { return l.dataset_id < r.dataset_id; });
    return out;
  }

  /// Loaded dataset by id; datasets known only to the store are re-imported
  /// from their stored copy on first use.
  std::shared_ptr<const LoadedDataset> dataset(const std::string& id) {
    {
      std::shared_lock lock(mutex_);
      auto it = loaded_.find(id);
      if (it != loaded_.end()) return it->second;
    }
    auto stored = store_->find_dataset(id);
    if (!stored) throw Error(ErrorCode::NotFound, "unknown dataset '" + id + "'");
    std::ifstream in(opts_.data_dir / stored->stored_file, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "stored copy of dataset '" + id + "' is missing");
    auto loaded = build(in, id, stored->dataset.name, stored->dataset.source, stored->format,
                        stored->dataset.imported_at, {});
    std::unique_lock lock(mutex_);
    auto [it, inserted] = loaded_.emplace(id, loaded);
    return it->second;
  }

  DatasetView view(const LoadedDataset& ds) const { return {ds.index, registry_, ds.membership}; }

  /// Bookmarks of a session, which must belong to `dataset_id`.
  std::vector<Bookmark> session_bookmarks(const std::string& session_id, const std::string& dataset_id) const {
    Session s = store_->load_session(session_id);
    if (s.dataset_id != dataset_id)
      throw Error(ErrorCode::ValidationError, "session '" + session_id + "' belongs to another dataset");
    return s.bookmarks;
  }

  // -- reads ---------------------------------------------------------------

  FilterState clamp(FilterState fs) const {
    fs.limit = std::min(fs.limit, opts_.max_page_limit);
    return fs;
  }

  QueryResult query(const LoadedDataset& ds, const FilterState& requested,
                    std::span<const Bookmark> bookmarks = {}) const {
    const FilterState fs = clamp(requested);
    const auto v = view(ds);
    const auto pred = compile_bound(fs, v);
    std::vector<std::uint64_t> marked;
    for (const auto& b : bookmarks) marked.push_back(b.entry_id);
    const Page pg = page(ds.index, pred, fs.sort, fs.offset, fs.limit, marked);

    std::optional<NameMatcher> highlighter;
    if (fs.name_query && !fs.name_query->empty()) highlighter.emplace(*fs.name_query);

    QueryResult out;
    out.total_matching = pg.total_matching;
    out.visible_span = visible_span(ds.index, pg);
    out.rows.reserve(pg.rows.size());
    for (const auto& row : pg.rows) {
      const auto& e = ds.index.entry(row.entry_id);
      QueryRow qr;
      qr.entry_id = e.entry_id;
      qr.ts = e.ts;
      qr.flags = e.flags;
      qr.record = &ds.index.record_of(e);
      if (highlighter) qr.highlight = highlighter->highlight(qr.record->path);
      qr.bookmarked = row.bookmarked;
      qr.context_only = row.context_only;
      out.rows.push_back(std::move(qr));
    }
    return out;
  }

  SkipResult skip(const LoadedDataset& ds, std::uint64_t current, const SkipKey& key, Direction dir,
                  const FilterState& fs) const {
    const auto pred = compile_bound(fs, view(ds));
    SkipResult out;
    out.entry_id = skip_block(ds.index, current, key, dir, pred, fs.sort);
    if (out.entry_id) out.offset = matching_offset(ds.index, *out.entry_id, pred, fs.sort);
    return out;
  }

  /// Matched counts use the whole filter; grayed context counts drop only
  /// the name filter.
  HistogramResult histogram(const LoadedDataset& ds, const FilterState& fs, std::optional<TimeSpan> span,
                            std::optional<Granularity> granularity, std::span<const Bookmark> bookmarks = {}) const {
    const auto v = view(ds);
    const auto matched = compile_bound(fs, v);
    FilterState context_fs = fs;
    context_fs.name_query.reset();
    const auto context = compile_bound(context_fs, v);

    HistogramResult out;
    out.span = span.value_or(ds.index.ts_bounds());
    out.granularity = granularity.value_or(choose_granularity(out.span));
    out.buckets = aggregate(ds.index, matched, context, out.granularity, out.span);

    auto pins = aggregate_bookmarks(bookmarks, ds.index, out.granularity, out.span);
    out.dangling_bookmarks = std::move(pins.dangling);
    std::map<std::string, std::uint64_t> entry_of;
    for (const auto& b : bookmarks) entry_of[b.bookmark_id] = b.entry_id;
    for (auto& g : pins.groups) {
      PinView pv{std::move(g), true};
      if (!fs.spans.empty()) {
        pv.clickable = false;
        for (const auto& id : pv.group.bookmark_ids) {
          const Timestamp ts = ds.index.entry(entry_of[id]).ts;
          for (const auto& s : fs.spans) pv.clickable = pv.clickable || s.contains(ts);
        }
      }
      out.pins.push_back(std::move(pv));
    }
    return out;
  }

  std::vector<ClusterCount> clusters(const LoadedDataset& ds, const FilterState& fs) const {
    return cluster_counts(view(ds), fs);
  }

  std::vector<Burst> bursts(const LoadedDataset& ds, const FilterState& fs, Timestamp window_s,
                            std::uint64_t min_count) const {
    return detect_bursts(ds.index, compile_bound(fs, view(ds)), window_s, min_count);
  }

  /// Every matching row (offset/limit ignored) as CSV.
  std::string export_csv(const LoadedDataset& ds, const FilterState& fs) const {
    const auto pred = compile_bound(fs, view(ds));
    std::ostringstream out;
    out << "entry_id,ts,flags," << kCsvHeader << "\n";
    auto quote = [](const std::string& s) {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
      }
      return q + "\"";
    };
    auto stamp = [](const std::optional<Timestamp>& t) { return t ? std::to_string(*t) : std::string(); };
    const auto n = ds.index.size();
    for (std::uint64_t pos = 0; pos < n; ++pos) {
      const auto& e = ds.index.entry(ds.index.at(pos, fs.sort));
      if (!pred(e)) continue;
      const auto& r = ds.index.record_of(e);
      out << e.entry_id << ',' << e.ts << ',' << render_flags(e.flags) << ',' << quote(r.path) << ',' << r.inode
          << ',' << quote(r.mode) << ',' << r.uid << ',' << r.gid << ',' << r.size << ',' << stamp(r.atime) << ','
          << stamp(r.mtime) << ',' << stamp(r.ctime) << ',' << stamp(r.btime) << "\n";
    }
    return out.str();
  }

 private:
  std::shared_ptr<LoadedDataset> build(std::istream& in, const std::string& id, const std::string& name,
                                       const std::string& source, InputFormat fmt, Timestamp imported_at,
                                       std::function<void(std::uint64_t)> progress) const {
    ImportOptions io;
    io.name = name;
    io.source = source;
    io.dataset_id = id;
    io.format = fmt;
    io.imported_at = imported_at;
    io.progress = std::move(progress);
    ImportResult imported = import_dataset(in, io);

    auto loaded = std::make_shared<LoadedDataset>();
    loaded->meta = imported.dataset;
    loaded->stats = imported.stats;
    loaded->rejects = std::move(imported.rejects);
    loaded->index = TimelineIndex::build(std::move(imported.records), std::move(imported.entries));
    loaded->membership = compute_membership(loaded->index, registry_);
    return loaded;
  }

  template <class Writer>
  void persist_source(const Dataset& meta, InputFormat fmt, Writer&& write) {
    if (opts_.data_dir.empty()) return;
    StoredDataset sd;
    sd.dataset = meta;
    sd.format = fmt;
    sd.stored_file = "datasets/" + meta.dataset_id + "." + std::string(format_token(fmt));
    const auto target = opts_.data_dir / sd.stored_file;
    {
      std::ofstream out(target, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::PersistError, "cannot write '" + target.string() + "'");
      write(out);
      out.flush();
      if (!out) throw Error(ErrorCode::PersistError, "cannot write '" + target.string() + "'");
    }
    store_->register_dataset(sd);
  }

  std::shared_ptr<const LoadedDataset> publish(std::shared_ptr<LoadedDataset> loaded) {
    if (opts_.data_dir.empty()) {
      StoredDataset sd;
      sd.dataset = loaded->meta;
      store_->register_dataset(sd);
    }
    std::unique_lock lock(mutex_);
    loaded_[loaded->meta.dataset_id] = loaded;
    return loaded;
  }

  EngineOptions opts_;
  ClusterRegistry registry_;
  std::unique_ptr<SessionStore> store_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const LoadedDataset>> loaded_;
};

}  // namespace timescope
