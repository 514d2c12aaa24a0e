#pragma once

#include <filesystem>
#include <random>
#include <sstream>

#include "timescope/ingest.hpp"
#include "timescope/query.hpp"
#include "timescope/timeline_index.hpp"

namespace fixtures {

/// Index, registry and membership built from records through the engine.
struct Built {
  timescope::TimelineIndex index;
  timescope::ClusterRegistry registry;
  timescope::ClusterMembership membership;

  timescope::DatasetView view() const { return {index, registry, membership}; }
};

inline Built build(std::vector<timescope::FileRecord> records,
                   timescope::ClusterRegistry registry = timescope::builtin_clusters()) {
  std::vector<timescope::TimelineEntry> entries;
  for (std::uint32_t r = 0; r < records.size(); ++r)
    for (const auto& ev : timescope::expand_record(records[r])) entries.push_back({0, r, ev.ts, ev.flags});
  Built b{timescope::TimelineIndex::build(std::move(records), std::move(entries)), std::move(registry), {}};
  b.membership = timescope::compute_membership(b.index, b.registry);
  return b;
}

/// Imports body-format text the way the engine does.
inline Built from_body(const std::string& text, timescope::ClusterRegistry registry = timescope::builtin_clusters()) {
  std::istringstream in(text);
  timescope::ImportOptions opts;
  opts.format = timescope::InputFormat::body;
  auto imported = timescope::import_dataset(in, opts);
  Built b{timescope::TimelineIndex::build(std::move(imported.records), std::move(imported.entries)),
          std::move(registry), {}};
  b.membership = timescope::compute_membership(b.index, b.registry);
  return b;
}

inline timescope::FileRecord record(std::string path, std::optional<timescope::Timestamp> m,
                                    std::optional<timescope::Timestamp> a, std::optional<timescope::Timestamp> c,
                                    std::optional<timescope::Timestamp> b, std::string mode = "r/rrw-r--r--") {
  timescope::FileRecord r;
  r.path = std::move(path);
  r.mode = std::move(mode);
  r.file_type = r.mode[0];
  r.mtime = m;
  r.atime = a;
  r.ctime = c;
  r.btime = b;
  return r;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("timescope-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
