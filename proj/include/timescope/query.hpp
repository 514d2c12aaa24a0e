#pragma once

// Filter compilation, the cluster registry, cluster counting, name
// highlighting and burst detection.

#include <boost/regex.hpp>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "timescope/core.hpp"
#include "timescope/timeline_index.hpp"

#include <nlohmann/json.hpp>

namespace timescope {

// ---------------------------------------------------------------------------
// Permission text

/// The nine rwx characters of a mode string ("r/rrwsr-xr-x" -> "rwsr-xr-x").
/// nullopt if the text does not look like a permission string.
inline std::optional<std::string_view> permission_triplets(std::string_view mode) {
  const auto slash = mode.rfind('/');
  if (slash != std::string_view::npos) mode = mode.substr(slash + 1);
  if (mode.size() < 9) return std::nullopt;
  const std::string_view p = mode.substr(mode.size() - 9);
  static constexpr std::string_view allowed[9] = {"r-", "w-", "xsS-", "r-", "w-", "xsS-", "r-", "w-", "xtT-"};
  for (std::size_t i = 0; i < 9; ++i)
    if (allowed[i].find(p[i]) == std::string_view::npos) return std::nullopt;
  return p;
}

inline bool mode_is_setid(std::string_view mode) {
  auto p = permission_triplets(mode);
  if (!p) return false;
  auto s = [](char ch) { return ch == 's' || ch == 'S'; };
  return s((*p)[2]) || s((*p)[5]);
}

inline bool mode_is_weak(std::string_view mode) {
  auto p = permission_triplets(mode);
  if (!p) return false;
  const bool exec = (*p)[2] == 'x' || (*p)[2] == 's' || (*p)[5] == 'x' || (*p)[5] == 's' || (*p)[8] == 'x' ||
                    (*p)[8] == 't';
  return (*p)[7] == 'w' && exec;
}

inline std::string_view mode_rule_token(ModeRule rule) {
  switch (rule) {
    case ModeRule::setid: return "setid";
    case ModeRule::world_writable_exec: return "world_writable_exec";
    case ModeRule::none: break;
  }
  return "none";
}

inline ModeRule parse_mode_rule(std::string_view text) {
  if (text.empty() || text == "none") return ModeRule::none;
  if (text == "setid") return ModeRule::setid;
  if (text == "world_writable_exec") return ModeRule::world_writable_exec;
  throw Error(ErrorCode::ValidationError, "unknown mode rule '" + std::string(text) + "'");
}

/// Cluster patterns see directory paths without their trailing '/'.
inline std::string_view match_target(std::string_view path) {
  if (path.size() > 1 && path.back() == '/') path.remove_suffix(1);
  return path;
}

// ---------------------------------------------------------------------------
// Clusters

class CompiledCluster {
 public:
  explicit CompiledCluster(ClusterDef def) : def_(std::move(def)) {
    if (def_.id.empty()) throw Error(ErrorCode::ValidationError, "cluster id must not be empty");
    pattern_ = compile(def_.path_pattern);
    if (!def_.exclude_pattern.empty()) exclude_ = compile(def_.exclude_pattern);
  }

  const ClusterDef& def() const { return def_; }

  /// Path, exclusion and mode tests; the flag mask is applied per entry.
  bool matches_record(const FileRecord& rec) const {
    const auto target = match_target(rec.path);
    if (!boost::regex_search(target.begin(), target.end(), pattern_)) return false;
    if (exclude_ && boost::regex_search(target.begin(), target.end(), *exclude_)) return false;
    switch (def_.mode_rule) {
      case ModeRule::setid: return mode_is_setid(rec.mode);
      case ModeRule::world_writable_exec: return mode_is_weak(rec.mode);
      case ModeRule::none: break;
    }
    return true;
  }

  bool mask_ok(MacbFlags flags) const { return def_.flag_mask.empty() || def_.flag_mask.intersects(flags); }

  bool matches(const TimelineEntry& e, const FileRecord& rec) const { return mask_ok(e.flags) && matches_record(rec); }

 private:
  static boost::regex compile(const std::string& pattern) {
    try {
      return boost::regex(pattern, boost::regex::perl);
    } catch (const boost::regex_error& ex) {
      throw Error(ErrorCode::BadPattern, "invalid pattern '" + pattern + "': " + ex.what());
    }
  }

  ClusterDef def_;
  boost::regex pattern_;
  std::optional<boost::regex> exclude_;
};

class ClusterRegistry {
 public:
  static constexpr std::size_t kMaxClusters = 64;

  /// Adds a cluster, or replaces the definition with the same id in place.
  void upsert(ClusterDef def) {
    CompiledCluster compiled(std::move(def));
    auto it = position_.find(compiled.def().id);
    if (it != position_.end()) {
      clusters_[it->second] = std::move(compiled);
      return;
    }
    if (clusters_.size() >= kMaxClusters)
      throw Error(ErrorCode::ValidationError, "too many clusters (max 64)");
    position_[compiled.def().id] = clusters_.size();
    clusters_.push_back(std::move(compiled));
  }

  std::size_t size() const { return clusters_.size(); }
  const CompiledCluster& operator[](std::size_t i) const { return clusters_[i]; }
  auto begin() const { return clusters_.begin(); }
  auto end() const { return clusters_.end(); }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = position_.find(std::string(id));
    if (it == position_.end()) return std::nullopt;
    return it->second;
  }

  const CompiledCluster& at(std::string_view id) const {
    auto i = find(id);
    if (!i) throw Error(ErrorCode::UnknownCluster, "unknown cluster '" + std::string(id) + "'");
    return clusters_[*i];
  }

 private:
  std::vector<CompiledCluster> clusters_;
  std::map<std::string, std::size_t> position_;
};

inline std::vector<ClusterDef> builtin_cluster_defs() {
  const MacbFlags any;
  return {
      {"all_files", "All files", any, ".*", "", ModeRule::none, "Every entry; the neutral cluster."},
      {"user_ssh", "User SSH files", any, R"(^/(home/[^/]+|root)/\.ssh(/|$))", "", ModeRule::none,
       "SSH configuration and keys in users' home directories."},
      {"std_executables", "Standard executables", any, R"(^/(usr/(local/)?)?s?bin/)", "", ModeRule::none,
       "Files in the standard binary directories."},
      {"scripts_py", "Python scripts", any, R"(\.py$)", "", ModeRule::none, "Files with a .py extension."},
      {"scripts_sh", "Shell scripts", any, R"(\.sh$)", "", ModeRule::none, "Files with a .sh extension."},
      {"scripts_php", "PHP scripts", any, R"(\.php$)", "", ModeRule::none, "Files with a .php extension."},
      {"scripts_pl", "Perl scripts", any, R"(\.pl$)", "", ModeRule::none, "Files with a .pl extension."},
      {"cron", "Cron definitions", any, R"(^/(etc/cron|var/spool/cron))", "", ModeRule::none,
       "Default locations of cron jobs."},
      {"hidden_dotfiles", "Starts with '.'", any, R"((^|/)\.[^/.][^/]*$)", R"(^/(home/[^/]+|root)/)",
       ModeRule::none, "Hidden files and directories outside users' home directories."},
      {"suspicious_names", "Suspicious files", any, R"((^|/)[. ]{3,}(/|$))", "", ModeRule::none,
       "A path component made only of dots and spaces (at least three characters)."},
      {"sbit_executables", "Executables with sbit", any, ".*", "", ModeRule::setid,
       "Set-user-ID or set-group-ID permission bit."},
      {"weak_permissions", "Weak permissions", any, ".*", "", ModeRule::world_writable_exec,
       "Writable by others and executable by someone."},
      {"compilation_signs", "Compilation signs", MacbFlags{Flag::a},
       R"((\.(h|hpp)$|/(gcc|g\+\+|cc|clang|ld|as|make)$))", "", ModeRule::none,
       "Access to C/C++ headers and compiler tool chain executables."},
      {"unusual_commands", "Unusual commands", MacbFlags{Flag::a}, R"(/(wget|curl|shred|nc|netcat|nmap|tcpdump)$)",
       "", ModeRule::none, "Execution of commands seldom used by administrators."},
      {"system_config", "System configuration changes", MacbFlags{Flag::m, Flag::c},
       R"(^/etc/(init\.d/|passwd$|shadow$|group$|ld\.so(\.preload)?|ssh/))", "", ModeRule::none,
       "Changes to key system configuration files."},
  };
}

inline ClusterRegistry builtin_clusters() {
  ClusterRegistry reg;
  for (auto& def : builtin_cluster_defs()) reg.upsert(std::move(def));
  return reg;
}

/// Merges cluster definitions from JSON (an array, or {"clusters": [...]})
/// into `reg`. Known ids are replaced, new ids appended.
inline void load_cluster_config(std::istream& in, ClusterRegistry& reg) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ValidationError, std::string("cluster config is not valid JSON: ") + ex.what());
  }
  const auto& list = doc.is_object() ? doc.at("clusters") : doc;
  if (!list.is_array()) throw Error(ErrorCode::ValidationError, "cluster config must be a list");
  for (const auto& item : list) {
    try {
      ClusterDef def;
      def.id = item.at("id").get<std::string>();
      def.label = item.value("label", def.id);
      def.flag_mask = flags_from_letters(item.value("flags", ""));
      def.path_pattern = item.value("pattern", ".*");
      def.exclude_pattern = item.value("exclude", "");
      def.mode_rule = parse_mode_rule(item.value("mode_rule", "none"));
      def.description = item.value("description", "");
      reg.upsert(std::move(def));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::ValidationError, std::string("bad cluster entry: ") + ex.what());
    }
  }
}

/// Per-record bitmask of registry clusters whose record-level test passes.
using ClusterMembership = std::vector<std::uint64_t>;

inline ClusterMembership compute_membership(const TimelineIndex& index, const ClusterRegistry& reg) {
  ClusterMembership out(index.records().size(), 0);
  std::size_t r = 0;
  for (const auto& rec : index.records()) {
    std::uint64_t bits = 0;
    for (std::size_t c = 0; c < reg.size(); ++c)
      if (reg[c].matches_record(rec)) bits |= std::uint64_t{1} << c;
    out[r++] = bits;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Name search

using HighlightRange = std::pair<std::size_t, std::size_t>;  // [begin, end) byte offsets

inline char ascii_lower(char ch) { return (ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : ch; }

inline std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& ch : out) ch = ascii_lower(ch);
  return out;
}

/// Case-insensitive, left-to-right, non-overlapping substring matches.
inline std::vector<HighlightRange> highlight_ranges(std::string_view path, std::string_view query) {
  std::vector<HighlightRange> out;
  if (query.empty()) return out;
  const std::string hay = ascii_lower(path), needle = ascii_lower(query);
  std::size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    out.emplace_back(pos, pos + needle.size());
    pos += needle.size();
  }
  return out;
}

/// Plain text is a case-insensitive substring; a "re:" prefix switches to a
/// case-insensitive regular expression.
class NameMatcher {
 public:
  explicit NameMatcher(std::string_view query) {
    if (query.rfind("re:", 0) == 0) {
      try {
        regex_ = boost::regex(std::string(query.substr(3)), boost::regex::perl | boost::regex::icase);
      } catch (const boost::regex_error& ex) {
        throw Error(ErrorCode::BadPattern, "invalid name pattern: " + std::string(ex.what()));
      }
    } else {
      needle_ = ascii_lower(query);
    }
  }

  bool is_regex() const { return regex_.has_value(); }

  /// `lower_path` must be the ASCII-lowercased form of `path`.
  bool matches(std::string_view path, std::string_view lower_path) const {
    if (regex_) return boost::regex_search(path.begin(), path.end(), *regex_);
    return lower_path.find(needle_) != std::string_view::npos;
  }

  bool matches(std::string_view path) const { return matches(path, ascii_lower(path)); }

  std::vector<HighlightRange> highlight(std::string_view path) const {
    if (!regex_) return highlight_ranges(path, needle_);
    std::vector<HighlightRange> out;
    boost::cregex_iterator it(path.data(), path.data() + path.size(), *regex_), end;
    for (; it != end; ++it) {
      const auto begin = static_cast<std::size_t>((*it)[0].first - path.data());
      const auto len = static_cast<std::size_t>((*it)[0].length());
      if (len > 0) out.emplace_back(begin, begin + len);
    }
    return out;
  }

 private:
  std::string needle_;
  std::optional<boost::regex> regex_;
};

// ---------------------------------------------------------------------------
// Predicates

/// Conjunction of the flag, span, name and cluster tests of a FilterState.
class Predicate {
 public:
  MacbFlags flags_on = MacbFlags::all();
  std::vector<TimeSpan> spans;
  std::optional<NameMatcher> name;  // filter mode only
  std::optional<CompiledCluster> cluster;
  std::optional<std::size_t> cluster_slot;  // registry position of `cluster`

  bool flag_ok(MacbFlags flags) const { return flags_on.intersects(flags); }

  bool span_ok(Timestamp ts) const {
    if (spans.empty()) return true;
    for (const auto& s : spans)
      if (s.contains(ts)) return true;
    return false;
  }

  bool name_ok(const FileRecord& rec) const { return !name || name->matches(rec.path); }

  bool cluster_ok(const TimelineEntry& e, const FileRecord& rec) const { return !cluster || cluster->matches(e, rec); }

  bool operator()(const TimelineEntry& e, const FileRecord& rec) const {
    return flag_ok(e.flags) && span_ok(e.ts) && cluster_ok(e, rec) && name_ok(rec);
  }
};

inline Predicate compile_filter(const FilterState& fs, const ClusterRegistry& reg) {
  fs.validate();
  Predicate p;
  p.flags_on = fs.flags_on;
  p.spans = fs.spans;
  if (fs.has_name_filter()) p.name.emplace(*fs.name_query);
  if (fs.cluster_id) {
    auto slot = reg.find(*fs.cluster_id);
    if (!slot) throw Error(ErrorCode::UnknownCluster, "unknown cluster '" + *fs.cluster_id + "'");
    p.cluster = reg[*slot];
    p.cluster_slot = slot;
  }
  return p;
}

/// An index with its registry and precomputed cluster membership.
struct DatasetView {
  const TimelineIndex& index;
  const ClusterRegistry& registry;
  const ClusterMembership& membership;
};

/// A Predicate specialised to one dataset: record-level tests are evaluated
/// once per record up front, so the per-entry test is a few integer checks.
class BoundPredicate {
 public:
  BoundPredicate(const Predicate& pred, const DatasetView& view)
      : flags_(pred.flags_on.bits()), spans_(pred.spans), membership_(&view.membership) {
    if (pred.name) {
      const auto records = view.index.records();
      name_ok_.resize(records.size());
      for (std::size_t r = 0; r < records.size(); ++r)
        name_ok_[r] = pred.name->matches(records[r].path, view.index.lower_path(static_cast<std::uint32_t>(r)));
    }
    if (pred.cluster) {
      if (pred.cluster_slot && *pred.cluster_slot < view.registry.size() &&
          view.registry[*pred.cluster_slot].def().id == pred.cluster->def().id) {
        cluster_bit_ = std::uint64_t{1} << *pred.cluster_slot;
      } else {
        // cluster not from this registry: evaluate directly
        const auto records = view.index.records();
        own_membership_.resize(records.size());
        for (std::size_t r = 0; r < records.size(); ++r) own_membership_[r] = pred.cluster->matches_record(records[r]);
        cluster_bit_ = 1;
        membership_ = &own_membership_;
      }
      cluster_mask_ = pred.cluster->def().flag_mask.bits();
    }
  }

  bool operator()(const TimelineEntry& e) const {
    const std::uint8_t f = e.flags.bits();
    if ((f & flags_) == 0) return false;
    if (!spans_.empty()) {
      bool in = false;
      for (const auto& s : spans_)
        if (s.contains(e.ts)) {
          in = true;
          break;
        }
      if (!in) return false;
    }
    if (cluster_bit_) {
      if (((*membership_)[e.record_ref] & cluster_bit_) == 0) return false;
      if (cluster_mask_ && (f & cluster_mask_) == 0) return false;
    }
    if (!name_ok_.empty() && !name_ok_[e.record_ref]) return false;
    return true;
  }

 private:
  std::uint8_t flags_;
  std::vector<TimeSpan> spans_;
  const ClusterMembership* membership_;
  ClusterMembership own_membership_;
  std::uint64_t cluster_bit_ = 0;
  std::uint8_t cluster_mask_ = 0;
  std::vector<std::uint8_t> name_ok_;
};

inline BoundPredicate bind(const Predicate& pred, const DatasetView& view) { return BoundPredicate(pred, view); }

inline BoundPredicate compile_bound(const FilterState& fs, const DatasetView& view) {
  return BoundPredicate(compile_filter(fs, view.registry), view);
}

// ---------------------------------------------------------------------------
// Cluster counts

struct ClusterCount {
  std::string cluster_id;
  std::string label;
  std::uint64_t total = 0;
  std::uint64_t filtered = 0;

  bool operator==(const ClusterCount&) const = default;
};

/// total: cluster test alone; filtered: cluster test and the rest of `fs`.
inline std::vector<ClusterCount> cluster_counts(const DatasetView& view, const FilterState& fs) {
  FilterState rest = fs;
  rest.cluster_id.reset();
  const auto base = compile_bound(rest, view);
  const auto& reg = view.registry;

  std::vector<ClusterCount> out(reg.size());
  std::vector<std::uint8_t> masks(reg.size());
  for (std::size_t c = 0; c < reg.size(); ++c) {
    out[c].cluster_id = reg[c].def().id;
    out[c].label = reg[c].def().label;
    masks[c] = reg[c].def().flag_mask.bits();
  }
  for (const auto& e : view.index.entries()) {
    std::uint64_t bits = view.membership[e.record_ref];
    if (!bits) continue;
    const bool pass = base(e);
    const std::uint8_t f = e.flags.bits();
    while (bits) {
      const int c = __builtin_ctzll(bits);
      bits &= bits - 1;
      if (masks[c] && (masks[c] & f) == 0) continue;
      ++out[c].total;
      if (pass) ++out[c].filtered;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bursts

struct Burst {
  TimeSpan span;
  std::uint64_t count = 0;

  bool operator==(const Burst&) const = default;
};

inline constexpr Timestamp kDefaultBurstWindow = 60;
inline constexpr std::uint64_t kDefaultBurstMinCount = 50;

/// A window [t, t + window_s) anchored at a matching entry is dense when it
/// holds at least min_count matching entries. Overlapping dense windows are
/// merged; each burst spans its first to last entry and counts every
/// matching entry inside.
template <class Pred>
std::vector<Burst> detect_bursts(const TimelineIndex& index, Pred&& pred, Timestamp window_s,
                                 std::uint64_t min_count) {
  if (window_s < 1) throw Error(ErrorCode::ValidationError, "burst window must be >= 1 s");
  if (min_count < 2) throw Error(ErrorCode::ValidationError, "burst min_count must be >= 2");

  std::vector<Timestamp> ts;
  for (const auto& e : index.entries())
    if (pred(e)) ts.push_back(e.ts);

  std::vector<Burst> out;
  std::optional<TimeSpan> current;
  auto close = [&] {
    if (!current) return;
    const auto lo = std::lower_bound(ts.begin(), ts.end(), current->start);
    const auto hi = std::upper_bound(ts.begin(), ts.end(), current->end);
    out.push_back({*current, static_cast<std::uint64_t>(hi - lo)});
    current.reset();
  };

  std::size_t hi = 0;
  for (std::size_t lo = 0; lo < ts.size(); ++lo) {
    if (lo > 0 && ts[lo] == ts[lo - 1]) continue;  // same window as the first duplicate
    if (hi < lo) hi = lo;
    while (hi < ts.size() && ts[hi] < ts[lo] + window_s) ++hi;
    if (hi - lo < min_count) continue;
    const TimeSpan dense{ts[lo], ts[hi - 1]};
    if (current && dense.start <= current->end) {
      current->end = std::max(current->end, dense.end);
    } else {
      close();
      current = dense;
    }
  }
  close();
  return out;
}

}  // namespace timescope
