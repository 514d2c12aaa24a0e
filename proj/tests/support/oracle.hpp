#pragma once

// Brute-force reference implementations used by the property tests. Nothing
// here calls into the engine's algorithms: regexes go through std::regex,
// calendar math through gmtime/timegm, and every query is a linear scan.

#include <ctime>
#include <map>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "timescope/core.hpp"

namespace oracle {

using timescope::FileRecord;
using timescope::Flag;
using timescope::MacbFlags;
using timescope::Timestamp;

inline std::vector<std::pair<Timestamp, std::string>> expand(const FileRecord& r) {
  std::map<Timestamp, std::string> by_ts;
  const std::pair<const std::optional<Timestamp>*, int> stamps[] = {
      {&r.mtime, 0}, {&r.atime, 1}, {&r.ctime, 2}, {&r.btime, 3}};
  for (auto [ts, slot] : stamps) {
    if (!*ts) continue;
    auto& text = by_ts.try_emplace(**ts, "....").first->second;
    text[slot] = "macb"[slot];
  }
  return {by_ts.begin(), by_ts.end()};
}

inline std::vector<std::string> components(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : path) {
    if (ch == '/') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// Component-wise order, raw bytes as a tie breaker.
inline bool path_before(const std::string& l, const std::string& r) {
  const auto lc = components(l), rc = components(r);
  if (lc != rc) return lc < rc;
  return l < r;
}

struct Entry {
  Timestamp ts;
  std::string flags;  // "m.c." style
  std::size_t record;
};

/// All entries of all records in canonical order.
inline std::vector<Entry> timeline(const std::vector<FileRecord>& records) {
  std::vector<Entry> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (auto& [ts, flags] : expand(records[i])) out.push_back({ts, flags, i});
  std::sort(out.begin(), out.end(), [&](const Entry& l, const Entry& r) {
    if (l.ts != r.ts) return l.ts < r.ts;
    const auto& lp = records[l.record].path;
    const auto& rp = records[r.record].path;
    if (lp != rp) return path_before(lp, rp);
    if (l.flags != r.flags) return l.flags < r.flags;
    return l.record < r.record;
  });
  return out;
}

/// Canonical positions listed in path order (stable within a path).
inline std::vector<std::size_t> path_order(const std::vector<Entry>& tl, const std::vector<FileRecord>& records) {
  std::vector<std::size_t> order(tl.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    const auto& lp = records[tl[l].record].path;
    const auto& rp = records[tl[r].record].path;
    return lp != rp && path_before(lp, rp);
  });
  return order;
}

inline bool flags_overlap(const std::string& text, MacbFlags set) {
  for (int i = 0; i < 4; ++i)
    if (text[i] != '.' && set.has(timescope::kAllFlags[i])) return true;
  return false;
}

// -- clusters -------------------------------------------------------------------

inline std::string strip_slash(std::string p) {
  if (p.size() > 1 && p.back() == '/') p.pop_back();
  return p;
}

inline std::string perm9(const std::string& mode) {
  std::string m = mode.substr(mode.find('/') == std::string::npos ? 0 : mode.find('/') + 1);
  return m.size() >= 9 ? m.substr(m.size() - 9) : std::string();
}

inline bool valid_perm(const std::string& p) {
  if (p.size() != 9) return false;
  const std::string ok[9] = {"r-", "w-", "xsS-", "r-", "w-", "xsS-", "r-", "w-", "xtT-"};
  for (int i = 0; i < 9; ++i)
    if (ok[i].find(p[i]) == std::string::npos) return false;
  return true;
}

struct Cluster {
  std::string id;
  std::regex pattern;
  std::optional<std::regex> exclude;
  timescope::ModeRule rule;
  MacbFlags mask;

  explicit Cluster(const timescope::ClusterDef& d)
      : id(d.id), pattern(d.path_pattern), rule(d.mode_rule), mask(d.flag_mask) {
    if (!d.exclude_pattern.empty()) exclude.emplace(d.exclude_pattern);
  }

  bool record_ok(const FileRecord& r) const {
    const auto target = strip_slash(r.path);
    if (!std::regex_search(target, pattern)) return false;
    if (exclude && std::regex_search(target, *exclude)) return false;
    const auto p = perm9(r.mode);
    if (rule == timescope::ModeRule::setid)
      return valid_perm(p) && (p[2] == 's' || p[2] == 'S' || p[5] == 's' || p[5] == 'S');
    if (rule == timescope::ModeRule::world_writable_exec) {
      if (!valid_perm(p) || p[7] != 'w') return false;
      return p[2] == 'x' || p[2] == 's' || p[5] == 'x' || p[5] == 's' || p[8] == 'x' || p[8] == 't';
    }
    return true;
  }

  bool entry_ok(const Entry& e, const FileRecord& r) const {
    return (mask.empty() || flags_overlap(e.flags, mask)) && record_ok(r);
  }
};

inline std::vector<Cluster> clusters(const std::vector<timescope::ClusterDef>& defs) {
  std::vector<Cluster> out;
  for (const auto& d : defs) out.emplace_back(d);
  return out;
}

// -- filters --------------------------------------------------------------------

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool name_hit(const std::string& query, const std::string& path) {
  if (query.rfind("re:", 0) == 0)
    return std::regex_search(path, std::regex(query.substr(3), std::regex::ECMAScript | std::regex::icase));
  return lower(path).find(lower(query)) != std::string::npos;
}

/// Filter test without the cluster part.
inline bool base_match(const timescope::FilterState& fs, const Entry& e, const FileRecord& r) {
  if (!flags_overlap(e.flags, fs.flags_on)) return false;
  if (!fs.spans.empty()) {
    bool in = false;
    for (const auto& s : fs.spans) in = in || (e.ts >= s.start && e.ts <= s.end);
    if (!in) return false;
  }
  if (fs.name_mode == timescope::NameMode::filter && fs.name_query && !fs.name_query->empty() &&
      !name_hit(*fs.name_query, r.path))
    return false;
  return true;
}

inline bool match(const timescope::FilterState& fs, const std::vector<Cluster>& cl, const Entry& e,
                  const FileRecord& r) {
  if (!base_match(fs, e, r)) return false;
  if (!fs.cluster_id) return true;
  for (const auto& c : cl)
    if (c.id == *fs.cluster_id) return c.entry_ok(e, r);
  throw std::runtime_error("oracle: unknown cluster");
}

struct PageRow {
  std::size_t position;  // canonical position (= entry id)
  bool context_only;
};

/// Rows of the offset/limit window; non-matching bookmarks join the window
/// holding the next match after them (the last match if none follows).
inline std::pair<std::vector<PageRow>, std::size_t> page(const std::vector<Entry>& tl,
                                                         const std::vector<std::size_t>& order,
                                                         const std::vector<bool>& matches, std::size_t offset,
                                                         std::size_t limit, const std::vector<bool>& bookmarked) {
  std::vector<std::size_t> match_rank(order.size(), 0);  // matches strictly before each ordering slot
  std::size_t total = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    match_rank[k] = total;
    if (matches[order[k]]) ++total;
  }
  std::vector<PageRow> rows;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t id = order[k];
    if (matches[id]) {
      if (match_rank[k] >= offset && match_rank[k] < offset + limit) rows.push_back({id, false});
    } else if (bookmarked[id]) {
      bool show;
      if (total == 0) show = offset == 0;
      else {
        const std::size_t anchor = std::min(match_rank[k], total - 1);
        show = anchor >= offset && anchor < offset + limit;
      }
      if (show) rows.push_back({id, true});
    }
  }
  (void)tl;
  return {rows, total};
}

// -- calendar -------------------------------------------------------------------

enum class Unit { year, month, day, hour, minute };

inline std::tm to_tm(Timestamp ts) {
  std::time_t t = static_cast<std::time_t>(ts);
  std::tm out{};
  gmtime_r(&t, &out);
  return out;
}

inline Timestamp floor_to(Timestamp ts, Unit u) {
  std::tm t = to_tm(ts);
  t.tm_sec = 0;
  if (u != Unit::minute) t.tm_min = 0;
  if (u == Unit::day || u == Unit::month || u == Unit::year) t.tm_hour = 0;
  if (u == Unit::month || u == Unit::year) t.tm_mday = 1;
  if (u == Unit::year) t.tm_mon = 0;
  return static_cast<Timestamp>(timegm(&t));
}

inline Timestamp add_one(Timestamp start, Unit u) {
  std::tm t = to_tm(start);
  switch (u) {
    case Unit::year: t.tm_year += 1; break;
    case Unit::month: t.tm_mon += 1; break;
    case Unit::day: t.tm_mday += 1; break;
    case Unit::hour: t.tm_hour += 1; break;
    case Unit::minute: t.tm_min += 1; break;
  }
  return static_cast<Timestamp>(timegm(&t));
}

inline std::string path_prefix(const std::string& path, unsigned depth) {
  const auto comps = components(path);
  std::string out;
  for (unsigned i = 0; i < depth && i < comps.size(); ++i) out += "/" + comps[i];
  return out.empty() ? "/" : out;
}

// -- random corpora -----------------------------------------------------------------

/// Small vocabularies so that prefixes, clusters and timestamps collide often.
inline std::vector<FileRecord> random_records(std::mt19937_64& rng, std::size_t n, Timestamp lo, Timestamp hi) {
  static const std::vector<std::string> dirs = {
      "/etc",       "/etc/ssh",        "/etc/init.d", "/etc/cron.d", "/usr/bin",          "/usr/local/bin",
      "/bin",       "/usr/include",    "/var/tmp",    "/var/tmp/...", "/home/alice/.ssh", "/home/bob",
      "/root/.ssh", "/tmp",            "/var/lib",    "/srv/www",    "/usr/share/doc/Pkg", "/var/spool/cron"};
  static const std::vector<std::string> names = {
      "passwd", "shadow", "group", "ld.so.preload", "sshd_config", "gcc", "ld",       "as",     "wget",
      "curl",   "nc",     "run.sh", "tool.py",      "index.php",   "x.pl", "stdio.h", "vec.hpp", ".hidden",
      "README", "Data.TXT", "a|b",  "notes.txt",    "authorized_keys", "..."};
  static const std::vector<std::string> modes = {"r/rrw-r--r--", "r/rrwxr-xr-x", "r/rrwsr-xr-x", "d/drwxrwxrwt",
                                                 "r/rrwxr-sr-x", "d/drwxr-xr-x", "r/rrwxrwxrwx", "-/----------",
                                                 "r/rrw-rw-rw-", "r/rrwSr--r--"};
  std::uniform_int_distribution<std::size_t> pick_dir(0, dirs.size() - 1), pick_name(0, names.size() - 1),
      pick_mode(0, modes.size() - 1);
  std::uniform_int_distribution<Timestamp> pick_ts(lo, hi);
  std::uniform_int_distribution<int> coin(0, 99);

  std::vector<FileRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    FileRecord r;
    r.path = dirs[pick_dir(rng)] + "/" + names[pick_name(rng)];
    if (coin(rng) < 5) r.path += "/";
    r.inode = i + 1;
    r.mode = modes[pick_mode(rng)];
    r.file_type = r.mode[0];
    r.uid = static_cast<std::uint64_t>(coin(rng) % 3) * 1000;
    r.gid = r.uid;
    r.size = static_cast<std::uint64_t>(coin(rng)) * 17;
    const Timestamp base = pick_ts(rng);
    auto stamp = [&]() -> std::optional<Timestamp> {
      const int c = coin(rng);
      if (c < 15) return std::nullopt;
      if (c < 55) return base;  // shared timestamps produce grouped flags
      return pick_ts(rng);
    };
    r.mtime = stamp();
    r.atime = stamp();
    r.ctime = stamp();
    r.btime = stamp();
    if (!r.mtime && !r.atime && !r.ctime && !r.btime) r.mtime = base;
    out.push_back(std::move(r));
  }
  return out;
}

/// A random filter state over the names and clusters above.
inline timescope::FilterState random_filter(std::mt19937_64& rng, Timestamp lo, Timestamp hi,
                                            const std::vector<std::string>& cluster_ids) {
  static const std::vector<std::string> queries = {"ssh", "BIN", "re:\\.(sh|py)$", "tmp/...", "re:^/etc/[a-p]",
                                                   "data", "|", "zzz-none", "re:(gcc|ld)$", "."};
  std::uniform_int_distribution<int> coin(0, 99);
  std::uniform_int_distribution<Timestamp> pick_ts(lo, hi);
  timescope::FilterState fs;
  do fs.flags_on = MacbFlags::from_bits(static_cast<std::uint8_t>(coin(rng) % 16));
  while (coin(rng) < 30 && fs.flags_on.empty());
  if (coin(rng) < 40) fs.flags_on = MacbFlags::all();
  if (coin(rng) < 50) {
    fs.name_query = queries[static_cast<std::size_t>(coin(rng)) % queries.size()];
    fs.name_mode = coin(rng) < 70 ? timescope::NameMode::filter : timescope::NameMode::highlight;
  }
  const int nspans = coin(rng) < 50 ? 0 : 1 + coin(rng) % 3;
  for (int i = 0; i < nspans; ++i) {
    Timestamp a = pick_ts(rng), b = pick_ts(rng);
    if (a > b) std::swap(a, b);
    if (std::find(fs.spans.begin(), fs.spans.end(), timescope::TimeSpan{a, b}) == fs.spans.end())
      fs.spans.push_back({a, b});
  }
  if (coin(rng) < 50) fs.cluster_id = cluster_ids[static_cast<std::size_t>(coin(rng)) % cluster_ids.size()];
  fs.sort = coin(rng) < 70 ? timescope::SortOrder::time : timescope::SortOrder::path;
  fs.limit = static_cast<std::uint64_t>(1 + coin(rng) * 3);
  fs.offset = coin(rng) < 40 ? 0 : static_cast<std::uint64_t>(coin(rng)) * 40;
  return fs;
}

}  // namespace oracle
