#pragma once

// Shared domain types for the timeline engine. Everything here is a plain
// value type; nothing performs I/O.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace timescope {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

enum class ErrorCode {
  InvalidFlags,
  MalformedLine,
  MalformedField,
  NoTimestamps,
  IoError,
  EmptyDataset,
  UnknownCluster,
  BadPattern,
  ContractViolation,
  NotFound,
  ValidationError,
  PersistError,
  MismatchError,
  ScaleTooSmall,
  BadRequest,
  PayloadTooLarge,
};

inline std::string_view error_token(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidFlags: return "invalid_flags";
    case ErrorCode::MalformedLine: return "malformed_line";
    case ErrorCode::MalformedField: return "malformed_field";
    case ErrorCode::NoTimestamps: return "no_timestamps";
    case ErrorCode::IoError: return "io_error";
    case ErrorCode::EmptyDataset: return "empty_dataset";
    case ErrorCode::UnknownCluster: return "unknown_cluster";
    case ErrorCode::BadPattern: return "bad_pattern";
    case ErrorCode::ContractViolation: return "contract_violation";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::ValidationError: return "validation_error";
    case ErrorCode::PersistError: return "persist_error";
    case ErrorCode::MismatchError: return "mismatch_error";
    case ErrorCode::ScaleTooSmall: return "scale_too_small";
    case ErrorCode::BadRequest: return "bad_request";
    case ErrorCode::PayloadTooLarge: return "payload_too_large";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// MACB flags

enum class Flag : std::uint8_t { m = 1, a = 2, c = 4, b = 8 };

inline constexpr std::array<Flag, 4> kAllFlags{Flag::m, Flag::a, Flag::c, Flag::b};

inline constexpr char flag_letter(Flag f) {
  switch (f) {
    case Flag::m: return 'm';
    case Flag::a: return 'a';
    case Flag::c: return 'c';
    case Flag::b: return 'b';
  }
  return '?';
}

/// Subset of {m, a, c, b}. The empty set is representable (masks and
/// filter toggles use it) but is not a valid timeline entry type.
class MacbFlags {
 public:
  constexpr MacbFlags() = default;
  constexpr MacbFlags(std::initializer_list<Flag> flags) {
    for (Flag f : flags) bits_ |= static_cast<std::uint8_t>(f);
  }

  static constexpr MacbFlags from_bits(std::uint8_t bits) {
    MacbFlags out;
    out.bits_ = bits & 0x0F;
    return out;
  }
  static constexpr MacbFlags all() { return from_bits(0x0F); }
  static constexpr MacbFlags none() { return {}; }

  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool has(Flag f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  constexpr bool intersects(MacbFlags other) const { return (bits_ & other.bits_) != 0; }
  constexpr int count() const {
    return ((bits_ >> 0) & 1) + ((bits_ >> 1) & 1) + ((bits_ >> 2) & 1) + ((bits_ >> 3) & 1);
  }

  constexpr MacbFlags& set(Flag f) {
    bits_ |= static_cast<std::uint8_t>(f);
    return *this;
  }
  constexpr MacbFlags operator|(MacbFlags o) const { return from_bits(bits_ | o.bits_); }
  constexpr MacbFlags operator&(MacbFlags o) const { return from_bits(bits_ & o.bits_); }
  constexpr bool operator==(const MacbFlags&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

/// Position-fixed "macb" rendering with '.' for unset positions.
inline std::string render_flags(MacbFlags flags) {
  if (flags.empty()) throw Error(ErrorCode::InvalidFlags, "flag set is empty");
  std::string out(4, '.');
  for (std::size_t i = 0; i < kAllFlags.size(); ++i)
    if (flags.has(kAllFlags[i])) out[i] = flag_letter(kAllFlags[i]);
  return out;
}

/// Inverse of render_flags.
inline MacbFlags parse_flags(std::string_view text) {
  if (text.size() != 4) throw Error(ErrorCode::InvalidFlags, "flag text must be 4 characters");
  MacbFlags out;
  for (std::size_t i = 0; i < 4; ++i) {
    if (text[i] == flag_letter(kAllFlags[i])) out.set(kAllFlags[i]);
    else if (text[i] != '.') throw Error(ErrorCode::InvalidFlags, "bad flag text '" + std::string(text) + "'");
  }
  if (out.empty()) throw Error(ErrorCode::InvalidFlags, "flag set is empty");
  return out;
}

/// Letters in any order ("ma", "cb"); the empty string is the empty set.
inline MacbFlags flags_from_letters(std::string_view letters) {
  MacbFlags out;
  for (char ch : letters) {
    switch (ch) {
      case 'm': out.set(Flag::m); break;
      case 'a': out.set(Flag::a); break;
      case 'c': out.set(Flag::c); break;
      case 'b': out.set(Flag::b); break;
      default: throw Error(ErrorCode::InvalidFlags, "unknown flag letter '" + std::string(1, ch) + "'");
    }
  }
  return out;
}

inline std::string flags_to_letters(MacbFlags flags) {
  std::string out;
  for (Flag f : kAllFlags)
    if (flags.has(f)) out.push_back(flag_letter(f));
  return out;
}

namespace detail {
// Rank of each 4-bit flag set in ascending order of its rendered text.
inline constexpr std::array<std::uint8_t, 16> kFlagTextRank = [] {
  std::array<std::uint8_t, 16> rank{};
  std::array<std::array<char, 4>, 16> text{};
  constexpr char letters[4] = {'m', 'a', 'c', 'b'};
  for (int bits = 0; bits < 16; ++bits)
    for (int i = 0; i < 4; ++i) text[bits][i] = (bits >> i) & 1 ? letters[i] : '.';
  for (int bits = 0; bits < 16; ++bits) {
    std::uint8_t r = 0;
    for (int other = 0; other < 16; ++other)
      if (text[other] < text[bits]) ++r;
    rank[bits] = r;
  }
  return rank;
}();
}  // namespace detail

inline constexpr std::uint8_t flag_text_rank(MacbFlags flags) {
  return detail::kFlagTextRank[flags.bits()];
}

// ---------------------------------------------------------------------------
// Paths

/// Path ordering used everywhere a path is sorted: byte-wise, except that
/// '/' sorts below every other byte, so a directory's subtree stays
/// contiguous ("/var/log/x" < "/var/log-old").
inline int compare_paths(std::string_view lhs, std::string_view rhs) {
  const std::size_t n = std::min(lhs.size(), rhs.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = static_cast<unsigned char>(lhs[i]);
    const auto r = static_cast<unsigned char>(rhs[i]);
    if (l == r) continue;
    if (l == '/') return -1;
    if (r == '/') return 1;
    return l < r ? -1 : 1;
  }
  if (lhs.size() == rhs.size()) return 0;
  return lhs.size() < rhs.size() ? -1 : 1;
}

inline bool path_less(std::string_view lhs, std::string_view rhs) {
  return compare_paths(lhs, rhs) < 0;
}

/// Non-empty '/'-separated components.
inline std::vector<std::string_view> path_components(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    std::size_t next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    if (next > pos) out.push_back(path.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records and entries

struct FileRecord {
  std::string path;
  std::uint64_t inode = 0;
  std::string mode;       // verbatim, e.g. "r/rrwxr-xr-x"
  char file_type = '-';   // name-type prefix of mode ('r', 'd', 'l', ...), '-' if absent
  std::uint64_t uid = 0;
  std::uint64_t gid = 0;
  std::uint64_t size = 0;
  std::optional<Timestamp> mtime;
  std::optional<Timestamp> atime;
  std::optional<Timestamp> ctime;
  std::optional<Timestamp> btime;

  const std::optional<Timestamp>& timestamp(Flag f) const {
    switch (f) {
      case Flag::m: return mtime;
      case Flag::a: return atime;
      case Flag::c: return ctime;
      case Flag::b: break;
    }
    return btime;
  }

  MacbFlags present_flags() const {
    MacbFlags out;
    for (Flag f : kAllFlags)
      if (timestamp(f)) out.set(f);
    return out;
  }

  bool operator==(const FileRecord&) const = default;
};

struct TimelineEntry {
  std::uint64_t entry_id = 0;   // position in canonical order
  std::uint32_t record_ref = 0; // index into the dataset's record table
  Timestamp ts = 0;
  MacbFlags flags;

  bool operator==(const TimelineEntry&) const = default;
};

/// Inclusive on both ends.
struct TimeSpan {
  Timestamp start = 0;
  Timestamp end = 0;

  static TimeSpan make(Timestamp start, Timestamp end) {
    if (start > end) throw Error(ErrorCode::ValidationError, "time span start is after end");
    return {start, end};
  }

  constexpr bool contains(Timestamp ts) const { return ts >= start && ts <= end; }
  bool operator==(const TimeSpan&) const = default;
};

enum class ModeRule { none, setid, world_writable_exec };

struct ClusterDef {
  std::string id;
  std::string label;
  MacbFlags flag_mask;          // empty = any flag
  std::string path_pattern;     // searched anywhere in the path; anchors are explicit
  std::string exclude_pattern;  // optional; a match removes the path from the cluster
  ModeRule mode_rule = ModeRule::none;
  std::string description;
};

enum class NameMode { highlight, filter };
enum class SortOrder { time, path };

struct FilterState {
  MacbFlags flags_on = MacbFlags::all();
  std::optional<std::string> name_query;
  NameMode name_mode = NameMode::highlight;
  std::vector<TimeSpan> spans;
  std::optional<std::string> cluster_id;
  SortOrder sort = SortOrder::time;
  std::uint64_t offset = 0;
  std::uint64_t limit = 100;

  void validate() const {
    if (limit < 1) throw Error(ErrorCode::ValidationError, "limit must be positive");
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (spans[i].start > spans[i].end)
        throw Error(ErrorCode::ValidationError, "time span start is after end");
      for (std::size_t j = i + 1; j < spans.size(); ++j)
        if (spans[i] == spans[j]) throw Error(ErrorCode::ValidationError, "duplicate time span");
    }
  }

  bool has_name_filter() const {
    return name_mode == NameMode::filter && name_query && !name_query->empty();
  }

  bool operator==(const FilterState&) const = default;
};

struct Bookmark {
  std::string bookmark_id;
  std::uint64_t entry_id = 0;
  Timestamp created_at = 0;
  std::optional<std::string> color;
  std::optional<std::string> note;

  bool operator==(const Bookmark&) const = default;
};

struct Dataset {
  std::string dataset_id;
  std::string name;
  std::string source;
  std::uint64_t record_count = 0;
  std::uint64_t entry_count = 0;
  std::uint64_t rejected_lines = 0;
  Timestamp imported_at = 0;

  bool operator==(const Dataset&) const = default;
};

}  // namespace timescope
