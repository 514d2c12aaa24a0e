#pragma once

// Body-format and CSV snapshot parsing, MACB expansion and dataset import.

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "timescope/core.hpp"
#include "timescope/timeline_index.hpp"

namespace timescope {

struct Skip {
  bool operator==(const Skip&) const = default;
};

struct ParseError {
  ErrorCode code = ErrorCode::MalformedLine;
  std::uint64_t line_no = 0;
  std::size_t field_count = 0;  // MalformedLine only
  std::string field;            // MalformedField only
  std::string message;
};

using LineResult = std::variant<FileRecord, Skip, ParseError>;

enum class InputFormat { body, csv };

namespace detail {

inline std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

inline bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

/// Replaces each invalid UTF-8 byte with U+FFFD.
inline std::string sanitize_utf8(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    const auto c = static_cast<unsigned char>(in[i]);
    std::size_t len = 0;
    if (c < 0x80) len = 1;
    else if (c >= 0xC2 && c <= 0xDF) len = 2;
    else if (c >= 0xE0 && c <= 0xEF) len = 3;
    else if (c >= 0xF0 && c <= 0xF4) len = 4;
    bool ok = len > 0 && i + len <= in.size();
    for (std::size_t k = 1; ok && k < len; ++k)
      ok = (static_cast<unsigned char>(in[i + k]) & 0xC0) == 0x80;
    if (ok && len == 3) {
      const auto c1 = static_cast<unsigned char>(in[i + 1]);
      ok = !(c == 0xE0 && c1 < 0xA0) && !(c == 0xED && c1 >= 0xA0);
    }
    if (ok && len == 4) {
      const auto c1 = static_cast<unsigned char>(in[i + 1]);
      ok = !(c == 0xF0 && c1 < 0x90) && !(c == 0xF4 && c1 >= 0x90);
    }
    if (ok) {
      out.append(in.substr(i, len));
      i += len;
    } else {
      out.append("\xEF\xBF\xBD");
      ++i;
    }
  }
  return out;
}

template <class T>
bool parse_integer(std::string_view text, T& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

inline ParseError field_error(std::uint64_t line_no, std::string field, std::string_view value) {
  ParseError e;
  e.code = ErrorCode::MalformedField;
  e.line_no = line_no;
  e.message = "line " + std::to_string(line_no) + ": field '" + field + "' is not a valid number: '" +
              std::string(value) + "'";
  e.field = std::move(field);
  return e;
}

/// Zero and negative values mean "unknown".
inline std::optional<Timestamp> to_timestamp(Timestamp raw) {
  if (raw <= 0) return std::nullopt;
  return raw;
}

struct RawFields {
  std::string_view path, inode, mode, uid, gid, size, atime, mtime, ctime, btime;
};

inline LineResult build_record(const RawFields& raw, std::uint64_t line_no, bool empty_is_missing) {
  FileRecord rec;
  if (raw.path.empty()) {
    auto e = field_error(line_no, "name", raw.path);
    e.message = "line " + std::to_string(line_no) + ": empty file name";
    return e;
  }
  rec.path = sanitize_utf8(raw.path);

  // NTFS-style inode fields look like "1234-128-3"; the leading number is the inode.
  std::string_view inode = raw.inode.substr(0, raw.inode.find('-'));
  if (!parse_integer(inode, rec.inode)) return field_error(line_no, "inode", raw.inode);

  rec.mode = std::string(raw.mode);
  if (rec.mode.size() >= 2 && rec.mode[1] == '/') rec.file_type = rec.mode[0];

  if (!parse_integer(raw.uid, rec.uid)) return field_error(line_no, "uid", raw.uid);
  if (!parse_integer(raw.gid, rec.gid)) return field_error(line_no, "gid", raw.gid);
  if (!parse_integer(raw.size, rec.size)) return field_error(line_no, "size", raw.size);

  const std::pair<std::string_view, std::optional<Timestamp>*> stamps[] = {
      {raw.atime, &rec.atime}, {raw.mtime, &rec.mtime}, {raw.ctime, &rec.ctime}, {raw.btime, &rec.btime}};
  const char* names[] = {"atime", "mtime", "ctime", "btime"};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto text = stamps[i].first;
    if (text.empty() && empty_is_missing) continue;
    Timestamp value = 0;
    if (!parse_integer(text, value)) return field_error(line_no, names[i], text);
    *stamps[i].second = to_timestamp(value);
  }

  if (rec.present_flags().empty()) {
    ParseError e;
    e.code = ErrorCode::NoTimestamps;
    e.line_no = line_no;
    e.message = "line " + std::to_string(line_no) + ": record has no timestamps";
    return e;
  }
  return rec;
}

}  // namespace detail

/// One body-format line: MD5|name|inode|mode|UID|GID|size|atime|mtime|ctime|crtime.
/// Pipes inside the name are kept: the first column and the last nine are fixed.
inline LineResult parse_body_line(std::string_view line, std::uint64_t line_no = 0) {
  line = detail::trim_cr(line);
  if (detail::is_blank(line) || line.front() == '#') return Skip{};

  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t bar = line.find('|', pos);
    if (bar == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, bar - pos));
    pos = bar + 1;
  }
  if (fields.size() < 11) {
    ParseError e;
    e.code = ErrorCode::MalformedLine;
    e.line_no = line_no;
    e.field_count = fields.size();
    e.message = "line " + std::to_string(line_no) + ": expected 11 fields, found " + std::to_string(fields.size());
    return e;
  }

  const std::size_t n = fields.size();
  const char* name_begin = fields[1].data();
  const char* name_end = fields[n - 10].data() + fields[n - 10].size();
  detail::RawFields raw;
  raw.path = std::string_view(name_begin, static_cast<std::size_t>(name_end - name_begin));
  raw.inode = fields[n - 9];
  raw.mode = fields[n - 8];
  raw.uid = fields[n - 7];
  raw.gid = fields[n - 6];
  raw.size = fields[n - 5];
  raw.atime = fields[n - 4];
  raw.mtime = fields[n - 3];
  raw.ctime = fields[n - 2];
  raw.btime = fields[n - 1];
  return detail::build_record(raw, line_no, false);
}

inline constexpr std::string_view kCsvHeader = "path,inode,mode,uid,gid,size,atime,mtime,ctime,btime";

/// Splits one RFC 4180 line. Returns false on an unterminated quote.
inline bool split_csv(std::string_view line, std::vector<std::string>& out) {
  out.clear();
  std::string cell;
  bool quoted = false;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell.push_back(ch);
      }
    } else if (ch == ',') {
      out.push_back(std::move(cell));
      cell.clear();
      quoted = false;
    } else if (ch == '"' && cell.empty() && !quoted) {
      in_quotes = quoted = true;
    } else {
      cell.push_back(ch);
    }
  }
  if (in_quotes) return false;
  out.push_back(std::move(cell));
  return true;
}

/// Column order of a CSV header; throws MalformedLine if a column is missing.
class CsvLayout {
 public:
  explicit CsvLayout(std::string_view header_line) {
    std::vector<std::string> cells;
    split_csv(detail::trim_cr(header_line), cells);
    std::map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < cells.size(); ++i) where[cells[i]] = i;
    const char* names[] = {"path", "inode", "mode", "uid", "gid", "size", "atime", "mtime", "ctime", "btime"};
    for (std::size_t i = 0; i < 10; ++i) {
      auto it = where.find(names[i]);
      if (it == where.end())
        throw Error(ErrorCode::MalformedLine, std::string("CSV header lacks column '") + names[i] + "'");
      column_[i] = it->second;
    }
    width_ = cells.size();
  }

  LineResult parse(std::string_view line, std::uint64_t line_no) const {
    line = detail::trim_cr(line);
    if (detail::is_blank(line) || line.front() == '#') return Skip{};
    std::vector<std::string> cells;
    if (!split_csv(line, cells) || cells.size() != width_) {
      ParseError e;
      e.code = ErrorCode::MalformedLine;
      e.line_no = line_no;
      e.field_count = cells.size();
      e.message = "line " + std::to_string(line_no) + ": expected " + std::to_string(width_) + " CSV cells";
      return e;
    }
    detail::RawFields raw{cells[column_[0]], cells[column_[1]], cells[column_[2]], cells[column_[3]],
                          cells[column_[4]], cells[column_[5]], cells[column_[6]], cells[column_[7]],
                          cells[column_[8]], cells[column_[9]]};
    return detail::build_record(raw, line_no, true);
  }

 private:
  std::array<std::size_t, 10> column_{};
  std::size_t width_ = 0;
};

struct ExpandedEvent {
  Timestamp ts = 0;
  MacbFlags flags;
  bool operator==(const ExpandedEvent&) const = default;
};

/// One event per distinct present timestamp, ascending; each event carries
/// the flags whose timestamp equals it.
inline std::vector<ExpandedEvent> expand_record(const FileRecord& rec) {
  std::vector<ExpandedEvent> out;
  out.reserve(4);
  for (Flag f : kAllFlags) {
    const auto& ts = rec.timestamp(f);
    if (!ts) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const ExpandedEvent& e) { return e.ts == *ts; });
    if (it != out.end()) it->flags.set(f);
    else out.push_back({*ts, MacbFlags{f}});
  }
  std::sort(out.begin(), out.end(), [](const ExpandedEvent& l, const ExpandedEvent& r) { return l.ts < r.ts; });
  return out;
}

struct ImportStats {
  std::uint64_t lines_read = 0;
  std::uint64_t records_parsed = 0;
  std::uint64_t lines_rejected = 0;
  std::uint64_t lines_skipped = 0;  // comments, blank lines, CSV header
  std::uint64_t entries_emitted = 0;
  std::optional<Timestamp> min_ts;
  std::optional<Timestamp> max_ts;

  bool operator==(const ImportStats&) const = default;
};

struct ImportOptions {
  std::string name;
  std::string source;
  std::string dataset_id;
  InputFormat format = InputFormat::body;
  Timestamp imported_at = 0;
  std::size_t max_logged_rejects = 1000;
  std::function<void(std::uint64_t lines_read)> progress;
};

struct ImportResult {
  Dataset dataset;
  ImportStats stats;
  std::vector<FileRecord> records;
  std::vector<TimelineEntry> entries;  // canonical order
  std::vector<ParseError> rejects;     // first max_logged_rejects rejected lines
};

/// Streams the source through the line parser and record expansion.
/// Malformed lines are counted and logged, never fatal.
inline ImportResult import_dataset(std::istream& in, const ImportOptions& opts) {
  ImportResult out;
  auto& stats = out.stats;
  std::string line;
  std::optional<CsvLayout> csv;

  while (std::getline(in, line)) {
    ++stats.lines_read;
    if (opts.progress && stats.lines_read % 65536 == 0) opts.progress(stats.lines_read);

    LineResult result;
    if (opts.format == InputFormat::csv && !csv) {
      if (detail::is_blank(detail::trim_cr(line)) || line.front() == '#') {
        ++stats.lines_skipped;
        continue;
      }
      csv.emplace(line);
      ++stats.lines_skipped;
      continue;
    }
    result = csv ? csv->parse(line, stats.lines_read) : parse_body_line(line, stats.lines_read);

    if (std::holds_alternative<Skip>(result)) {
      ++stats.lines_skipped;
    } else if (auto* err = std::get_if<ParseError>(&result)) {
      ++stats.lines_rejected;
      if (out.rejects.size() < opts.max_logged_rejects) out.rejects.push_back(std::move(*err));
    } else {
      auto& rec = std::get<FileRecord>(result);
      const auto ref = static_cast<std::uint32_t>(out.records.size());
      for (const auto& ev : expand_record(rec)) {
        out.entries.push_back({0, ref, ev.ts, ev.flags});
        stats.min_ts = stats.min_ts ? std::min(*stats.min_ts, ev.ts) : ev.ts;
        stats.max_ts = stats.max_ts ? std::max(*stats.max_ts, ev.ts) : ev.ts;
      }
      out.records.push_back(std::move(rec));
      ++stats.records_parsed;
    }
  }
  if (in.bad()) throw Error(ErrorCode::IoError, "read error while importing '" + opts.source + "'");
  if (opts.progress) opts.progress(stats.lines_read);
  if (out.records.empty()) throw Error(ErrorCode::EmptyDataset, "no valid records in '" + opts.source + "'");

  stats.entries_emitted = out.entries.size();
  sort_canonical(out.records, out.entries);

  out.dataset.dataset_id = opts.dataset_id;
  out.dataset.name = opts.name;
  out.dataset.source = opts.source;
  out.dataset.record_count = stats.records_parsed;
  out.dataset.entry_count = stats.entries_emitted;
  out.dataset.rejected_lines = stats.lines_rejected;
  out.dataset.imported_at = opts.imported_at;
  return out;
}

inline ImportResult import_file(const std::string& path, ImportOptions opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  if (opts.source.empty()) opts.source = path;
  return import_dataset(in, opts);
}

/// "body" / "csv"; anything else is a validation error.
inline InputFormat parse_input_format(std::string_view text) {
  if (text == "body") return InputFormat::body;
  if (text == "csv") return InputFormat::csv;
  throw Error(ErrorCode::ValidationError, "unknown input format '" + std::string(text) + "'");
}

/// Guesses the format from the first non-comment line.
inline InputFormat sniff_format(std::string_view head) {
  std::size_t pos = 0;
  while (pos < head.size()) {
    std::size_t nl = head.find('\n', pos);
    std::string_view line = head.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    line = detail::trim_cr(line);
    if (!detail::is_blank(line) && line.front() != '#')
      return line.rfind("path,", 0) == 0 ? InputFormat::csv : InputFormat::body;
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return InputFormat::body;
}

}  // namespace timescope
