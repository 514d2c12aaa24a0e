#pragma once

// Synthetic body-format corpora with a planted intrusion, plus a manifest
// of what was planted and how many entries each cluster must report.
//
// Every generated path comes from a template whose cluster memberships are
// written down by hand, so manifest totals do not depend on the engine's
// cluster patterns.

#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "timescope/calendar.hpp"
#include "timescope/engine.hpp"
#include "timescope/json_io.hpp"

namespace timescope {

struct PlantedArtifact {
  std::string artifact_id;
  std::string step;  // S1..S6
  std::string description;
  std::vector<std::string> paths;
  std::vector<std::string> expected_clusters;
  TimeSpan time_range;
};

struct BurstExpectation {
  std::string artifact_id;
  Timestamp window = kDefaultBurstWindow;
  std::uint64_t min_count = kDefaultBurstMinCount;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::uint64_t scale = 0;
  std::string profile = "default";
  std::uint64_t record_count = 0;
  std::uint64_t entry_count = 0;
  TimeSpan ts_bounds;
  std::map<std::string, std::uint64_t> totals;  // cluster id -> expected entry count
  std::vector<PlantedArtifact> planted;
  std::vector<BurstExpectation> bursts;

  const PlantedArtifact* artifact(std::string_view id) const {
    for (const auto& a : planted)
      if (a.artifact_id == id) return &a;
    return nullptr;
  }
};

struct Scenario {
  std::string body;
  Manifest manifest;
};

inline json to_json(const Manifest& m) {
  json planted = json::array(), bursts = json::array();
  for (const auto& a : m.planted)
    planted.push_back(json{{"artifact_id", a.artifact_id},
                           {"step", a.step},
                           {"description", a.description},
                           {"paths", a.paths},
                           {"expected_clusters", a.expected_clusters},
                           {"time_range", span_to_json(a.time_range)}});
  for (const auto& b : m.bursts)
    bursts.push_back(json{{"artifact_id", b.artifact_id}, {"window", b.window}, {"min_count", b.min_count}});
  return json{{"seed", m.seed},
              {"scale", m.scale},
              {"profile", m.profile},
              {"record_count", m.record_count},
              {"entry_count", m.entry_count},
              {"ts_bounds", span_to_json(m.ts_bounds)},
              {"totals", m.totals},
              {"planted", planted},
              {"bursts", bursts}};
}

inline Manifest manifest_from_json(const json& j) {
  return decode("manifest", [&] {
    Manifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.scale = j.at("scale").get<std::uint64_t>();
    m.profile = j.value("profile", "default");
    m.record_count = j.at("record_count").get<std::uint64_t>();
    m.entry_count = j.at("entry_count").get<std::uint64_t>();
    m.ts_bounds = span_from_json(j.at("ts_bounds"));
    m.totals = j.at("totals").get<std::map<std::string, std::uint64_t>>();
    for (const auto& a : j.at("planted")) {
      PlantedArtifact p;
      p.artifact_id = a.at("artifact_id").get<std::string>();
      p.step = a.value("step", "");
      p.description = a.value("description", "");
      p.paths = a.at("paths").get<std::vector<std::string>>();
      p.expected_clusters = a.at("expected_clusters").get<std::vector<std::string>>();
      p.time_range = span_from_json(a.at("time_range"));
      m.planted.push_back(std::move(p));
    }
    if (auto it = j.find("bursts"); it != j.end())
      for (const auto& b : *it)
        m.bursts.push_back({b.at("artifact_id").get<std::string>(), b.value("window", kDefaultBurstWindow),
                            b.value("min_count", kDefaultBurstMinCount)});
    return m;
  });
}

namespace scenario_detail {

inline const Timestamp kWeekStart = utc_timestamp(2016, 5, 22);
inline const Timestamp kWeekEnd = utc_timestamp(2016, 5, 28, 23, 59, 59);
inline const Timestamp kIncidentDay = utc_timestamp(2016, 5, 25);

struct GenRecord {
  FileRecord rec;
  std::set<std::string> tags;  // clusters the path/mode belongs to, besides all_files
};

/// Deterministic helpers over mt19937_64; distributions are avoided because
/// their output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }
  Timestamp between(Timestamp lo, Timestamp hi) { return lo + static_cast<Timestamp>(below(std::uint64_t(hi - lo + 1))); }
  bool chance(unsigned percent) { return below(100) < percent; }
  template <class T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

 private:
  std::mt19937_64 engine_;
};

inline const std::vector<std::string> kWords = {
    "alpha",  "report", "config", "data",    "index",  "main",   "util",   "cache",  "image",   "photo",
    "notes",  "backup", "draft",  "invoice", "module", "handler", "parser", "widget", "server", "client",
    "engine", "common", "helper", "table",   "graph",  "matrix", "stream", "socket", "buffer", "filter",
    "render", "sample", "record", "ledger",  "budget", "agenda", "letter", "summary", "travel", "meeting"};

inline const std::vector<std::string> kPackages = {
    "bash",      "coreutils", "libc6",      "openssl",   "python3",   "perl-base", "vim",        "less",
    "grep",      "sed",       "tar",        "gzip",      "bzip2",     "xz-utils",  "apt",        "dpkg",
    "systemd",   "udev",      "rsyslog",    "logrotate", "apache2",   "php7.0",    "mysql-common", "zlib1g",
    "tzdata",    "locales",   "util-linux", "procps",    "iproute2",  "net-tools", "dnsutils",   "adduser"};

inline const std::vector<std::string> kCommands = {
    "ls",       "cat",        "cp",        "mv",        "rm",         "mkdir",     "rmdir",     "chmod",
    "chown",    "ln",         "grep",      "sed",       "mawk",       "tar",       "gzip",      "gunzip",
    "bzip2",    "xz",         "find",      "xargs",     "sort",       "uniq",      "head",      "tail",
    "less",     "more",       "vim.basic", "nano",      "ps",         "top",       "kill",      "df",
    "du",       "free",       "uptime",    "who",       "id",         "uname",     "hostname",  "date",
    "sleep",    "touch",      "stat",      "file",      "diff",       "patch",     "ssh",       "scp",
    "sftp",     "ssh-keygen", "rsync",     "python3.5", "perl",       "php7.0",    "bash",      "dash",
    "systemctl", "journalctl", "ip",       "ifconfig",  "netstat",    "route",     "dig",       "host",
    "apt-get",  "apt-cache",  "dpkg",      "dpkg-query", "update-rc.d", "service", "logrotate", "rsyslogd",
    "useradd",  "userdel",    "usermod",   "groupadd",  "visudo",     "iptables",  "modprobe",  "lsmod",
    "fdisk",    "mkfs.ext4",  "fsck",      "blkid",     "lsblk",      "ldconfig",  "agetty",    "login",
    "runlevel", "shutdown",   "reboot",    "sysctl",    "tune2fs",    "e2fsck",    "openssl",   "md5sum",
    "sha256sum", "base64",    "tr",        "cut",       "wc",         "tee",       "env",       "nohup",
    "nice",     "timeout",    "lsof",      "vmstat",    "zip",        "unzip",     "git",       "tmux"};

inline const std::vector<std::string> kBinDirs = {"/bin", "/usr/bin", "/sbin", "/usr/sbin"};
inline const std::vector<std::string> kUsers = {"martin", "roberto", "alice", "backup"};
inline const std::vector<std::string> kHomeDirs = {"Documents", "Downloads", "Pictures", "projects", "tmp"};
inline const std::vector<std::string> kDocExt = {"txt", "pdf", "odt", "jpg", "png", "csv", "md", "tar.gz"};
inline const std::vector<std::string> kHeaderDirs = {"sys", "netinet", "arpa", "x86_64-linux-gnu/bits",
                                                     "glib-2.0", "openssl", "linux", "asm-generic"};
inline const std::vector<std::string> kLogs = {"syslog", "auth", "kern", "daemon", "dpkg", "apt/history",
                                               "apache2/access", "apache2/error", "mysql/error"};

class Generator {
 public:
  Generator(std::uint64_t seed, std::uint64_t scale) : rng_(seed), seed_(seed), scale_(scale) {}

  Scenario run() {
    plant_incident();
    fixed_background();
    const std::uint64_t fixed = records_.size();
    if (scale_ < 1000 || scale_ < fixed + 100)
      throw Error(ErrorCode::ScaleTooSmall, "scale " + std::to_string(scale_) + " cannot host the planted scenario (" +
                                                std::to_string(fixed + 100) + " records needed)");
    while (records_.size() < scale_) noise_record();
    return finish();
  }

 private:
  // -- record construction -------------------------------------------------

  GenRecord& add(std::string path, std::string mode, std::uint64_t uid, std::uint64_t size,
                 std::optional<Timestamp> m, std::optional<Timestamp> a, std::optional<Timestamp> c,
                 std::optional<Timestamp> b, std::set<std::string> tags = {}) {
    if (!used_.insert(path).second) throw Error(ErrorCode::ContractViolation, "duplicate generated path " + path);
    GenRecord g;
    g.rec.path = std::move(path);
    g.rec.inode = next_inode_++;
    g.rec.mode = std::move(mode);
    g.rec.file_type = g.rec.mode[0];
    g.rec.uid = uid;
    g.rec.gid = uid;
    g.rec.size = size;
    g.rec.mtime = m;
    g.rec.atime = a;
    g.rec.ctime = c;
    g.rec.btime = b;
    g.tags = std::move(tags);
    records_.push_back(std::move(g));
    return records_.back();
  }

  bool free(const std::string& path) const { return !used_.count(path); }

  /// Plausible stamps for a file installed in the background: born during
  /// the week, m never after c, a anywhere after birth.
  struct Stamps {
    std::optional<Timestamp> m, a, c, b;
  };
  Stamps background_stamps(Timestamp born_lo, Timestamp born_hi) {
    Stamps s;
    const Timestamp born = rng_.between(born_lo, born_hi);
    s.b = born;
    s.c = rng_.chance(60) ? born : rng_.between(born, kWeekEnd);
    if (rng_.chance(50)) s.m = born;
    else if (rng_.chance(50)) s.m = rng_.between(kWeekStart, born);  // copied: keeps an older m-time
    else s.m = rng_.between(born, *s.c);
    s.a = rng_.chance(40) ? born : rng_.between(born, kWeekEnd);
    if (rng_.chance(10)) s.b.reset();
    return s;
  }

  GenRecord& add_bg(std::string path, std::string mode, std::uint64_t uid, std::set<std::string> tags,
                    Timestamp born_lo = kWeekStart, Timestamp born_hi = kWeekEnd) {
    const Stamps s = background_stamps(born_lo, born_hi);
    return add(std::move(path), std::move(mode), uid, 512 + rng_.below(200000), s.m, s.a, s.c, s.b, std::move(tags));
  }

  std::string word_file(const std::string& ext) {
    return rng_.pick(kWords) + "_" + std::to_string(rng_.below(100000)) + "." + ext;
  }

  void artifact(std::string id, std::string step, std::string description, std::vector<std::string> paths,
                std::vector<std::string> clusters, TimeSpan range) {
    manifest_.planted.push_back(
        {std::move(id), std::move(step), std::move(description), std::move(paths), std::move(clusters), range});
  }

  // -- the planted incident --------------------------------------------------

  void plant_incident() {
    const Timestamp day = kIncidentDay;
    const Timestamp install = kWeekStart + 3600;
    auto at = [&](int h, int m, int s) { return day + h * 3600 + m * 60 + s; };

    // S1: remote login into martin's account via SSH keys.
    add("/home/martin/.ssh", "d/drwx------", 1000, 4096, at(0, 41, 10), at(0, 40, 50), at(0, 41, 10), install,
        {"user_ssh"});
    add("/home/martin/.ssh/authorized_keys", "r/rrw-------", 1000, 742, at(0, 41, 10), at(0, 40, 55), at(0, 41, 10),
        install + 120, {"user_ssh"});
    artifact("S1-ssh", "S1", "SSH keys of user martin accessed and replaced",
             {"/home/martin/.ssh", "/home/martin/.ssh/authorized_keys"}, {"user_ssh"},
             {at(0, 40, 0), at(0, 42, 0)});

    // S2: trojan library downloaded with wget, preload changed, s-bit helper.
    add("/usr/bin/wget", "r/rrwxr-xr-x", 0, 424200, install, at(2, 40, 12), install, install,
        {"std_executables", "unusual_commands"});
    artifact("S2-wget", "S2", "wget executed to download the trojan library", {"/usr/bin/wget"},
             {"unusual_commands", "std_executables"}, {at(2, 40, 0), at(2, 41, 0)});
    add("/etc/ld.so.preload", "r/rrw-r--r--", 0, 42, at(2, 42, 30), at(2, 42, 30), at(2, 42, 30), at(2, 42, 30),
        {"system_config"});
    artifact("S2-preload", "S2", "ld.so.preload set to inject the library", {"/etc/ld.so.preload"},
             {"system_config"}, {at(2, 42, 0), at(2, 43, 0)});
    add("/var/lib/.s", "r/rrwsr-xr-x", 0, 8600, at(2, 43, 5), at(2, 43, 5), at(2, 43, 5), at(2, 43, 5),
        {"sbit_executables", "hidden_dotfiles"});
    artifact("S2-sbit", "S2", "hidden set-uid helper installed", {"/var/lib/.s"},
             {"sbit_executables", "hidden_dotfiles"}, {at(2, 43, 0), at(2, 44, 0)});
    add("/usr/sbin/sshd", "r/rrwxr-xr-x", 0, 799216, install, at(2, 44, 0), install, install, {"std_executables"});
    artifact("S2-sshd", "S2", "SSH daemon restarted to load the trojan", {"/usr/sbin/sshd"}, {"std_executables"},
             {at(2, 44, 0), at(2, 44, 0)});
    // re-installed during S4: only b survives from the download
    add("/lib/x86_64-linux-gnu/libselinux.so.1", "r/rrw-r--r--", 0, 142312, at(21, 23, 10), at(21, 23, 10),
        at(21, 23, 10), at(2, 41, 0));
    artifact("S2-library", "S2", "trojanised libselinux", {"/lib/x86_64-linux-gnu/libselinux.so.1"}, {"all_files"},
             {at(2, 41, 0), at(21, 23, 10)});

    // S3: roberto's account shows the same traces.
    add("/home/roberto/1", "r/rrw-r--r--", 1001, 0, at(19, 20, 30), at(19, 20, 30), at(19, 20, 30), at(19, 20, 30));
    add("/home/martin/1", "r/rrw-r--r--", 1000, 0, at(19, 21, 0), at(19, 21, 0), at(19, 21, 0), at(19, 21, 0));
    artifact("S3-marker", "S3", "empty marker files named 1 in both accounts", {"/home/roberto/1", "/home/martin/1"},
             {"all_files"}, {at(19, 20, 0), at(19, 22, 0)});
    add("/home/roberto/.ssh/authorized_keys", "r/rrw-------", 1001, 398, install + 600, at(19, 22, 10),
        install + 600, install + 600, {"user_ssh"});
    artifact("S3-ssh", "S3", "roberto's authorized_keys read", {"/home/roberto/.ssh/authorized_keys"}, {"user_ssh"},
             {at(19, 22, 0), at(19, 23, 0)});

    // S4: re-compilation of the library.
    std::vector<std::string> compile_paths;
    const int headers = 120;
    for (int k = 0; k < headers; ++k) {
      std::string p = "/usr/include/selinux/sel_" + std::to_string(k) + ".h";
      add(p, "r/rrw-r--r--", 0, 2000 + 13 * k, install, at(21, 22, k / 3), install, install, {"compilation_signs"});
      compile_paths.push_back(p);
    }
    const std::pair<const char*, int> tools[] = {{"/usr/bin/make", 0}, {"/usr/bin/gcc", 1}, {"/usr/bin/as", 20},
                                                 {"/usr/bin/ld", 38}};
    for (auto [p, sec] : tools) {
      add(p, "r/rrwxr-xr-x", 0, 300000, install, at(21, 22, sec), install, install,
          {"compilation_signs", "std_executables"});
      compile_paths.push_back(p);
    }
    artifact("S4-compile", "S4", "headers and tool chain accessed during re-compilation", compile_paths,
             {"compilation_signs"}, {at(21, 22, 0), at(21, 22, 40)});
    add("/usr/bin/curl", "r/rrwxr-xr-x", 0, 191504, install, at(21, 20, 5), install, install,
        {"std_executables", "unusual_commands"});
    artifact("S4-curl", "S4", "curl executed", {"/usr/bin/curl"}, {"unusual_commands"},
             {at(21, 20, 0), at(21, 21, 0)});

    // S5: hidden work directory, tool build and a two-day scan.
    const std::string dir = "/var/tmp/...";
    std::vector<std::string> build_paths;
    for (int k = 0; k < 12; ++k) {
      std::string p = dir + "/nmap-7.12/nse_" + std::to_string(k) + ".h";
      add(p, "r/rrw-r--r--", 0, 4000 + k, at(22, 9, 0), at(22, 30, k), at(22, 9, 0), at(22, 9, 0),
          {"suspicious_names", "compilation_signs"});
      build_paths.push_back(p);
    }
    artifact("S5-build", "S5", "scanner sources compiled inside the hidden directory", build_paths,
             {"suspicious_names", "compilation_signs"}, {at(22, 9, 0), at(22, 31, 0)});
    add("/usr/local/bin/nmap", "r/rrwxr-xr-x", 0, 2900000, at(22, 35, 0), at(22, 40, 0), at(22, 35, 0), at(22, 35, 0),
        {"std_executables", "unusual_commands"});
    artifact("S5-install", "S5", "scanner installed and executed", {"/usr/local/bin/nmap"},
             {"std_executables", "unusual_commands"}, {at(22, 35, 0), at(22, 40, 0)});

    const std::uint64_t targets = std::max<std::uint64_t>(200, scale_ / 20);
    const std::uint64_t sweep = 80;
    const Timestamp scan_start = at(22, 40, 0);
    const Timestamp scan_end = scan_start + 46 * 3600;
    std::vector<std::string> scan_paths;
    Timestamp last = scan_start;
    for (std::uint64_t k = 0; k < targets; ++k) {
      Timestamp born;
      if (k < sweep) {
        born = scan_start + static_cast<Timestamp>(k / 2);  // initial sweep: two results per second
      } else {
        const Timestamp slot = (scan_end - scan_start - 60) / static_cast<Timestamp>(targets - sweep);
        born = scan_start + 60 + static_cast<Timestamp>(k - sweep) * slot + static_cast<Timestamp>(rng_.below(slot));
      }
      const Timestamp written = born + static_cast<Timestamp>(rng_.below(30));
      std::string p = dir + "/10." + std::to_string(k / 65536 % 256) + "." + std::to_string(k / 256 % 256) + "." +
                      std::to_string(k % 256);
      add(p, "r/rrw-r--r--", 0, 100 + rng_.below(5000), written, born, written, born, {"suspicious_names"});
      scan_paths.push_back(p);
      last = std::max(last, written);
    }
    artifact("S5-scan", "S5", "scan results stored per target in the hidden directory", scan_paths,
             {"suspicious_names"}, {scan_start, last});
    manifest_.bursts.push_back({"S5-scan", kDefaultBurstWindow, kDefaultBurstMinCount});
    manifest_.bursts.push_back({"S4-compile", kDefaultBurstWindow, kDefaultBurstMinCount});
    add(dir, "d/drwxr-xr-x", 0, 4096, last, last, last, at(22, 8, 0), {"suspicious_names"});
    add(dir + "/nmap-7.12", "d/drwxr-xr-x", 0, 4096, at(22, 9, 0), at(22, 30, 11), at(22, 9, 0), at(22, 9, 0),
        {"suspicious_names"});
    artifact("S5-dir", "S5", "hidden directory named with dots", {dir, dir + "/nmap-7.12"}, {"suspicious_names"},
             {at(22, 8, 0), last});

    // S6: account databases modified the following night.
    const Timestamp next = day + 86400;
    add("/etc/passwd", "r/rrw-r--r--", 0, 2135, next + 23 * 3600 + 12 * 60 + 10, next + 23 * 3600 + 12 * 60 + 10,
        next + 23 * 3600 + 12 * 60 + 10, install, {"system_config"});
    add("/etc/shadow", "r/rrw-r-----", 0, 1290, next + 23 * 3600 + 12 * 60 + 12, next + 23 * 3600 + 12 * 60 + 12,
        next + 23 * 3600 + 12 * 60 + 12, install, {"system_config"});
    artifact("S6-accounts", "S6", "passwd and shadow modified", {"/etc/passwd", "/etc/shadow"}, {"system_config"},
             {next + 23 * 3600 + 12 * 60, next + 23 * 3600 + 13 * 60});
  }

  // -- fixed background ------------------------------------------------------

  void fixed_background() {
    const Timestamp install_hi = kWeekStart + 86400;
    // dataset bounds
    add("/etc/hostname", "r/rrw-r--r--", 0, 7, kWeekStart, kWeekStart, kWeekStart, kWeekStart);
    add("/var/log/wtmp", "r/rrw-rw-r--", 0, 30000, kWeekEnd, kWeekEnd, kWeekEnd, kWeekStart + 60);

    for (const char* p : {"/bin/su", "/bin/mount", "/bin/umount", "/bin/ping", "/usr/bin/passwd", "/usr/bin/chsh",
                          "/usr/bin/chfn", "/usr/bin/gpasswd", "/usr/bin/newgrp", "/usr/bin/sudo"})
      add_bg(p, "r/rrwsr-xr-x", 0, {"std_executables", "sbit_executables"}, kWeekStart, install_hi);
    for (const char* p : {"/usr/bin/wall", "/usr/bin/crontab", "/usr/bin/ssh-agent"})
      add_bg(p, "r/rrwxr-sr-x", 0, {"std_executables", "sbit_executables"}, kWeekStart, install_hi);
    add_bg("/usr/lib/openssh/ssh-keysign", "r/rrwsr-xr-x", 0, {"sbit_executables"}, kWeekStart, install_hi);
    add_bg("/usr/lib/eject/dmcrypt-get-device", "r/rrwsr-xr-x", 0, {"sbit_executables"}, kWeekStart, install_hi);
    add_bg("/var/mail", "d/drwxrwsr-x", 0, {"sbit_executables"}, kWeekStart, install_hi);
    add_bg("/var/local", "d/drwxrwsr-x", 0, {"sbit_executables"}, kWeekStart, install_hi);

    add_bg("/tmp", "d/drwxrwxrwt", 0, {"weak_permissions"});
    add_bg("/var/tmp", "d/drwxrwxrwt", 0, {"weak_permissions"});
    add_bg("/tmp/.X11-unix", "d/drwxrwxrwt", 0, {"weak_permissions", "hidden_dotfiles"});
    add_bg("/tmp/.ICE-unix", "d/drwxrwxrwt", 0, {"weak_permissions", "hidden_dotfiles"});
    add_bg("/var/lib/php/sessions", "d/drwx-wx-wt", 0, {"weak_permissions"});

    for (const char* svc : {"ssh", "cron", "rsyslog", "apache2", "mysql", "networking", "procps", "udev", "kmod",
                            "hostname.sh", "urandom", "sendsigs", "umountfs", "halt", "reboot", "single", "rc.local"}) {
      std::set<std::string> tags{"system_config"};
      if (std::string_view(svc).ends_with(".sh")) tags.insert("scripts_sh");
      add_bg(std::string("/etc/init.d/") + svc, "r/rrwxr-xr-x", 0, tags, kWeekStart, install_hi);
    }
    for (const char* p : {"/etc/ssh/sshd_config", "/etc/ssh/ssh_config", "/etc/ssh/ssh_host_rsa_key",
                          "/etc/ssh/ssh_host_rsa_key.pub", "/etc/ssh/moduli", "/etc/group", "/etc/ld.so.cache",
                          "/etc/ld.so.conf", "/etc/ld.so.conf.d/libc.conf"})
      add_bg(p, "r/rrw-r--r--", 0, {"system_config"}, kWeekStart, install_hi);
    for (const char* p : {"/etc/gshadow", "/etc/passwd-", "/etc/shadow-", "/etc/group-", "/etc/ssh", "/etc/init.d"})
      add_bg(p, p == std::string("/etc/ssh") || p == std::string("/etc/init.d") ? "d/drwxr-xr-x" : "r/rrw-r--r--", 0,
             {}, kWeekStart, install_hi);

    add_bg("/etc/crontab", "r/rrw-r--r--", 0, {"cron"});
    for (const char* p : {"/etc/cron.d/php", "/etc/cron.d/sysstat", "/etc/cron.daily/logrotate",
                          "/etc/cron.daily/apt-compat", "/etc/cron.weekly/man-db", "/var/spool/cron/crontabs/root",
                          "/var/spool/cron/crontabs/alice"})
      add_bg(p, "r/rrwxr-xr-x", 0, {"cron"});
    add_bg("/etc/cron.hourly/.placeholder", "r/rrw-r--r--", 0, {"cron", "hidden_dotfiles"});

    for (const char* p : {"/etc/skel/.bashrc", "/etc/skel/.profile", "/etc/skel/.bash_logout"})
      add_bg(p, "r/rrw-r--r--", 0, {"hidden_dotfiles"}, kWeekStart, install_hi);

    for (std::size_t u = 0; u < kUsers.size(); ++u) {
      const std::uint64_t uid = 1000 + u;
      const std::string home = "/home/" + kUsers[u];
      add_bg(home, "d/drwxr-xr-x", uid, {});
      for (const char* f : {"/.bashrc", "/.profile", "/.bash_history", "/.viminfo"})
        add_bg(home + f, "r/rrw-------", uid, {});
      if (free(home + "/.ssh")) add_bg(home + "/.ssh", "d/drwx------", uid, {"user_ssh"});
      add_bg(home + "/.ssh/known_hosts", "r/rrw-r--r--", uid, {"user_ssh"});
      for (const auto& d : kHomeDirs) add_bg(home + "/" + d, "d/drwxr-xr-x", uid, {});
    }
    add_bg("/root", "d/drwx------", 0, {});
    add_bg("/root/.bashrc", "r/rrw-r--r--", 0, {});
    add_bg("/root/.bash_history", "r/rrw-------", 0, {});
    add_bg("/root/.ssh", "d/drwx------", 0, {"user_ssh"});
    add_bg("/root/.ssh/authorized_keys", "r/rrw-------", 0, {"user_ssh"});
  }

  // -- repeatable noise --------------------------------------------------------

  void noise_record() {
    for (int attempt = 0; attempt < 16; ++attempt)
      if (try_noise()) return;
    // fall back to a template whose paths cannot collide
    add_bg("/usr/share/doc/generated/item_" + std::to_string(records_.size()) + ".gz", "r/rrw-r--r--", 0, {});
  }

  bool try_noise() {
    const auto roll = rng_.below(100);
    const Timestamp install_hi = kWeekStart + 86400;
    std::string path, mode = "r/rrw-r--r--";
    std::set<std::string> tags;
    std::uint64_t uid = 0;
    Timestamp lo = kWeekStart, hi = kWeekEnd;

    if (roll < 15) {
      static const std::vector<std::string> docs = {"changelog.Debian.gz", "copyright", "README.gz", "NEWS.gz",
                                                    "TODO.gz", "examples/sample_" + std::to_string(0) + ".conf"};
      path = "/usr/share/doc/" + rng_.pick(kPackages) + "/" +
             (rng_.chance(70) ? rng_.pick(docs) : word_file("txt.gz"));
      hi = install_hi;
    } else if (roll < 25) {
      path = "/usr/lib/x86_64-linux-gnu/lib" + rng_.pick(kWords) + std::to_string(rng_.below(5000)) + ".so." +
             std::to_string(rng_.below(9));
      hi = install_hi;
    } else if (roll < 33) {
      const bool compiled = rng_.chance(40);
      path = "/usr/lib/python3/dist-packages/" + rng_.pick(kWords) + "/" + word_file(compiled ? "pyc" : "py");
      if (!compiled) tags.insert("scripts_py");
      hi = install_hi;
    } else if (roll < 37) {
      const bool script = rng_.chance(25);
      path = "/usr/share/perl5/" + rng_.pick(kWords) + "/" + word_file(script ? "pl" : "pm");
      if (script) tags.insert("scripts_pl");
      hi = install_hi;
    } else if (roll < 47) {
      path = "/usr/include/" + rng_.pick(kHeaderDirs) + "/" + word_file(rng_.chance(80) ? "h" : "hpp");
      tags.insert("compilation_signs");
      hi = install_hi;
    } else if (roll < 52) {
      path = rng_.pick(kBinDirs) + "/" + rng_.pick(kCommands);
      mode = "r/rrwxr-xr-x";
      tags.insert("std_executables");
      hi = install_hi;
    } else if (roll < 64) {
      const auto u = rng_.below(kUsers.size());
      uid = 1000 + u;
      path = "/home/" + kUsers[u] + "/" + rng_.pick(kHomeDirs) + "/" + word_file(rng_.pick(kDocExt));
    } else if (roll < 67) {
      const auto u = rng_.below(kUsers.size());
      uid = 1000 + u;
      static const std::vector<std::string> ext = {"sh", "py", "pl", "rb"};
      const std::string e = rng_.pick(ext);
      path = "/home/" + kUsers[u] + "/projects/" + word_file(e);
      mode = "r/rrwxr-xr-x";
      if (e != "rb") tags.insert("scripts_" + e);
    } else if (roll < 75) {
      path = "/var/log/" + rng_.pick(kLogs) + ".log." + std::to_string(1 + rng_.below(400)) + ".gz";
    } else if (roll < 80) {
      path = "/etc/" + rng_.pick(kPackages) + "/" + word_file("conf");
      hi = install_hi;
    } else if (roll < 84) {
      static const std::vector<std::string> ext = {"php", "php", "html", "css", "js"};
      const std::string e = rng_.pick(ext);
      path = "/var/www/html/" + word_file(e);
      uid = 33;
      if (e == "php") tags.insert("scripts_php");
    } else if (roll < 88) {
      path = "/tmp/" + word_file("tmp");
      mode = "r/rrw-------";
      lo = kWeekStart + 86400;
    } else if (roll < 95) {
      static const std::vector<std::string> ext = {"list", "md5sums", "postinst", "prerm", "conffiles"};
      path = "/var/lib/dpkg/info/" + rng_.pick(kPackages) + std::to_string(rng_.below(3000)) + "." + rng_.pick(ext);
      hi = install_hi;
    } else if (roll < 98) {
      path = "/var/cache/apt/archives/" + rng_.pick(kPackages) + "_" + std::to_string(rng_.below(40)) + "." +
             std::to_string(rng_.below(40)) + "_amd64.deb";
    } else {
      static const std::vector<std::string> ext = {"png", "svg", "mo", "xml"};
      path = "/usr/share/" + rng_.pick(kPackages) + "/" + rng_.pick(kWords) + "/" + word_file(rng_.pick(ext));
      hi = install_hi;
    }
    if (!free(path)) return false;
    add_bg(path, mode, uid, std::move(tags), lo, hi);
    return true;
  }

  // -- output ------------------------------------------------------------------

  Scenario finish() {
    std::sort(records_.begin(), records_.end(),
              [](const GenRecord& l, const GenRecord& r) { return path_less(l.rec.path, r.rec.path); });

    Scenario out;
    auto& m = out.manifest;
    m = std::move(manifest_);
    m.seed = seed_;
    m.scale = scale_;
    m.record_count = records_.size();
    for (const auto& def : builtin_cluster_defs()) m.totals[def.id] = 0;
    const std::map<std::string, MacbFlags> masks = {{"compilation_signs", MacbFlags{Flag::a}},
                                                   {"unusual_commands", MacbFlags{Flag::a}},
                                                   {"system_config", MacbFlags{Flag::m, Flag::c}}};

    std::ostringstream body;
    body << "# synthetic snapshot seed=" << seed_ << " scale=" << scale_ << "\n";
    Timestamp lo = std::numeric_limits<Timestamp>::max(), hi = std::numeric_limits<Timestamp>::min();
    for (const auto& g : records_) {
      const auto& r = g.rec;
      auto z = [](const std::optional<Timestamp>& t) { return t ? *t : Timestamp{0}; };
      body << "0|" << r.path << "|" << r.inode << "|" << r.mode << "|" << r.uid << "|" << r.gid << "|" << r.size
           << "|" << z(r.atime) << "|" << z(r.mtime) << "|" << z(r.ctime) << "|" << z(r.btime) << "\n";

      // distinct timestamps, and distinct timestamps carrying a masked flag
      std::set<Timestamp> all;
      for (Flag f : kAllFlags)
        if (auto t = r.timestamp(f)) {
          all.insert(*t);
          lo = std::min(lo, *t);
          hi = std::max(hi, *t);
        }
      m.entry_count += all.size();
      m.totals["all_files"] += all.size();
      for (const auto& tag : g.tags) {
        auto mask = masks.find(tag);
        if (mask == masks.end()) {
          m.totals[tag] += all.size();
          continue;
        }
        std::set<Timestamp> hit;
        for (Flag f : kAllFlags)
          if (mask->second.has(f))
            if (auto t = r.timestamp(f)) hit.insert(*t);
        m.totals[tag] += hit.size();
      }
    }
    m.ts_bounds = {lo, hi};
    out.body = body.str();
    return out;
  }

  Rng rng_;
  std::uint64_t seed_;
  std::uint64_t scale_;
  std::uint64_t next_inode_ = 2;
  std::vector<GenRecord> records_;
  std::unordered_set<std::string> used_;
  Manifest manifest_;
};

}  // namespace scenario_detail

/// Deterministic for a given (seed, scale); emits exactly `scale` records.
inline Scenario generate_scenario(std::uint64_t seed, std::uint64_t scale) {
  return scenario_detail::Generator(seed, scale).run();
}

// ---------------------------------------------------------------------------
// Verification

struct ArtifactCheck {
  std::string artifact_id;
  std::vector<std::string> missing_paths;
  std::vector<std::string> clusters_failed;  // expected clusters not surfacing every path
  bool pass = false;
};

struct ClusterCheck {
  std::string cluster_id;
  std::uint64_t expected = 0;
  std::uint64_t actual = 0;
  bool pass = false;
};

struct BurstCheck {
  std::string artifact_id;
  std::vector<Burst> overlapping;
  bool pass = false;
};

struct VerifyReport {
  std::vector<ArtifactCheck> artifacts;
  std::vector<ClusterCheck> clusters;
  std::vector<BurstCheck> bursts;

  bool pass() const {
    auto ok = [](const auto& v) { return std::all_of(v.begin(), v.end(), [](const auto& c) { return c.pass; }); };
    return ok(artifacts) && ok(clusters) && ok(bursts);
  }
};

inline VerifyReport verify_manifest(const DatasetView& view, const Manifest& manifest) {
  const auto& index = view.index;
  if (index.ts_bounds() != manifest.ts_bounds)
    throw Error(ErrorCode::MismatchError, "dataset time bounds do not match the manifest");

  std::map<std::string_view, std::vector<std::uint64_t>> by_path;
  for (const auto& e : index.entries()) by_path[index.record_of(e).path].push_back(e.entry_id);

  VerifyReport report;
  for (const auto& a : manifest.planted) {
    ArtifactCheck check{a.artifact_id, {}, {}, false};
    for (const auto& p : a.paths)
      if (!by_path.count(p)) check.missing_paths.push_back(p);
    for (const auto& cid : a.expected_clusters) {
      const auto slot = view.registry.find(cid);
      bool surfaced = slot.has_value();
      for (const auto& p : a.paths) {
        if (!surfaced) break;
        auto it = by_path.find(p);
        if (it == by_path.end()) continue;  // already reported as missing
        surfaced = std::any_of(it->second.begin(), it->second.end(), [&](std::uint64_t id) {
          const auto& e = index.entry(id);
          return ((view.membership[e.record_ref] >> *slot) & 1) && view.registry[*slot].mask_ok(e.flags);
        });
      }
      if (!surfaced) check.clusters_failed.push_back(cid);
    }
    check.pass = check.missing_paths.empty() && check.clusters_failed.empty();
    report.artifacts.push_back(std::move(check));
  }

  for (const auto& cc : cluster_counts(view, FilterState{})) {
    auto it = manifest.totals.find(cc.cluster_id);
    if (it == manifest.totals.end()) continue;
    report.clusters.push_back({cc.cluster_id, it->second, cc.total, it->second == cc.total});
  }

  for (const auto& expect : manifest.bursts) {
    BurstCheck check{expect.artifact_id, {}, false};
    const auto* a = manifest.artifact(expect.artifact_id);
    if (a) {
      const auto all = [](const TimelineEntry&) { return true; };
      for (const auto& b : detect_bursts(index, all, expect.window, expect.min_count))
        if (b.span.start <= a->time_range.end && b.span.end >= a->time_range.start) check.overlapping.push_back(b);
    }
    check.pass = !check.overlapping.empty();
    report.bursts.push_back(std::move(check));
  }
  return report;
}

inline json to_json(const VerifyReport& r) {
  json artifacts = json::array(), clusters = json::array(), bursts = json::array();
  for (const auto& a : r.artifacts)
    artifacts.push_back(json{{"artifact_id", a.artifact_id},
                             {"pass", a.pass},
                             {"missing_paths", a.missing_paths},
                             {"clusters_failed", a.clusters_failed}});
  for (const auto& c : r.clusters)
    clusters.push_back(
        json{{"cluster_id", c.cluster_id}, {"expected", c.expected}, {"actual", c.actual}, {"pass", c.pass}});
  for (const auto& b : r.bursts) {
    json found = json::array();
    for (const auto& x : b.overlapping) found.push_back(to_json(x));
    bursts.push_back(json{{"artifact_id", b.artifact_id}, {"pass", b.pass}, {"bursts", found}});
  }
  return json{{"pass", r.pass()}, {"artifacts", artifacts}, {"clusters", clusters}, {"bursts", bursts}};
}

}  // namespace timescope
