// timescope command line: import, report, histogram, serve, scenario, verify.
//
// Exit codes: 0 success, 1 user error (bad input, unknown ids, failed
// verification), 2 internal error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <pthread.h>

#include <CLI11.hpp>

#include "timescope/scenario.hpp"
#include "timescope/service.hpp"

namespace fs = std::filesystem;
using namespace timescope;

namespace {

constexpr const char* kDefaultDataDir = "timescope-data";
constexpr const char* kDefaultBind = "127.0.0.1:8080";

struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dataset argument: a file path is imported in memory; anything else is
/// looked up as a dataset id under the data directory.
struct Resolved {
  std::unique_ptr<Engine> engine;
  std::shared_ptr<const LoadedDataset> dataset;
};

Resolved resolve(const std::string& arg, const std::string& data_dir, const std::optional<std::string>& format,
                 const std::optional<std::string>& cluster_config) {
  Resolved r;
  EngineOptions opts;
  if (cluster_config) opts.cluster_config = *cluster_config;
  if (fs::is_regular_file(arg)) {
    r.engine = std::make_unique<Engine>(opts);
    std::optional<InputFormat> fmt;
    if (format) fmt = parse_input_format(*format);
    r.dataset = r.engine->import_file(arg, fs::path(arg).filename().string(), fmt);
  } else {
    if (!fs::is_directory(data_dir)) throw UserError("no such file or data directory: '" + arg + "' / '" + data_dir + "'");
    opts.data_dir = data_dir;
    r.engine = std::make_unique<Engine>(opts);
    r.dataset = r.engine->dataset(arg);
  }
  return r;
}

FilterState base_filter(const std::string& flags, const std::string& name, const std::string& span) {
  FilterState f;
  if (!flags.empty()) f.flags_on = flags_from_letters(flags);
  if (!name.empty()) {
    f.name_query = name;
    f.name_mode = NameMode::filter;
  }
  if (!span.empty()) {
    const auto comma = span.find(',');
    if (comma == std::string::npos) throw UserError("--span expects START,END in epoch seconds");
    try {
      f.spans.push_back(TimeSpan::make(std::stoll(span.substr(0, comma)), std::stoll(span.substr(comma + 1))));
    } catch (const std::logic_error&) {
      throw UserError("--span expects START,END in epoch seconds");
    }
  }
  f.validate();
  return f;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

void print_import(const LoadedDataset& ds, bool as_json) {
  if (as_json) {
    std::cout << dataset_payload(ds).dump(2) << "\n";
    return;
  }
  const auto& s = ds.stats;
  std::cout << "dataset        " << ds.meta.dataset_id << "\n"
            << "name           " << ds.meta.name << "\n"
            << "records        " << ds.meta.record_count << "\n"
            << "entries        " << ds.meta.entry_count << "\n"
            << "lines read     " << s.lines_read << "\n"
            << "lines skipped  " << s.lines_skipped << "\n"
            << "lines rejected " << s.lines_rejected << "\n";
  if (s.min_ts) std::cout << "first          " << format_utc(*s.min_ts) << "\n";
  if (s.max_ts) std::cout << "last           " << format_utc(*s.max_ts) << "\n";
  for (std::size_t i = 0; i < ds.rejects.size() && i < 10; ++i)
    std::cerr << "line " << ds.rejects[i].line_no << ": " << error_token(ds.rejects[i].code) << ": "
              << ds.rejects[i].message << "\n";
}

// -- serve -------------------------------------------------------------------

struct ServeConfig {
  std::string data_dir = kDefaultDataDir;
  std::string bind = kDefaultBind;
  std::uint64_t max_upload_bytes = ServiceOptions{}.max_upload_bytes;
  std::uint64_t max_page_limit = EngineOptions{}.max_page_limit;
  std::string cluster_config;
};

/// Fills settings from a key = value file for every option not given on the
/// command line.
void apply_config_file(const std::string& path, ServeConfig& cfg, CLI::App& cmd) {
  if (!fs::is_regular_file(path)) throw UserError("cannot read config file '" + path + "'");
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw UserError("bad config file '" + path + "': " + e.what());
  }
  for (const auto& item : items) {
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "++" || key == "--") continue;  // section markers
    if (item.inputs.size() != 1) throw UserError("config key '" + item.name + "' needs exactly one value");
    const std::string& value = item.inputs.front();
    auto given = [&](const char* flag) { return cmd.get_option(flag)->count() > 0; };
    try {
      if (key == "data-dir") {
        if (!given("--data-dir")) cfg.data_dir = value;
      } else if (key == "bind") {
        if (!given("--bind")) cfg.bind = value;
      } else if (key == "max-upload-bytes") {
        if (!given("--max-upload-bytes")) cfg.max_upload_bytes = std::stoull(value);
      } else if (key == "max-page-limit") {
        if (!given("--max-page-limit")) cfg.max_page_limit = std::stoull(value);
      } else if (key == "cluster-config") {
        if (!given("--cluster-config")) cfg.cluster_config = value;
      } else {
        throw UserError("unknown config key '" + item.name + "'");
      }
    } catch (const std::logic_error&) {
      throw UserError("bad value for config key '" + item.name + "'");
    }
  }
}

std::pair<std::string, int> split_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos || colon == 0) throw UserError("--bind expects HOST:PORT");
  int port = 0;
  const auto tail = std::string_view(bind).substr(colon + 1);
  auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), port);
  if (ec != std::errc() || p != tail.data() + tail.size() || port < 0 || port > 65535)
    throw UserError("bad port in --bind '" + bind + "'");
  return {bind.substr(0, colon), port};
}

int run_serve(const ServeConfig& cfg) {
  const auto [host, port] = split_bind(cfg.bind);
  if (cfg.max_page_limit < 1) throw UserError("max-page-limit must be positive");

  // SIGINT/SIGTERM are handled by a dedicated thread so the server threads
  // never see them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  EngineOptions eo;
  eo.data_dir = cfg.data_dir;
  eo.max_page_limit = cfg.max_page_limit;
  if (!cfg.cluster_config.empty()) eo.cluster_config = cfg.cluster_config;
  Engine engine(eo);
  Service service(engine, ServiceOptions{cfg.max_upload_bytes});
  const int bound = service.bind(host, port);
  if (bound < 0) {
    std::cerr << "timescope: cannot bind " << cfg.bind << "\n";
    return 1;
  }
  std::cout << "listening on " << host << ":" << bound << " (data in " << cfg.data_dir << ")" << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.serve();
  // serve() also returns on errors; make sure the waiter can exit
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  std::cout << "stopped" << std::endl;
  return 0;
}

// -- reports -------------------------------------------------------------------

void print_clusters(const std::vector<ClusterCount>& counts, bool csv) {
  if (csv) {
    std::cout << "cluster_id,label,total,filtered\n";
    for (const auto& c : counts)
      std::cout << c.cluster_id << ',' << csv_cell(c.label) << ',' << c.total << ',' << c.filtered << "\n";
    return;
  }
  std::cout << std::left << std::setw(20) << "cluster" << std::setw(34) << "label" << std::right << std::setw(10)
            << "total" << std::setw(10) << "filtered" << "\n";
  for (const auto& c : counts)
    std::cout << std::left << std::setw(20) << c.cluster_id << std::setw(34) << c.label << std::right
              << std::setw(10) << c.total << std::setw(10) << c.filtered << "\n";
}

void print_bursts(const std::vector<Burst>& bursts, bool csv) {
  if (csv) {
    std::cout << "start,end,count\n";
    for (const auto& b : bursts) std::cout << b.span.start << ',' << b.span.end << ',' << b.count << "\n";
    return;
  }
  std::cout << "bursts: " << bursts.size() << "\n";
  for (const auto& b : bursts)
    std::cout << "  " << format_utc(b.span.start) << "  " << format_utc(b.span.end) << "  " << std::setw(8) << b.count
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"File system timeline analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "timescope 0.1.0");

  std::string data_dir = kDefaultDataDir;
  std::optional<std::string> format, cluster_config;
  bool as_json = false, as_csv = false;

  // import
  auto* import_cmd = app.add_subcommand("import", "Import a body or CSV file into the data directory");
  std::string import_path, import_name;
  import_cmd->add_option("file", import_path, "Input file")->required();
  import_cmd->add_option("--name", import_name, "Dataset name (default: file name)");
  import_cmd->add_option("--format", format, "body or csv (default: sniffed)")->check(CLI::IsMember({"body", "csv"}));
  import_cmd->add_option("--data-dir", data_dir, "Data directory");
  import_cmd->add_flag("--json", as_json, "Print the dataset as JSON");

  // report
  auto* report_cmd = app.add_subcommand("report", "Cluster counts and bursts for a dataset");
  std::string dataset_arg, cluster_arg, bursts_arg, flags_arg, name_arg, span_arg;
  report_cmd->add_option("dataset", dataset_arg, "Dataset id or input file")->required();
  report_cmd->add_option("--cluster", cluster_arg, "Cluster id, or 'all'");
  report_cmd->add_option("--bursts", bursts_arg, "Detect bursts: WINDOW_SECONDS,MIN_COUNT");
  report_cmd->add_option("--flags", flags_arg, "Only these MACB attributes, e.g. 'mc'");
  report_cmd->add_option("--name", name_arg, "Name filter (substring, or re:REGEX)");
  report_cmd->add_option("--span", span_arg, "Time window START,END (epoch seconds)");
  report_cmd->add_option("--data-dir", data_dir, "Data directory");
  report_cmd->add_option("--format", format, "Input format when DATASET is a file")
      ->check(CLI::IsMember({"body", "csv"}));
  report_cmd->add_option("--cluster-config", cluster_config, "Extra cluster definitions (JSON)");
  report_cmd->add_flag("--csv", as_csv, "CSV output");
  report_cmd->add_flag("--json", as_json, "JSON output (same payloads as the HTTP API)");

  // histogram
  auto* hist_cmd = app.add_subcommand("histogram", "Per-attribute bucket counts");
  std::string granularity_arg;
  hist_cmd->add_option("dataset", dataset_arg, "Dataset id or input file")->required();
  hist_cmd->add_option("--granularity", granularity_arg, "hour, day, month or year (default: automatic)");
  hist_cmd->add_option("--flags", flags_arg, "Only these MACB attributes");
  hist_cmd->add_option("--name", name_arg, "Name filter (substring, or re:REGEX)");
  hist_cmd->add_option("--span", span_arg, "Time window START,END (epoch seconds)");
  hist_cmd->add_option("--cluster", cluster_arg, "Restrict to a cluster");
  hist_cmd->add_option("--data-dir", data_dir, "Data directory");
  hist_cmd->add_option("--format", format, "Input format when DATASET is a file")->check(CLI::IsMember({"body", "csv"}));
  hist_cmd->add_flag("--csv", as_csv, "CSV output");
  hist_cmd->add_flag("--json", as_json, "JSON output");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  ServeConfig serve_cfg;
  std::string config_path;
  serve_cmd->add_option("--config", config_path, "key = value settings file");
  serve_cmd->add_option("--data-dir", serve_cfg.data_dir, "Data directory");
  serve_cmd->add_option("--bind", serve_cfg.bind, "HOST:PORT (port 0 picks one)");
  serve_cmd->add_option("--max-upload-bytes", serve_cfg.max_upload_bytes, "Upload size cap");
  serve_cmd->add_option("--max-page-limit", serve_cfg.max_page_limit, "Largest page a query may request");
  serve_cmd->add_option("--cluster-config", serve_cfg.cluster_config, "Extra cluster definitions (JSON)");

  // scenario
  auto* scenario_cmd = app.add_subcommand("scenario", "Generate a synthetic incident corpus and its manifest");
  std::uint64_t seed = 1, scale = 50000;
  std::string out_dir;
  scenario_cmd->add_option("--seed", seed, "Random seed");
  scenario_cmd->add_option("--scale", scale, "Number of records (>= 1000)");
  scenario_cmd->add_option("--out", out_dir, "Output directory")->required();

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "Check a corpus against its scenario manifest");
  std::string corpus_path, manifest_path;
  verify_cmd->add_option("corpus", corpus_path, "Body file")->required();
  verify_cmd->add_option("manifest", manifest_path, "Manifest JSON")->required();
  verify_cmd->add_flag("--json", as_json, "Full JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*import_cmd) {
      EngineOptions opts;
      opts.data_dir = data_dir;
      Engine engine(opts);
      std::optional<InputFormat> fmt;
      if (format) fmt = parse_input_format(*format);
      print_import(*engine.import_file(import_path, import_name, fmt), as_json);
      return 0;
    }

    if (*report_cmd) {
      auto r = resolve(dataset_arg, data_dir, format, cluster_config);
      const FilterState filter = base_filter(flags_arg, name_arg, span_arg);
      json out = json::object();
      if (!cluster_arg.empty() || bursts_arg.empty()) {
        auto counts = r.engine->clusters(*r.dataset, filter);
        if (!cluster_arg.empty() && cluster_arg != "all") {
          r.engine->registry().at(cluster_arg);  // UnknownCluster for a bad id
          std::erase_if(counts, [&](const ClusterCount& c) { return c.cluster_id != cluster_arg; });
        }
        if (as_json) out["clusters"] = clusters_payload(counts);
        else print_clusters(counts, as_csv);
      }
      if (!bursts_arg.empty()) {
        const auto comma = bursts_arg.find(',');
        if (comma == std::string::npos) throw UserError("--bursts expects WINDOW,MIN_COUNT");
        Timestamp window = 0;
        std::uint64_t min_count = 0;
        try {
          window = std::stoll(bursts_arg.substr(0, comma));
          min_count = std::stoull(bursts_arg.substr(comma + 1));
        } catch (const std::logic_error&) {
          throw UserError("--bursts expects WINDOW,MIN_COUNT");
        }
        FilterState bf = filter;
        if (!cluster_arg.empty() && cluster_arg != "all") bf.cluster_id = cluster_arg;
        const auto bursts = r.engine->bursts(*r.dataset, bf, window, min_count);
        if (as_json) out["bursts"] = bursts_payload(bursts);
        else print_bursts(bursts, as_csv);
      }
      if (as_json) std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*hist_cmd) {
      auto r = resolve(dataset_arg, data_dir, format, std::nullopt);
      FilterState filter = base_filter(flags_arg, name_arg, "");
      if (!cluster_arg.empty()) filter.cluster_id = cluster_arg;
      std::optional<TimeSpan> span;
      if (!span_arg.empty()) span = base_filter("", "", span_arg).spans.front();
      std::optional<Granularity> g;
      if (!granularity_arg.empty()) g = parse_granularity(granularity_arg);
      const auto h = r.engine->histogram(*r.dataset, filter, span, g);
      if (as_json) {
        std::cout << histogram_payload(h).dump(2) << "\n";
        return 0;
      }
      const char* sep = as_csv ? "," : "  ";
      if (!as_csv) std::cout << "granularity: " << granularity_token(h.granularity) << "\n";
      std::cout << (as_csv ? "start" : "start               ") << sep << "m" << sep << "a" << sep << "c" << sep << "b"
                << sep << "context_m" << sep << "context_a" << sep << "context_c" << sep << "context_b\n";
      for (const auto& b : h.buckets) {
        std::cout << (as_csv ? std::to_string(b.start) : format_utc(b.start));
        for (auto v : b.matched.counts) std::cout << sep << v;
        for (auto v : b.context.counts) std::cout << sep << v;
        std::cout << "\n";
      }
      return 0;
    }

    if (*serve_cmd) {
      if (!config_path.empty()) apply_config_file(config_path, serve_cfg, *serve_cmd);
      return run_serve(serve_cfg);
    }

    if (*scenario_cmd) {
      const Scenario s = generate_scenario(seed, scale);
      fs::create_directories(out_dir);
      const auto stem = "scenario-" + std::to_string(seed) + "-" + std::to_string(scale);
      const auto body_path = fs::path(out_dir) / (stem + ".body");
      const auto manifest_file = fs::path(out_dir) / (stem + ".manifest.json");
      std::ofstream(body_path, std::ios::binary) << s.body;
      std::ofstream(manifest_file) << to_json(s.manifest).dump(2) << "\n";
      std::cout << body_path.string() << "\n" << manifest_file.string() << "\n";
      return 0;
    }

    if (*verify_cmd) {
      std::ifstream mf(manifest_path);
      if (!mf) throw UserError("cannot open manifest '" + manifest_path + "'");
      json mj;
      try {
        mj = json::parse(mf);
      } catch (const json::parse_error& e) {
        throw UserError(std::string("manifest is not valid JSON: ") + e.what());
      }
      const Manifest manifest = manifest_from_json(mj);
      Engine engine;
      const auto ds = engine.import_file(corpus_path, "", InputFormat::body);
      const VerifyReport report = verify_manifest(engine.view(*ds), manifest);
      if (as_json) {
        std::cout << to_json(report).dump(2) << "\n";
      } else {
        for (const auto& a : report.artifacts) {
          std::cout << (a.pass ? "PASS " : "FAIL ") << "artifact " << a.artifact_id;
          for (const auto& p : a.missing_paths) std::cout << " missing:" << p;
          for (const auto& c : a.clusters_failed) std::cout << " not-surfaced-by:" << c;
          std::cout << "\n";
        }
        for (const auto& c : report.clusters)
          std::cout << (c.pass ? "PASS " : "FAIL ") << "cluster " << c.cluster_id << " expected=" << c.expected
                    << " actual=" << c.actual << "\n";
        for (const auto& b : report.bursts)
          std::cout << (b.pass ? "PASS " : "FAIL ") << "burst near " << b.artifact_id << " found=" << b.overlapping.size()
                    << "\n";
        std::cout << (report.pass() ? "verification passed" : "verification FAILED") << "\n";
      }
      return report.pass() ? 0 : 1;
    }
  } catch (const UserError& e) {
    std::cerr << "timescope: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "timescope: " << error_token(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::ContractViolation ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "timescope: internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
