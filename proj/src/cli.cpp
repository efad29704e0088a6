#include "mcpaudit/cli.hpp"

#include "mcpaudit/aggregate.hpp"
#include "mcpaudit/corpus.hpp"
#include "mcpaudit/detect.hpp"
#include "mcpaudit/error.hpp"
#include "mcpaudit/report.hpp"
#include "mcpaudit/sigdb.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace mcpaudit {

namespace {

struct RunConfig {
    std::string manifest_path;
    std::string workdir;
    std::vector<std::string> db_paths;
    std::string out_dir = "mcp-audit-out";
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::optional<std::string> prune;
    std::uint64_t max_file_bytes = 1u << 20;
    std::string raw_fallback = "on-error";
    bool archive = false;
    std::string archive_dir = ".mcp-audit";
    std::optional<std::string> timestamp;
    bool lenient = false;
};

std::optional<std::string> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

bool write_bytes(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return static_cast<bool>(out);
}

std::set<std::string> split_list(const std::string& list) {
    std::set<std::string> items;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) {
            items.insert(item.substr(b, e - b + 1));
        }
    }
    return items;
}

int cmd_scan(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const fs::path manifest_path(cfg.manifest_path);
    const auto manifest_bytes = read_bytes(manifest_path);
    if (!manifest_bytes) {
        err << "error: cannot read manifest '" << cfg.manifest_path << "'\n";
        return kExitFatal;
    }
    if (cfg.jobs < 1) {
        err << "error: --jobs must be >= 1\n";
        return kExitFatal;
    }
    const auto policy_mode = parse_raw_fallback(cfg.raw_fallback);
    if (!policy_mode) {
        err << "error: --raw-fallback must be one of off, on-error, all (got '" << cfg.raw_fallback << "')\n";
        return kExitFatal;
    }
    if (cfg.timestamp && !is_rfc3339_utc(*cfg.timestamp)) {
        err << "error: --timestamp '" << *cfg.timestamp << "' is not an RFC 3339 UTC timestamp\n";
        return kExitFatal;
    }

    std::vector<PluginRecord> records;
    try {
        std::istringstream in(*manifest_bytes);
        records = parse_manifest(in, cfg.lenient ? ManifestMode::Lenient : ManifestMode::Strict);
    } catch (const Error& e) {
        err << "error: " << cfg.manifest_path << ": " << e.what() << "\n";
        return kExitFatal;
    }
    DedupResult dedup = dedup_manifest(std::move(records));
    for (const auto& d : dedup.dropped) {
        err << "warning: dropped '" << d.record.id << "': " << d.reason << "\n";
    }

    SignatureDb db = builtin_db();
    for (const auto& path : cfg.db_paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            err << "error: cannot read signature database '" << path << "'\n";
            return kExitFatal;
        }
        try {
            db = merge(db, load_db(in, path));
        } catch (const Error& e) {
            err << "error: " << path << ": " << e.what() << "\n";
            return kExitFatal;
        }
    }

    const fs::path out_dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        err << "error: cannot create output directory '" << cfg.out_dir << "': " << ec.message() << "\n";
        return kExitFatal;
    }

    CorpusOptions options;
    options.workdir = cfg.workdir.empty() ? out_dir / "work" : fs::path(cfg.workdir);
    options.acquire.base_dir = fs::absolute(manifest_path).parent_path();
    options.acquire.preserve_dir = cfg.archive_dir;
    if (cfg.prune) {
        options.prune.prune_dirs = split_list(*cfg.prune);
    }
    options.prune.max_file_bytes = cfg.max_file_bytes;
    options.prune.archive_dir = cfg.archive_dir;
    options.warn = [&err](const std::string& message) { err << "warning: " << message << "\n"; };

    ScanPolicy policy;
    policy.jobs = cfg.jobs;
    policy.raw_fallback = *policy_mode;

    std::vector<PluginScanResult> results = scan_corpus(dedup.kept, db, policy, options);
    RunExport run = build_run(std::move(dedup.kept), std::move(dedup.dropped), std::move(results), db,
                              *manifest_bytes, cfg.timestamp.value_or(utc_timestamp_now()));

    const std::pair<const char*, std::string> outputs[] = {
        {"run.json", export_json(run)},
        {"report.md", render_markdown(run)},
        {"fig2.csv", emit_chart_csv(run, ChartView::Fig2)},
        {"table2.csv", emit_chart_csv(run, ChartView::Table2)},
        {"table3.csv", emit_chart_csv(run, ChartView::Table3)},
    };
    for (const auto& [name, body] : outputs) {
        if (!write_bytes(out_dir / name, body)) {
            err << "error: cannot write '" << (out_dir / name).string() << "'\n";
            return kExitFatal;
        }
    }

    if (cfg.archive) {
        for (const auto& p : run.plugins) {
            if (p.status != ScanStatus::Scanned) {
                continue;
            }
            const auto outcome = archive_run(run, p.plugin_id, options.workdir / p.plugin_id, cfg.archive_dir);
            if (!outcome.path) {
                err << "warning: " << outcome.warning << "\n";
            }
        }
    }

    std::uint64_t findings = 0;
    for (const auto& p : run.plugins) {
        findings += p.findings.size();
    }
    out << "scanned " << run.aggregates.corpus_size << " plugins (" << run.aggregates.unacquired
        << " unacquired), " << findings << " findings; run " << run.run_id << " written to " << out_dir.string()
        << "\n";
    return kExitOk;
}

int cmd_db_validate(const std::string& path, std::ostream& out, std::ostream& err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        err << "error: cannot read '" << path << "'\n";
        return kExitFatal;
    }
    try {
        const SignatureDb db = load_db(in, path);
        out << path << ": ok, " << db.signatures.size() << " signatures\n";
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << path << ": " << e.what() << "\n";
        return kExitFatal;
    }
}

int cmd_diff(const std::string& old_path, const std::string& new_path, std::ostream& out, std::ostream& err) {
    std::optional<RunExport> runs[2];
    const std::string* paths[2] = {&old_path, &new_path};
    for (int i = 0; i < 2; ++i) {
        const auto bytes = read_bytes(*paths[i]);
        if (!bytes) {
            err << "error: cannot read '" << *paths[i] << "'\n";
            return kExitFatal;
        }
        try {
            runs[i] = parse_export(*bytes);
        } catch (const Error& e) {
            err << "error: " << *paths[i] << ": " << e.what() << "\n";
            return kExitFatal;
        }
    }
    try {
        const DiffReport diff = diff_runs(*runs[0], *runs[1]);
        out << render_diff_markdown(diff);
        return diff.empty() ? kExitOk : kExitDiffFound;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFatal;
    }
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Static scanner for security-sensitive API usage in MCP server repositories", "mcp-audit"};
    app.require_subcommand(1);

    RunConfig cfg;
    auto* scan = app.add_subcommand("scan", "Scan every plugin listed in a manifest");
    scan->add_option("--manifest", cfg.manifest_path, "JSON Lines plugin manifest")->required();
    scan->add_option("--workdir", cfg.workdir, "Where plugin sources are materialized (default: <out>/work)");
    scan->add_option("--db", cfg.db_paths, "Signature database overlay; repeatable, applied in order");
    scan->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
    scan->add_option("--jobs", cfg.jobs, "Parallel plugin workers")->capture_default_str();
    scan->add_option("--prune", cfg.prune, "Comma-separated directory names to skip (replaces the default set)");
    scan->add_option("--max-file-bytes", cfg.max_file_bytes, "Skip files larger than this")->capture_default_str();
    scan->add_option("--raw-fallback", cfg.raw_fallback, "off | on-error | all")->capture_default_str();
    scan->add_flag("--archive", cfg.archive, "Archive each plugin's results inside its tree");
    scan->add_option("--archive-dir", cfg.archive_dir, "Archive directory name")->capture_default_str();
    scan->add_option("--timestamp", cfg.timestamp, "Pin the run timestamp (RFC 3339 UTC)");
    scan->add_flag("--lenient", cfg.lenient, "Ignore unknown manifest keys");

    std::string db_file;
    auto* db = app.add_subcommand("db", "Signature database utilities");
    db->require_subcommand(1);
    auto* validate = db->add_subcommand("validate", "Validate a signature database file");
    validate->add_option("file", db_file)->required();
    auto* print_builtin = db->add_subcommand("print-builtin", "Print the built-in database as JSON");

    std::string old_export;
    std::string new_export;
    auto* diff = app.add_subcommand("diff", "Compare two run exports (exit 2 when they differ)");
    diff->add_option("old", old_export)->required();
    diff->add_option("new", new_export)->required();

    std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"mcp-audit"} : args;
    std::vector<char*> argv;
    for (auto& a : storage) {
        argv.push_back(a.data());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitFatal;
    }

    try {
        if (scan->parsed()) {
            return cmd_scan(cfg, out, err);
        }
        if (validate->parsed()) {
            return cmd_db_validate(db_file, out, err);
        }
        if (print_builtin->parsed()) {
            out << db_to_json(builtin_db()).dump(2) << "\n";
            return kExitOk;
        }
        if (diff->parsed()) {
            return cmd_diff(old_export, new_export, out, err);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}

} // namespace mcpaudit
