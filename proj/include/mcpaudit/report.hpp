#pragma once

// Run exports: canonical JSON, Markdown reports, chart CSVs and per-plugin
// run archives.

#include "mcpaudit/aggregate.hpp"
#include "mcpaudit/corpus.hpp"
#include "mcpaudit/detect.hpp"
#include "mcpaudit/sigdb.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcpaudit {

inline constexpr int kSchemaVersion = 1;

struct RunExport {
    int schema_version = kSchemaVersion;
    std::string run_id;
    std::string timestamp;  // RFC 3339, UTC
    std::vector<ProvenanceEntry> db_provenance;
    std::vector<Signature> signatures;  // the active database, sorted by id
    std::string manifest_digest;        // sha256 of the manifest bytes
    std::vector<PluginRecord> manifest;  // records that were scanned
    std::vector<DroppedRecord> dropped;  // removed by dedup
    std::vector<PluginScanResult> plugins;  // manifest order
    AggregateReport aggregates;

    bool operator==(const RunExport&) const = default;
};

// Current UTC time, millisecond precision, e.g. 2026-10-16T14:55:00.123Z.
std::string utc_timestamp_now();
bool is_rfc3339_utc(std::string_view timestamp);
// Filesystem-safe id derived from the timestamp and manifest digest.
std::string make_run_id(std::string_view timestamp, std::string_view manifest_digest);

RunExport build_run(std::vector<PluginRecord> records, std::vector<DroppedRecord> dropped,
                    std::vector<PluginScanResult> results, const SignatureDb& db, std::string_view manifest_bytes,
                    std::string timestamp);

// Canonical form: sorted keys, 2-space indent, LF, trailing newline. A pinned
// timestamp replaces run.timestamp in the output.
std::string export_json(const RunExport& run, const std::optional<std::string>& pinned_timestamp = std::nullopt);

// Throws ParseError on malformed documents and VersionError when
// schema_version is not kSchemaVersion.
RunExport parse_export(std::string_view document);

std::string render_markdown(const RunExport& run);

enum class ChartView : std::uint8_t { Fig2, Table2, Table3 };

std::string emit_chart_csv(const RunExport& run, ChartView view);

// The export restricted to one plugin, with aggregates recomputed for it.
RunExport slice_run(const RunExport& run, std::string_view plugin_id);

struct ArchiveOutcome {
    std::optional<std::filesystem::path> path;
    std::string warning;  // set when the archive could not be written
};

// Writes <plugin_root>/<archive_dir>/run-<run_id>.json holding the plugin's
// slice; earlier archives are left in place.
ArchiveOutcome archive_run(const RunExport& run, std::string_view plugin_id, const std::filesystem::path& plugin_root,
                           std::string_view archive_dir = ".mcp-audit");

DiffReport diff_runs(const RunExport& previous, const RunExport& current);

std::string render_diff_markdown(const DiffReport& diff);

} // namespace mcpaudit
