#pragma once

// Corpus-level measurement views and run-to-run diffs.

#include "mcpaudit/corpus.hpp"
#include "mcpaudit/detect.hpp"
#include "mcpaudit/sigdb.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mcpaudit {

enum class StarBucket : std::uint8_t { UpTo10, UpTo100, UpTo1000, UpTo10000, UpTo50000, Above50000 };

inline constexpr std::array<StarBucket, 6> kStarBuckets = {StarBucket::UpTo10,    StarBucket::UpTo100,
                                                            StarBucket::UpTo1000,  StarBucket::UpTo10000,
                                                            StarBucket::UpTo50000, StarBucket::Above50000};

std::string_view to_string(StarBucket bucket);  // "0-10", ..., "50000+"

// Inclusive bounds: [0,10] [11,100] [101,1000] [1001,10000] [10001,50000] [50001,inf).
StarBucket bucket_for_stars(std::uint64_t stars);

// Indexed by ResourceCategory: FILE, MEMORY, NETWORK, SYSTEM.
using ResourceCounts = std::array<std::uint64_t, 4>;

inline std::uint64_t& at(ResourceCounts& counts, ResourceCategory c) {
    return counts[static_cast<std::size_t>(c)];
}
inline std::uint64_t at(const ResourceCounts& counts, ResourceCategory c) {
    return counts[static_cast<std::size_t>(c)];
}

struct TableRow {
    std::string label;
    ResourceCounts counts{};
    std::uint64_t total = 0;  // sum of the four cells

    bool operator==(const TableRow&) const = default;
};

enum class Dimension : std::uint8_t { Category, Stars };

struct AggregateReport {
    ResourceCounts servers_affected{};
    std::vector<TableRow> calls_by_category;  // 23 rows, enum order
    std::vector<TableRow> calls_by_stars;     // 6 rows, ascending
    std::uint64_t corpus_size = 0;
    std::uint64_t unacquired = 0;

    bool operator==(const AggregateReport&) const = default;
};

// Plugins with at least one finding in each category.
ResourceCounts servers_affected(const std::vector<PluginScanResult>& results);

// Finding counts per row of the chosen dimension; every row is present.
// Throws ConsistencyError if a result has no matching record.
std::vector<TableRow> calls_by_dimension(const std::vector<PluginScanResult>& results,
                                         const std::vector<PluginRecord>& records, Dimension dimension);

AggregateReport aggregate(const std::vector<PluginScanResult>& results, const std::vector<PluginRecord>& records);

// ---- run diffs ----

struct DiffEntry {
    std::string file;
    std::string signature_id;
    ResourceCategory category = ResourceCategory::File;
    std::string matched_text;
    std::uint32_t line = 0;  // location in the run the entry comes from

    bool operator==(const DiffEntry&) const = default;
};

struct PluginDiff {
    std::string plugin_id;
    std::vector<DiffEntry> added;
    std::vector<DiffEntry> removed;
    std::optional<std::pair<ScanStatus, ScanStatus>> status_change;

    bool operator==(const PluginDiff&) const = default;
};

struct DiffReport {
    std::vector<PluginDiff> plugins;           // only plugins with changes, sorted by id
    std::vector<std::string> plugins_added;    // present only in current
    std::vector<std::string> plugins_removed;  // present only in previous
    std::array<std::int64_t, 4> calls_delta{};
    std::array<std::int64_t, 4> servers_delta{};

    bool empty() const;
    bool operator==(const DiffReport&) const = default;
};

// One side of a comparison: an export's schema version, aggregates and
// per-plugin findings.
struct RunSnapshot {
    int schema_version = 1;
    const AggregateReport* aggregates = nullptr;
    const std::vector<PluginScanResult>* plugins = nullptr;
};

// Findings are keyed by (file, signature id, hash of matched text) with
// multiset semantics; line numbers are not part of the key.
// Throws VersionError if the schema versions differ.
DiffReport diff_runs(const RunSnapshot& previous, const RunSnapshot& current);

} // namespace mcpaudit
