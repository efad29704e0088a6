#include "mcpaudit/aggregate.hpp"

#include "mcpaudit/error.hpp"
#include "mcpaudit/hash.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

namespace mcpaudit {

namespace {

constexpr std::array<std::string_view, 6> kBucketLabels = {"0-10",        "11-100",      "101-1000",
                                                           "1001-10000",  "10001-50000", "50000+"};

ResourceCounts column_sums(const std::vector<TableRow>& rows) {
    ResourceCounts sums{};
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < sums.size(); ++c) {
            sums[c] += row.counts[c];
        }
    }
    return sums;
}

using FindingKey = std::tuple<std::string, std::string, std::string>;

std::map<FindingKey, std::vector<const Finding*>> key_findings(const PluginScanResult& result) {
    std::map<FindingKey, std::vector<const Finding*>> keyed;
    for (const auto& f : result.findings) {
        keyed[{f.file, f.signature_id, sha256_hex(f.matched_text)}].push_back(&f);
    }
    return keyed;
}

DiffEntry entry_for(const Finding& f) {
    return {f.file, f.signature_id, f.category, f.matched_text, f.line};
}

} // namespace

std::string_view to_string(StarBucket bucket) {
    return kBucketLabels.at(static_cast<std::size_t>(bucket));
}

StarBucket bucket_for_stars(std::uint64_t stars) {
    if (stars <= 10) return StarBucket::UpTo10;
    if (stars <= 100) return StarBucket::UpTo100;
    if (stars <= 1000) return StarBucket::UpTo1000;
    if (stars <= 10000) return StarBucket::UpTo10000;
    if (stars <= 50000) return StarBucket::UpTo50000;
    return StarBucket::Above50000;
}

ResourceCounts servers_affected(const std::vector<PluginScanResult>& results) {
    ResourceCounts counts{};
    for (const auto& result : results) {
        std::array<bool, 4> seen{};
        for (const auto& f : result.findings) {
            seen[static_cast<std::size_t>(f.category)] = true;
        }
        for (std::size_t c = 0; c < seen.size(); ++c) {
            counts[c] += seen[c] ? 1 : 0;
        }
    }
    return counts;
}

std::vector<TableRow> calls_by_dimension(const std::vector<PluginScanResult>& results,
                                         const std::vector<PluginRecord>& records, Dimension dimension) {
    std::vector<TableRow> rows;
    if (dimension == Dimension::Category) {
        for (const auto category : all_application_categories()) {
            rows.push_back({std::string(to_string(category)), {}, 0});
        }
    } else {
        for (const auto bucket : kStarBuckets) {
            rows.push_back({std::string(to_string(bucket)), {}, 0});
        }
    }

    std::unordered_map<std::string, const PluginRecord*> by_id;
    for (const auto& rec : records) {
        by_id.emplace(rec.id, &rec);
    }
    for (const auto& result : results) {
        const auto it = by_id.find(result.plugin_id);
        if (it == by_id.end()) {
            throw ConsistencyError("scan result for unknown plugin '" + result.plugin_id + "'");
        }
        const std::size_t row = dimension == Dimension::Category
                                    ? static_cast<std::size_t>(it->second->category)
                                    : static_cast<std::size_t>(bucket_for_stars(it->second->stars));
        for (const auto& f : result.findings) {
            ++at(rows[row].counts, f.category);
        }
    }
    for (auto& row : rows) {
        row.total = 0;
        for (const auto n : row.counts) {
            row.total += n;
        }
    }
    return rows;
}

AggregateReport aggregate(const std::vector<PluginScanResult>& results, const std::vector<PluginRecord>& records) {
    AggregateReport report;
    report.servers_affected = servers_affected(results);
    report.calls_by_category = calls_by_dimension(results, records, Dimension::Category);
    report.calls_by_stars = calls_by_dimension(results, records, Dimension::Stars);
    report.corpus_size = results.size();
    report.unacquired = static_cast<std::uint64_t>(std::count_if(
        results.begin(), results.end(), [](const PluginScanResult& r) { return r.status == ScanStatus::Unacquired; }));
    return report;
}

bool DiffReport::empty() const {
    const auto zero = [](std::int64_t v) { return v == 0; };
    return plugins.empty() && plugins_added.empty() && plugins_removed.empty() &&
           std::all_of(calls_delta.begin(), calls_delta.end(), zero) &&
           std::all_of(servers_delta.begin(), servers_delta.end(), zero);
}

DiffReport diff_runs(const RunSnapshot& previous, const RunSnapshot& current) {
    if (previous.schema_version != current.schema_version) {
        throw VersionError("cannot diff schema_version " + std::to_string(previous.schema_version) + " against " +
                           std::to_string(current.schema_version));
    }
    DiffReport diff;

    std::map<std::string, const PluginScanResult*> prev_by_id;
    std::map<std::string, const PluginScanResult*> cur_by_id;
    for (const auto& p : *previous.plugins) prev_by_id.emplace(p.plugin_id, &p);
    for (const auto& p : *current.plugins) cur_by_id.emplace(p.plugin_id, &p);

    for (const auto& [id, prev] : prev_by_id) {
        if (!cur_by_id.contains(id)) {
            diff.plugins_removed.push_back(id);
        }
    }
    for (const auto& [id, cur] : cur_by_id) {
        const auto prev_it = prev_by_id.find(id);
        if (prev_it == prev_by_id.end()) {
            diff.plugins_added.push_back(id);
            continue;
        }
        const PluginScanResult& prev = *prev_it->second;
        PluginDiff pd;
        pd.plugin_id = id;
        if (prev.status != cur->status) {
            pd.status_change = std::make_pair(prev.status, cur->status);
        }
        const auto prev_keys = key_findings(prev);
        const auto cur_keys = key_findings(*cur);
        std::set<FindingKey> all_keys;
        for (const auto& [k, v] : prev_keys) all_keys.insert(k);
        for (const auto& [k, v] : cur_keys) all_keys.insert(k);
        for (const auto& key : all_keys) {
            static const std::vector<const Finding*> kNone;
            const auto p = prev_keys.find(key);
            const auto c = cur_keys.find(key);
            const auto& pv = p == prev_keys.end() ? kNone : p->second;
            const auto& cv = c == cur_keys.end() ? kNone : c->second;
            for (std::size_t i = pv.size(); i < cv.size(); ++i) {
                pd.added.push_back(entry_for(*cv[i]));
            }
            for (std::size_t i = cv.size(); i < pv.size(); ++i) {
                pd.removed.push_back(entry_for(*pv[i]));
            }
        }
        if (!pd.added.empty() || !pd.removed.empty() || pd.status_change) {
            diff.plugins.push_back(std::move(pd));
        }
    }

    const ResourceCounts prev_calls = column_sums(previous.aggregates->calls_by_category);
    const ResourceCounts cur_calls = column_sums(current.aggregates->calls_by_category);
    for (std::size_t c = 0; c < 4; ++c) {
        diff.calls_delta[c] = static_cast<std::int64_t>(cur_calls[c]) - static_cast<std::int64_t>(prev_calls[c]);
        diff.servers_delta[c] = static_cast<std::int64_t>(current.aggregates->servers_affected[c]) -
                                static_cast<std::int64_t>(previous.aggregates->servers_affected[c]);
    }
    return diff;
}

} // namespace mcpaudit
