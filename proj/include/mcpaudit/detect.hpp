#pragma once

// Signature matching and whole-plugin / whole-corpus scans.

#include "mcpaudit/corpus.hpp"
#include "mcpaudit/lexscan.hpp"
#include "mcpaudit/sigdb.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mcpaudit {

struct SignatureMatch {
    std::string signature_id;
    ResourceCategory category = ResourceCategory::File;

    bool operator==(const SignatureMatch&) const = default;
};

// True iff `pattern` equals the trailing pattern.size() entries of `segments`.
bool segment_suffix_match(const std::vector<std::string>& segments, const std::vector<std::string>& pattern);

// All signatures matching the site (kind, language, segment-aligned suffix),
// sorted by signature id.
std::vector<SignatureMatch> match_site(const CallSite& site, const SignatureDb& db, LanguageFamily family);

struct Finding {
    std::string plugin_id;
    std::string file;
    std::uint32_t line = 1;
    std::uint32_t column = 1;
    std::string signature_id;
    ResourceCategory category = ResourceCategory::File;
    std::string matched_text;
    ScanMode mode = ScanMode::Lexical;

    bool operator==(const Finding&) const = default;
};

// (file, line, column, signature_id)
bool finding_less(const Finding& a, const Finding& b);

enum class ScanStatus : std::uint8_t { Scanned, Unacquired };

std::string_view to_string(ScanStatus status);  // "SCANNED" / "UNACQUIRED"
std::optional<ScanStatus> parse_scan_status(std::string_view name);

struct PluginScanResult {
    std::string plugin_id;
    std::vector<Finding> findings;  // sorted by finding_less, unique
    std::uint64_t files_scanned = 0;
    std::uint64_t files_skipped = 0;
    std::uint64_t lexer_fallbacks = 0;
    ScanStatus status = ScanStatus::Scanned;

    bool operator==(const PluginScanResult&) const = default;
};

enum class RawFallback : std::uint8_t { Off, OnError, All };

std::optional<RawFallback> parse_raw_fallback(std::string_view name);  // off / on-error / all

struct ScanPolicy {
    RawFallback raw_fallback = RawFallback::OnError;
    unsigned jobs = 1;
};

PluginScanResult scan_plugin(const PluginRecord& record, const NormalizedTree& tree, const SignatureDb& db,
                             const ScanPolicy& policy);

struct CorpusOptions {
    fs::path workdir;
    AcquireOptions acquire;
    PruneConfig prune;
    // Receives per-plugin warnings (acquisition failures); may be called from
    // worker threads, but never concurrently.
    std::function<void(const std::string&)> warn;
};

// Acquires, normalizes and scans each record. Results are in record order and
// independent of policy.jobs.
std::vector<PluginScanResult> scan_corpus(const std::vector<PluginRecord>& records, const SignatureDb& db,
                                          const ScanPolicy& policy, const CorpusOptions& options);

// Runs fn(i) for i in [0, count) on up to `jobs` threads.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn);

} // namespace mcpaudit
