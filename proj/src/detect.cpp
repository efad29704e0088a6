#include "mcpaudit/detect.hpp"

#include "mcpaudit/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace mcpaudit {

namespace {

std::optional<std::string> read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

std::vector<std::string> raw_patterns_for(const SignatureDb& db, LanguageFamily family) {
    std::vector<std::string> patterns;
    for (const auto& sig : db.signatures) {
        if (sig.kind == SiteKind::Call && sig.applies_to(family_name(family))) {
            patterns.push_back(sig.pattern_text());
        }
    }
    return patterns;
}

} // namespace

bool segment_suffix_match(const std::vector<std::string>& segments, const std::vector<std::string>& pattern) {
    if (pattern.empty() || pattern.size() > segments.size()) {
        return false;
    }
    return std::equal(pattern.rbegin(), pattern.rend(), segments.rbegin());
}

std::vector<SignatureMatch> match_site(const CallSite& site, const SignatureDb& db, LanguageFamily family) {
    std::vector<SignatureMatch> matches;
    const auto family_str = family_name(family);
    for (const auto& sig : db.signatures) {
        if (sig.kind == site.kind && sig.applies_to(family_str) && segment_suffix_match(site.segments, sig.pattern)) {
            matches.push_back({sig.id, sig.category});
        }
    }
    std::sort(matches.begin(), matches.end(),
              [](const SignatureMatch& a, const SignatureMatch& b) { return a.signature_id < b.signature_id; });
    return matches;
}

bool finding_less(const Finding& a, const Finding& b) {
    return std::tie(a.file, a.line, a.column, a.signature_id) < std::tie(b.file, b.line, b.column, b.signature_id);
}

std::string_view to_string(ScanStatus status) {
    return status == ScanStatus::Scanned ? "SCANNED" : "UNACQUIRED";
}

std::optional<ScanStatus> parse_scan_status(std::string_view name) {
    if (name == "SCANNED") return ScanStatus::Scanned;
    if (name == "UNACQUIRED") return ScanStatus::Unacquired;
    return std::nullopt;
}

std::optional<RawFallback> parse_raw_fallback(std::string_view name) {
    if (name == "off") return RawFallback::Off;
    if (name == "on-error") return RawFallback::OnError;
    if (name == "all") return RawFallback::All;
    return std::nullopt;
}

PluginScanResult scan_plugin(const PluginRecord& record, const NormalizedTree& tree, const SignatureDb& db,
                             const ScanPolicy& policy) {
    PluginScanResult result;
    result.plugin_id = record.id;
    result.status = ScanStatus::Scanned;
    result.files_skipped = tree.skipped.size();

    for (const auto& file : tree.files) {
        const LanguageFamily family = identify_language(file.path);
        if (family == LanguageFamily::Unknown && policy.raw_fallback != RawFallback::All) {
            ++result.files_skipped;  // unknown-language
            continue;
        }
        const auto content = read_text(tree.root / file.path);
        if (!content) {
            ++result.files_skipped;  // unreadable
            continue;
        }

        std::vector<CallSite> sites;
        ScanMode mode = ScanMode::Lexical;
        if (family == LanguageFamily::Unknown) {
            sites = raw_scan(*content, raw_patterns_for(db, family));
            mode = ScanMode::Raw;
        } else {
            LexResult lexed = lex_call_sites(*content, family);
            if (lexed.ok()) {
                sites = std::move(lexed.sites);
            } else if (policy.raw_fallback == RawFallback::Off) {
                ++result.files_skipped;  // lexer failure, no fallback
                continue;
            } else {
                sites = raw_scan(*content, raw_patterns_for(db, family));
                mode = ScanMode::Raw;
                ++result.lexer_fallbacks;
            }
        }
        ++result.files_scanned;

        for (const auto& site : sites) {
            for (auto& match : match_site(site, db, family)) {
                result.findings.push_back({record.id, file.path, site.line, site.column, std::move(match.signature_id),
                                           match.category, site.raw_text, mode});
            }
        }
    }

    std::sort(result.findings.begin(), result.findings.end(), finding_less);
    const auto same_key = [](const Finding& a, const Finding& b) { return !finding_less(a, b) && !finding_less(b, a); };
    result.findings.erase(std::unique(result.findings.begin(), result.findings.end(), same_key),
                          result.findings.end());
    return result;
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, jobs), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

std::vector<PluginScanResult> scan_corpus(const std::vector<PluginRecord>& records, const SignatureDb& db,
                                          const ScanPolicy& policy, const CorpusOptions& options) {
    std::vector<PluginScanResult> results(records.size());
    std::mutex warn_mutex;
    auto warn = [&](const std::string& message) {
        if (options.warn) {
            std::lock_guard lock(warn_mutex);
            options.warn(message);
        }
    };

    parallel_for(records.size(), policy.jobs, [&](std::size_t i) {
        const PluginRecord& record = records[i];
        try {
            const fs::path root = acquire(record, options.workdir, options.acquire);
            const NormalizedTree tree = normalize_tree(root, options.prune);
            results[i] = scan_plugin(record, tree, db, policy);
        } catch (const std::exception& e) {
            warn("plugin '" + record.id + "' unacquired: " + e.what());
            PluginScanResult failed;
            failed.plugin_id = record.id;
            failed.status = ScanStatus::Unacquired;
            results[i] = std::move(failed);
        }
    });
    return results;
}

} // namespace mcpaudit
