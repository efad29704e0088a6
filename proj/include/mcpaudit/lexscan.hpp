#pragma once

// Comment- and string-aware extraction of qualified call sites and imports,
// plus the regex-style RAW fallback scanner.

#include "mcpaudit/sigdb.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcpaudit {

enum class LanguageFamily : std::uint8_t { Python, CFamily, Unknown };

// "python", "c-family", "unknown": the names signature language lists use.
std::string_view family_name(LanguageFamily family);

// Extension-based and case-insensitive.
LanguageFamily identify_language(std::string_view path);

enum class ScanMode : std::uint8_t { Lexical, Raw };

std::string_view to_string(ScanMode mode);  // "LEXICAL" / "RAW"
std::optional<ScanMode> parse_scan_mode(std::string_view name);

struct CallSite {
    std::vector<std::string> segments;
    std::uint32_t line = 1;    // 1-based
    std::uint32_t column = 1;  // 1-based, in code points
    SiteKind kind = SiteKind::Call;
    std::string raw_text;      // the dotted path exactly as written

    bool operator==(const CallSite&) const = default;
};

struct LexFailure {
    std::string reason;
    std::uint32_t line = 1;
    std::uint32_t column = 1;
};

struct LexResult {
    std::vector<CallSite> sites;     // (line, column) order; empty on failure
    std::optional<LexFailure> failure;

    bool ok() const { return !failure.has_value(); }
};

// `family` must be Python or CFamily; Unknown yields an immediate failure.
LexResult lex_call_sites(std::string_view content, LanguageFamily family);

// Every occurrence of `(?<![A-Za-z0-9_.])<pattern>\s*\(` for each dotted
// pattern, comments and strings included. Duplicate patterns are scanned once.
std::vector<CallSite> raw_scan(std::string_view content, const std::vector<std::string>& patterns);

} // namespace mcpaudit
