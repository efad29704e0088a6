#pragma once

// Signature databases: the named API patterns the detector looks for.

#include "json.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcpaudit {

enum class ResourceCategory : std::uint8_t { File, Memory, Network, System };

inline constexpr std::array<ResourceCategory, 4> kResourceCategories = {
    ResourceCategory::File, ResourceCategory::Memory, ResourceCategory::Network, ResourceCategory::System};

std::string_view to_string(ResourceCategory category);  // "FILE", ...
std::optional<ResourceCategory> parse_resource_category(std::string_view name);

enum class SiteKind : std::uint8_t { Call, Import };

std::string_view to_string(SiteKind kind);  // "call" / "import"
std::optional<SiteKind> parse_site_kind(std::string_view name);

inline constexpr std::string_view kAnyLanguage = "*";
inline constexpr std::size_t kMaxPatternSegments = 8;

struct Signature {
    std::string id;
    ResourceCategory category = ResourceCategory::File;
    std::vector<std::string> pattern;  // identifier segments
    SiteKind kind = SiteKind::Call;
    std::vector<std::string> languages = {std::string(kAnyLanguage)};
    std::string risk;

    std::string pattern_text() const;
    bool applies_to(std::string_view family_name) const;
    // Single-segment patterns such as `read` match very broadly.
    bool low_specificity() const { return pattern.size() == 1; }

    bool operator==(const Signature&) const = default;
};

struct ProvenanceEntry {
    std::string source;
    std::size_t count = 0;

    bool operator==(const ProvenanceEntry&) const = default;
};

struct SignatureDb {
    std::uint32_t version = 1;
    std::vector<Signature> signatures;  // sorted by id, ids unique
    std::vector<ProvenanceEntry> provenance;

    const Signature* find(std::string_view id) const;
    bool operator==(const SignatureDb&) const = default;
};

bool is_identifier(std::string_view s);

// Splits "a.b.c" into segments. Throws ValidationError on an empty or
// malformed segment or more than kMaxPatternSegments segments.
std::vector<std::string> parse_pattern(std::string_view dotted);

SignatureDb builtin_db();

// Throws ParseError on malformed JSON and ValidationError (naming the
// signature id and field) on invariant violations.
SignatureDb load_db(std::istream& input, std::string source_name = "<input>");

// Overlay entries replace base entries with the same id; result sorted by id.
SignatureDb merge(const SignatureDb& base, const SignatureDb& overlay);

nlohmann::json signature_to_json(const Signature& sig);
Signature signature_from_json(const nlohmann::json& obj);

// The on-disk document form ({"version":..,"signatures":[..]}).
nlohmann::json db_to_json(const SignatureDb& db);

} // namespace mcpaudit
