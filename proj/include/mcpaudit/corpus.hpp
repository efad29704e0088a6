#pragma once

// Manifest ingestion, source acquisition and source-tree normalization.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mcpaudit {

namespace fs = std::filesystem;

// The closed set of marketplace application categories, in report row order.
enum class ApplicationCategory : std::uint8_t {
    ApiDevelopment,
    AnalyticsMonitoring,
    BrowserAutomation,
    CloudInfrastructure,
    CollaborationTools,
    ContentManagement,
    DataScienceMl,
    DatabaseManagement,
    DeploymentDevOps,
    DesignTools,
    DeveloperTools,
    EcommerceSolutions,
    Featured,
    GameDevelopment,
    LearningDocumentation,
    MarketingAutomation,
    MobileDevelopment,
    Official,
    Other,
    ProductivityWorkflow,
    SecurityTesting,
    SocialMediaManagement,
    WebScrapingDataCollection,
};

inline constexpr std::size_t kApplicationCategoryCount = 23;

const std::array<ApplicationCategory, kApplicationCategoryCount>& all_application_categories();
std::string_view to_string(ApplicationCategory category);
std::optional<ApplicationCategory> parse_application_category(std::string_view name);

struct PluginRecord {
    std::string id;
    std::string name;
    std::string source;
    ApplicationCategory category = ApplicationCategory::Other;
    std::uint64_t stars = 0;
    std::optional<std::string> language_hint;
    std::vector<std::string> tags;

    bool operator==(const PluginRecord&) const = default;
};

enum class ManifestMode { Strict, Lenient };

// Parses a JSON Lines manifest. Blank lines are ignored; line numbers in
// errors are 1-based physical lines.
std::vector<PluginRecord> parse_manifest(std::istream& input, ManifestMode mode = ManifestMode::Strict);

struct DroppedRecord {
    PluginRecord record;
    std::string reason;

    bool operator==(const DroppedRecord&) const = default;
};

struct DedupResult {
    std::vector<PluginRecord> kept;
    std::vector<DroppedRecord> dropped;
};

bool is_url_source(std::string_view source);

// Trailing slashes and a ".git" suffix are stripped; URL scheme and host are
// lowercased.
std::string canonical_source(std::string_view source);

DedupResult dedup_manifest(std::vector<PluginRecord> records);

struct AcquireOptions {
    // Relative local sources resolve against this directory.
    fs::path base_dir = fs::current_path();
    // Subdirectory of a previous materialization that survives re-acquisition.
    std::string preserve_dir = ".mcp-audit";
};

// Materializes the plugin under workdir/<id>/: local directories are copied,
// URLs are shallow-cloned with git. Throws AcquisitionError.
fs::path acquire(const PluginRecord& record, const fs::path& workdir, const AcquireOptions& options = {});

inline constexpr std::string_view kSkipPrunedDir = "pruned-dir";
inline constexpr std::string_view kSkipOversize = "oversize";
inline constexpr std::string_view kSkipBinary = "binary";
inline constexpr std::string_view kSkipUnreadable = "unreadable";

struct PruneConfig {
    std::set<std::string> prune_dirs = default_prune_dirs();
    std::uint64_t max_file_bytes = 1u << 20;
    // Always pruned in addition to prune_dirs; holds our own run archives.
    std::string archive_dir = ".mcp-audit";

    static std::set<std::string> default_prune_dirs();
};

struct TreeFile {
    std::string path;  // relative, '/' separated
    std::uint64_t size = 0;
    std::string sha256;

    bool operator==(const TreeFile&) const = default;
};

struct SkippedFile {
    std::string path;
    std::string reason;

    bool operator==(const SkippedFile&) const = default;
};

struct NormalizedTree {
    fs::path root;
    std::vector<TreeFile> files;       // sorted by path
    std::vector<SkippedFile> skipped;  // sorted by path
    // Files in which this pass replaced invalid UTF-8 with U+FFFD.
    std::vector<std::string> lossy;
};

// Normalizes every retained file in place: UTF-8 (BOM stripped, UTF-16 with a
// BOM transcoded, invalid sequences replaced) and LF line endings.
NormalizedTree normalize_tree(const fs::path& root, const PruneConfig& config = {});

// The in-memory transformation applied to each retained file.
std::string normalize_text(std::string_view bytes, bool* lossy = nullptr);

} // namespace mcpaudit
