#include "mcpaudit/corpus.hpp"

#include "mcpaudit/error.hpp"
#include "mcpaudit/hash.hpp"

#include "json.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <system_error>

extern char** environ;

namespace mcpaudit {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kApplicationCategoryCount> kCategoryNames = {
    "API Development",
    "Analytics & Monitoring",
    "Browser Automation",
    "Cloud Infrastructure",
    "Collaboration Tools",
    "Content Management",
    "Data Science & ML",
    "Database Management",
    "Deployment & DevOps",
    "Design Tools",
    "Developer Tools",
    "E-commerce Solutions",
    "Featured",
    "Game Development",
    "Learning & Documentation",
    "Marketing Automation",
    "Mobile Development",
    "Official",
    "Other",
    "Productivity & Workflow",
    "Security & Testing",
    "Social Media Management",
    "Web Scraping & Data Collection",
};

std::string line_prefix(std::size_t line) {
    return "manifest line " + std::to_string(line) + ": ";
}

bool valid_plugin_id(std::string_view id) {
    if (id.empty() || id == "." || id == "..") {
        return false;
    }
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '.' || c == '_' || c == '-';
    });
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ValidationError(line_prefix(line) + "missing required key '" + key + "'");
    }
    if (!it->is_string()) {
        throw ValidationError(line_prefix(line) + "key '" + key + "' must be a string");
    }
    return it->get<std::string>();
}

PluginRecord record_from_json(const json& obj, std::size_t line, ManifestMode mode) {
    static const std::set<std::string> kKnownKeys = {"id", "name", "source", "category",
                                                     "stars", "language_hint", "tags"};
    if (!obj.is_object()) {
        throw ParseError(line_prefix(line) + "expected a JSON object");
    }
    if (mode == ManifestMode::Strict) {
        for (const auto& [key, value] : obj.items()) {
            if (!kKnownKeys.contains(key)) {
                throw ValidationError(line_prefix(line) + "unknown key '" + key + "'");
            }
        }
    }

    PluginRecord rec;
    rec.id = require_string(obj, "id", line);
    if (!valid_plugin_id(rec.id)) {
        throw ValidationError(line_prefix(line) + "invalid id '" + rec.id +
                              "' (expected nonempty [A-Za-z0-9._-]+)");
    }
    rec.name = require_string(obj, "name", line);
    rec.source = require_string(obj, "source", line);
    if (rec.source.empty()) {
        throw ValidationError(line_prefix(line) + "empty source for id '" + rec.id + "'");
    }

    const std::string category = require_string(obj, "category", line);
    const auto parsed = parse_application_category(category);
    if (!parsed) {
        throw ValidationError(line_prefix(line) + "unknown category '" + category + "'");
    }
    rec.category = *parsed;

    const auto stars = obj.find("stars");
    if (stars == obj.end()) {
        throw ValidationError(line_prefix(line) + "missing required key 'stars'");
    }
    if (stars->is_number_unsigned()) {
        rec.stars = stars->get<std::uint64_t>();
    } else if (stars->is_number_integer()) {
        throw ValidationError(line_prefix(line) + "stars must be >= 0, got " + stars->dump());
    } else {
        throw ValidationError(line_prefix(line) + "stars must be a nonnegative integer");
    }

    if (const auto hint = obj.find("language_hint"); hint != obj.end() && !hint->is_null()) {
        if (!hint->is_string()) {
            throw ValidationError(line_prefix(line) + "language_hint must be a string");
        }
        rec.language_hint = hint->get<std::string>();
    }
    if (const auto tags = obj.find("tags"); tags != obj.end()) {
        if (!tags->is_array()) {
            throw ValidationError(line_prefix(line) + "tags must be an array of strings");
        }
        for (const auto& tag : *tags) {
            if (!tag.is_string()) {
                throw ValidationError(line_prefix(line) + "tags must be an array of strings");
            }
            rec.tags.push_back(tag.get<std::string>());
        }
    }
    return rec;
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

void run_git_clone(const std::string& url, const fs::path& dest) {
    std::vector<std::string> args = {"git", "clone", "--depth", "1", "--quiet", "--", url, dest.string()};
    std::vector<char*> argv;
    for (auto& a : args) {
        argv.push_back(a.data());
    }
    argv.push_back(nullptr);

    std::vector<std::string> env_storage;
    for (char** e = environ; e && *e; ++e) {
        env_storage.emplace_back(*e);
    }
    env_storage.emplace_back("GIT_TERMINAL_PROMPT=0");
    std::vector<char*> envp;
    for (auto& e : env_storage) {
        envp.push_back(e.data());
    }
    envp.push_back(nullptr);

    pid_t pid = 0;
    if (const int rc = posix_spawnp(&pid, "git", nullptr, nullptr, argv.data(), envp.data()); rc != 0) {
        throw AcquisitionError(url, "cannot run git: " + std::error_code(rc, std::generic_category()).message());
    }
    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) {
            throw AcquisitionError(url, "waitpid failed");
        }
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw AcquisitionError(url, "git clone failed");
    }
}

// ---- text normalization ----

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

constexpr char32_t kReplacement = 0xFFFD;

std::string decode_utf16(std::string_view bytes, bool little_endian, bool* lossy) {
    std::string out;
    out.reserve(bytes.size());
    auto unit = [&](std::size_t i) -> char32_t {
        const auto lo = static_cast<unsigned char>(bytes[little_endian ? i : i + 1]);
        const auto hi = static_cast<unsigned char>(bytes[little_endian ? i + 1 : i]);
        return static_cast<char32_t>((hi << 8) | lo);
    };
    std::size_t i = 2;  // past the BOM
    while (i + 1 < bytes.size()) {
        const char32_t u = unit(i);
        i += 2;
        if (u >= 0xD800 && u <= 0xDBFF) {
            if (i + 1 < bytes.size()) {
                const char32_t low = unit(i);
                if (low >= 0xDC00 && low <= 0xDFFF) {
                    i += 2;
                    append_utf8(out, 0x10000 + ((u - 0xD800) << 10) + (low - 0xDC00));
                    continue;
                }
            }
            append_utf8(out, kReplacement);
            *lossy = true;
        } else if (u >= 0xDC00 && u <= 0xDFFF) {
            append_utf8(out, kReplacement);
            *lossy = true;
        } else {
            append_utf8(out, u);
        }
    }
    if (i < bytes.size()) {
        append_utf8(out, kReplacement);
        *lossy = true;
    }
    return out;
}

// Length of the valid UTF-8 sequence at s[i], or 0 if invalid. On failure,
// *consumed holds the length of the maximal invalid subpart (>= 1).
std::size_t utf8_sequence(std::string_view s, std::size_t i, std::size_t* consumed) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    *consumed = 1;
    if (b0 < 0x80) {
        return 1;
    }
    std::size_t len = 0;
    unsigned char lo = 0x80;
    unsigned char hi = 0xBF;
    if (b0 >= 0xC2 && b0 <= 0xDF) {
        len = 2;
    } else if (b0 >= 0xE0 && b0 <= 0xEF) {
        len = 3;
        if (b0 == 0xE0) lo = 0xA0;
        if (b0 == 0xED) hi = 0x9F;
    } else if (b0 >= 0xF0 && b0 <= 0xF4) {
        len = 4;
        if (b0 == 0xF0) lo = 0x90;
        if (b0 == 0xF4) hi = 0x8F;
    } else {
        return 0;
    }
    for (std::size_t k = 1; k < len; ++k) {
        if (i + k >= s.size()) {
            return 0;
        }
        const auto b = static_cast<unsigned char>(s[i + k]);
        const unsigned char min = k == 1 ? lo : 0x80;
        const unsigned char max = k == 1 ? hi : 0xBF;
        if (b < min || b > max) {
            return 0;
        }
        *consumed = k + 1;
    }
    return len;
}

std::string repair_utf8(std::string_view s, bool* lossy) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t consumed = 1;
        const std::size_t len = utf8_sequence(s, i, &consumed);
        if (len == 0) {
            append_utf8(out, kReplacement);
            *lossy = true;
            i += consumed;
        } else {
            out.append(s.substr(i, len));
            i += len;
        }
    }
    return out;
}

std::string normalize_line_endings(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            if (i + 1 < s.size() && s[i + 1] == '\n') {
                ++i;
            }
            out.push_back('\n');
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

bool has_utf16_bom(std::string_view bytes) {
    return bytes.size() >= 2 && ((bytes[0] == '\xFF' && bytes[1] == '\xFE') ||
                                 (bytes[0] == '\xFE' && bytes[1] == '\xFF'));
}

std::optional<std::string> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        return std::nullopt;
    }
    return std::move(buf).str();
}

bool write_file(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return static_cast<bool>(out);
}

} // namespace

const std::array<ApplicationCategory, kApplicationCategoryCount>& all_application_categories() {
    static const auto kAll = [] {
        std::array<ApplicationCategory, kApplicationCategoryCount> all{};
        for (std::size_t i = 0; i < all.size(); ++i) {
            all[i] = static_cast<ApplicationCategory>(i);
        }
        return all;
    }();
    return kAll;
}

std::string_view to_string(ApplicationCategory category) {
    return kCategoryNames.at(static_cast<std::size_t>(category));
}

std::optional<ApplicationCategory> parse_application_category(std::string_view name) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (kCategoryNames[i] == name) {
            return static_cast<ApplicationCategory>(i);
        }
    }
    return std::nullopt;
}

std::vector<PluginRecord> parse_manifest(std::istream& input, ManifestMode mode) {
    std::vector<PluginRecord> records;
    std::map<std::string, std::size_t> first_line;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(input, text)) {
        ++line_no;
        if (!text.empty() && text.back() == '\r') {
            text.pop_back();
        }
        if (is_blank(text)) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(line_prefix(line_no) + "malformed JSON: " + e.what());
        }
        PluginRecord rec = record_from_json(obj, line_no, mode);
        const auto [it, inserted] = first_line.emplace(rec.id, line_no);
        if (!inserted) {
            throw DuplicateError(line_prefix(line_no) + "duplicate id '" + rec.id + "' (first defined on line " +
                                 std::to_string(it->second) + ")");
        }
        records.push_back(std::move(rec));
    }
    return records;
}

bool is_url_source(std::string_view source) {
    for (std::string_view scheme : {"http://", "https://", "git://", "ssh://", "file://"}) {
        if (source.size() > scheme.size() && to_lower(source.substr(0, scheme.size())) == scheme) {
            return true;
        }
    }
    // scp-like: user@host:path
    const auto at = source.find('@');
    const auto colon = source.find(':');
    const auto slash = source.find('/');
    return at != std::string_view::npos && colon != std::string_view::npos && at < colon &&
           (slash == std::string_view::npos || colon < slash);
}

std::string canonical_source(std::string_view source) {
    std::string s(source);
    auto strip_slashes = [&s] {
        while (s.size() > 1 && s.back() == '/') {
            s.pop_back();
        }
    };
    strip_slashes();
    if (s.size() > 4 && s.ends_with(".git")) {
        s.resize(s.size() - 4);
        strip_slashes();
    }
    if (!is_url_source(s)) {
        return s;
    }
    if (const auto scheme_end = s.find("://"); scheme_end != std::string::npos) {
        const std::size_t host_begin = scheme_end + 3;
        std::size_t host_end = s.find('/', host_begin);
        if (host_end == std::string::npos) {
            host_end = s.size();
        }
        const std::size_t at = s.find('@', host_begin);
        const std::size_t name_begin = (at != std::string::npos && at < host_end) ? at + 1 : host_begin;
        return to_lower(s.substr(0, scheme_end + 3)) + s.substr(host_begin, name_begin - host_begin) +
               to_lower(s.substr(name_begin, host_end - name_begin)) + s.substr(host_end);
    }
    const auto at = s.find('@');
    const auto colon = s.find(':', at);
    return s.substr(0, at + 1) + to_lower(s.substr(at + 1, colon - at - 1)) + s.substr(colon);
}

DedupResult dedup_manifest(std::vector<PluginRecord> records) {
    DedupResult result;
    std::map<std::string, std::string> owner;  // canonical source -> id
    for (auto& rec : records) {
        std::string key = canonical_source(rec.source);
        const auto it = owner.find(key);
        if (it != owner.end()) {
            result.dropped.push_back({std::move(rec), "duplicate source of '" + it->second + "'"});
            continue;
        }
        owner.emplace(std::move(key), rec.id);
        result.kept.push_back(std::move(rec));
    }
    return result;
}

fs::path acquire(const PluginRecord& record, const fs::path& workdir, const AcquireOptions& options) {
    std::error_code ec;
    fs::create_directories(workdir, ec);
    if (ec) {
        throw AcquisitionError(record.source, "cannot create workdir " + workdir.string() + ": " + ec.message());
    }
    const fs::path dest = workdir / record.id;
    const fs::path keep = workdir / ("." + record.id + ".keep");

    const bool preserve = !options.preserve_dir.empty() && fs::is_directory(dest / options.preserve_dir, ec);
    if (preserve) {
        fs::remove_all(keep, ec);
        fs::rename(dest / options.preserve_dir, keep, ec);
    }
    fs::remove_all(dest, ec);

    auto restore = [&] {
        if (preserve) {
            std::error_code rc;
            fs::create_directories(dest, rc);
            fs::rename(keep, dest / options.preserve_dir, rc);
        }
    };

    try {
        if (is_url_source(record.source)) {
            run_git_clone(record.source, dest);
        } else {
            fs::path src(record.source);
            if (src.is_relative()) {
                src = options.base_dir / src;
            }
            if (!fs::is_directory(src, ec)) {
                throw AcquisitionError(record.source, "no such directory " + src.string());
            }
            fs::copy(src, dest, fs::copy_options::recursive | fs::copy_options::copy_symlinks, ec);
            if (ec) {
                throw AcquisitionError(record.source, "copy failed: " + ec.message());
            }
        }
    } catch (...) {
        restore();
        throw;
    }
    restore();
    return dest;
}

std::set<std::string> PruneConfig::default_prune_dirs() {
    return {"node_modules", "venv", ".venv", ".git", ".tox", "__pycache__",
            "dist", "build", "target", "vendor", "site-packages"};
}

std::string normalize_text(std::string_view bytes, bool* lossy) {
    bool dummy = false;
    bool* flag = lossy ? lossy : &dummy;
    *flag = false;
    std::string text;
    if (has_utf16_bom(bytes)) {
        text = decode_utf16(bytes, bytes[0] == '\xFF', flag);
    } else {
        if (bytes.starts_with("\xEF\xBB\xBF")) {
            bytes.remove_prefix(3);
        }
        text = repair_utf8(bytes, flag);
    }
    return normalize_line_endings(text);
}

NormalizedTree normalize_tree(const fs::path& root, const PruneConfig& config) {
    NormalizedTree tree;
    tree.root = root;

    std::error_code ec;
    fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
    if (ec) {
        throw Error("cannot walk " + root.string() + ": " + ec.message());
    }
    for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) {
            break;
        }
        const auto status = it->symlink_status(ec);
        if (ec || !fs::is_regular_file(status)) {
            continue;
        }
        const fs::path rel_path = it->path().lexically_relative(root);
        const std::string rel = rel_path.generic_string();

        bool pruned = false;
        for (auto seg = rel_path.begin(); seg != rel_path.end(); ++seg) {
            if (std::next(seg) == rel_path.end()) {
                break;  // the file name itself
            }
            const std::string name = seg->string();
            if (config.prune_dirs.contains(name) || name == config.archive_dir) {
                pruned = true;
                break;
            }
        }
        if (pruned) {
            tree.skipped.push_back({rel, std::string(kSkipPrunedDir)});
            continue;
        }

        const auto size = fs::file_size(it->path(), ec);
        if (ec) {
            tree.skipped.push_back({rel, std::string(kSkipUnreadable)});
            continue;
        }
        if (size > config.max_file_bytes) {
            tree.skipped.push_back({rel, std::string(kSkipOversize)});
            continue;
        }
        auto bytes = read_file(it->path());
        if (!bytes) {
            tree.skipped.push_back({rel, std::string(kSkipUnreadable)});
            continue;
        }
        if (!has_utf16_bom(*bytes) &&
            std::string_view(*bytes).substr(0, 8192).find('\0') != std::string_view::npos) {
            tree.skipped.push_back({rel, std::string(kSkipBinary)});
            continue;
        }
        bool lossy = false;
        std::string text = normalize_text(*bytes, &lossy);
        if (text != *bytes && !write_file(it->path(), text)) {
            tree.skipped.push_back({rel, std::string(kSkipUnreadable)});
            continue;
        }
        if (lossy) {
            tree.lossy.push_back(rel);
        }
        tree.files.push_back({rel, text.size(), sha256_hex(text)});
    }

    auto by_path = [](const auto& a, const auto& b) { return a.path < b.path; };
    std::sort(tree.files.begin(), tree.files.end(), by_path);
    std::sort(tree.skipped.begin(), tree.skipped.end(), by_path);
    std::sort(tree.lossy.begin(), tree.lossy.end());
    return tree;
}

} // namespace mcpaudit
