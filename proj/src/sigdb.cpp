#include "mcpaudit/sigdb.hpp"

#include "mcpaudit/error.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <iterator>
#include <map>
#include <set>

namespace mcpaudit {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kCategoryNames = {"FILE", "MEMORY", "NETWORK", "SYSTEM"};
constexpr std::array<std::string_view, 2> kLanguageNames = {"python", "c-family"};

bool valid_signature_id(std::string_view id) {
    return !id.empty() && std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
    });
}

[[noreturn]] void invalid(std::string_view id, std::string_view field, const std::string& detail) {
    throw ValidationError("signature '" + std::string(id) + "', field '" + std::string(field) + "': " + detail);
}

struct BuiltinRow {
    const char* id;
    ResourceCategory category;
    const char* pattern;
    const char* risk;
};

// Seeded from the resource taxonomy's example APIs and the APIs named in the
// studied case reports.
constexpr BuiltinRow kBuiltin[] = {
    {"file.open", ResourceCategory::File, "open", "unauthorized file access, hardcoded paths, TOCTOU races"},
    {"file.read", ResourceCategory::File, "read", "unauthorized file access, hardcoded paths, TOCTOU races"},
    {"file.write", ResourceCategory::File, "write", "unauthorized file access, hardcoded paths, TOCTOU races"},
    {"file.shutil_copy", ResourceCategory::File, "shutil.copy", "unrestricted file copy, data exfiltration"},
    {"file.image_open", ResourceCategory::File, "Image.open", "untrusted image parsing, metadata embedding"},
    {"file.load_dotenv", ResourceCategory::File, "load_dotenv", "credential exposure from environment files"},
    {"sys.os_system", ResourceCategory::System, "os.system", "command injection (RCE)"},
    {"sys.subprocess_call", ResourceCategory::System, "subprocess.call", "command injection (RCE)"},
    {"sys.subprocess_run", ResourceCategory::System, "subprocess.run", "command injection, privilege escalation"},
    {"sys.fork", ResourceCategory::System, "fork", "improper process management"},
    {"sys.exec", ResourceCategory::System, "exec", "arbitrary code or command execution, privilege escalation"},
    {"net.socket_bind", ResourceCategory::Network, "socket.bind", "open high-risk ports"},
    {"net.connect", ResourceCategory::Network, "connect", "unencrypted communications"},
    {"net.dns_resolver_query", ResourceCategory::Network, "dns.resolver.query", "DNS hijacking"},
    {"net.post", ResourceCategory::Network, "post", "data exfiltration, content manipulation"},
    {"net.openai", ResourceCategory::Network, "OPENAI", "third-party model service, query interception"},
    {"net.openai_client", ResourceCategory::Network, "OpenAI", "third-party model service, query interception"},
    {"mem.strcpy", ResourceCategory::Memory, "strcpy", "buffer overflow"},
    {"mem.malloc", ResourceCategory::Memory, "malloc", "buffer overflow, unchecked allocation"},
    {"mem.ctypes_cdll", ResourceCategory::Memory, "ctypes.CDLL", "malicious library injection"},
    {"mem.create_string_buffer", ResourceCategory::Memory, "create_string_buffer", "fixed buffer overflow"},
};

void sort_by_id(std::vector<Signature>& sigs) {
    std::sort(sigs.begin(), sigs.end(), [](const Signature& a, const Signature& b) { return a.id < b.id; });
}

} // namespace

std::string_view to_string(ResourceCategory category) {
    return kCategoryNames.at(static_cast<std::size_t>(category));
}

std::optional<ResourceCategory> parse_resource_category(std::string_view name) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (kCategoryNames[i] == name) {
            return static_cast<ResourceCategory>(i);
        }
    }
    return std::nullopt;
}

std::string_view to_string(SiteKind kind) {
    return kind == SiteKind::Call ? "call" : "import";
}

std::optional<SiteKind> parse_site_kind(std::string_view name) {
    if (name == "call") return SiteKind::Call;
    if (name == "import") return SiteKind::Import;
    return std::nullopt;
}

std::string Signature::pattern_text() const {
    std::string out;
    for (const auto& seg : pattern) {
        if (!out.empty()) {
            out.push_back('.');
        }
        out += seg;
    }
    return out;
}

bool Signature::applies_to(std::string_view family_name) const {
    return std::any_of(languages.begin(), languages.end(),
                       [&](const std::string& lang) { return lang == kAnyLanguage || lang == family_name; });
}

const Signature* SignatureDb::find(std::string_view id) const {
    const auto it = std::lower_bound(signatures.begin(), signatures.end(), id,
                                     [](const Signature& s, std::string_view key) { return s.id < key; });
    return it != signatures.end() && it->id == id ? &*it : nullptr;
}

bool is_identifier(std::string_view s) {
    if (s.empty()) {
        return false;
    }
    auto head = static_cast<unsigned char>(s.front());
    if (!(std::isalpha(head) || head == '_') || head >= 0x80) {
        return false;
    }
    return std::all_of(s.begin() + 1, s.end(), [](unsigned char c) {
        return c < 0x80 && (std::isalnum(c) || c == '_');
    });
}

std::vector<std::string> parse_pattern(std::string_view dotted) {
    std::vector<std::string> segments;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const auto seg = dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (seg.empty()) {
            throw ValidationError("empty segment in pattern '" + std::string(dotted) + "'");
        }
        if (!is_identifier(seg)) {
            throw ValidationError("segment '" + std::string(seg) + "' is not an identifier");
        }
        segments.emplace_back(seg);
        if (dot == std::string_view::npos) {
            break;
        }
        start = dot + 1;
    }
    if (segments.size() > kMaxPatternSegments) {
        throw ValidationError("pattern '" + std::string(dotted) + "' has more than 8 segments");
    }
    return segments;
}

SignatureDb builtin_db() {
    SignatureDb db;
    db.version = 1;
    for (const auto& row : kBuiltin) {
        Signature sig;
        sig.id = row.id;
        sig.category = row.category;
        sig.pattern = parse_pattern(row.pattern);
        sig.kind = SiteKind::Call;
        sig.risk = row.risk;
        db.signatures.push_back(std::move(sig));
    }
    sort_by_id(db.signatures);
    db.provenance.push_back({"builtin", db.signatures.size()});
    return db;
}

Signature signature_from_json(const json& obj) {
    if (!obj.is_object()) {
        throw ValidationError("signature entry must be an object");
    }
    const auto id_it = obj.find("id");
    if (id_it == obj.end() || !id_it->is_string()) {
        throw ValidationError("signature entry without a string 'id'");
    }
    Signature sig;
    sig.id = id_it->get<std::string>();
    if (!valid_signature_id(sig.id)) {
        invalid(sig.id, "id", "must match [a-z0-9_.-]+");
    }

    auto string_field = [&](const char* field) {
        const auto it = obj.find(field);
        if (it == obj.end() || !it->is_string()) {
            invalid(sig.id, field, "missing or not a string");
        }
        return it->get<std::string>();
    };

    const std::string category = string_field("category");
    const auto cat = parse_resource_category(category);
    if (!cat) {
        invalid(sig.id, "category", "unknown category '" + category + "'");
    }
    sig.category = *cat;

    const std::string pattern = string_field("pattern");
    try {
        sig.pattern = parse_pattern(pattern);
    } catch (const ValidationError& e) {
        invalid(sig.id, "pattern", e.what());
    }

    const std::string kind = string_field("kind");
    const auto parsed_kind = parse_site_kind(kind);
    if (!parsed_kind) {
        invalid(sig.id, "kind", "unknown kind '" + kind + "'");
    }
    sig.kind = *parsed_kind;

    const auto langs = obj.find("languages");
    if (langs == obj.end() || !langs->is_array() || langs->empty()) {
        invalid(sig.id, "languages", "must be a nonempty array");
    }
    sig.languages.clear();
    for (const auto& lang : *langs) {
        if (!lang.is_string()) {
            invalid(sig.id, "languages", "entries must be strings");
        }
        const auto name = lang.get<std::string>();
        if (name != kAnyLanguage && std::find(kLanguageNames.begin(), kLanguageNames.end(), name) == kLanguageNames.end()) {
            invalid(sig.id, "languages", "unknown language '" + name + "'");
        }
        sig.languages.push_back(name);
    }
    if (sig.languages.size() > 1 &&
        std::find(sig.languages.begin(), sig.languages.end(), kAnyLanguage) != sig.languages.end()) {
        invalid(sig.id, "languages", "'*' must be the only entry");
    }

    sig.risk = string_field("risk");
    return sig;
}

SignatureDb load_db(std::istream& input, std::string source_name) {
    json doc;
    try {
        doc = json::parse(input);
    } catch (const json::parse_error& e) {
        throw ParseError(source_name + ": malformed JSON: " + e.what());
    }
    if (!doc.is_object()) {
        throw ValidationError(source_name + ": signature database must be a JSON object");
    }
    SignatureDb db;
    const auto version = doc.find("version");
    if (version == doc.end() || !version->is_number_unsigned() || version->get<std::uint64_t>() == 0 ||
        version->get<std::uint64_t>() > UINT32_MAX) {
        throw ValidationError(source_name + ": 'version' must be a positive integer");
    }
    db.version = version->get<std::uint32_t>();
    const auto sigs = doc.find("signatures");
    if (sigs == doc.end() || !sigs->is_array()) {
        throw ValidationError(source_name + ": 'signatures' must be an array");
    }
    std::set<std::string> seen;
    for (const auto& entry : *sigs) {
        Signature sig = signature_from_json(entry);
        if (!seen.insert(sig.id).second) {
            throw DuplicateError("signature '" + sig.id + "', field 'id': duplicate id");
        }
        db.signatures.push_back(std::move(sig));
    }
    sort_by_id(db.signatures);
    db.provenance.push_back({std::move(source_name), db.signatures.size()});
    return db;
}

SignatureDb merge(const SignatureDb& base, const SignatureDb& overlay) {
    std::map<std::string, Signature> by_id;
    for (const auto& sig : base.signatures) {
        by_id.insert_or_assign(sig.id, sig);
    }
    for (const auto& sig : overlay.signatures) {
        by_id.insert_or_assign(sig.id, sig);
    }
    SignatureDb out;
    out.version = std::max(base.version, overlay.version);
    for (auto& [id, sig] : by_id) {
        out.signatures.push_back(std::move(sig));
    }
    out.provenance = base.provenance;
    out.provenance.insert(out.provenance.end(), overlay.provenance.begin(), overlay.provenance.end());
    return out;
}

json signature_to_json(const Signature& sig) {
    return json{{"id", sig.id},
                {"category", to_string(sig.category)},
                {"pattern", sig.pattern_text()},
                {"kind", to_string(sig.kind)},
                {"languages", sig.languages},
                {"risk", sig.risk}};
}

json db_to_json(const SignatureDb& db) {
    json sigs = json::array();
    for (const auto& sig : db.signatures) {
        sigs.push_back(signature_to_json(sig));
    }
    return json{{"version", db.version}, {"signatures", std::move(sigs)}};
}

} // namespace mcpaudit
