#include "mcpaudit/lexscan.hpp"

#include <algorithm>
#include <set>

namespace mcpaudit {

namespace {

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9');
}

bool is_digit(char c) {
    return c >= '0' && c <= '9';
}

// Matches the regex class \s.
bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_python_string_prefix(std::string_view word) {
    if (word.empty() || word.size() > 2) {
        return false;
    }
    std::string lower;
    for (char c : word) {
        lower.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    }
    static const std::set<std::string, std::less<>> kPrefixes = {"r", "u", "b", "f", "br", "rb", "fr", "rf"};
    return kPrefixes.contains(lower);
}

std::vector<std::string> split_dotted(std::string_view dotted) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        out.emplace_back(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (dot == std::string_view::npos) {
            return out;
        }
        start = dot + 1;
    }
}

// Byte offset -> (line, code-point column).
class LineIndex {
public:
    explicit LineIndex(std::string_view text) : text_(text) {
        starts_.push_back(0);
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (text[i] == '\n') {
                starts_.push_back(i + 1);
            }
        }
    }

    std::pair<std::uint32_t, std::uint32_t> locate(std::size_t offset) const {
        const auto it = std::upper_bound(starts_.begin(), starts_.end(), offset);
        const auto line = static_cast<std::uint32_t>(it - starts_.begin());
        const std::size_t line_start = *(it - 1);
        std::uint32_t column = 1;
        for (std::size_t i = line_start; i < offset; ++i) {
            if ((static_cast<unsigned char>(text_[i]) & 0xC0) != 0x80) {
                ++column;
            }
        }
        return {line, column};
    }

private:
    std::string_view text_;
    std::vector<std::size_t> starts_;
};

struct Failure {
    std::size_t offset;
    const char* reason;
};

class Lexer {
public:
    Lexer(std::string_view text, LanguageFamily family) : text_(text), python_(family == LanguageFamily::Python) {}

    LexResult run() {
        const LineIndex index(text_);
        LexResult result;
        try {
            scan();
        } catch (const Failure& f) {
            const auto [line, column] = index.locate(f.offset);
            result.failure = LexFailure{f.reason, line, column};
            return result;
        }
        result.sites.reserve(pending_.size());
        for (const auto& p : pending_) {
            const auto [line, column] = index.locate(p.begin);
            const auto raw = text_.substr(p.begin, p.end - p.begin);
            result.sites.push_back({split_dotted(raw), line, column, p.kind, std::string(raw)});
        }
        std::stable_sort(result.sites.begin(), result.sites.end(), [](const CallSite& a, const CallSite& b) {
            if (a.line != b.line) return a.line < b.line;
            if (a.column != b.column) return a.column < b.column;
            return a.kind < b.kind;
        });
        return result;
    }

private:
    struct Pending {
        std::size_t begin;
        std::size_t end;
        SiteKind kind;
    };

    char at(std::size_t i) const { return i < text_.size() ? text_[i] : '\0'; }

    void scan() {
        std::size_t i = 0;
        const std::size_t n = text_.size();
        while (i < n) {
            const char c = text_[i];
            if (python_ && c == '#') {
                i = skip_line(i);
            } else if (!python_ && c == '/' && at(i + 1) == '/') {
                i = skip_line(i);
            } else if (!python_ && c == '/' && at(i + 1) == '*') {
                i = skip_block_comment(i);
            } else if (c == '"' || c == '\'') {
                i = skip_string(i);
            } else if (!python_ && c == '`') {
                i = skip_template(i);
            } else if (is_digit(c)) {
                i = skip_number(i);
            } else if (is_ident_start(c)) {
                i = identifier(i);
            } else {
                ++i;
            }
        }
    }

    std::size_t skip_line(std::size_t i) const {
        const auto nl = text_.find('\n', i);
        return nl == std::string_view::npos ? text_.size() : nl + 1;
    }

    std::size_t skip_block_comment(std::size_t i) const {
        const auto end = text_.find("*/", i + 2);
        if (end == std::string_view::npos) {
            throw Failure{i, "unterminated block comment"};
        }
        return end + 2;
    }

    std::size_t skip_string(std::size_t i) const {
        const char quote = text_[i];
        if (python_ && at(i + 1) == quote && at(i + 2) == quote) {
            std::size_t k = i + 3;
            while (k < text_.size()) {
                if (text_[k] == '\\') {
                    k += 2;
                } else if (text_[k] == quote && at(k + 1) == quote && at(k + 2) == quote) {
                    return k + 3;
                } else {
                    ++k;
                }
            }
            throw Failure{i, "unterminated triple-quoted string"};
        }
        std::size_t k = i + 1;
        while (k < text_.size()) {
            const char c = text_[k];
            if (c == '\\') {
                k += 2;
            } else if (c == quote) {
                return k + 1;
            } else if (c == '\n') {
                throw Failure{i, "unterminated string literal"};
            } else {
                ++k;
            }
        }
        throw Failure{i, "unterminated string literal"};
    }

    std::size_t skip_template(std::size_t i) const {
        std::size_t k = i + 1;
        while (k < text_.size()) {
            const char c = text_[k];
            if (c == '\\') {
                k += 2;
            } else if (c == '`') {
                return k + 1;
            } else if (c == '$' && at(k + 1) == '{') {
                k = skip_interpolation(k + 2);
            } else {
                ++k;
            }
        }
        throw Failure{i, "unterminated template literal"};
    }

    // Skips the body of `${ ... }` starting after the brace.
    std::size_t skip_interpolation(std::size_t k) const {
        const std::size_t start = k;
        int depth = 1;
        while (k < text_.size()) {
            const char c = text_[k];
            if (c == '{') {
                ++depth;
                ++k;
            } else if (c == '}') {
                if (--depth == 0) {
                    return k + 1;
                }
                ++k;
            } else if (c == '"' || c == '\'') {
                k = skip_string(k);
            } else if (c == '`') {
                k = skip_template(k);
            } else if (c == '/' && at(k + 1) == '/') {
                k = skip_line(k);
            } else if (c == '/' && at(k + 1) == '*') {
                k = skip_block_comment(k);
            } else {
                ++k;
            }
        }
        throw Failure{start, "unterminated template interpolation"};
    }

    std::size_t skip_number(std::size_t i) const {
        std::size_t k = i;
        while (k < text_.size()) {
            const char c = text_[k];
            if (is_ident_char(c) || c == '.') {
                ++k;
            } else if (!python_ && c == '\'' && is_ident_char(at(k + 1))) {
                k += 2;  // C++14 digit separator
            } else {
                break;
            }
        }
        return k;
    }

    std::size_t identifier_end(std::size_t i) const {
        while (i < text_.size() && is_ident_char(text_[i])) {
            ++i;
        }
        return i;
    }

    // A qualified chain `IDENT ('.' IDENT)*`; a chain that continues a member
    // access (preceded by '.') is consumed but never reported.
    std::size_t identifier(std::size_t start) {
        std::size_t end = identifier_end(start);
        const std::string_view word = text_.substr(start, end - start);
        const bool member = start > 0 && text_[start - 1] == '.';

        if (python_ && !member && (at(end) == '"' || at(end) == '\'') && is_python_string_prefix(word)) {
            return skip_string(end);
        }

        bool single = true;
        while (at(end) == '.' && is_ident_start(at(end + 1))) {
            end = identifier_end(end + 1);
            single = false;
        }

        if (python_ && !member && single && (word == "import" || word == "from") && at_statement_start(start)) {
            python_import(end, word == "from");
        }

        std::size_t k = end;
        while (k < text_.size() && is_space(text_[k])) {
            ++k;
        }
        if (!member && at(k) == '(') {
            pending_.push_back({start, end, SiteKind::Call});
        }
        return end;
    }

    bool at_statement_start(std::size_t start) const {
        std::size_t k = start;
        while (k > 0 && (text_[k - 1] == ' ' || text_[k - 1] == '\t')) {
            --k;
        }
        return k == 0 || text_[k - 1] == '\n' || text_[k - 1] == ';' || text_[k - 1] == ':';
    }

    std::size_t skip_inline_space(std::size_t k) const {
        while (k < text_.size()) {
            if (text_[k] == ' ' || text_[k] == '\t') {
                ++k;
            } else if (text_[k] == '\\' && at(k + 1) == '\n') {
                k += 2;
            } else {
                break;
            }
        }
        return k;
    }

    // Returns the end of a contiguous dotted name at k (k itself if none).
    std::size_t dotted_name_end(std::size_t k) const {
        if (!is_ident_start(at(k))) {
            return k;
        }
        std::size_t end = identifier_end(k);
        while (at(end) == '.' && is_ident_start(at(end + 1))) {
            end = identifier_end(end + 1);
        }
        return end;
    }

    // Records IMPORT sites for `import a.b, c as d` / `from a.b import ...`.
    // Lexing resumes after the keyword, so the names are also lexed normally.
    void python_import(std::size_t after_keyword, bool from) {
        std::size_t k = skip_inline_space(after_keyword);
        if (k == after_keyword) {
            return;
        }
        if (from) {
            while (at(k) == '.') {
                ++k;
            }
            const std::size_t end = dotted_name_end(k);
            if (end > k) {
                pending_.push_back({k, end, SiteKind::Import});
            }
            return;
        }
        while (true) {
            const std::size_t end = dotted_name_end(k);
            if (end == k) {
                return;
            }
            pending_.push_back({k, end, SiteKind::Import});
            k = skip_inline_space(end);
            if (text_.substr(k, 2) == "as" && !is_ident_char(at(k + 2))) {
                k = skip_inline_space(k + 2);
                k = skip_inline_space(identifier_end(k));
            }
            if (at(k) != ',') {
                return;
            }
            k = skip_inline_space(k + 1);
        }
    }

    std::string_view text_;
    bool python_;
    std::vector<Pending> pending_;
};

} // namespace

std::string_view family_name(LanguageFamily family) {
    switch (family) {
    case LanguageFamily::Python:
        return "python";
    case LanguageFamily::CFamily:
        return "c-family";
    case LanguageFamily::Unknown:
        break;
    }
    return "unknown";
}

LanguageFamily identify_language(std::string_view path) {
    const auto slash = path.find_last_of('/');
    const auto name = slash == std::string_view::npos ? path : path.substr(slash + 1);
    const auto dot = name.find_last_of('.');
    if (dot == std::string_view::npos || dot == 0) {
        return LanguageFamily::Unknown;
    }
    std::string ext;
    for (char c : name.substr(dot + 1)) {
        ext.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    }
    if (ext == "py") {
        return LanguageFamily::Python;
    }
    static const std::set<std::string, std::less<>> kCFamily = {"js", "jsx", "ts", "tsx", "java", "c",
                                                                 "h", "cpp", "cc", "hpp", "cs", "go"};
    return kCFamily.contains(ext) ? LanguageFamily::CFamily : LanguageFamily::Unknown;
}

std::string_view to_string(ScanMode mode) {
    return mode == ScanMode::Lexical ? "LEXICAL" : "RAW";
}

std::optional<ScanMode> parse_scan_mode(std::string_view name) {
    if (name == "LEXICAL") return ScanMode::Lexical;
    if (name == "RAW") return ScanMode::Raw;
    return std::nullopt;
}

LexResult lex_call_sites(std::string_view content, LanguageFamily family) {
    if (family == LanguageFamily::Unknown) {
        return LexResult{{}, LexFailure{"no lexer for unknown language family", 1, 1}};
    }
    return Lexer(content, family).run();
}

std::vector<CallSite> raw_scan(std::string_view content, const std::vector<std::string>& patterns) {
    const LineIndex index(content);
    std::set<std::string, std::less<>> unique(patterns.begin(), patterns.end());
    std::vector<CallSite> sites;
    for (const auto& pattern : unique) {
        if (pattern.empty()) {
            continue;
        }
        const auto segments = split_dotted(pattern);
        for (auto pos = content.find(pattern); pos != std::string_view::npos; pos = content.find(pattern, pos + 1)) {
            if (pos > 0 && (is_ident_char(content[pos - 1]) || content[pos - 1] == '.')) {
                continue;
            }
            std::size_t k = pos + pattern.size();
            while (k < content.size() && is_space(content[k])) {
                ++k;
            }
            if (k >= content.size() || content[k] != '(') {
                continue;
            }
            const auto [line, column] = index.locate(pos);
            sites.push_back({segments, line, column, SiteKind::Call, pattern});
        }
    }
    std::stable_sort(sites.begin(), sites.end(), [](const CallSite& a, const CallSite& b) {
        if (a.line != b.line) return a.line < b.line;
        if (a.column != b.column) return a.column < b.column;
        return a.raw_text < b.raw_text;
    });
    return sites;
}

} // namespace mcpaudit
