#include "doctest.h"

#include "mcpaudit/detect.hpp"
#include "mcpaudit/error.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace mcpaudit;
using namespace mcpaudit::testing;

namespace {

CallSite site(std::vector<std::string> segs, SiteKind kind = SiteKind::Call) {
    CallSite s;
    s.segments = std::move(segs);
    s.kind = kind;
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
        s.raw_text += (i ? "." : "") + s.segments[i];
    }
    return s;
}

SignatureDb single(const std::string& id, ResourceCategory cat, const std::string& pattern,
                   SiteKind kind = SiteKind::Call, std::vector<std::string> languages = {"*"}) {
    Signature s;
    s.id = id;
    s.category = cat;
    s.pattern = parse_pattern(pattern);
    s.kind = kind;
    s.languages = std::move(languages);
    s.risk = "r";
    SignatureDb db;
    db.signatures = {s};
    return db;
}

PluginRecord record(const std::string& id, const std::string& source) {
    PluginRecord r;
    r.id = id;
    r.name = id;
    r.source = source;
    return r;
}

PluginScanResult scan_dir(const fs::path& root, const SignatureDb& db = builtin_db(),
                          RawFallback fallback = RawFallback::OnError) {
    ScanPolicy policy;
    policy.raw_fallback = fallback;
    return scan_plugin(record("p", root.string()), normalize_tree(root), db, policy);
}

} // namespace

TEST_CASE("segment_suffix_match") {
    CHECK(segment_suffix_match({"os", "system"}, {"os", "system"}));
    CHECK(segment_suffix_match({"io", "open"}, {"open"}));
    CHECK(segment_suffix_match({"a", "os", "system"}, {"os", "system"}));
    CHECK_FALSE(segment_suffix_match({"mysocket", "bind"}, {"socket", "bind"}));
    CHECK_FALSE(segment_suffix_match({"system"}, {"os", "system"}));
    CHECK_FALSE(segment_suffix_match({"reconnect"}, {"connect"}));
    CHECK_FALSE(segment_suffix_match({"os", "system", "x"}, {"os", "system"}));
}

TEST_CASE("match_site examples") {
    const SignatureDb db = builtin_db();
    SUBCASE("os.system") {
        const auto m = match_site(site({"os", "system"}), db, LanguageFamily::Python);
        REQUIRE(m.size() == 1);
        CHECK(m[0].signature_id == "sys.os_system");
        CHECK(m[0].category == ResourceCategory::System);
    }
    SUBCASE("mysocket.bind") {
        CHECK(match_site(site({"mysocket", "bind"}), db, LanguageFamily::Python).empty());
    }
    SUBCASE("io.open suffix of length one") {
        const auto m = match_site(site({"io", "open"}), db, LanguageFamily::Python);
        REQUIRE(m.size() == 1);
        CHECK(m[0].signature_id == "file.open");
    }
    SUBCASE("kind mismatch") {
        CHECK(match_site(site({"os", "system"}, SiteKind::Import), db, LanguageFamily::Python).empty());
    }
    SUBCASE("multi-match sorted by id") {
        const auto m = match_site(site({"PIL", "Image", "open"}), db, LanguageFamily::Python);
        REQUIRE(m.size() == 2);
        CHECK(m[0].signature_id == "file.image_open");
        CHECK(m[1].signature_id == "file.open");
    }
}

TEST_CASE("match_site honours kind and language lists") {
    const auto imports = single("sys.imp", ResourceCategory::System, "subprocess", SiteKind::Import);
    CHECK(match_site(site({"subprocess"}, SiteKind::Import), imports, LanguageFamily::Python).size() == 1);
    CHECK(match_site(site({"subprocess"}), imports, LanguageFamily::Python).empty());

    const auto py_only = single("x.y", ResourceCategory::File, "readFile", SiteKind::Call, {"python"});
    CHECK(match_site(site({"fs", "readFile"}), py_only, LanguageFamily::Python).size() == 1);
    CHECK(match_site(site({"fs", "readFile"}), py_only, LanguageFamily::CFamily).empty());
    const auto c_only = single("x.y", ResourceCategory::File, "readFile", SiteKind::Call, {"c-family"});
    CHECK(match_site(site({"fs", "readFile"}), c_only, LanguageFamily::CFamily).size() == 1);
}

TEST_CASE("scan_plugin examples") {
    SUBCASE("one subprocess.run call") {
        TempDir tmp;
        write_file(tmp / "a.py", "subprocess.run(x)\n");
        const auto r = scan_dir(tmp.path());
        REQUIRE(r.findings.size() == 1);
        CHECK(r.findings[0].signature_id == "sys.subprocess_run");
        CHECK(r.findings[0].category == ResourceCategory::System);
        CHECK(r.findings[0].file == "a.py");
        CHECK(r.findings[0].line == 1);
        CHECK(r.findings[0].column == 1);
        CHECK(r.findings[0].matched_text == "subprocess.run");
        CHECK(r.findings[0].mode == ScanMode::Lexical);
        CHECK(r.findings[0].plugin_id == "p");
        CHECK(r.files_scanned == 1);
        CHECK(r.status == ScanStatus::Scanned);
    }
    SUBCASE("only file under node_modules") {
        TempDir tmp;
        write_file(tmp / "node_modules/dep/index.js", "exec('rm -rf /');\n");
        const auto r = scan_dir(tmp.path());
        CHECK(r.findings.empty());
        CHECK(r.files_skipped >= 1);
        CHECK(r.files_scanned == 0);
    }
    SUBCASE("empty directory") {
        TempDir tmp;
        const auto r = scan_dir(tmp.path());
        CHECK(r.findings.empty());
        CHECK(r.files_scanned == 0);
        CHECK(r.files_skipped == 0);
    }
}

TEST_CASE("scan_plugin fallback policy") {
    TempDir tmp;
    write_file(tmp / "broken.py", "os.system(x)  # ok\ns = 'unterminated\nsubprocess.call(y)\n");
    write_file(tmp / "notes.txt", "os.system(z)\n");

    SUBCASE("on-error rescans in RAW mode and skips unknown files") {
        const auto r = scan_dir(tmp.path());
        CHECK(r.lexer_fallbacks == 1);
        CHECK(r.files_scanned == 1);
        CHECK(r.files_skipped == 1);
        REQUIRE(r.findings.size() == 2);
        CHECK(r.findings[0].mode == ScanMode::Raw);
        CHECK(r.findings[0].line == 1);
        CHECK(r.findings[1].signature_id == "sys.subprocess_call");
        CHECK(r.findings[1].line == 3);
    }
    SUBCASE("off skips files the lexer rejects") {
        const auto r = scan_dir(tmp.path(), builtin_db(), RawFallback::Off);
        CHECK(r.findings.empty());
        CHECK(r.lexer_fallbacks == 0);
        CHECK(r.files_skipped == 2);
        CHECK(r.files_scanned == 0);
    }
    SUBCASE("all also scans unknown-language files") {
        const auto r = scan_dir(tmp.path(), builtin_db(), RawFallback::All);
        CHECK(r.files_scanned == 2);
        CHECK(r.files_skipped == 0);
        REQUIRE(r.findings.size() == 3);
        CHECK(r.findings[2].file == "notes.txt");
        CHECK(r.findings[2].mode == ScanMode::Raw);
    }
}

TEST_CASE("RAW fallback uses only CALL patterns applicable to the family") {
    TempDir tmp;
    write_file(tmp / "a.js", "'\nreadFile(p)\nload(q)\nbar.load(r)\n");
    SignatureDb db = single("f.read", ResourceCategory::File, "readFile", SiteKind::Call, {"python"});
    db = merge(db, single("f.load", ResourceCategory::File, "load", SiteKind::Call, {"c-family"}));
    db = merge(db, single("f.imp", ResourceCategory::File, "bar.load", SiteKind::Import));
    const auto r = scan_dir(tmp.path(), db);
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].signature_id == "f.load");
    CHECK(r.findings[0].matched_text == "load");
    CHECK(r.findings[0].line == 3);
}

TEST_CASE("findings are sorted and unique") {
    TempDir tmp;
    write_file(tmp / "b.py", "open(a); Image.open(b)\nfh.read(); fh.write(x)\n");
    write_file(tmp / "a.py", "os.system(a)\n");
    const auto r = scan_dir(tmp.path());
    CHECK(std::is_sorted(r.findings.begin(), r.findings.end(), finding_less));
    for (std::size_t i = 1; i < r.findings.size(); ++i) {
        CHECK(finding_less(r.findings[i - 1], r.findings[i]));
    }
    CHECK(r.findings.size() == 6);
}

TEST_CASE("every finding matches its signature") {
    const auto root = fixture_dir() / "corpus12/plugins";
    const SignatureDb db = builtin_db();
    for (const auto& entry : fs::directory_iterator(root)) {
        TempDir tmp;
        copy_tree(entry.path(), tmp / "p");
        const auto r = scan_dir(tmp / "p", db);
        for (const auto& f : r.findings) {
            const Signature* sig = db.find(f.signature_id);
            REQUIRE(sig != nullptr);
            CHECK(sig->category == f.category);
            CHECK(segment_suffix_match(parse_pattern(f.matched_text), sig->pattern));
        }
    }
}

TEST_CASE("monotonicity in the signature set") {
    TempDir tmp;
    copy_tree(fixture_dir() / "corpus12/plugins", tmp / "all");
    const NormalizedTree tree = normalize_tree(tmp / "all");
    const SignatureDb full = builtin_db();
    auto key_set = [](const PluginScanResult& r) {
        std::set<std::tuple<std::string, std::uint32_t, std::uint32_t, std::string>> out;
        for (const auto& f : r.findings) out.emplace(f.file, f.line, f.column, f.signature_id);
        return out;
    };
    std::mt19937 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        SignatureDb smaller = full;
        std::erase_if(smaller.signatures, [&](const Signature&) { return rng() % 3 == 0; });
        SignatureDb subset = smaller;
        std::erase_if(subset.signatures, [&](const Signature&) { return rng() % 2 == 0; });
        const auto big = key_set(scan_plugin(record("p", ""), tree, smaller, {}));
        const auto small = key_set(scan_plugin(record("p", ""), tree, subset, {}));
        CHECK(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    }
}

TEST_CASE("scan_corpus keeps manifest order and survives unreachable sources") {
    TempDir tmp;
    write_file(tmp / "src/a/x.py", "os.system(1)\n");
    write_file(tmp / "src/c/y.js", "connect(s);\n");
    std::vector<PluginRecord> records = {record("a", "./src/a"), record("b", "./src/missing"), record("c", "./src/c")};
    CorpusOptions options;
    options.workdir = tmp / "work";
    options.acquire.base_dir = tmp.path();
    std::vector<std::string> warnings;
    options.warn = [&](const std::string& w) { warnings.push_back(w); };

    ScanPolicy seq;
    const auto results = scan_corpus(records, builtin_db(), seq, options);
    REQUIRE(results.size() == 3);
    CHECK(results[0].plugin_id == "a");
    CHECK(results[1].plugin_id == "b");
    CHECK(results[2].plugin_id == "c");
    CHECK(results[0].status == ScanStatus::Scanned);
    CHECK(results[1].status == ScanStatus::Unacquired);
    CHECK(results[1].findings.empty());
    CHECK(results[2].status == ScanStatus::Scanned);
    CHECK(results[0].findings.size() == 1);
    CHECK(results[2].findings.size() == 1);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("missing") != std::string::npos);

    ScanPolicy par;
    par.jobs = 4;
    CHECK(scan_corpus(records, builtin_db(), par, options) == results);
    CHECK(scan_corpus(records, builtin_db(), seq, options) == results);
}

TEST_CASE("parallel_for visits every index once") {
    for (unsigned jobs : {1u, 2u, 8u}) {
        std::vector<int> hits(1000, 0);
        parallel_for(hits.size(), jobs, [&](std::size_t i) { ++hits[i]; });
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
    parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}
