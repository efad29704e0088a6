#include "doctest.h"

#include "mcpaudit/corpus.hpp"
#include "mcpaudit/error.hpp"
#include "mcpaudit/hash.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

using namespace mcpaudit;
using namespace mcpaudit::testing;

namespace {

std::vector<PluginRecord> parse(const std::string& text, ManifestMode mode = ManifestMode::Strict) {
    std::istringstream in(text);
    return parse_manifest(in, mode);
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

PluginRecord rec(std::string id, std::string source) {
    PluginRecord r;
    r.id = std::move(id);
    r.name = r.id;
    r.source = std::move(source);
    return r;
}

std::set<std::string> regular_files(const fs::path& root) {
    std::set<std::string> out;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_regular_file() && !it->is_symlink()) {
            out.insert(fs::relative(it->path(), root).generic_string());
        }
    }
    return out;
}

} // namespace

TEST_CASE("application categories are the 23 table labels in order") {
    const auto& all = all_application_categories();
    REQUIRE(all.size() == 23);
    CHECK(to_string(all.front()) == "API Development");
    CHECK(to_string(all.back()) == "Web Scraping & Data Collection");
    std::vector<std::string> labels;
    for (auto c : all) {
        labels.emplace_back(to_string(c));
        CHECK(parse_application_category(to_string(c)) == c);
    }
    CHECK(labels == std::vector<std::string>{
                        "API Development", "Analytics & Monitoring", "Browser Automation", "Cloud Infrastructure",
                        "Collaboration Tools", "Content Management", "Data Science & ML", "Database Management",
                        "Deployment & DevOps", "Design Tools", "Developer Tools", "E-commerce Solutions", "Featured",
                        "Game Development", "Learning & Documentation", "Marketing Automation", "Mobile Development",
                        "Official", "Other", "Productivity & Workflow", "Security & Testing",
                        "Social Media Management", "Web Scraping & Data Collection"});
    CHECK_FALSE(parse_application_category("developer tools"));
    CHECK_FALSE(parse_application_category("Developer Utils"));
}

TEST_CASE("parse_manifest accepts a minimal record") {
    const auto records =
        parse(R"({"id":"p1","name":"x","source":"./fixtures/p1","category":"Developer Tools","stars":5})" "\n");
    REQUIRE(records.size() == 1);
    CHECK(records[0].id == "p1");
    CHECK(records[0].name == "x");
    CHECK(records[0].source == "./fixtures/p1");
    CHECK(records[0].category == ApplicationCategory::DeveloperTools);
    CHECK(records[0].stars == 5);
    CHECK_FALSE(records[0].language_hint);
    CHECK(records[0].tags.empty());
}

TEST_CASE("parse_manifest keeps order, optional fields and skips blank lines") {
    const auto records = parse(
        R"({"id":"b","name":"B","source":"/x/b","category":"Other","stars":0,"language_hint":"python","tags":["t1","t2"]})"
        "\n\n   \n"
        R"({"id":"a","name":"A","source":"https://github.com/o/a","category":"Featured","stars":18446744073709551615})");
    REQUIRE(records.size() == 2);
    CHECK(records[0].id == "b");
    CHECK(records[0].language_hint == "python");
    CHECK(records[0].tags == std::vector<std::string>{"t1", "t2"});
    CHECK(records[1].id == "a");
    CHECK(records[1].stars == 18446744073709551615ull);
}

TEST_CASE("parse_manifest errors") {
    const std::string ok = R"({"id":"p1","name":"x","source":"s","category":"Developer Tools","stars":5})";

    SUBCASE("duplicate id names both lines") {
        const std::string text = ok + "\n" +
                                 R"({"id":"p2","name":"x","source":"t","category":"Other","stars":1})" "\n" + ok;
        CHECK_THROWS_AS(parse(text), DuplicateError);
        const auto msg = error_of(text);
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("line 1") != std::string::npos);
        CHECK(msg.find("p1") != std::string::npos);
    }
    SUBCASE("unknown category names the value") {
        const std::string text =
            R"({"id":"p2","name":"x","source":"s","category":"Developer Utils","stars":1})";
        CHECK_THROWS_AS(parse(text), ValidationError);
        CHECK(error_of(text).find("unknown category 'Developer Utils'") != std::string::npos);
    }
    SUBCASE("malformed line names the line number") {
        const std::string text = ok + "\n{\"id\": \n";
        CHECK_THROWS_AS(parse(text), ParseError);
        CHECK(error_of(text).find("line 2") != std::string::npos);
    }
    SUBCASE("non-object line") {
        CHECK_THROWS_AS(parse("[1,2]"), ParseError);
    }
    SUBCASE("missing required key") {
        CHECK_THROWS_AS(parse(R"({"id":"p","name":"x","category":"Other","stars":1})"), Error);
    }
    SUBCASE("negative or fractional stars") {
        CHECK_THROWS_AS(parse(R"({"id":"p","name":"x","source":"s","category":"Other","stars":-1})"),
                        ValidationError);
        CHECK_THROWS_AS(parse(R"({"id":"p","name":"x","source":"s","category":"Other","stars":1.5})"),
                        ValidationError);
        CHECK_THROWS_AS(parse(R"({"id":"p","name":"x","source":"s","category":"Other","stars":"3"})"),
                        ValidationError);
    }
    SUBCASE("empty or path-like id") {
        CHECK_THROWS_AS(parse(R"({"id":"","name":"x","source":"s","category":"Other","stars":1})"), ValidationError);
        CHECK_THROWS_AS(parse(R"({"id":"../x","name":"x","source":"s","category":"Other","stars":1})"),
                        ValidationError);
        CHECK_THROWS_AS(parse(R"({"id":"..","name":"x","source":"s","category":"Other","stars":1})"),
                        ValidationError);
    }
    SUBCASE("unknown keys are strict by default, ignored when lenient") {
        const std::string text = R"({"id":"p","name":"x","source":"s","category":"Other","stars":1,"extra":true})";
        CHECK_THROWS_AS(parse(text), ValidationError);
        CHECK(parse(text, ManifestMode::Lenient).size() == 1);
    }
}

TEST_CASE("canonical_source and URL detection") {
    CHECK(is_url_source("https://github.com/a/b"));
    CHECK(is_url_source("git@github.com:a/b.git"));
    CHECK(is_url_source("file:///tmp/x.git"));
    CHECK_FALSE(is_url_source("./plugins/p1"));
    CHECK_FALSE(is_url_source("/abs/path"));
    CHECK(canonical_source("https://Host/r.git") == canonical_source("https://host/r"));
    CHECK(canonical_source("HTTPS://GitHub.com/Org/Repo/") == "https://github.com/Org/Repo");
    CHECK(canonical_source("./plugins/p1/") == "./plugins/p1");
    CHECK(canonical_source("./Plugins/p1") != canonical_source("./plugins/p1"));
}

TEST_CASE("dedup_manifest examples") {
    SUBCASE("case and .git variants collide, first wins") {
        const auto result = dedup_manifest({rec("a", "https://Host/r.git"), rec("b", "https://host/r")});
        REQUIRE(result.kept.size() == 1);
        CHECK(result.kept[0].id == "a");
        REQUIRE(result.dropped.size() == 1);
        CHECK(result.dropped[0].record.id == "b");
        CHECK(result.dropped[0].reason.find("'a'") != std::string::npos);
    }
    SUBCASE("distinct sources kept") {
        const auto result = dedup_manifest({rec("a", "https://host/r1"), rec("b", "https://host/r2")});
        CHECK(result.kept.size() == 2);
        CHECK(result.dropped.empty());
    }
    SUBCASE("empty") {
        const auto result = dedup_manifest({});
        CHECK(result.kept.empty());
        CHECK(result.dropped.empty());
    }
}

TEST_CASE("dedup_manifest counts and distinctness on random inputs") {
    std::mt19937 rng(7);
    const std::vector<std::string> sources = {"https://h/a",  "https://H/a.git", "https://h/a/", "https://h/b",
                                              "./x",          "./x/",            "./y",          "git@h:a/b.git",
                                              "git@h:a/b",    "file:///r.git"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<PluginRecord> input;
        const int n = std::uniform_int_distribution<int>(0, 12)(rng);
        for (int i = 0; i < n; ++i) {
            input.push_back(rec("id" + std::to_string(i),
                                sources[std::uniform_int_distribution<std::size_t>(0, sources.size() - 1)(rng)]));
        }
        const auto result = dedup_manifest(input);
        CHECK(result.kept.size() + result.dropped.size() == input.size());
        std::set<std::string> canon;
        for (const auto& k : result.kept) {
            CHECK(canon.insert(canonical_source(k.source)).second);
        }
        // Order preserved among kept.
        std::size_t pos = 0;
        for (const auto& k : result.kept) {
            while (pos < input.size() && input[pos].id != k.id) ++pos;
            CHECK(pos < input.size());
        }
        for (const auto& d : result.dropped) {
            CHECK(canon.count(canonical_source(d.record.source)) == 1);
        }
    }
}

TEST_CASE("acquire copies a local directory") {
    TempDir tmp;
    write_file(tmp / "src/p/a.py", "print(1)\n");
    write_file(tmp / "src/p/b.js", "x()\n");
    write_file(tmp / "src/p/sub/c.txt", "hello\n");
    auto r = rec("p1", (tmp / "src/p").string());
    const auto root = acquire(r, tmp / "work");
    CHECK(root == tmp / "work/p1");
    CHECK(regular_files(root) == std::set<std::string>{"a.py", "b.js", "sub/c.txt"});
}

TEST_CASE("acquire resolves relative sources against base_dir and replaces stale content") {
    TempDir tmp;
    write_file(tmp / "plugins/p/a.py", "x\n");
    AcquireOptions opts;
    opts.base_dir = tmp.path();
    write_file(tmp / "work/p1/stale.py", "old\n");
    write_file(tmp / "work/p1/.mcp-audit/run-1.json", "{}\n");
    const auto root = acquire(rec("p1", "./plugins/p"), tmp / "work", opts);
    CHECK(regular_files(root) == std::set<std::string>{".mcp-audit/run-1.json", "a.py"});
}

TEST_CASE("acquire of a missing path raises an acquisition error carrying the source") {
    TempDir tmp;
    const std::string missing = (tmp / "nope").string();
    try {
        acquire(rec("p1", missing), tmp / "work");
        FAIL("expected AcquisitionError");
    } catch (const AcquisitionError& e) {
        CHECK(e.source() == missing);
    }
}

TEST_CASE("acquire shallow-clones a .git URL") {
    if (std::system("git --version > /dev/null 2>&1") != 0) {
        MESSAGE("git not available; skipping");
        return;
    }
    TempDir tmp;
    write_file(tmp / "seed/README.md", "tiny\n");
    write_file(tmp / "seed/src/app.py", "import os\nos.system('ls')\n");
    const std::string seed = (tmp / "seed").string();
    const std::string bare = (tmp / "tiny.git").string();
    const std::string cmd = "cd '" + seed +
                            "' && git init -q && git add -A && git -c user.email=t@t -c user.name=t commit -qm init"
                            " && git clone -q --bare '" +
                            seed + "' '" + bare + "'";
    REQUIRE(std::system(cmd.c_str()) == 0);

    const auto root = acquire(rec("tiny", "file://" + bare), tmp / "work");
    CHECK(root == tmp / "work/tiny");
    auto files = regular_files(root);
    std::erase_if(files, [](const std::string& p) { return p.rfind(".git/", 0) == 0; });
    CHECK(files == std::set<std::string>{"README.md", "src/app.py"});

    CHECK_THROWS_AS(acquire(rec("gone", "file://" + (tmp / "missing.git").string()), tmp / "work"),
                    AcquisitionError);
}

TEST_CASE("normalize_text") {
    bool lossy = true;
    CHECK(normalize_text("a\r\nb\rc\n", &lossy) == "a\nb\nc\n");
    CHECK_FALSE(lossy);
    CHECK(normalize_text("\xEF\xBB\xBFx = 1\n") == "x = 1\n");
    CHECK(normalize_text("caf\xC3\xA9\n", &lossy) == "caf\xC3\xA9\n");
    CHECK_FALSE(lossy);
    CHECK(normalize_text("a\xFF" "b", &lossy) == "a\xEF\xBF\xBD" "b");
    CHECK(lossy);
    // Truncated 3-byte sequence is one replacement (maximal subpart).
    CHECK(normalize_text("\xE2\x82" "x") == "\xEF\xBF\xBD" "x");
    // Overlong and surrogate encodings are invalid.
    CHECK(normalize_text("\xC0\xAF") == "\xEF\xBF\xBD\xEF\xBF\xBD");
    CHECK(normalize_text("\xED\xA0\x80") == "\xEF\xBF\xBD\xEF\xBF\xBD\xEF\xBF\xBD");
    // UTF-16 with BOM.
    CHECK(normalize_text(std::string("\xFF\xFEh\0i\0\r\0\n\0", 10)) == "hi\n");
    CHECK(normalize_text(std::string("\xFE\xFF\0o\0k", 6)) == "ok");
}

TEST_CASE("normalize_tree prunes dependency directories") {
    TempDir tmp;
    write_file(tmp / "node_modules/x.js", "exec('x')\n");
    write_file(tmp / "src/a.py", "print(1)\n");
    const auto tree = normalize_tree(tmp.path());
    REQUIRE(tree.files.size() == 1);
    CHECK(tree.files[0].path == "src/a.py");
    REQUIRE(tree.skipped.size() == 1);
    CHECK(tree.skipped[0].path == "node_modules/x.js");
    CHECK(tree.skipped[0].reason == "pruned-dir");
}

TEST_CASE("normalize_tree rewrites CRLF and is idempotent") {
    TempDir tmp;
    write_file(tmp / "a.py", "x = 1\r\ny = 2\r\n");
    write_file(tmp / "bad.py", "s = '\xFF'\n");
    const auto once = normalize_tree(tmp.path());
    CHECK(read_file(tmp / "a.py") == "x = 1\ny = 2\n");
    REQUIRE(once.files.size() == 2);
    CHECK(once.files[0].size == 12);
    CHECK(once.files[0].sha256 == sha256_hex("x = 1\ny = 2\n"));
    CHECK(once.lossy == std::vector<std::string>{"bad.py"});
    const auto twice = normalize_tree(tmp.path());
    CHECK(twice.files == once.files);
    CHECK(twice.skipped == once.skipped);
    CHECK(twice.lossy.empty());
}

TEST_CASE("normalize_tree size cap and binary detection") {
    TempDir tmp;
    write_file(tmp / "big.py", std::string(2u << 20, 'a'));
    write_file(tmp / "exact.py", std::string(1u << 20, 'b'));
    write_file(tmp / "blob.bin", std::string("\x7F" "ELF\0\0\x01", 7));
    std::string late_nul(9000, 'c');
    late_nul[8500] = '\0';
    write_file(tmp / "late.txt", late_nul);
    const auto tree = normalize_tree(tmp.path());
    std::vector<std::string> kept;
    for (const auto& f : tree.files) kept.push_back(f.path);
    CHECK(kept == std::vector<std::string>{"exact.py", "late.txt"});
    REQUIRE(tree.skipped.size() == 2);
    CHECK(tree.skipped[0].path == "big.py");
    CHECK(tree.skipped[0].reason == "oversize");
    CHECK(tree.skipped[1].path == "blob.bin");
    CHECK(tree.skipped[1].reason == "binary");

    PruneConfig small;
    small.max_file_bytes = 10;
    write_file(tmp / "tiny.py", "0123456789");
    const auto capped = normalize_tree(tmp.path(), small);
    CHECK(std::any_of(capped.files.begin(), capped.files.end(),
                      [](const TreeFile& f) { return f.path == "tiny.py"; }));
}

TEST_CASE("normalize_tree unreadable files are skipped") {
    if (::geteuid() == 0) {
        MESSAGE("running as root; permission bits are not enforced");
        return;
    }
    TempDir tmp;
    write_file(tmp / "secret.py", "x\n");
    fs::permissions(tmp / "secret.py", fs::perms::none);
    const auto tree = normalize_tree(tmp.path());
    REQUIRE(tree.skipped.size() == 1);
    CHECK(tree.skipped[0].reason == "unreadable");
}

TEST_CASE("normalize_tree custom prune set and archive dir") {
    TempDir tmp;
    write_file(tmp / "node_modules/x.js", "x\n");
    write_file(tmp / "gen/y.js", "y\n");
    write_file(tmp / ".mcp-audit/run-1.json", "{}\n");
    PruneConfig cfg;
    cfg.prune_dirs = {"gen"};
    const auto tree = normalize_tree(tmp.path(), cfg);
    REQUIRE(tree.files.size() == 1);
    CHECK(tree.files[0].path == "node_modules/x.js");
    REQUIRE(tree.skipped.size() == 2);
    CHECK(tree.skipped[0].path == ".mcp-audit/run-1.json");
    CHECK(tree.skipped[1].path == "gen/y.js");
}

TEST_CASE("normalize_tree partitions regular files on random trees") {
    std::mt19937 rng(11);
    const std::vector<std::string> dirs = {"", "src/", "node_modules/", "a/venv/", "lib/dist/", "x/y/", "__pycache__/",
                                           "pkg/"};
    const std::vector<std::string> bodies = {"x = 1\n", "a\r\nb", std::string("\0bin", 4), "\xFF\xFE", "ok",
                                             std::string(300, 'z')};
    for (int trial = 0; trial < 30; ++trial) {
        TempDir tmp;
        const int n = std::uniform_int_distribution<int>(0, 15)(rng);
        for (int i = 0; i < n; ++i) {
            const auto& d = dirs[std::uniform_int_distribution<std::size_t>(0, dirs.size() - 1)(rng)];
            const auto& b = bodies[std::uniform_int_distribution<std::size_t>(0, bodies.size() - 1)(rng)];
            write_file(tmp / (d + "f" + std::to_string(i) + ".py"), b);
        }
        PruneConfig cfg;
        cfg.max_file_bytes = 200;
        const auto tree = normalize_tree(tmp.path(), cfg);
        std::set<std::string> seen;
        for (const auto& f : tree.files) {
            CHECK(seen.insert(f.path).second);
            for (const auto& pruned : cfg.prune_dirs) {
                CHECK(("/" + f.path).find("/" + pruned + "/") == std::string::npos);
            }
        }
        for (const auto& s : tree.skipped) {
            CHECK(seen.insert(s.path).second);
        }
        CHECK(seen == regular_files(tmp.path()));
        CHECK(std::is_sorted(tree.files.begin(), tree.files.end(),
                             [](const TreeFile& a, const TreeFile& b) { return a.path < b.path; }));
        const auto again = normalize_tree(tmp.path(), cfg);
        CHECK(again.files == tree.files);
        CHECK(again.skipped == tree.skipped);
    }
}
