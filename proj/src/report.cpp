#include "mcpaudit/report.hpp"

#include "mcpaudit/error.hpp"
#include "mcpaudit/hash.hpp"

#include "json.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <regex>
#include <sstream>

namespace mcpaudit {

using nlohmann::json;

namespace {

// ---- JSON encoding ----

json record_to_json(const PluginRecord& rec) {
    json j{{"id", rec.id},
           {"name", rec.name},
           {"source", rec.source},
           {"category", to_string(rec.category)},
           {"stars", rec.stars},
           {"tags", rec.tags}};
    if (rec.language_hint) {
        j["language_hint"] = *rec.language_hint;
    }
    return j;
}

json counts_to_json(const ResourceCounts& counts) {
    json j = json::object();
    for (const auto c : kResourceCategories) {
        j[std::string(to_string(c))] = at(counts, c);
    }
    return j;
}

json rows_to_json(const std::vector<TableRow>& rows) {
    json arr = json::array();
    for (const auto& row : rows) {
        arr.push_back({{"label", row.label},
                       {"file", at(row.counts, ResourceCategory::File)},
                       {"memory", at(row.counts, ResourceCategory::Memory)},
                       {"network", at(row.counts, ResourceCategory::Network)},
                       {"system", at(row.counts, ResourceCategory::System)},
                       {"total", row.total}});
    }
    return arr;
}

json result_to_json(const PluginScanResult& result) {
    json findings = json::array();
    for (const auto& f : result.findings) {
        findings.push_back({{"file", f.file},
                            {"line", f.line},
                            {"column", f.column},
                            {"signature_id", f.signature_id},
                            {"category", to_string(f.category)},
                            {"matched_text", f.matched_text},
                            {"mode", to_string(f.mode)}});
    }
    return {{"plugin_id", result.plugin_id},
            {"status", to_string(result.status)},
            {"files_scanned", result.files_scanned},
            {"files_skipped", result.files_skipped},
            {"lexer_fallbacks", result.lexer_fallbacks},
            {"findings", std::move(findings)}};
}

json run_to_json(const RunExport& run) {
    json provenance = json::array();
    for (const auto& p : run.db_provenance) {
        provenance.push_back({{"source", p.source}, {"count", p.count}});
    }
    json signatures = json::array();
    for (const auto& s : run.signatures) {
        signatures.push_back(signature_to_json(s));
    }
    json manifest = json::array();
    for (const auto& r : run.manifest) {
        manifest.push_back(record_to_json(r));
    }
    json dropped = json::array();
    for (const auto& d : run.dropped) {
        dropped.push_back({{"record", record_to_json(d.record)}, {"reason", d.reason}});
    }
    json plugins = json::array();
    for (const auto& p : run.plugins) {
        plugins.push_back(result_to_json(p));
    }
    const auto& agg = run.aggregates;
    return {{"schema_version", run.schema_version},
            {"run_id", run.run_id},
            {"timestamp", run.timestamp},
            {"db_provenance", std::move(provenance)},
            {"signatures", std::move(signatures)},
            {"manifest_digest", run.manifest_digest},
            {"manifest", std::move(manifest)},
            {"dropped", std::move(dropped)},
            {"plugins", std::move(plugins)},
            {"aggregates",
             {{"servers_affected", counts_to_json(agg.servers_affected)},
              {"calls_by_category", rows_to_json(agg.calls_by_category)},
              {"calls_by_stars", rows_to_json(agg.calls_by_stars)},
              {"corpus_size", agg.corpus_size},
              {"unacquired", agg.unacquired}}}};
}

// ---- JSON decoding ----

template <typename T>
T get_field(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ParseError(std::string("export: missing key '") + key + "'");
    }
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ParseError(std::string("export: key '") + key + "' has the wrong type");
    }
}

const json& get_array(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_array()) {
        throw ParseError(std::string("export: '") + key + "' must be an array");
    }
    return *it;
}

ResourceCategory category_field(const json& obj, const char* key) {
    const auto name = get_field<std::string>(obj, key);
    const auto c = parse_resource_category(name);
    if (!c) {
        throw ParseError("export: unknown resource category '" + name + "'");
    }
    return *c;
}

PluginRecord record_from_json(const json& j) {
    PluginRecord rec;
    rec.id = get_field<std::string>(j, "id");
    rec.name = get_field<std::string>(j, "name");
    rec.source = get_field<std::string>(j, "source");
    const auto cat = get_field<std::string>(j, "category");
    const auto parsed = parse_application_category(cat);
    if (!parsed) {
        throw ParseError("export: unknown application category '" + cat + "'");
    }
    rec.category = *parsed;
    rec.stars = get_field<std::uint64_t>(j, "stars");
    rec.tags = get_field<std::vector<std::string>>(j, "tags");
    if (j.contains("language_hint")) {
        rec.language_hint = get_field<std::string>(j, "language_hint");
    }
    return rec;
}

ResourceCounts counts_from_json(const json& j) {
    ResourceCounts counts{};
    for (const auto c : kResourceCategories) {
        at(counts, c) = get_field<std::uint64_t>(j, std::string(to_string(c)).c_str());
    }
    return counts;
}

std::vector<TableRow> rows_from_json(const json& arr) {
    std::vector<TableRow> rows;
    for (const auto& r : arr) {
        TableRow row;
        row.label = get_field<std::string>(r, "label");
        at(row.counts, ResourceCategory::File) = get_field<std::uint64_t>(r, "file");
        at(row.counts, ResourceCategory::Memory) = get_field<std::uint64_t>(r, "memory");
        at(row.counts, ResourceCategory::Network) = get_field<std::uint64_t>(r, "network");
        at(row.counts, ResourceCategory::System) = get_field<std::uint64_t>(r, "system");
        row.total = get_field<std::uint64_t>(r, "total");
        rows.push_back(std::move(row));
    }
    return rows;
}

PluginScanResult result_from_json(const json& j) {
    PluginScanResult result;
    result.plugin_id = get_field<std::string>(j, "plugin_id");
    const auto status = parse_scan_status(get_field<std::string>(j, "status"));
    if (!status) {
        throw ParseError("export: unknown plugin status");
    }
    result.status = *status;
    result.files_scanned = get_field<std::uint64_t>(j, "files_scanned");
    result.files_skipped = get_field<std::uint64_t>(j, "files_skipped");
    result.lexer_fallbacks = get_field<std::uint64_t>(j, "lexer_fallbacks");
    for (const auto& f : get_array(j, "findings")) {
        Finding finding;
        finding.plugin_id = result.plugin_id;
        finding.file = get_field<std::string>(f, "file");
        finding.line = get_field<std::uint32_t>(f, "line");
        finding.column = get_field<std::uint32_t>(f, "column");
        finding.signature_id = get_field<std::string>(f, "signature_id");
        finding.category = category_field(f, "category");
        finding.matched_text = get_field<std::string>(f, "matched_text");
        const auto mode = parse_scan_mode(get_field<std::string>(f, "mode"));
        if (!mode) {
            throw ParseError("export: unknown scan mode");
        }
        finding.mode = *mode;
        result.findings.push_back(std::move(finding));
    }
    return result;
}

// ---- text helpers ----

std::string md_cell(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (c == '|') {
            out += "\\|";
        } else if (c == '\n') {
            out += ' ';
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::string md_code(std::string_view text) {
    return "`" + md_cell(text) + "`";
}

std::string signed_str(std::int64_t v) {
    return (v > 0 ? "+" : "") + std::to_string(v);
}

void table_header(std::ostringstream& out, std::string_view first) {
    out << "| " << first << " | File | Memory | Network | System | Total |\n";
    out << "|---|---:|---:|---:|---:|---:|\n";
}

void table_rows(std::ostringstream& out, const std::vector<TableRow>& rows) {
    for (const auto& row : rows) {
        out << "| " << md_cell(row.label) << " | " << at(row.counts, ResourceCategory::File) << " | "
            << at(row.counts, ResourceCategory::Memory) << " | " << at(row.counts, ResourceCategory::Network)
            << " | " << at(row.counts, ResourceCategory::System) << " | " << row.total << " |\n";
    }
}

void csv_rows(std::ostringstream& out, const std::vector<TableRow>& rows) {
    for (const auto& row : rows) {
        out << row.label << ',' << at(row.counts, ResourceCategory::File) << ','
            << at(row.counts, ResourceCategory::Memory) << ',' << at(row.counts, ResourceCategory::Network) << ','
            << at(row.counts, ResourceCategory::System) << ',' << row.total << '\n';
    }
}

} // namespace

std::string utc_timestamp_now() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char frac[8];
    std::snprintf(frac, sizeof frac, ".%03dZ", static_cast<int>(ms));
    return std::string(buf) + frac;
}

bool is_rfc3339_utc(std::string_view timestamp) {
    static const std::regex kPattern(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d{1,9})?Z)");
    return std::regex_match(timestamp.begin(), timestamp.end(), kPattern);
}

std::string make_run_id(std::string_view timestamp, std::string_view manifest_digest) {
    std::string id;
    for (char c : timestamp) {
        if ((c >= '0' && c <= '9') || c == 'T' || c == 'Z') {
            id.push_back(c);
        }
    }
    id += '-';
    id += manifest_digest.substr(0, 8);
    return id;
}

RunExport build_run(std::vector<PluginRecord> records, std::vector<DroppedRecord> dropped,
                    std::vector<PluginScanResult> results, const SignatureDb& db, std::string_view manifest_bytes,
                    std::string timestamp) {
    RunExport run;
    run.manifest_digest = sha256_hex(manifest_bytes);
    run.timestamp = std::move(timestamp);
    run.run_id = make_run_id(run.timestamp, run.manifest_digest);
    run.db_provenance = db.provenance;
    run.signatures = db.signatures;
    run.aggregates = aggregate(results, records);
    run.manifest = std::move(records);
    run.dropped = std::move(dropped);
    run.plugins = std::move(results);
    return run;
}

std::string export_json(const RunExport& run, const std::optional<std::string>& pinned_timestamp) {
    json doc = run_to_json(run);
    if (pinned_timestamp) {
        doc["timestamp"] = *pinned_timestamp;
    }
    return doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

RunExport parse_export(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("export: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("export: document must be a JSON object");
    }
    const int version = get_field<int>(doc, "schema_version");
    if (version != kSchemaVersion) {
        throw VersionError("unsupported schema_version " + std::to_string(version) + " (expected " +
                           std::to_string(kSchemaVersion) + ")");
    }
    RunExport run;
    run.schema_version = version;
    run.run_id = get_field<std::string>(doc, "run_id");
    run.timestamp = get_field<std::string>(doc, "timestamp");
    run.manifest_digest = get_field<std::string>(doc, "manifest_digest");
    for (const auto& p : get_array(doc, "db_provenance")) {
        run.db_provenance.push_back({get_field<std::string>(p, "source"), get_field<std::size_t>(p, "count")});
    }
    try {
        for (const auto& s : get_array(doc, "signatures")) {
            run.signatures.push_back(signature_from_json(s));
        }
    } catch (const ValidationError& e) {
        throw ParseError(std::string("export: ") + e.what());
    }
    for (const auto& r : get_array(doc, "manifest")) {
        run.manifest.push_back(record_from_json(r));
    }
    for (const auto& d : get_array(doc, "dropped")) {
        const auto rec = d.find("record");
        if (rec == d.end()) {
            throw ParseError("export: dropped entry without record");
        }
        run.dropped.push_back({record_from_json(*rec), get_field<std::string>(d, "reason")});
    }
    for (const auto& p : get_array(doc, "plugins")) {
        run.plugins.push_back(result_from_json(p));
    }
    const auto agg = doc.find("aggregates");
    if (agg == doc.end() || !agg->is_object()) {
        throw ParseError("export: missing aggregates");
    }
    const auto servers = agg->find("servers_affected");
    if (servers == agg->end()) {
        throw ParseError("export: missing servers_affected");
    }
    run.aggregates.servers_affected = counts_from_json(*servers);
    run.aggregates.calls_by_category = rows_from_json(get_array(*agg, "calls_by_category"));
    run.aggregates.calls_by_stars = rows_from_json(get_array(*agg, "calls_by_stars"));
    run.aggregates.corpus_size = get_field<std::uint64_t>(*agg, "corpus_size");
    run.aggregates.unacquired = get_field<std::uint64_t>(*agg, "unacquired");
    return run;
}

std::string render_markdown(const RunExport& run) {
    std::ostringstream out;
    std::uint64_t total_findings = 0;
    for (const auto& p : run.plugins) {
        total_findings += p.findings.size();
    }

    out << "# MCP Audit Report\n\n";

    out << "## Run Summary\n\n";
    out << "| Metric | Value |\n|---|---|\n";
    out << "| Run ID | " << md_code(run.run_id) << " |\n";
    out << "| Timestamp | " << md_cell(run.timestamp) << " |\n";
    out << "| Corpus size | " << run.aggregates.corpus_size << " |\n";
    out << "| Unacquired | " << run.aggregates.unacquired << " |\n";
    out << "| Dropped as duplicates | " << run.dropped.size() << " |\n";
    out << "| Total findings | " << total_findings << " |\n";
    out << "| Signature database |";
    for (std::size_t i = 0; i < run.db_provenance.size(); ++i) {
        out << (i ? ", " : " ") << md_cell(run.db_provenance[i].source) << " (" << run.db_provenance[i].count << ")";
    }
    out << " |\n\n";
    if (!run.dropped.empty()) {
        out << "Dropped records:\n\n";
        for (const auto& d : run.dropped) {
            out << "- " << md_code(d.record.id) << ": " << md_cell(d.reason) << "\n";
        }
        out << "\n";
    }

    out << "## Threat Type Distribution\n\n";
    out << "| Category | Servers affected |\n|---|---:|\n";
    for (const auto c : kResourceCategories) {
        out << "| " << to_string(c) << " | " << at(run.aggregates.servers_affected, c) << " |\n";
    }
    out << "\n";

    out << "## API Calls by Application Category\n\n";
    table_header(out, "Application category");
    table_rows(out, run.aggregates.calls_by_category);
    out << "\n";

    out << "## API Calls by Star Range\n\n";
    table_header(out, "Star range");
    table_rows(out, run.aggregates.calls_by_stars);
    out << "\n";

    out << "## Per-Plugin Findings\n\n";
    bool any = false;
    for (const auto& p : run.plugins) {
        if (p.findings.empty()) {
            continue;
        }
        any = true;
        out << "### " << md_cell(p.plugin_id) << "\n\n";
        out << "| Location | Signature | Category | Matched text | Mode |\n|---|---|---|---|---|\n";
        for (const auto& f : p.findings) {
            const auto sig = std::lower_bound(run.signatures.begin(), run.signatures.end(), f.signature_id,
                                              [](const Signature& s, const std::string& id) { return s.id < id; });
            const bool low = sig != run.signatures.end() && sig->id == f.signature_id && sig->low_specificity();
            out << "| " << md_code(f.file + ":" + std::to_string(f.line) + ":" + std::to_string(f.column)) << " | "
                << md_code(f.signature_id) << (low ? " (low-specificity)" : "") << " | " << to_string(f.category)
                << " | " << md_code(f.matched_text) << " | " << to_string(f.mode) << " |\n";
        }
        out << "\n";
    }
    if (!any) {
        out << "_No findings._\n";
    }
    return out.str();
}

std::string emit_chart_csv(const RunExport& run, ChartView view) {
    std::ostringstream out;
    switch (view) {
    case ChartView::Fig2:
        out << "category,servers_affected\n";
        for (const auto c : kResourceCategories) {
            out << to_string(c) << ',' << at(run.aggregates.servers_affected, c) << '\n';
        }
        break;
    case ChartView::Table2:
        out << "app_category,file,memory,network,system,total\n";
        csv_rows(out, run.aggregates.calls_by_category);
        break;
    case ChartView::Table3:
        out << "star_range,file,memory,network,system,total\n";
        csv_rows(out, run.aggregates.calls_by_stars);
        break;
    }
    return out.str();
}

RunExport slice_run(const RunExport& run, std::string_view plugin_id) {
    RunExport slice;
    slice.schema_version = run.schema_version;
    slice.run_id = run.run_id;
    slice.timestamp = run.timestamp;
    slice.db_provenance = run.db_provenance;
    slice.signatures = run.signatures;
    slice.manifest_digest = run.manifest_digest;
    for (const auto& rec : run.manifest) {
        if (rec.id == plugin_id) {
            slice.manifest.push_back(rec);
        }
    }
    for (const auto& p : run.plugins) {
        if (p.plugin_id == plugin_id) {
            slice.plugins.push_back(p);
        }
    }
    slice.aggregates = aggregate(slice.plugins, slice.manifest);
    return slice;
}

ArchiveOutcome archive_run(const RunExport& run, std::string_view plugin_id, const std::filesystem::path& plugin_root,
                           std::string_view archive_dir) {
    ArchiveOutcome outcome;
    const auto dir = plugin_root / archive_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        outcome.warning = "cannot create archive directory " + dir.string() + ": " + ec.message();
        return outcome;
    }
    const auto path = dir / ("run-" + run.run_id + ".json");
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    const std::string body = export_json(slice_run(run, plugin_id));
    file.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!file) {
        outcome.warning = "cannot write archive " + path.string();
        return outcome;
    }
    outcome.path = path;
    return outcome;
}

DiffReport diff_runs(const RunExport& previous, const RunExport& current) {
    return diff_runs(RunSnapshot{previous.schema_version, &previous.aggregates, &previous.plugins},
                     RunSnapshot{current.schema_version, &current.aggregates, &current.plugins});
}

std::string render_diff_markdown(const DiffReport& diff) {
    std::ostringstream out;
    out << "# Run Diff\n\n";
    if (diff.empty()) {
        out << "No changes.\n";
        return out.str();
    }

    bool any_delta = false;
    for (std::size_t c = 0; c < 4; ++c) {
        any_delta = any_delta || diff.calls_delta[c] != 0 || diff.servers_delta[c] != 0;
    }
    if (any_delta) {
        out << "## Aggregate Deltas\n\n| Category | API calls | Servers affected |\n|---|---:|---:|\n";
        for (const auto c : kResourceCategories) {
            const auto i = static_cast<std::size_t>(c);
            if (diff.calls_delta[i] != 0 || diff.servers_delta[i] != 0) {
                out << "| " << to_string(c) << " | " << signed_str(diff.calls_delta[i]) << " | "
                    << signed_str(diff.servers_delta[i]) << " |\n";
            }
        }
        out << "\n";
    }
    if (!diff.plugins_added.empty() || !diff.plugins_removed.empty()) {
        out << "## Plugin Set Changes\n\n";
        for (const auto& id : diff.plugins_added) {
            out << "- added " << md_code(id) << "\n";
        }
        for (const auto& id : diff.plugins_removed) {
            out << "- removed " << md_code(id) << "\n";
        }
        out << "\n";
    }
    for (const auto& p : diff.plugins) {
        out << "## " << md_cell(p.plugin_id) << "\n\n";
        if (p.status_change) {
            out << "Status: " << to_string(p.status_change->first) << " -> " << to_string(p.status_change->second)
                << "\n\n";
        }
        if (p.added.empty() && p.removed.empty()) {
            continue;
        }
        out << "| Change | Location | Signature | Category | Matched text |\n|---|---|---|---|---|\n";
        auto row = [&out](char sign, const DiffEntry& e) {
            out << "| " << sign << " | " << md_code(e.file + ":" + std::to_string(e.line)) << " | "
                << md_code(e.signature_id) << " | " << to_string(e.category) << " | " << md_code(e.matched_text)
                << " |\n";
        };
        for (const auto& e : p.added) row('+', e);
        for (const auto& e : p.removed) row('-', e);
        out << "\n";
    }
    return out.str();
}

} // namespace mcpaudit
