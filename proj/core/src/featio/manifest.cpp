#include "qbe/featio/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "qbe/text.hpp"

namespace qbe::featio {

std::string ManifestFile::extractor_tag() const {
    const auto it = metadata.find("extractor_tag");
    return it == metadata.end() ? std::string{} : it->second;
}

ManifestFile load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(fmt::format("cannot open manifest {}", path.string()));
    const auto base = path.parent_path();

    ManifestFile manifest;
    manifest.source = path;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        if (text::trim(line).empty()) continue;
        if (line.front() == '#') {
            const auto body = text::trim(std::string_view(line).substr(1));
            if (const auto colon = body.find(':'); colon != std::string_view::npos) {
                manifest.metadata[std::string(text::trim(body.substr(0, colon)))] =
                    std::string(text::trim(body.substr(colon + 1)));
            }
            continue;
        }
        const auto fields = text::split(line, '\t');
        if (!have_header) {
            if (fields.size() != 3 || fields[0] != "id" || fields[1] != "path" || fields[2] != "transcription")
                throw CorruptFileError(fmt::format("{}:{}: expected header 'id<TAB>path<TAB>transcription'",
                                                   path.string(), line_no));
            have_header = true;
            continue;
        }
        if (fields.size() < 2 || fields.size() > 3)
            throw CorruptFileError(
                fmt::format("{}:{}: expected 3 tab-separated fields, found {}", path.string(), line_no, fields.size()));
        ManifestEntry entry;
        entry.id = fields[0];
        std::filesystem::path p(fields[1]);
        entry.path = p.is_absolute() || base.empty() ? p : base / p;
        entry.transcription = fields.size() == 3 ? fields[2] : std::string{};
        entry.line = line_no;
        entry.num_columns = fields.size();
        manifest.entries.push_back(std::move(entry));
    }
    if (!have_header) throw CorruptFileError(fmt::format("{}: missing header row", path.string()));
    return manifest;
}

DatasetManifest load_dataset(const std::filesystem::path& queries_tsv, const std::filesystem::path& items_tsv,
                             std::string dataset_id) {
    DatasetManifest m;
    m.queries = load_manifest(queries_tsv);
    m.items = load_manifest(items_tsv);
    if (dataset_id.empty()) {
        const auto it = m.queries.metadata.find("dataset");
        dataset_id = it != m.queries.metadata.end() ? it->second : queries_tsv.parent_path().filename().string();
    }
    m.dataset_id = std::move(dataset_id);
    return m;
}

Diagnostics validate_manifest(const ManifestFile& manifest, const std::string& role) {
    Diagnostics diags;
    std::set<std::string> seen;
    const auto where = [&](const ManifestEntry& e) {
        return fmt::format("{}:{} (id {})", manifest.source.filename().string(), e.line, e.id);
    };
    for (const auto& e : manifest.entries) {
        if (e.id.empty()) diags.push_back({Severity::kError, fmt::format("{}: empty {} id", where(e), role)});
        if (!seen.insert(e.id).second)
            diags.push_back({Severity::kError, fmt::format("duplicate {} id: {}", role, e.id)});
        if (e.num_columns < 3)
            diags.push_back({Severity::kError, fmt::format("{}: missing column 'transcription'", where(e))});
        std::error_code ec;
        if (!std::filesystem::is_regular_file(e.path, ec))
            diags.push_back({Severity::kError, fmt::format("{}: path not found: {}", where(e), e.path.string())});
    }
    return diags;
}

Diagnostics validate_manifest(const DatasetManifest& manifest) {
    auto diags = validate_manifest(manifest.queries, "query");
    auto more = validate_manifest(manifest.items, "item");
    diags.insert(diags.end(), more.begin(), more.end());
    return diags;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries,
                    const std::map<std::string, std::string>& metadata) {
    std::ostringstream out;
    for (const auto& [key, value] : metadata) out << "# " << key << ": " << value << '\n';
    out << "id\tpath\ttranscription\n";
    const auto base = path.parent_path();
    for (const auto& e : entries) {
        std::filesystem::path p = e.path;
        if (!base.empty()) {
            const auto rel = p.lexically_relative(base);
            if (!rel.empty() && *rel.begin() != "..") p = rel;
        }
        out << e.id << '\t' << p.generic_string() << '\t' << e.transcription << '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(fmt::format("cannot write manifest {}", path.string()));
    f << out.str();
}

}  // namespace qbe::featio
