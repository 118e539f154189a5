#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qbe/error.hpp"

namespace qbe::featio {

struct ManifestEntry {
    std::string id;
    std::filesystem::path path;  // resolved against the manifest's directory
    std::string transcription;
    std::size_t line = 0;        // 1-based line in the source file
    std::size_t num_columns = 3;
};

/// One manifest TSV (`id<TAB>path<TAB>transcription`).
///
/// Lines starting with '#' are comments. Comments of the form
/// `# key: value` are kept as metadata (e.g. `# extractor_tag: mfcc39`).
struct ManifestFile {
    std::filesystem::path source;
    std::vector<ManifestEntry> entries;
    std::map<std::string, std::string> metadata;

    std::string extractor_tag() const;
};

struct DatasetManifest {
    std::string dataset_id;
    ManifestFile queries;
    ManifestFile items;
};

/// Parses one manifest file. Throws CorruptFileError on a malformed TSV
/// (missing/incorrect header, a row with fewer than two fields).
ManifestFile load_manifest(const std::filesystem::path& path);

DatasetManifest load_dataset(const std::filesystem::path& queries_tsv,
                             const std::filesystem::path& items_tsv,
                             std::string dataset_id = {});

/// Collects every problem: duplicate ids, rows missing the transcription
/// column, and paths that do not exist. Empty iff the manifest is usable.
Diagnostics validate_manifest(const ManifestFile& manifest, const std::string& role);
Diagnostics validate_manifest(const DatasetManifest& manifest);

/// Writes a manifest; paths are written relative to the manifest's directory
/// when they live below it.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries,
                    const std::map<std::string, std::string>& metadata = {});

}  // namespace qbe::featio
