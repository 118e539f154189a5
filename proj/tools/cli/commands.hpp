#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace qbe::cli {

/// Exit codes shared by all subcommands.
enum ExitCode : int { kOk = 0, kFailed = 1, kUsage = 2 };

/// WAV manifest -> one ".qf" per row plus `<out_dir>/manifest.tsv`.
/// Audio at twice the MFCC rate is decimated first (unless disabled).
int cmd_extract(const RunConfig& cfg, const std::filesystem::path& wav_manifest, const std::filesystem::path& out_dir,
                std::ostream& out, std::ostream& err);

/// Scores every (query, item) pair into `<out_dir>/scores.tsv`.
int cmd_search(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// MTWV report (`report.json`, `summary.csv`) from a scores TSV and either
/// a gold TSV or the query/item manifests.
int cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& scores_tsv, std::ostream& out,
                 std::ostream& err);

/// One-sided paired t-tests between the first systems of two reports,
/// written to `<out_dir>/compare.csv`.
int cmd_compare(const std::filesystem::path& report_a, const std::filesystem::path& report_b,
                const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

/// Segment averaging + classical MDS + ellipses; outputs under `out_prefix`.
int cmd_mds(const std::filesystem::path& features_manifest, const std::filesystem::path& intervals_tsv,
            const std::filesystem::path& out_prefix, std::ostream& out, std::ostream& err);

/// Checks manifests (ids, paths) and that every ".qf" they reference parses
/// and shares one dimensionality.
int cmd_validate(const std::vector<std::filesystem::path>& manifests, std::ostream& out, std::ostream& err);

/// Full command line (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qbe::cli
