#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>

#include "qbe/analysis/mds.hpp"
#include "qbe/eval/report.hpp"
#include "qbe/featio/audio.hpp"
#include "qbe/featio/manifest.hpp"

namespace qbe::cli {

namespace fs = std::filesystem;

namespace {

void print_diagnostics(const Diagnostics& diags, std::ostream& err) {
    for (const auto& d : diags)
        fmt::print(err, "{}: {}\n", d.severity == Severity::kError ? "error" : "warning", d.message);
}

std::string file_safe(const std::string& id) {
    std::string out = id;
    for (char& c : out)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    return out.empty() ? std::string("_") : out;
}

std::vector<search::Utterance> load_features(const featio::ManifestFile& manifest) {
    std::vector<search::Utterance> out;
    out.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        search::Utterance u{e.id, featio::read_feature_file(e.path)};
        u.features.source_id = e.id;
        u.features.extractor_tag = manifest.extractor_tag();
        out.push_back(std::move(u));
    }
    return out;
}

std::string dims_summary(const std::string& role, const featio::ManifestFile& m,
                         const std::vector<search::Utterance>& utts) {
    std::map<std::size_t, std::vector<std::string>> by_dims;
    for (const auto& u : utts) by_dims[u.features.num_dims()].push_back(u.id);
    std::string s;
    for (const auto& [dims, ids] : by_dims)
        s += fmt::format("{}{} (extractor_tag '{}'): {} dims, e.g. {}", s.empty() ? "" : "; ", role,
                         m.extractor_tag().empty() ? "unknown" : m.extractor_tag(), dims, ids.front());
    return s;
}

std::vector<eval::Transcribed> transcriptions(const featio::ManifestFile& m) {
    std::vector<eval::Transcribed> out;
    for (const auto& e : m.entries) out.push_back({e.id, e.transcription});
    return out;
}

}  // namespace

int cmd_extract(const RunConfig& cfg, const fs::path& wav_manifest, const fs::path& out_dir, std::ostream& out,
                std::ostream& err) {
    const auto manifest = featio::load_manifest(wav_manifest);
    Diagnostics diags = featio::validate_manifest(manifest, "input");
    // Missing files are reported per file below; other problems stop the run.
    Diagnostics fatal;
    for (const auto& d : diags)
        if (d.message.find("path not found") == std::string::npos) fatal.push_back(d);
    if (!fatal.empty()) {
        print_diagnostics(fatal, err);
        return kFailed;
    }
    fs::create_directories(out_dir);

    std::vector<featio::ManifestEntry> written;
    std::size_t failures = 0;
    std::string tag;
    for (const auto& e : manifest.entries) {
        try {
            auto audio = featio::read_wav(e.path);
            if (cfg.decimate_16k && audio.sample_rate_hz == 2 * cfg.mfcc.sample_rate_hz) audio = featio::decimate_2x(audio);
            auto features = mfcc::extract_mfcc_with_deltas(audio, cfg.mfcc);
            features.source_id = e.id;
            tag = features.extractor_tag;
            const fs::path dst = out_dir / (file_safe(e.id) + ".qf");
            featio::write_feature_file(features, dst);
            written.push_back({e.id, dst, e.transcription, 0, 3});
        } catch (const std::exception& ex) {
            ++failures;
            fmt::print(err, "error: {} ({}): {}\n", e.id, e.path.string(), ex.what());
        }
    }
    std::map<std::string, std::string> meta;
    if (!tag.empty()) meta["extractor_tag"] = tag;
    featio::write_manifest(out_dir / "manifest.tsv", written, meta);
    fmt::print(out, "extracted {} of {} files into {}\n", written.size(), manifest.entries.size(), out_dir.string());
    return failures == 0 ? kOk : kFailed;
}

int cmd_search(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.queries.empty() || cfg.items.empty()) {
        fmt::print(err, "error: search needs --queries and --items (or config keys)\n");
        return kUsage;
    }
    if (cfg.out_dir.empty()) {
        fmt::print(err, "error: search needs --out\n");
        return kUsage;
    }
    const auto dataset = featio::load_dataset(cfg.queries, cfg.items, cfg.dataset_id);
    if (dataset.queries.entries.empty()) {
        fmt::print(err, "error: no queries\n");
        return kFailed;
    }
    if (dataset.items.entries.empty()) {
        fmt::print(err, "error: no items\n");
        return kFailed;
    }
    const auto diags = featio::validate_manifest(dataset);
    if (has_errors(diags)) {
        print_diagnostics(diags, err);
        return kFailed;
    }
    const auto queries = load_features(dataset.queries);
    const auto items = load_features(dataset.items);
    std::set<std::size_t> dims;
    for (const auto& u : queries) dims.insert(u.features.num_dims());
    for (const auto& u : items) dims.insert(u.features.num_dims());
    if (dims.size() > 1) {
        fmt::print(err, "error: mixed feature dimensionalities: {}; {}\n", dims_summary("queries", dataset.queries, queries),
                   dims_summary("items", dataset.items, items));
        return kFailed;
    }

    search::ScanOptions options;
    options.workers = cfg.workers == 0 ? default_workers() : cfg.workers;
    options.on_query_done = [&err](const std::string& id, std::size_t done, std::size_t total) {
        fmt::print(err, "[{}/{}] {}\n", done, total, id);
    };
    const auto result = search::search_corpus(queries, items, cfg.search, options);
    fs::create_directories(cfg.out_dir);
    search::write_scores_tsv(cfg.out_dir / "scores.tsv", result.scores);

    const auto& st = result.stats;
    fmt::print(out, "pairs: {}\n", st.pairs);
    fmt::print(out, "windows: {}\n", st.windows);
    fmt::print(out, "workers: {}\n", st.workers);
    fmt::print(out, "wall_seconds: {:.3f}\n", st.wall_seconds);
    fmt::print(out, "pairs_per_second: {:.1f}\n", st.wall_seconds > 0 ? st.pairs / st.wall_seconds : 0.0);
    fmt::print(out, "windows_per_minute_per_core: {:.0f}\n", st.windows_per_minute_per_core());
    return kOk;
}

int cmd_evaluate(const RunConfig& cfg, const fs::path& scores_tsv, std::ostream& out, std::ostream& err) {
    if (cfg.out_dir.empty()) {
        fmt::print(err, "error: evaluate needs --out\n");
        return kUsage;
    }
    eval::GoldLabelSet gold;
    std::string dataset_id = cfg.dataset_id;
    if (!cfg.gold.empty()) {
        gold = eval::read_gold_tsv(cfg.gold);
    } else if (!cfg.queries.empty() && !cfg.items.empty()) {
        const auto dataset = featio::load_dataset(cfg.queries, cfg.items, cfg.dataset_id);
        dataset_id = dataset.dataset_id;
        auto made = eval::make_gold(transcriptions(dataset.queries), transcriptions(dataset.items));
        print_diagnostics(made.diagnostics, err);
        gold = std::move(made.gold);
    } else {
        fmt::print(err, "error: evaluate needs --gold or both --queries and --items\n");
        return kUsage;
    }
    const auto scores = search::read_scores_tsv(scores_tsv);
    eval::Report report;
    report.dataset_id = dataset_id;
    report.config = cfg.eval;
    report.systems.push_back({cfg.system_tag.empty() ? std::string("system") : cfg.system_tag,
                              eval::evaluate(scores, gold, cfg.eval)});
    eval::write_report(report, cfg.out_dir);
    const auto& r = report.systems.front().result;
    if (!r.excluded_queries.empty())
        fmt::print(err, "warning: {} queries have no true occurrence and are excluded\n", r.excluded_queries.size());
    fmt::print(out, "mtwv: {:.6f}\n", r.mtwv);
    fmt::print(out, "optimal_threshold: {}\n", r.optimal_threshold ? fmt::format("{:.6f}", *r.optimal_threshold) : "none");
    fmt::print(out, "report: {}\n", (cfg.out_dir / "report.json").string());
    return kOk;
}

int cmd_compare(const fs::path& report_a, const fs::path& report_b, const fs::path& out_dir, std::ostream& out,
                std::ostream& err) {
    const auto a = eval::read_report_json(report_a);
    const auto b = eval::read_report_json(report_b);
    if (a.systems.empty() || b.systems.empty()) {
        fmt::print(err, "error: a report has no systems\n");
        return kFailed;
    }
    const auto& sa = a.systems.front();
    const auto& sb = b.systems.front();
    if (a.dataset_id != b.dataset_id)
        fmt::print(err, "warning: comparing different datasets ({} vs {})\n", a.dataset_id, b.dataset_id);

    const auto b_over_a = eval::compare_systems(sb, sa);
    const auto a_over_b = eval::compare_systems(sa, sb);
    std::vector<double> va, vb;
    for (const auto& [id, v] : sa.result.per_query_mtwv) va.push_back(v);
    for (const auto& [id, v] : sb.result.per_query_mtwv) vb.push_back(v);

    std::string csv = "dataset,n_queries,a,mean_a,sd_a,b,mean_b,sd_b,h1,t,df,p\n";
    for (const auto* c : {&b_over_a, &a_over_b})
        csv += fmt::format("{},{},{},{:.6f},{:.6f},{},{:.6f},{:.6f},{} > {},{:.6f},{},{:.6f}\n", a.dataset_id,
                           c->n_queries, sa.tag, eval::mean(va), eval::sample_sd(va), sb.tag, eval::mean(vb),
                           eval::sample_sd(vb), c->better, c->baseline, c->test.t_value,
                           c->test.degrees_of_freedom, c->test.p_value_one_sided);
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / "compare.csv", std::ios::binary);
    if (!f) throw Error(fmt::format("cannot write {}", (out_dir / "compare.csv").string()));
    f << csv;
    fmt::print(out, "{} > {}: t = {:.3f}, p = {:.3f} (df {})\n", sb.tag, sa.tag, b_over_a.test.t_value,
               b_over_a.test.p_value_one_sided, b_over_a.test.degrees_of_freedom);
    fmt::print(out, "{} > {}: t = {:.3f}, p = {:.3f} (df {})\n", sa.tag, sb.tag, a_over_b.test.t_value,
               a_over_b.test.p_value_one_sided, a_over_b.test.degrees_of_freedom);
    return kOk;
}

int cmd_mds(const fs::path& features_manifest, const fs::path& intervals_tsv, const fs::path& out_prefix,
            std::ostream& out, std::ostream& err) {
    const auto manifest = featio::load_manifest(features_manifest);
    const auto diags = featio::validate_manifest(manifest, "feature");
    if (has_errors(diags)) {
        print_diagnostics(diags, err);
        return kFailed;
    }
    const auto intervals = analysis::read_intervals_tsv(intervals_tsv);

    std::map<std::string, const featio::ManifestEntry*> by_id;
    for (const auto& e : manifest.entries) by_id[e.id] = &e;
    std::map<std::string, std::vector<analysis::SegmentInterval>> grouped;
    for (const auto& iv : intervals) {
        std::string source = iv.source;
        if (source.empty()) {
            if (manifest.entries.size() != 1) {
                fmt::print(err, "error: intervals have no 'source' column but the manifest lists {} files\n",
                           manifest.entries.size());
                return kFailed;
            }
            source = manifest.entries.front().id;
        }
        if (!by_id.contains(source)) {
            fmt::print(err, "error: interval {} refers to unknown source '{}'\n", iv.label, source);
            return kFailed;
        }
        grouped[source].push_back(iv);
    }

    std::vector<analysis::SegmentToken> tokens;
    Diagnostics warnings;
    // Keep the intervals file order within each source, sources in manifest order.
    for (const auto& e : manifest.entries) {
        const auto it = grouped.find(e.id);
        if (it == grouped.end()) continue;
        auto features = featio::read_feature_file(e.path);
        features.source_id = e.id;
        auto res = analysis::average_segment_features(features, it->second);
        tokens.insert(tokens.end(), res.tokens.begin(), res.tokens.end());
        warnings.insert(warnings.end(), res.diagnostics.begin(), res.diagnostics.end());
    }
    print_diagnostics(warnings, err);
    if (tokens.size() < 3) {
        fmt::print(err, "error: MDS needs at least 3 tokens, got {}\n", tokens.size());
        return kFailed;
    }

    const auto embedding = analysis::classical_mds(analysis::class_distance_matrix(tokens), 2);
    std::vector<std::string> labels;
    std::map<std::string, std::vector<std::array<double, 2>>> per_label;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        labels.push_back(tokens[i].label);
        per_label[tokens[i].label].push_back({embedding.points(i, 0), embedding.points(i, 1)});
    }
    std::vector<analysis::EllipseParams> ellipses;
    for (const auto& [label, points] : per_label) {
        if (points.size() < 3) {
            fmt::print(err, "warning: class {} has {} tokens; no ellipse drawn\n", label, points.size());
            continue;
        }
        auto e = analysis::ellipse_95(points, label);
        print_diagnostics(e.diagnostics, err);
        ellipses.push_back(e.ellipse);
    }
    const auto files = analysis::emit_mds_outputs(embedding, labels, ellipses, out_prefix);
    fmt::print(out, "tokens: {}\nclasses: {}\nellipses: {}\nstress: {:.3e}\nsvg: {}\n", tokens.size(),
               per_label.size(), ellipses.size(), embedding.stress, files.svg.string());
    return kOk;
}

int cmd_validate(const std::vector<fs::path>& manifests, std::ostream& out, std::ostream& err) {
    Diagnostics all;
    for (const auto& path : manifests) {
        featio::ManifestFile m;
        try {
            m = featio::load_manifest(path);
        } catch (const Error& e) {
            all.push_back({Severity::kError, e.what()});
            continue;
        }
        auto diags = featio::validate_manifest(m, "entry");
        std::map<std::size_t, std::string> dims;
        for (const auto& e : m.entries) {
            if (e.path.extension() != ".qf") continue;
            std::error_code ec;
            if (!fs::is_regular_file(e.path, ec)) continue;  // already reported
            try {
                const auto f = featio::read_feature_file(e.path);
                dims.emplace(f.num_dims(), e.id);
            } catch (const Error& ex) {
                diags.push_back({Severity::kError, fmt::format("{}: {}", e.id, ex.what())});
            }
        }
        if (dims.size() > 1) {
            std::string s;
            for (const auto& [d, id] : dims) s += fmt::format(" {} dims ({})", d, id);
            diags.push_back({Severity::kError, fmt::format("{}: mixed feature dimensionalities:{}", path.string(), s)});
        }
        fmt::print(out, "{}: {} entries, {} diagnostics\n", path.string(), m.entries.size(), diags.size());
        all.insert(all.end(), diags.begin(), diags.end());
    }
    print_diagnostics(all, err);
    return has_errors(all) ? kFailed : kOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Query-by-example spoken term detection: feature extraction, DTW search, MTWV evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    unsigned workers = 0;
    std::string out_path;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--workers", workers, "Worker threads for search (default: available parallelism)");
    app.add_option("--out", out_path, "Output directory (mds: output path prefix)");

    std::string manifest_in;
    auto* extract = app.add_subcommand("extract", "WAV manifest -> MFCC39 feature files + manifest");
    extract->add_option("--manifest", manifest_in, "WAV manifest TSV")->required();

    std::string queries, items, gold, scores, tag, dataset;
    std::optional<int> stride;
    std::optional<double> scale;
    auto* search_cmd = app.add_subcommand("search", "Score every (query, item) pair");
    search_cmd->add_option("--queries", queries, "Query feature manifest");
    search_cmd->add_option("--items", items, "Item feature manifest");
    search_cmd->add_option("--stride", stride, "Window stride in frames");
    search_cmd->add_option("--window-scale", scale, "Window length as a multiple of the query length");

    auto* evaluate = app.add_subcommand("evaluate", "MTWV report from a scores TSV");
    evaluate->add_option("--scores", scores, "Scores TSV")->required();
    evaluate->add_option("--queries", queries, "Query manifest (for transcription gold)");
    evaluate->add_option("--items", items, "Item manifest (for transcription gold)");
    evaluate->add_option("--gold", gold, "Gold TSV (overrides transcription matching)");
    evaluate->add_option("--tag", tag, "System tag recorded in the report");
    evaluate->add_option("--dataset", dataset, "Dataset id recorded in the report");
    std::string per_query;
    evaluate->add_option("--per-query-threshold", per_query, "Per-query MTWV threshold: query|global")
        ->check(CLI::IsMember({"query", "global"}));

    std::string report_a, report_b;
    auto* compare = app.add_subcommand("compare", "One-sided paired t-tests between two reports");
    compare->add_option("report_a", report_a, "Baseline report JSON")->required();
    compare->add_option("report_b", report_b, "Other report JSON")->required();

    std::string features, intervals;
    auto* mds_cmd = app.add_subcommand("mds", "Segment-averaged features -> classical MDS + 95% ellipses");
    mds_cmd->add_option("--features", features, "Feature manifest")->required();
    mds_cmd->add_option("--intervals", intervals, "Intervals TSV")->required();

    std::vector<std::string> to_validate;
    auto* validate = app.add_subcommand("validate", "Validate manifests and the feature files they reference");
    validate->add_option("manifests", to_validate, "Manifest TSVs")->required();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (workers != 0) cfg.workers = workers;
        if (!out_path.empty()) cfg.out_dir = out_path;
        if (!queries.empty()) cfg.queries = queries;
        if (!items.empty()) cfg.items = items;
        if (!gold.empty()) cfg.gold = gold;
        if (!tag.empty()) cfg.system_tag = tag;
        if (!dataset.empty()) cfg.dataset_id = dataset;
        if (stride) cfg.search.window_stride_frames = *stride;
        if (scale) cfg.search.window_scale = *scale;
        if (per_query == "global") cfg.eval.per_query = eval::PerQueryThreshold::kGlobal;
        if (per_query == "query") cfg.eval.per_query = eval::PerQueryThreshold::kQueryOptimal;

        if (extract->parsed()) {
            if (cfg.out_dir.empty()) {
                fmt::print(err, "error: extract needs --out\n");
                return kUsage;
            }
            return cmd_extract(cfg, manifest_in, cfg.out_dir, out, err);
        }
        if (search_cmd->parsed()) return cmd_search(cfg, out, err);
        if (evaluate->parsed()) return cmd_evaluate(cfg, scores, out, err);
        if (compare->parsed()) {
            if (cfg.out_dir.empty()) {
                fmt::print(err, "error: compare needs --out\n");
                return kUsage;
            }
            return cmd_compare(report_a, report_b, cfg.out_dir, out, err);
        }
        if (mds_cmd->parsed()) {
            if (cfg.out_dir.empty()) {
                fmt::print(err, "error: mds needs --out PREFIX\n");
                return kUsage;
            }
            return cmd_mds(features, intervals, cfg.out_dir, out, err);
        }
        if (validate->parsed()) {
            std::vector<fs::path> paths(to_validate.begin(), to_validate.end());
            return cmd_validate(paths, out, err);
        }
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kFailed;
    }
    return kUsage;
}

}  // namespace qbe::cli
