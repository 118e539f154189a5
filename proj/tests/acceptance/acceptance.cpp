// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/core.h>

#include "cli/commands.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"
#include "qbe/analysis/mds.hpp"
#include "qbe/eval/stats.hpp"
#include "qbe/eval/twv.hpp"
#include "qbe/search/dtw_search.hpp"

namespace fs = std::filesystem;
using namespace qbe;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    if (!ok) ++failures;
    fmt::print("{} {}: {}\n", ok ? "PASS" : "FAIL", name, detail);
    std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run(std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "qbe");
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    if (out_text) *out_text = out.str();
    if (code != 0) std::cerr << err.str();
    return code;
}

void dtw_oracle() {
    const auto t0 = Clock::now();
    std::mt19937 rng(665);
    std::uniform_int_distribution<std::size_t> size(1, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        Matrix m(size(rng), size(rng));
        for (auto& v : m.values()) v = u(rng);
        // Normalized distance matrix: rescale onto [0, 1].
        const auto w = search::range_normalize({m, false}).values;
        worst = std::max(worst, std::abs(search::dtw_window_cost(w) - testing::brute_force_window_cost(w)));
    }
    const double secs = seconds_since(t0);
    report(worst <= 1e-12 && secs < 5.0, "dtw_oracle_equivalence",
           fmt::format("500 matrices up to 5x5, max |diff| = {:.3g}, {:.2f} s", worst, secs));
}

struct PipelineOutcome {
    double mtwv = 0.0;
    bool argmax_ok = true;
    std::size_t argmax_misses = 0;
    double seconds = 0.0;
    fs::path scores;
};

PipelineOutcome run_pipeline(const testing::SyntheticCorpus& corpus, const fs::path& dir, unsigned workers) {
    PipelineOutcome o;
    testing::write_corpus(corpus, dir);
    const auto t0 = Clock::now();
    const auto out = dir / fmt::format("run_w{}", workers);
    if (run({"search", "--queries", (dir / "queries.tsv").string(), "--items", (dir / "items.tsv").string(),
             "--workers", std::to_string(workers), "--out", out.string()}) != 0)
        throw Error("search failed");
    o.seconds = seconds_since(t0);
    o.scores = out / "scores.tsv";

    const auto scores = search::read_scores_tsv(o.scores);
    o.mtwv = eval::evaluate(scores, corpus.gold, eval::EvalConfig{}).mtwv;
    for (std::size_t q = 0; q < corpus.queries.size(); ++q) {
        const auto& qid = corpus.queries[q].id;
        const search::DetectionScore* best = nullptr;
        for (const auto& s : scores)
            if (s.query_id == qid && (!best || s.score > best->score)) best = &s;
        if (!best || best->item_id != corpus.items[corpus.host_item[q]].id) ++o.argmax_misses;
    }
    o.argmax_ok = o.argmax_misses == 0;
    return o;
}

void exact_and_determinism() {
    testing::TempDir dir;
    const auto corpus = testing::make_corpus({});
    const auto o = run_pipeline(corpus, dir.path(), 4);
    report(o.mtwv == 1.0 && o.argmax_ok && o.seconds < 60.0, "exact_embedding_retrieval",
           fmt::format("50x200, MTWV = {:.6f}, argmax misses = {}, search {:.1f} s on 4 workers", o.mtwv,
                       o.argmax_misses, o.seconds));

    const auto reference = slurp(o.scores);
    bool identical = !reference.empty();
    std::string timings;
    for (unsigned w : {1u, 8u}) {
        const auto t0 = Clock::now();
        const auto out = dir / fmt::format("det_w{}", w);
        identical &= run({"search", "--queries", (dir / "queries.tsv").string(), "--items",
                          (dir / "items.tsv").string(), "--workers", std::to_string(w), "--out", out.string()}) == 0;
        identical &= slurp(out / "scores.tsv") == reference;
        timings += fmt::format(" w{}={:.1f}s", w, seconds_since(t0));
    }
    report(identical, "parallel_determinism", "scores.tsv byte-identical for workers {1, 4, 8};" + timings);
}

void noisy() {
    testing::TempDir dir;
    testing::CorpusSpec spec;
    spec.noise_fraction = 0.1;
    spec.max_stretch = 0.2;
    const auto corpus = testing::make_corpus(spec);
    const auto o = run_pipeline(corpus, dir.path(), 4);
    report(o.mtwv >= 0.8 && o.seconds < 60.0, "noisy_embedding_retrieval",
           fmt::format("sigma = 0.1 sd, stretch +-20%, MTWV = {:.4f}, argmax misses = {}, search {:.1f} s", o.mtwv,
                       o.argmax_misses, o.seconds));
}

void twv_hand_case() {
    eval::GoldLabelSet g({"q"}, {"t", "f1", "f2", "f3"});
    g.set("q", "t", true);
    const std::vector<search::DetectionScore> s{{"q", "t", 0.9}, {"q", "f1", 0.95}, {"q", "f2", 0.5}, {"q", "f3", 0.4}};
    const eval::EvalConfig cfg;
    const double beta = (1.0 / 10.0) * (1.0 / 0.0278 - 1.0);
    const double expected = 1.0 - beta / 3.0;
    const double got = eval::twv_at(s, g, cfg, 0.9).twv;
    report(std::abs(got - expected) <= 1e-4, "twv_hand_case",
           fmt::format("twv(0.9) = {:.6f}, expected 1 - beta/3 = {:.6f} (beta = {:.6f})", got, expected, beta));
}

void extremes() {
    std::mt19937 rng(669);
    std::vector<std::string> qs, is;
    for (int q = 0; q < 20; ++q) qs.push_back(fmt::format("q{}", q));
    for (int i = 0; i < 60; ++i) is.push_back(fmt::format("i{}", i));
    eval::GoldLabelSet g(qs, is);
    std::bernoulli_distribution hit(0.1);
    for (int q = 0; q < 20; ++q) {
        g.set(qs[q], is[q], true);
        for (int i = 0; i < 60; ++i)
            if (hit(rng)) g.set(qs[q], is[i], true);
    }
    std::vector<search::DetectionScore> perfect, nothing;
    for (const auto& q : qs)
        for (const auto& i : is) {
            perfect.push_back({q, i, g.label(q, i) ? 1.0 : 0.0});
            nothing.push_back({q, i, 0.0});
        }
    const double mp = eval::evaluate(perfect, g, {}).mtwv;
    const double mn = eval::evaluate(nothing, g, {}).mtwv;
    report(mp == 1.0 && mn == 0.0, "mtwv_extremes", fmt::format("perfect = {}, detect-nothing = {}", mp, mn));
}

void statistics() {
    struct Row {
        int df;
        double p, t;
    };
    // Upper critical values t_{p, df} from a standard t table.
    const Row table[] = {{10, 0.05, 1.812}, {4, 0.025, 2.776}, {30, 0.01, 2.457}};
    bool ok = true;
    std::string detail;
    for (const auto& r : table) {
        const double sf = eval::student_t_sf(r.t, r.df);
        ok &= std::abs(sf - r.p) <= 1e-3;
        detail += fmt::format("sf({}, {}) = {:.5f}; ", r.t, r.df, sf);
    }
    const std::vector<double> d{0.3, 0.1, 0.4, 0.2, 0.0}, zero(5, 0.0);
    const auto tt = eval::paired_t_test_one_sided(d, zero);
    ok &= std::abs(tt.t_value - 2.828) <= 0.01 && tt.degrees_of_freedom == 4;
    detail += fmt::format("paired t = {:.4f}, df = {}, p = {:.4f}", tt.t_value, tt.degrees_of_freedom,
                          tt.p_value_one_sided);
    report(ok, "statistics_oracle", detail);
}

Matrix planar_distances(const std::vector<std::array<double, 2>>& p) {
    Matrix d(p.size(), p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j) d(i, j) = std::hypot(p[i][0] - p[j][0], p[i][1] - p[j][1]);
    return d;
}

double worst_distance_error(const Matrix& target, const Matrix& pts) {
    double worst = 0.0;
    for (std::size_t i = 0; i < pts.rows(); ++i)
        for (std::size_t j = 0; j < pts.rows(); ++j)
            worst = std::max(worst, std::abs(std::hypot(pts(i, 0) - pts(j, 0), pts(i, 1) - pts(j, 1)) - target(i, j)));
    return worst;
}

void mds() {
    std::mt19937 rng(671);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_int_distribution<std::size_t> n(3, 20);
    double worst_stress = 0.0, worst_dist = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::array<double, 2>> pts(n(rng));
        for (auto& p : pts) p = {u(rng), u(rng)};
        const auto d = planar_distances(pts);
        const auto e = analysis::classical_mds(d);
        worst_stress = std::max(worst_stress, e.stress);
        worst_dist = std::max(worst_dist, worst_distance_error(d, e.points));
    }
    const auto sq = planar_distances({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const auto es = analysis::classical_mds(sq);
    const double sq_err = worst_distance_error(sq, es.points);
    report(worst_stress < 1e-6 && sq_err <= 1e-6, "mds_reconstruction",
           fmt::format("100 random configs: max stress = {:.3g}, max distance error = {:.3g}; square error = {:.3g}",
                       worst_stress, worst_dist, sq_err));
}

void throughput() {
    testing::CorpusSpec spec;
    spec.num_queries = 8;
    spec.num_items = 40;
    spec.min_query_frames = 48;
    spec.max_query_frames = 52;
    spec.seed = 673;
    const auto corpus = testing::make_corpus(spec);
    const auto result = search::search_corpus(corpus.queries, corpus.items, {}, {.workers = 1});
    const double rate = result.stats.windows_per_minute_per_core();
    report(rate >= 2e6, "search_throughput",
           fmt::format("{:.3g} windows/min/core (39 dims, |Q| ~ 50, {} windows in {:.2f} s, threshold 2e6)", rate,
                       result.stats.windows, result.stats.wall_seconds));
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, void (*)()>> criteria{
        {"dtw_oracle_equivalence", dtw_oracle}, {"twv_hand_case", twv_hand_case}, {"mtwv_extremes", extremes},
        {"statistics_oracle", statistics},     {"mds_reconstruction", mds},      {"search_throughput", throughput},
        {"exact_embedding_retrieval", exact_and_determinism},                    {"noisy_embedding_retrieval", noisy},
    };
    for (const auto& [name, fn] : criteria) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(false, name, fmt::format("exception: {}", e.what()));
        }
    }
    fmt::print("{} failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
}
