#include <doctest.h>

#include <random>
#include <sstream>

#include "../support/oracles.hpp"
#include "../support/synthetic.hpp"
#include "../support/temp_dir.hpp"
#include "qbe/error.hpp"
#include "qbe/search/dtw_search.hpp"

using namespace qbe;
using namespace qbe::search;

namespace {

FeatureMatrix features(std::size_t frames, std::size_t dims, std::mt19937& rng) {
    std::normal_distribution<float> g;
    FeatureMatrix m;
    m.data = DenseMatrix<float>(frames, dims);
    for (auto& v : m.data.values()) v = g(rng);
    return m;
}

FeatureMatrix rows(std::initializer_list<std::initializer_list<float>> r) {
    FeatureMatrix m;
    const std::size_t cols = r.begin()->size();
    m.data = DenseMatrix<float>(r.size(), cols);
    std::size_t i = 0;
    for (const auto& row : r) {
        std::size_t j = 0;
        for (float v : row) m.data(i, j++) = v;
        ++i;
    }
    return m;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(r, c);
    for (auto& v : m.values()) v = u(rng);
    return m;
}

}  // namespace

TEST_CASE("pooled variances") {
    const auto c = rows({{1.0f, 1.0f}, {1.0f, 1.0f}});
    for (double v : pooled_variances(c, c, 1e-8)) CHECK(v == 1e-8);

    CHECK(pooled_variances(rows({{0.0f}}), rows({{2.0f}}), 1e-8)[0] == doctest::Approx(1.0).epsilon(1e-15));

    std::mt19937 rng(3);
    const auto q = features(5, 3, rng), t = features(7, 3, rng);
    const auto got = pooled_variances(q, t, 1e-8);
    for (std::size_t d = 0; d < 3; ++d) {
        std::vector<double> xs;
        for (std::size_t i = 0; i < 5; ++i) xs.push_back(q.data(i, d));
        for (std::size_t i = 0; i < 7; ++i) xs.push_back(t.data(i, d));
        CHECK(std::abs(got[d] - qbe::testing::two_pass_variance(xs)) < 1e-9);
    }
    CHECK_THROWS_AS(pooled_variances(features(3, 2, rng), features(3, 4, rng), 1e-8), ShapeError);
}

TEST_CASE("standardized distances") {
    const std::vector<double> unit{1.0, 1.0};
    CHECK(distance_matrix(rows({{1, 0}}), rows({{0, 0}}), unit).values(0, 0) == 1.0);
    const std::vector<double> var{4.0, 1.0};
    CHECK(distance_matrix(rows({{2, 3}}), rows({{0, 1}}), var).values(0, 0) ==
          doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
    const auto same = distance_matrix(rows({{1, 2}, {3, 4}}), rows({{5, 6}, {3, 4}}), unit);
    CHECK(same.values(1, 1) == 0.0);
    CHECK_FALSE(same.normalized);
    const std::vector<double> bad{1.0, 0.0};
    CHECK_THROWS_AS(distance_matrix(rows({{1, 0}}), rows({{0, 0}}), bad), PreconditionError);
}

TEST_CASE("frame distance is symmetric under the same variances") {
    std::mt19937 rng(5);
    const auto q = features(6, 4, rng), t = features(9, 4, rng);
    const auto var = pooled_variances(q, t, 1e-8);
    const auto qt = distance_matrix(q, t, var).values;
    const auto tq = distance_matrix(t, q, var).values;
    CHECK(qt.transposed() == tq);
}

TEST_CASE("range normalization") {
    DistanceMatrix d{Matrix(2, 2, std::vector<double>{1, 3, 5, 9}), false};
    const auto n = range_normalize(d);
    CHECK(n.normalized);
    CHECK(n.values == Matrix(2, 2, std::vector<double>{0, 0.25, 0.5, 1.0}));
    CHECK(range_normalize({Matrix(2, 3, 4.2), false}).values == Matrix(2, 3, 0.0));
    const Matrix unit(2, 2, std::vector<double>{0, 0.5, 1, 0.25});
    CHECK(range_normalize({unit, false}).values == unit);
}

TEST_CASE("window DTW hand cases") {
    CHECK(dtw_window_cost(Matrix(3, 4, 0.0)) == 0.0);
    CHECK(dtw_window_cost(Matrix(2, 2, std::vector<double>{0, 1, 1, 0})) == 0.0);
    CHECK(dtw_window_cost(Matrix(1, 1, 0.7)) == doctest::Approx(0.7));
    // Ratio objective: the long path through cheap cells beats the short path.
    // Diagonal: (0.5 + 0.5) / 2 = 0.5. Detour via (0,1),(1,1)? all paths end at (1,1).
    const Matrix detour(2, 3, std::vector<double>{0.9, 0.0, 0.0, 0.0, 0.0, 0.9});
    CHECK(dtw_window_cost(detour) == doctest::Approx(qbe::testing::brute_force_window_cost(detour)).epsilon(1e-15));
}

TEST_CASE("window DTW equals exhaustive enumeration up to 5x5") {
    std::mt19937 rng(17);
    std::uniform_int_distribution<std::size_t> size(1, 5);
    for (int trial = 0; trial < 400; ++trial) {
        const auto w = random_matrix(size(rng), size(rng), rng);
        const double got = dtw_window_cost(w);
        const double ref = qbe::testing::brute_force_window_cost(w);
        REQUIRE(std::abs(got - ref) < 1e-12);
    }
    // Sparse matrices with many ties and zeros stress the ratio search.
    std::bernoulli_distribution hot(0.3);
    for (int trial = 0; trial < 400; ++trial) {
        Matrix w(size(rng), size(rng));
        for (auto& v : w.values()) v = hot(rng) ? 1.0 : 0.0;
        REQUIRE(std::abs(dtw_window_cost(w) - qbe::testing::brute_force_window_cost(w)) < 1e-12);
    }
}

TEST_CASE("window DTW over a column range equals the extracted sub-matrix") {
    std::mt19937 rng(19);
    const auto m = random_matrix(4, 11, rng);
    DtwWorkspace ws;
    for (std::size_t first = 0; first + 4 <= 11; ++first) {
        Matrix sub(4, 4);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) sub(i, j) = m(i, first + j);
        CHECK(dtw_window_cost(m, first, 4, ws) == doctest::Approx(qbe::testing::brute_force_window_cost(sub)).epsilon(1e-12));
    }
}

TEST_CASE("window pruning test agrees with enumeration") {
    std::mt19937 rng(41);
    std::uniform_int_distribution<std::size_t> size(1, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DtwWorkspace ws;
    for (int trial = 0; trial < 500; ++trial) {
        const auto w = random_matrix(size(rng), size(rng), rng);
        const double ref = qbe::testing::brute_force_window_cost(w);
        const double bound = u(rng);
        if (std::abs(bound - ref) < 1e-9) continue;
        REQUIRE(dtw_window_beats(w, 0, w.cols(), bound, ws) == (ref < bound));
    }
}

TEST_CASE("pruned scan equals the minimum over every window") {
    std::mt19937 rng(43);
    DtwWorkspace ws;
    for (int trial = 0; trial < 10; ++trial) {
        const auto q = features(9, 5, rng), t = features(45, 5, rng);
        const auto d = range_normalize(distance_matrix(q, t, pooled_variances(q, t, 1e-8)));
        double best = 2.0;
        std::size_t best_start = 0;
        for (std::size_t s = 0; s + 9 <= 45; ++s) {
            const double c = dtw_window_cost(d.values, s, 9, ws);
            if (c < best) {
                best = c;
                best_start = s;
            }
        }
        const auto got = detection_score(q, t, {});
        CHECK(got.score == std::clamp(1.0 - best, 0.0, 1.0));
        CHECK(got.best_window_start_frame == best_start);
    }
}

TEST_CASE("window geometry") {
    CHECK(window_length(50, 200, 1.0) == 50);
    CHECK(window_length(50, 30, 1.0) == 30);
    CHECK(window_length(3, 30, 0.1) == 1);
    CHECK(window_length(10, 30, 1.5) == 15);
    CHECK(window_starts(10, 4, 1) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
    CHECK(window_starts(10, 4, 4) == std::vector<std::size_t>{0, 4, 6});
    CHECK(window_starts(10, 4, 3) == std::vector<std::size_t>{0, 3, 6});
    CHECK(window_starts(4, 4, 2) == std::vector<std::size_t>{0});
}

TEST_CASE("config validation") {
    SearchConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.window_stride_frames = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.window_scale = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("detection score of an exact copy is 1 and locates the copy") {
    std::mt19937 rng(23);
    const auto q = features(12, 5, rng);
    auto t = features(60, 5, rng);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t d = 0; d < 5; ++d) t.data(31 + i, d) = q.data(i, d);
    const auto s = detection_score(q, t, {});
    CHECK(s.score == 1.0);
    CHECK(s.best_window_start_frame == 31);
    CHECK(s.best_window_end_frame == 42);
}

TEST_CASE("detection score bounds and reductions") {
    std::mt19937 rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        const auto q = features(8, 4, rng), t = features(30, 4, rng);
        const double s = detection_score(q, t, {}).score;
        REQUIRE(s > 0.0);
        REQUIRE(s < 1.0);
    }
    const auto q = features(9, 3, rng), t = features(9, 3, rng);
    const auto var = pooled_variances(q, t, 1e-8);
    const auto d = range_normalize(distance_matrix(q, t, var));
    CHECK(detection_score(q, t, {}).score == doctest::Approx(1.0 - dtw_window_cost(d.values)).epsilon(1e-15));
}

TEST_CASE("stride 1 never scores lower than a coarser stride") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 15; ++trial) {
        const auto q = features(7, 4, rng), t = features(40, 4, rng);
        const double base = detection_score(q, t, {}).score;
        for (int stride : {2, 3, 5}) {
            SearchConfig cfg;
            cfg.window_stride_frames = stride;
            REQUIRE(base >= detection_score(q, t, cfg).score);
        }
    }
}

TEST_CASE("search_corpus: shape, order and determinism") {
    std::mt19937 rng(37);
    std::vector<Utterance> qs{{"q2", features(6, 4, rng)}, {"q1", features(5, 4, rng)}};
    std::vector<Utterance> is{{"c", features(20, 4, rng)}, {"a", features(25, 4, rng)}, {"b", features(18, 4, rng)}};
    const auto one = search_corpus(qs, is, {}, {.workers = 1});
    REQUIRE(one.scores.size() == 6);
    CHECK(one.scores.front().query_id == "q1");
    CHECK(one.scores.front().item_id == "a");
    CHECK(one.stats.pairs == 6);
    CHECK(one.stats.windows > 0);
    for (unsigned w : {2u, 3u, 8u}) {
        const auto many = search_corpus(qs, is, {}, {.workers = w});
        REQUIRE(many.scores.size() == 6);
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(many.scores[i].query_id == one.scores[i].query_id);
            CHECK(many.scores[i].item_id == one.scores[i].item_id);
            CHECK(many.scores[i].score == one.scores[i].score);
            CHECK(many.scores[i].best_window_start_frame == one.scores[i].best_window_start_frame);
        }
        CHECK(many.stats.windows == one.stats.windows);
    }
    std::size_t callbacks = 0;
    search_corpus(qs, is, {}, {.workers = 3, .on_query_done = [&](const std::string&, std::size_t, std::size_t total) {
                                   ++callbacks;
                                   CHECK(total == 2);
                               }});
    CHECK(callbacks == 2);

    std::vector<Utterance> odd{{"x", features(6, 3, rng)}};
    CHECK_THROWS_WITH_AS(search_corpus(odd, is, {}), doctest::Contains("x"), ShapeError);
}

TEST_CASE("planted queries are found in their host items") {
    qbe::testing::CorpusSpec spec;
    spec.num_queries = 6;
    spec.num_items = 12;
    spec.dims = 13;
    spec.min_query_frames = 15;
    spec.max_query_frames = 20;
    spec.min_item_frames = 50;
    spec.max_item_frames = 70;
    const auto corpus = qbe::testing::make_corpus(spec);
    const auto result = search_corpus(corpus.queries, corpus.items, {}, {.workers = 2});
    for (std::size_t q = 0; q < corpus.queries.size(); ++q) {
        const auto& qid = corpus.queries[q].id;
        const DetectionScore* best = nullptr;
        for (const auto& s : result.scores)
            if (s.query_id == qid && (!best || s.score > best->score)) best = &s;
        REQUIRE(best);
        CHECK(best->item_id == corpus.items[corpus.host_item[q]].id);
        CHECK(best->score == 1.0);
        CHECK(best->best_window_start_frame == corpus.host_offset[q]);
    }
}

TEST_CASE("scores TSV round trip") {
    qbe::testing::TempDir dir;
    const std::vector<DetectionScore> scores{{"q1", "i1", 0.25, 3, 9}, {"q1", "i2", 1.0, 0, 4}};
    std::ostringstream os;
    write_scores_tsv(os, scores);
    CHECK(os.str() == "query\titem\tscore\tstart_frame\tend_frame\nq1\ti1\t0.250000\t3\t9\nq1\ti2\t1.000000\t0\t4\n");
    write_scores_tsv(dir / "s.tsv", scores);
    const auto back = read_scores_tsv(dir / "s.tsv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].score == 0.25);
    CHECK(back[1].best_window_end_frame == 4);
}
