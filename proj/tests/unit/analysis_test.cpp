#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"
#include "qbe/analysis/mds.hpp"
#include "qbe/error.hpp"
#include "qbe/text.hpp"

using namespace qbe;
using namespace qbe::analysis;
using Point = std::array<double, 2>;

namespace {

Matrix distances_of(const std::vector<Point>& pts) {
    Matrix d(pts.size(), pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j)
            d(i, j) = std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
    return d;
}

Matrix embedded_distances(const Matrix& pts) {
    Matrix d(pts.rows(), pts.rows());
    for (std::size_t i = 0; i < pts.rows(); ++i)
        for (std::size_t j = 0; j < pts.rows(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < pts.cols(); ++c) s += (pts(i, c) - pts(j, c)) * (pts(i, c) - pts(j, c));
            d(i, j) = std::sqrt(s);
        }
    return d;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

featio::FeatureMatrix ramp_features(std::size_t frames, std::size_t dims, float shift_ms) {
    featio::FeatureMatrix m;
    m.frame_shift_ms = shift_ms;
    m.data = DenseMatrix<float>(frames, dims);
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t d = 0; d < dims; ++d) m.data(t, d) = static_cast<float>(t * 10 + d);
    return m;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(in, line);) rows.push_back(text::split(line, ','));
    return rows;
}

}  // namespace

TEST_CASE("segment averaging by frame start time") {
    const auto f = ramp_features(20, 2, 20.0f);
    SUBCASE("one frame") {
        const auto r = average_segment_features(f, {{"p", 40.0, 60.0}});
        REQUIRE(r.tokens.size() == 1);
        CHECK(r.tokens[0].feature_vector == std::vector<double>{20.0, 21.0});
    }
    SUBCASE("two frames") {
        const auto r = average_segment_features(f, {{"p", 40.0, 80.0}});
        CHECK(r.tokens[0].feature_vector == std::vector<double>{25.0, 26.0});
    }
    SUBCASE("100 to 160 ms at 20 ms shift averages frames 5, 6, 7") {
        std::vector<std::size_t> covered;
        for (std::size_t t = 0; t < 20; ++t)
            if (t * 20.0 >= 100.0 && t * 20.0 < 160.0) covered.push_back(t);
        CHECK(covered == std::vector<std::size_t>{5, 6, 7});
        const auto r = average_segment_features(f, {{"k", 100.0, 160.0}});
        CHECK(r.tokens[0].feature_vector == std::vector<double>{60.0, 61.0});
        CHECK(r.tokens[0].label == "k");
    }
    SUBCASE("empty interval is skipped with a diagnostic") {
        const auto r = average_segment_features(f, {{"a", 101.0, 110.0}, {"b", 0.0, 20.0}, {"c", 900.0, 950.0}});
        CHECK(r.tokens.size() == 1);
        CHECK(r.diagnostics.size() == 2);
        CHECK_FALSE(has_errors(r.diagnostics));
    }
}

TEST_CASE("class distance matrix") {
    const std::vector<SegmentToken> toks{{"a", {0, 0}, ""}, {"b", {3, 4}, ""}, {"c", {0, 0}, ""}};
    const auto d = class_distance_matrix(toks);
    CHECK(d(0, 1) == 5.0);
    CHECK(d(1, 0) == 5.0);
    CHECK(d(0, 2) == 0.0);

    std::mt19937 rng(201);
    std::normal_distribution<double> g;
    std::vector<SegmentToken> many(15);
    for (auto& t : many) {
        t.feature_vector.resize(6);
        for (auto& v : t.feature_vector) v = g(rng);
    }
    const auto dm = class_distance_matrix(many);
    for (std::size_t i = 0; i < many.size(); ++i)
        for (std::size_t j = 0; j < many.size(); ++j)
            REQUIRE(std::abs(dm(i, j) - qbe::testing::euclidean(many[i].feature_vector, many[j].feature_vector)) < 1e-9);
    CHECK_THROWS_AS(class_distance_matrix({{"a", {1}, ""}, {"b", {1, 2}, ""}}), ShapeError);
}

TEST_CASE("Jacobi reconstruction on random symmetric 20x20") {
    std::mt19937 rng(203);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix a(20, 20);
        for (std::size_t i = 0; i < 20; ++i)
            for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = u(rng) * 10.0;
        const auto e = jacobi_eigen(a);
        for (std::size_t k = 1; k < 20; ++k) CHECK(e.values[k - 1] >= e.values[k]);
        double worst = 0.0;
        for (std::size_t i = 0; i < 20; ++i)
            for (std::size_t j = 0; j < 20; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < 20; ++k) s += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
                worst = std::max(worst, std::abs(a(i, j) - s));
            }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("MDS recovers the unit square") {
    const std::vector<Point> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const auto d = distances_of(square);
    const auto e = classical_mds(d);
    CHECK(e.points.rows() == 4);
    CHECK(e.points.cols() == 2);
    CHECK(max_abs_diff(embedded_distances(e.points), d) < 1e-6);
    CHECK(e.stress < 1e-6);
    CHECK(e.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(e.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t c = 0; c < 2; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) s += e.points(i, c);
        CHECK(std::abs(s) < 1e-12);
    }
}

TEST_CASE("MDS degenerate inputs") {
    const auto zero = classical_mds(Matrix(5, 5, 0.0));
    for (double v : zero.points.values()) CHECK(v == 0.0);
    CHECK(zero.stress == 0.0);

    const std::vector<Point> line{{0, 0}, {1, 0}, {3, 0}};
    const auto e = classical_mds(distances_of(line));
    CHECK(std::abs(e.eigenvalues[1]) < 1e-9);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(e.points(i, 1)) < 1e-6);
    CHECK(e.stress < 1e-6);

    Matrix asym = distances_of(line);
    asym(0, 1) += 0.5;
    CHECK_THROWS_AS(classical_mds(asym), PreconditionError);
    CHECK_THROWS_AS(classical_mds(distances_of({{0, 0}, {1, 1}})), PreconditionError);
}

TEST_CASE("MDS property: random planar configurations, with rotation invariance") {
    std::mt19937 rng(207);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_int_distribution<std::size_t> count(3, 20);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<Point> pts(count(rng));
        for (auto& p : pts) p = {u(rng), u(rng)};
        const auto d = distances_of(pts);
        const auto e = classical_mds(d);
        REQUIRE(max_abs_diff(embedded_distances(e.points), d) < 1e-6);
        REQUIRE(e.stress < 1e-6);

        const double a = u(rng);
        std::vector<Point> rotated;
        for (const auto& p : pts)
            rotated.push_back({std::cos(a) * p[0] - std::sin(a) * p[1] + 3.0, std::sin(a) * p[0] + std::cos(a) * p[1]});
        const auto er = classical_mds(distances_of(rotated));
        REQUIRE(max_abs_diff(embedded_distances(er.points), embedded_distances(e.points)) < 1e-6);
    }
}

TEST_CASE("kruskal stress of a known distortion") {
    const Matrix target(3, 3, std::vector<double>{0, 1, 2, 1, 0, 1, 2, 1, 0});
    const Matrix pts(3, 1, std::vector<double>{0, 1, 3});
    // embedded: d01 = 1, d02 = 3, d12 = 2; residuals 0, 1, 1; target sum of squares 1 + 4 + 1
    CHECK(kruskal_stress(target, pts) == doctest::Approx(std::sqrt(2.0 / 6.0)).epsilon(1e-12));
}

TEST_CASE("95% ellipses") {
    SUBCASE("points on the x-axis") {
        const auto r = ellipse_95({{-1, 0}, {1, 0}, {-1, 0}, {1, 0}}, "x");
        CHECK(r.ellipse.center == Point{0, 0});
        CHECK(std::fmod(r.ellipse.rotation_radians, std::numbers::pi) == doctest::Approx(0.0));
        CHECK(r.ellipse.degenerate);
        CHECK(r.ellipse.semi_axes[1] == 0.0);
        CHECK(r.ellipse.semi_axes[0] == doctest::Approx(std::sqrt(kChiSquare2Df95 * 4.0 / 3.0)));
    }
    SUBCASE("isotropic unit cloud") {
        std::mt19937 rng(211);
        std::normal_distribution<double> g;
        std::vector<Point> pts(40000);
        for (auto& p : pts) p = {g(rng), g(rng)};
        const auto r = ellipse_95(pts, "iso");
        CHECK_FALSE(r.ellipse.degenerate);
        CHECK(r.ellipse.semi_axes[0] == doctest::Approx(std::sqrt(5.991)).epsilon(0.02));
        CHECK(r.ellipse.semi_axes[1] == doctest::Approx(2.448).epsilon(0.02));
    }
    SUBCASE("identical points") {
        const auto r = ellipse_95({{2, 3}, {2, 3}, {2, 3}}, "same");
        CHECK(r.ellipse.degenerate);
        CHECK(r.diagnostics.size() == 1);
    }
    SUBCASE("rotated elongated cloud") {
        std::mt19937 rng(213);
        std::normal_distribution<double> g;
        std::vector<Point> pts(5000);
        const double a = std::numbers::pi / 6.0;
        for (auto& p : pts) {
            const double x = 3.0 * g(rng), y = 0.5 * g(rng);
            p = {std::cos(a) * x - std::sin(a) * y, std::sin(a) * x + std::cos(a) * y};
        }
        const auto r = ellipse_95(pts);
        CHECK(r.ellipse.rotation_radians == doctest::Approx(a).epsilon(0.05));
        CHECK(r.ellipse.semi_axes[0] > r.ellipse.semi_axes[1]);
    }
    SUBCASE("translation leaves axes unchanged") {
        std::mt19937 rng(217);
        std::normal_distribution<double> g;
        std::vector<Point> pts(50), moved;
        for (auto& p : pts) p = {g(rng), 2.0 * g(rng) + g(rng)};
        for (const auto& p : pts) moved.push_back({p[0] + 17.5, p[1] - 4.25});
        const auto a = ellipse_95(pts).ellipse, b = ellipse_95(moved).ellipse;
        CHECK(std::abs(a.semi_axes[0] - b.semi_axes[0]) < 1e-9);
        CHECK(std::abs(a.semi_axes[1] - b.semi_axes[1]) < 1e-9);
        CHECK(std::abs(a.rotation_radians - b.rotation_radians) < 1e-9);
    }
    CHECK_THROWS_AS(ellipse_95({{0, 0}, {1, 1}}), PreconditionError);
}

TEST_CASE("emitting MDS outputs") {
    qbe::testing::TempDir dir;
    std::mt19937 rng(221);
    std::normal_distribution<double> g;
    std::vector<Point> pts;
    std::vector<std::string> labels;
    for (const char* lab : {"p", "t", "k"})
        for (int i = 0; i < 5; ++i) {
            pts.push_back({g(rng) + (lab[0] - 'k') * 0.3, g(rng)});
            labels.emplace_back(lab);
        }
    const auto emb = classical_mds(distances_of(pts));
    std::vector<EllipseParams> ellipses;
    for (const char* lab : {"p", "t", "k"}) {
        std::vector<Point> cls;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (labels[i] == lab) cls.push_back({emb.points(i, 0), emb.points(i, 1)});
        ellipses.push_back(ellipse_95(cls, lab).ellipse);
    }

    const auto out = emit_mds_outputs(emb, labels, ellipses, dir / "fig");
    std::ifstream svg_in(out.svg);
    const std::string svg{std::istreambuf_iterator<char>(svg_in), std::istreambuf_iterator<char>()};
    const auto count = [&](const std::string& needle) {
        std::size_t n = 0;
        for (auto pos = svg.find(needle); pos != std::string::npos; pos = svg.find(needle, pos + 1)) ++n;
        return n;
    };
    CHECK(count("<ellipse") == 3);
    CHECK(count("<text") == 3);
    CHECK(count("<circle") == 15);

    const auto rows = read_csv(out.coordinates_csv);
    REQUIRE(rows.size() == 16);
    CHECK(rows[0] == std::vector<std::string>{"label", "x", "y"});
    for (std::size_t i = 0; i < 15; ++i) {
        CHECK(rows[i + 1][0] == labels[i]);
        CHECK(std::abs(std::stod(rows[i + 1][1]) - emb.points(i, 0)) < 5e-7);
        CHECK(std::abs(std::stod(rows[i + 1][2]) - emb.points(i, 1)) < 5e-7);
    }
    CHECK(read_csv(out.ellipses_csv).size() == 4);
    const auto meta = nlohmann::json::parse(std::ifstream(out.metadata_json));
    CHECK(meta["stress"].get<double>() == doctest::Approx(emb.stress));

    const auto bare = emit_mds_outputs(emb, labels, {}, dir / "bare");
    std::ifstream bare_in(bare.svg);
    const std::string bare_svg{std::istreambuf_iterator<char>(bare_in), std::istreambuf_iterator<char>()};
    CHECK(bare_svg.find("<ellipse") == std::string::npos);
    CHECK(bare_svg.find("<circle") != std::string::npos);
}

TEST_CASE("intervals TSV") {
    qbe::testing::TempDir dir;
    std::ofstream(dir / "a.tsv") << "label\tstart_ms\tend_ms\nk\t100\t160\np\t200.5\t260\n";
    const auto a = read_intervals_tsv(dir / "a.tsv");
    REQUIRE(a.size() == 2);
    CHECK(a[1].start_ms == 200.5);
    CHECK(a[1].source.empty());
    std::ofstream(dir / "b.tsv") << "label\tstart_ms\tend_ms\tsource\nk\t100\t160\tu1\n";
    CHECK(read_intervals_tsv(dir / "b.tsv")[0].source == "u1");
    std::ofstream(dir / "c.tsv") << "label\tstart_ms\tend_ms\nk\tabc\t160\n";
    CHECK_THROWS_AS(read_intervals_tsv(dir / "c.tsv"), CorruptFileError);
}
