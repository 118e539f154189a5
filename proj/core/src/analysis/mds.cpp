#include "qbe/analysis/mds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "qbe/text.hpp"

namespace qbe::analysis {

TokensResult average_segment_features(const featio::FeatureMatrix& features,
                                      const std::vector<SegmentInterval>& intervals) {
    TokensResult out;
    const std::size_t dims = features.num_dims();
    for (const auto& iv : intervals) {
        if (!(iv.start_ms < iv.end_ms)) {
            out.diagnostics.push_back({Severity::kWarning, fmt::format("interval {} [{}, {}) ms: start is not before end; skipped",
                                                                       iv.label, iv.start_ms, iv.end_ms)});
            continue;
        }
        std::vector<double> sum(dims, 0.0);
        std::size_t count = 0;
        for (std::size_t f = 0; f < features.num_frames(); ++f) {
            const double t = features.frame_start_ms(f);
            if (t < iv.start_ms) continue;
            if (t >= iv.end_ms) break;
            for (std::size_t d = 0; d < dims; ++d) sum[d] += features.data(f, d);
            ++count;
        }
        if (count == 0) {
            out.diagnostics.push_back({Severity::kWarning, fmt::format("interval {} [{}, {}) ms in {} covers no frame; skipped",
                                                                       iv.label, iv.start_ms, iv.end_ms, features.source_id)});
            continue;
        }
        for (auto& v : sum) v /= static_cast<double>(count);
        out.tokens.push_back({iv.label, std::move(sum), features.source_id});
    }
    return out;
}

Matrix class_distance_matrix(const std::vector<SegmentToken>& tokens) {
    const std::size_t n = tokens.size();
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& a = tokens[i].feature_vector;
            const auto& b = tokens[j].feature_vector;
            if (a.size() != b.size())
                throw ShapeError(fmt::format("token {} has {} dims, token {} has {}", i, a.size(), j, b.size()));
            double acc = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
            d(i, j) = d(j, i) = std::sqrt(acc);
        }
    }
    return d;
}

EigenDecomposition jacobi_eigen(const Matrix& symmetric, double tolerance, int max_sweeps) {
    const std::size_t n = symmetric.rows();
    if (symmetric.cols() != n) throw ShapeError("jacobi_eigen needs a square matrix");
    Matrix a = symmetric;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    double frob = 0.0;
    for (double x : a.values()) frob += x * x;
    const double threshold = tolerance * std::max(1.0, std::sqrt(frob));

    EigenDecomposition out;
    for (out.sweeps = 0; out.sweeps < max_sweeps; ++out.sweeps) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
        if (off < threshold) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                // Rotation angle that zeroes a(p, q).
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

double kruskal_stress(const Matrix& target, const Matrix& points) {
    const std::size_t n = target.rows();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double e = 0.0;
            for (std::size_t k = 0; k < points.cols(); ++k) e += (points(i, k) - points(j, k)) * (points(i, k) - points(j, k));
            const double diff = target(i, j) - std::sqrt(e);
            num += diff * diff;
            den += target(i, j) * target(i, j);
        }
    }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

MdsEmbedding classical_mds(const Matrix& d, std::size_t k) {
    const std::size_t n = d.rows();
    if (d.cols() != n) throw PreconditionError("classical_mds needs a square distance matrix");
    if (n < 3) throw PreconditionError(fmt::format("classical_mds needs at least 3 points, got {}", n));
    if (k < 1 || k > n) throw PreconditionError(fmt::format("cannot embed {} points in {} dimensions", n, k));
    double scale = 0.0;
    for (double x : d.values()) scale = std::max(scale, std::abs(x));
    const double sym_tol = 1e-9 * std::max(1.0, scale);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(d(i, i)) > sym_tol) throw PreconditionError(fmt::format("distance matrix diagonal ({}, {}) is nonzero", i, i));
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(d(i, j) - d(j, i)) > sym_tol)
                throw PreconditionError(fmt::format("distance matrix is not symmetric at ({}, {})", i, j));
    }

    // Double centering of squared distances.
    Matrix b(n, n);
    std::vector<double> row_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double sq = d(i, j) * d(i, j);
            b(i, j) = sq;
            row_mean[i] += sq;
        }
        grand += row_mean[i];
        row_mean[i] /= static_cast<double>(n);
    }
    grand /= static_cast<double>(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) b(i, j) = -0.5 * (b(i, j) - row_mean[i] - row_mean[j] + grand);

    const auto eig = jacobi_eigen(b);
    MdsEmbedding out;
    out.eigenvalues = eig.values;
    const double neg_tol = 1e-9 * std::max(1.0, std::abs(eig.values.front()));
    out.negative_eigenvalues = static_cast<std::size_t>(
        std::count_if(eig.values.begin(), eig.values.end(), [&](double v) { return v < -neg_tol; }));

    out.points = Matrix(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        const double s = std::sqrt(std::max(eig.values[c], 0.0));
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += eig.vectors(i, c) * s;
        mean /= static_cast<double>(n);
        std::size_t arg = 0;
        for (std::size_t i = 0; i < n; ++i) {
            out.points(i, c) = eig.vectors(i, c) * s - mean;
            if (std::abs(out.points(i, c)) > std::abs(out.points(arg, c))) arg = i;
        }
        if (out.points(arg, c) < 0.0)
            for (std::size_t i = 0; i < n; ++i) out.points(i, c) = -out.points(i, c);
    }
    out.stress = kruskal_stress(d, out.points);
    return out;
}

EllipseResult ellipse_95(const std::vector<std::array<double, 2>>& points, std::string label) {
    if (points.size() < 3)
        throw PreconditionError(fmt::format("ellipse for '{}' needs at least 3 points, got {}", label, points.size()));
    EllipseResult out;
    auto& e = out.ellipse;
    e.label = std::move(label);
    const double n = static_cast<double>(points.size());
    for (const auto& p : points) {
        e.center[0] += p[0];
        e.center[1] += p[1];
    }
    e.center[0] /= n;
    e.center[1] /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : points) {
        const double dx = p[0] - e.center[0];
        const double dy = p[1] - e.center[1];
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    sxx /= n - 1.0;
    syy /= n - 1.0;
    sxy /= n - 1.0;

    // Closed-form eigen-decomposition of the 2x2 covariance.
    const double half_trace = 0.5 * (sxx + syy);
    const double radius = std::hypot(0.5 * (sxx - syy), sxy);
    const double major = half_trace + radius;
    const double minor = std::max(half_trace - radius, 0.0);
    double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    if (theta < 0.0) theta += std::numbers::pi;
    if (theta >= std::numbers::pi) theta -= std::numbers::pi;
    e.rotation_radians = theta;
    e.semi_axes = {std::sqrt(kChiSquare2Df95 * major), std::sqrt(kChiSquare2Df95 * minor)};

    if (minor <= 1e-12 * std::max(major, 1e-300) || major == 0.0) {
        e.degenerate = true;
        e.semi_axes[1] = 0.0;
        out.diagnostics.push_back(
            {Severity::kWarning, fmt::format("ellipse for '{}' is degenerate (collinear or identical points)", e.label)});
    }
    return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    out << body;
    if (!out) throw Error(fmt::format("write failed: {}", path.string()));
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

constexpr const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
                                    "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a"};

std::string render_svg(const MdsEmbedding& emb, const std::vector<std::string>& labels,
                       const std::vector<EllipseParams>& ellipses) {
    constexpr double kSize = 600.0;
    constexpr double kMargin = 40.0;
    double lo_x = 0.0, hi_x = 0.0, lo_y = 0.0, hi_y = 0.0;
    bool first = true;
    const auto extend = [&](double x, double y) {
        if (first) {
            lo_x = hi_x = x;
            lo_y = hi_y = y;
            first = false;
        }
        lo_x = std::min(lo_x, x);
        hi_x = std::max(hi_x, x);
        lo_y = std::min(lo_y, y);
        hi_y = std::max(hi_y, y);
    };
    const bool two_d = emb.points.cols() >= 2;
    for (std::size_t i = 0; i < emb.points.rows(); ++i) extend(emb.points(i, 0), two_d ? emb.points(i, 1) : 0.0);
    for (const auto& e : ellipses) {
        extend(e.center[0] - e.semi_axes[0], e.center[1] - e.semi_axes[0]);
        extend(e.center[0] + e.semi_axes[0], e.center[1] + e.semi_axes[0]);
    }
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
    const double scale = (kSize - 2 * kMargin) / span;
    const auto px = [&](double x) { return kMargin + (x - lo_x) * scale; };
    const auto py = [&](double y) { return kSize - kMargin - (y - lo_y) * scale; };

    std::map<std::string, std::size_t> colour_of;
    for (const auto& l : labels) colour_of.emplace(l, 0);
    std::size_t idx = 0;
    for (auto& [l, c] : colour_of) c = idx++ % std::size(kPalette);

    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        kSize);
    for (std::size_t i = 0; i < emb.points.rows(); ++i) {
        svg += fmt::format("<circle cx=\"{:.3f}\" cy=\"{:.3f}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.6\"/>\n",
                           px(emb.points(i, 0)), py(two_d ? emb.points(i, 1) : 0.0), kPalette[colour_of[labels[i]]]);
    }
    for (const auto& e : ellipses) {
        const auto it = colour_of.find(e.label);
        const char* colour = it == colour_of.end() ? "#000000" : kPalette[it->second];
        const double deg = -e.rotation_radians * 180.0 / std::numbers::pi;  // SVG y axis points down
        svg += fmt::format(
            "<ellipse cx=\"{:.3f}\" cy=\"{:.3f}\" rx=\"{:.3f}\" ry=\"{:.3f}\" transform=\"rotate({:.3f} {:.3f} {:.3f})\" "
            "fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            px(e.center[0]), py(e.center[1]), e.semi_axes[0] * scale, e.semi_axes[1] * scale, deg, px(e.center[0]),
            py(e.center[1]), colour);
    }
    for (const auto& e : ellipses) {
        svg += fmt::format(
            "<text x=\"{:.3f}\" y=\"{:.3f}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
            px(e.center[0]), py(e.center[1]), xml_escape(e.label));
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace

MdsOutputs emit_mds_outputs(const MdsEmbedding& embedding, const std::vector<std::string>& labels,
                            const std::vector<EllipseParams>& ellipses, const std::filesystem::path& prefix) {
    if (embedding.points.rows() == 0) throw PreconditionError("nothing to emit: embedding is empty");
    if (labels.size() != embedding.points.rows())
        throw PreconditionError(fmt::format("{} labels for {} points", labels.size(), embedding.points.rows()));
    const auto with_suffix = [&](const std::string& suffix) {
        return prefix.parent_path() / (prefix.filename().string() + suffix);
    };
    MdsOutputs out{with_suffix("_coords.csv"), with_suffix("_ellipses.csv"), with_suffix(".svg"),
                   with_suffix("_meta.json")};
    if (!prefix.parent_path().empty()) std::filesystem::create_directories(prefix.parent_path());

    const bool two_d = embedding.points.cols() >= 2;
    std::string coords = "label,x,y\n";
    for (std::size_t i = 0; i < embedding.points.rows(); ++i)
        coords += fmt::format("{},{:.10g},{:.10g}\n", csv_field(labels[i]), embedding.points(i, 0),
                              two_d ? embedding.points(i, 1) : 0.0);
    write_text(out.coordinates_csv, coords);

    std::string ell = "label,cx,cy,a,b,theta\n";
    for (const auto& e : ellipses)
        ell += fmt::format("{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n", csv_field(e.label), e.center[0],
                           e.center[1], e.semi_axes[0], e.semi_axes[1], e.rotation_radians);
    write_text(out.ellipses_csv, ell);

    write_text(out.svg, render_svg(embedding, labels, ellipses));

    nlohmann::json meta;
    meta["method"] = "classical (Torgerson) MDS";
    meta["dissimilarity"] = "euclidean";
    meta["ellipses"] = "95% data ellipses (sample covariance, chi-square 2 df)";
    meta["n_points"] = embedding.points.rows();
    meta["dimensions"] = embedding.points.cols();
    meta["stress"] = embedding.stress;
    meta["eigenvalues"] = embedding.eigenvalues;
    meta["negative_eigenvalues_clamped"] = embedding.negative_eigenvalues;
    meta["n_ellipses"] = ellipses.size();
    write_text(out.metadata_json, meta.dump(2) + "\n");
    return out;
}

std::vector<SegmentInterval> read_intervals_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(fmt::format("cannot open intervals file {}", path.string()));
    std::vector<SegmentInterval> out;
    std::string line;
    std::size_t line_no = 0;
    std::size_t columns = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;
        const auto f = text::split(line, '\t');
        if (columns == 0) {
            const bool base = f.size() >= 3 && f[0] == "label" && f[1] == "start_ms" && f[2] == "end_ms";
            if (!base || f.size() > 4 || (f.size() == 4 && f[3] != "source"))
                throw CorruptFileError(fmt::format("{}:{}: expected header 'label<TAB>start_ms<TAB>end_ms[<TAB>source]'",
                                                   path.string(), line_no));
            columns = f.size();
            continue;
        }
        if (f.size() != columns)
            throw CorruptFileError(fmt::format("{}:{}: expected {} fields, found {}", path.string(), line_no, columns, f.size()));
        SegmentInterval iv;
        iv.label = f[0];
        try {
            iv.start_ms = std::stod(f[1]);
            iv.end_ms = std::stod(f[2]);
        } catch (const std::logic_error&) {
            throw CorruptFileError(fmt::format("{}:{}: unparsable time", path.string(), line_no));
        }
        if (columns == 4) iv.source = f[3];
        out.push_back(std::move(iv));
    }
    if (columns == 0) throw CorruptFileError(fmt::format("{}: missing header", path.string()));
    return out;
}

}  // namespace qbe::analysis
