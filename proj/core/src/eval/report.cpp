#include "qbe/eval/report.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

namespace qbe::eval {

using nlohmann::json;

namespace {

constexpr const char* kTrialNote =
    "Trials are item-level: a detection is a (query, item) pair with score >= threshold. "
    "P_fa is false alarms over non-target items, not over speech duration.";

const char* mode_name(PerQueryThreshold m) {
    return m == PerQueryThreshold::kGlobal ? "global-threshold" : "query-optimal-threshold";
}

PerQueryThreshold parse_mode(const std::string& s) {
    if (s == "global-threshold") return PerQueryThreshold::kGlobal;
    if (s == "query-optimal-threshold") return PerQueryThreshold::kQueryOptimal;
    throw CorruptFileError(fmt::format("unknown per-query mode '{}'", s));
}

std::vector<double> per_query_values(const MtwvResult& r) {
    std::vector<double> v;
    for (const auto& [id, value] : r.per_query_mtwv) v.push_back(value);
    return v;
}

std::string h1_label(const Comparison& c) { return fmt::format("{} > {}", c.better, c.baseline); }

void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    out << body;
    if (!out) throw Error(fmt::format("write failed: {}", path.string()));
}

}  // namespace

Comparison compare_systems(const SystemResult& better, const SystemResult& baseline) {
    const auto& a = better.result.per_query_mtwv;
    const auto& b = baseline.result.per_query_mtwv;
    std::vector<std::string> only_a, only_b;
    for (const auto& [id, _] : a)
        if (!b.contains(id)) only_a.push_back(id);
    for (const auto& [id, _] : b)
        if (!a.contains(id)) only_b.push_back(id);
    if (!only_a.empty() || !only_b.empty()) {
        const auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
            return s.empty() ? std::string("-") : s;
        };
        throw EvaluationError(fmt::format("query sets differ: only in {}: {}; only in {}: {}", better.tag,
                                          join(only_a), baseline.tag, join(only_b)));
    }
    std::vector<double> va, vb;
    for (const auto& [id, value] : a) {
        va.push_back(value);
        vb.push_back(b.at(id));
    }
    Comparison c;
    c.better = better.tag;
    c.baseline = baseline.tag;
    c.n_queries = va.size();
    c.test = paired_t_test_one_sided(va, vb);
    return c;
}

void write_report_json(const Report& report, const std::filesystem::path& path) {
    if (report.systems.empty()) throw PreconditionError("report needs at least one system");
    json j;
    j["format"] = "qbe-mtwv-report";
    j["version"] = 1;
    j["dataset"] = report.dataset_id;
    j["trial_unit"] = "item";
    j["note"] = kTrialNote;
    j["cost_fa"] = report.config.cost_fa;
    j["cost_miss"] = report.config.cost_miss;
    j["p_target"] = report.config.p_target;
    j["beta"] = report.config.beta();
    j["per_query_mode"] = mode_name(report.config.per_query);

    json systems = json::array();
    for (const auto& s : report.systems) {
        const auto values = per_query_values(s.result);
        json sj;
        sj["tag"] = s.tag;
        sj["mtwv"] = s.result.mtwv;
        sj["optimal_threshold"] = s.result.optimal_threshold ? json(*s.result.optimal_threshold) : json(nullptr);
        sj["per_query_mode"] = mode_name(s.result.per_query_mode);
        sj["n_queries"] = values.size();
        sj["per_query_mean"] = mean(values);
        sj["per_query_sd"] = sample_sd(values);
        sj["per_query_mtwv"] = s.result.per_query_mtwv;
        sj["excluded_queries"] = s.result.excluded_queries;
        json curve = json::array();
        for (const auto& p : s.result.curve)
            curve.push_back({{"threshold", p.threshold}, {"p_miss", p.p_miss}, {"p_fa", p.p_fa}, {"twv", p.twv}});
        sj["curve"] = std::move(curve);
        systems.push_back(std::move(sj));
    }
    j["systems"] = std::move(systems);

    json comparisons = json::array();
    for (const auto& c : report.comparisons)
        comparisons.push_back({{"h1", h1_label(c)},
                               {"better", c.better},
                               {"baseline", c.baseline},
                               {"n_queries", c.n_queries},
                               {"t", c.test.t_value},
                               {"df", c.test.degrees_of_freedom},
                               {"p", c.test.p_value_one_sided}});
    j["comparisons"] = std::move(comparisons);
    write_text(path, j.dump(2) + "\n");
}

void write_summary_csv(const Report& report, const std::filesystem::path& path) {
    if (report.systems.empty()) throw PreconditionError("report needs at least one system");
    std::string out = "kind,dataset,system,n_queries,mtwv,mean,sd,h1,t,df,p\n";
    for (const auto& s : report.systems) {
        const auto values = per_query_values(s.result);
        out += fmt::format("system,{},{},{},{:.6f},{:.6f},{:.6f},,,,\n", report.dataset_id, s.tag, values.size(),
                           s.result.mtwv, mean(values), sample_sd(values));
    }
    for (const auto& c : report.comparisons)
        out += fmt::format("comparison,{},,{},,,,{},{:.6f},{},{:.6f}\n", report.dataset_id, c.n_queries,
                           h1_label(c), c.test.t_value, c.test.degrees_of_freedom, c.test.p_value_one_sided);
    write_text(path, out);
}

void write_report(const Report& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
    write_report_json(report, out_dir / "report.json");
    write_summary_csv(report, out_dir / "summary.csv");
}

Report read_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(fmt::format("cannot open report {}", path.string()));
    try {
        const json j = json::parse(in);
        if (j.at("format") != "qbe-mtwv-report")
            throw CorruptFileError(fmt::format("{}: not an MTWV report", path.string()));
        Report r;
        r.dataset_id = j.at("dataset").get<std::string>();
        r.config.cost_fa = j.at("cost_fa").get<double>();
        r.config.cost_miss = j.at("cost_miss").get<double>();
        r.config.p_target = j.at("p_target").get<double>();
        r.config.per_query = parse_mode(j.at("per_query_mode").get<std::string>());
        for (const auto& sj : j.at("systems")) {
            SystemResult s;
            s.tag = sj.at("tag").get<std::string>();
            s.result.mtwv = sj.at("mtwv").get<double>();
            if (!sj.at("optimal_threshold").is_null())
                s.result.optimal_threshold = sj.at("optimal_threshold").get<double>();
            s.result.per_query_mode = parse_mode(sj.at("per_query_mode").get<std::string>());
            s.result.per_query_mtwv = sj.at("per_query_mtwv").get<std::map<std::string, double>>();
            s.result.excluded_queries = sj.at("excluded_queries").get<std::vector<std::string>>();
            for (const auto& p : sj.at("curve"))
                s.result.curve.push_back({p.at("threshold").get<double>(), p.at("p_miss").get<double>(),
                                          p.at("p_fa").get<double>(), p.at("twv").get<double>()});
            r.systems.push_back(std::move(s));
        }
        for (const auto& cj : j.at("comparisons")) {
            Comparison c;
            c.better = cj.at("better").get<std::string>();
            c.baseline = cj.at("baseline").get<std::string>();
            c.n_queries = cj.at("n_queries").get<std::size_t>();
            c.test.t_value = cj.at("t").get<double>();
            c.test.degrees_of_freedom = cj.at("df").get<int>();
            c.test.p_value_one_sided = cj.at("p").get<double>();
            r.comparisons.push_back(std::move(c));
        }
        return r;
    } catch (const json::exception& e) {
        throw CorruptFileError(fmt::format("{}: malformed report: {}", path.string(), e.what()));
    }
}

}  // namespace qbe::eval
