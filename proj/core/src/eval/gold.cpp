#include "qbe/eval/gold.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <fmt/core.h>

#include "qbe/text.hpp"

namespace qbe::eval {

GoldLabelSet::GoldLabelSet(std::vector<std::string> query_ids, std::vector<std::string> item_ids)
    : query_ids_(std::move(query_ids)), item_ids_(std::move(item_ids)) {
    for (std::size_t i = 0; i < query_ids_.size(); ++i)
        if (!query_pos_.emplace(query_ids_[i], i).second)
            throw PreconditionError(fmt::format("duplicate query id: {}", query_ids_[i]));
    for (std::size_t i = 0; i < item_ids_.size(); ++i)
        if (!item_pos_.emplace(item_ids_[i], i).second)
            throw PreconditionError(fmt::format("duplicate item id: {}", item_ids_[i]));
    labels_.assign(query_ids_.size() * item_ids_.size(), 0);
}

std::size_t GoldLabelSet::query_index(const std::string& id) const {
    const auto it = query_pos_.find(id);
    if (it == query_pos_.end()) throw PreconditionError(fmt::format("unknown query id: {}", id));
    return it->second;
}

std::size_t GoldLabelSet::item_index(const std::string& id) const {
    const auto it = item_pos_.find(id);
    if (it == item_pos_.end()) throw PreconditionError(fmt::format("unknown item id: {}", id));
    return it->second;
}

bool GoldLabelSet::contains(const std::string& query_id, const std::string& item_id) const {
    return query_pos_.contains(query_id) && item_pos_.contains(item_id);
}

bool GoldLabelSet::label(const std::string& query_id, const std::string& item_id) const {
    return label_at(query_index(query_id), item_index(item_id));
}

void GoldLabelSet::set(const std::string& query_id, const std::string& item_id, bool value) {
    labels_[query_index(query_id) * item_ids_.size() + item_index(item_id)] = value ? 1 : 0;
}

std::size_t GoldLabelSet::true_count_at(std::size_t q) const {
    const auto begin = labels_.begin() + static_cast<std::ptrdiff_t>(q * item_ids_.size());
    return static_cast<std::size_t>(std::count(begin, begin + static_cast<std::ptrdiff_t>(item_ids_.size()), 1));
}

std::size_t GoldLabelSet::true_count(const std::string& query_id) const {
    return true_count_at(query_index(query_id));
}

std::size_t GoldLabelSet::total_true() const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), 1));
}

bool contains_term(const std::vector<std::string>& item_tokens, const std::vector<std::string>& query_tokens) {
    if (query_tokens.empty() || query_tokens.size() > item_tokens.size()) return false;
    return std::search(item_tokens.begin(), item_tokens.end(), query_tokens.begin(), query_tokens.end()) !=
           item_tokens.end();
}

GoldResult make_gold(const std::vector<Transcribed>& queries, const std::vector<Transcribed>& items) {
    std::vector<std::string> qids, iids;
    for (const auto& q : queries) qids.push_back(q.id);
    for (const auto& i : items) iids.push_back(i.id);
    GoldResult out{GoldLabelSet(qids, iids), {}};

    const auto tokenize = [&](const std::vector<Transcribed>& rows, const char* role) {
        std::vector<std::vector<std::string>> tokens;
        for (const auto& r : rows) {
            tokens.push_back(text::normalize_tokens(r.transcription));
            if (tokens.back().empty())
                out.diagnostics.push_back(
                    {Severity::kWarning,
                     fmt::format("{} {}: empty transcription after normalization; all its pairs labeled 0", role, r.id)});
        }
        return tokens;
    };
    const auto qtok = tokenize(queries, "query");
    const auto itok = tokenize(items, "item");
    for (std::size_t q = 0; q < queries.size(); ++q)
        for (std::size_t i = 0; i < items.size(); ++i)
            if (contains_term(itok[i], qtok[q])) out.gold.set(queries[q].id, items[i].id, true);
    return out;
}

GoldLabelSet read_gold_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(fmt::format("cannot open gold file {}", path.string()));
    std::vector<std::string> qids, iids;
    std::set<std::string> qseen, iseen;
    std::map<std::pair<std::string, std::string>, bool> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;
        const auto f = text::split(line, '\t');
        if (!header) {
            if (f.size() != 3 || f[0] != "query" || f[1] != "item" || f[2] != "label")
                throw CorruptFileError(fmt::format("{}:{}: expected header 'query<TAB>item<TAB>label'",
                                                   path.string(), line_no));
            header = true;
            continue;
        }
        if (f.size() != 3 || (f[2] != "0" && f[2] != "1"))
            throw CorruptFileError(fmt::format("{}:{}: expected 'query<TAB>item<TAB>0|1'", path.string(), line_no));
        if (qseen.insert(f[0]).second) qids.push_back(f[0]);
        if (iseen.insert(f[1]).second) iids.push_back(f[1]);
        if (!rows.emplace(std::pair{f[0], f[1]}, f[2] == "1").second)
            throw CorruptFileError(fmt::format("{}:{}: duplicate pair ({}, {})", path.string(), line_no, f[0], f[1]));
    }
    if (!header) throw CorruptFileError(fmt::format("{}: missing header", path.string()));
    if (rows.size() != qids.size() * iids.size())
        throw CorruptFileError(fmt::format("{}: {} rows do not cover the {} x {} pair grid", path.string(),
                                           rows.size(), qids.size(), iids.size()));
    GoldLabelSet gold(qids, iids);
    for (const auto& [pair, value] : rows) gold.set(pair.first, pair.second, value);
    return gold;
}

void write_gold_tsv(const std::filesystem::path& path, const GoldLabelSet& gold) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    out << "query\titem\tlabel\n";
    for (std::size_t q = 0; q < gold.query_ids().size(); ++q)
        for (std::size_t i = 0; i < gold.item_ids().size(); ++i)
            out << gold.query_ids()[q] << '\t' << gold.item_ids()[i] << '\t' << (gold.label_at(q, i) ? 1 : 0) << '\n';
}

}  // namespace qbe::eval
