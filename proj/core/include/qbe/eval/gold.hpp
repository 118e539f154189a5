#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "qbe/error.hpp"

namespace qbe::eval {

struct Transcribed {
    std::string id;
    std::string transcription;
};

/// Occurrence labels for the full query x item grid.
class GoldLabelSet {
public:
    GoldLabelSet() = default;
    GoldLabelSet(std::vector<std::string> query_ids, std::vector<std::string> item_ids);

    const std::vector<std::string>& query_ids() const noexcept { return query_ids_; }
    const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
    std::size_t size() const noexcept { return labels_.size(); }

    bool contains(const std::string& query_id, const std::string& item_id) const;
    bool label(const std::string& query_id, const std::string& item_id) const;
    void set(const std::string& query_id, const std::string& item_id, bool value);

    bool label_at(std::size_t query_index, std::size_t item_index) const {
        return labels_[query_index * item_ids_.size() + item_index] != 0;
    }
    std::size_t query_index(const std::string& id) const;  // throws on unknown id
    std::size_t item_index(const std::string& id) const;

    /// Number of items containing the query.
    std::size_t true_count(const std::string& query_id) const;
    std::size_t true_count_at(std::size_t query_index) const;
    std::size_t total_true() const;

private:
    std::vector<std::string> query_ids_;
    std::vector<std::string> item_ids_;
    std::unordered_map<std::string, std::size_t> query_pos_;
    std::unordered_map<std::string, std::size_t> item_pos_;
    std::vector<unsigned char> labels_;
};

struct GoldResult {
    GoldLabelSet gold;
    Diagnostics diagnostics;
};

/// True iff the query's normalized token sequence occurs as a contiguous
/// run of the item's tokens. Empty token sequences never match.
bool contains_term(const std::vector<std::string>& item_tokens, const std::vector<std::string>& query_tokens);

/// Labels every pair from transcriptions (case-folded, punctuation removed,
/// whole-word match). Pairs with an empty normalized transcription are
/// labeled false and reported.
GoldResult make_gold(const std::vector<Transcribed>& queries, const std::vector<Transcribed>& items);

/// Gold TSV: `query<TAB>item<TAB>label(0|1)` with a header row. The file
/// must cover the full grid of the ids it mentions.
GoldLabelSet read_gold_tsv(const std::filesystem::path& path);
void write_gold_tsv(const std::filesystem::path& path, const GoldLabelSet& gold);

}  // namespace qbe::eval
