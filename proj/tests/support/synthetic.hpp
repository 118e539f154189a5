#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qbe/eval/gold.hpp"
#include "qbe/search/dtw_search.hpp"

namespace qbe::testing {

struct CorpusSpec {
    std::size_t num_queries = 50;
    std::size_t num_items = 200;
    std::size_t dims = 39;
    std::size_t min_query_frames = 40;
    std::size_t max_query_frames = 60;
    std::size_t min_item_frames = 120;
    std::size_t max_item_frames = 200;
    double noise_fraction = 0.0;  // Gaussian noise sd as a fraction of each dim's sd
    double max_stretch = 0.0;     // embedded region length = |Q| * U(1 - s, 1 + s)
    std::uint64_t seed = 20211;
};

struct SyntheticCorpus {
    std::vector<search::Utterance> queries;
    std::vector<search::Utterance> items;
    std::vector<std::size_t> host_item;  // host_item[q] = index of the item containing query q
    std::vector<std::size_t> host_offset;
    eval::GoldLabelSet gold;
};

/// Random MFCC-like features: per-dimension offset and decaying scale,
/// AR(1)-smoothed in time. Each query is planted in exactly one item.
SyntheticCorpus make_corpus(const CorpusSpec& spec);

/// Writes `<dir>/feats/*.qf`, `<dir>/queries.tsv`, `<dir>/items.tsv` and
/// `<dir>/gold.tsv` for CLI tests.
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace qbe::testing
