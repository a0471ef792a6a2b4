#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evo/scoring.hpp"

namespace evo::sim {

using scoring::TokenMatrix;
using scoring::TokenRecord;

struct DatasetConfig {
    std::size_t num_docs = 200;
    std::size_t min_tokens = 4;
    std::size_t max_tokens = 8;
    std::size_t d_in = 12;
    std::size_t num_topics = 8;
    double topic_weight = 0.8;        // share of the topic centre in every token
    double noise = 0.6;               // query-token noise scale
    double distractor_rate = 0.35;    // fraction of docs that are near-duplicates
    double distractor_min_noise = 0.1;
    double distractor_max_noise = 1.2;
    std::size_t min_query_tokens = 2;
    std::size_t max_query_tokens = 4;
    double heldout_fraction = 0.2;
    std::size_t negative_variants = 20;

    /// Throws Usage on degenerate settings (num_docs < 2, empty token ranges...).
    void validate() const;
};

struct SyntheticQuery {
    std::string id;
    std::string text;
    TokenMatrix raw;
    std::string pos_doc_id;
    bool heldout = false;
    std::vector<TokenMatrix> negative_variants;  // raw tokens of the synthesized negative queries
    std::vector<std::string> negative_texts;      // matching question texts
};

struct SyntheticDataset {
    std::vector<TokenRecord> corpus;  // raw (unencoded) document tokens
    std::vector<SyntheticQuery> queries;

    std::size_t d_in() const { return corpus.empty() ? 0 : corpus.front().tokens.dim(); }
    std::vector<std::size_t> split(bool heldout) const;
    bool operator==(const SyntheticDataset&) const;
};

/// Topic-structured corpus with near-duplicate distractors; every query is a
/// noisy subset of its positive's tokens. Deterministic in (config, seed).
SyntheticDataset gen_synthetic_dataset(const DatasetConfig& config, std::uint32_t seed);

/// Writes corpus.jsonl ({"id","tokens"}), queries.jsonl and hnqs.jsonl into `dir`.
void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir);
SyntheticDataset load_dataset(const std::filesystem::path& dir);

}  // namespace evo::sim
