#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "evo/curriculum.hpp"
#include "evo/scoring.hpp"

namespace evo::mining {

using scoring::TokenMatrix;
using scoring::TokenRecord;

struct PoolEntry {
    std::string doc_id;
    double sim = 0.0;
    double ratio = 0.0;  // sim / sim_pos at mining time
    bool operator==(const PoolEntry&) const = default;
};

/// Top-N non-positive documents for one query, ordered by sim descending.
struct CandidatePool {
    std::string query_id;
    double sim_pos = 0.0;
    std::vector<PoolEntry> entries;
    bool operator==(const CandidatePool&) const = default;
};

struct QueryInput {
    std::string id;
    TokenMatrix tokens;
    std::string pos_doc_id;
};

inline constexpr std::size_t kDefaultPoolSize = 200;

/// Brute-force maxsim of every query against the whole corpus. The positive
/// is dropped, the rest ranked by score (ties by ascending doc id) and
/// truncated to n. Throws Data when a positive id is absent from the corpus
/// or its score is not positive. `threads` == 0 picks the hardware count.
std::vector<CandidatePool> build_candidate_pool(const std::vector<QueryInput>& queries,
                                                const std::vector<TokenRecord>& corpus, std::size_t n,
                                                unsigned threads = 0);

/// s_neg / s_pos. Throws Data when s_pos <= 0.
double difficulty_ratio(double s_neg, double s_pos);

struct NegativeSelection {
    std::vector<std::string> doc_ids;
    std::vector<double> ratios;
    bool fallback = false;
};

/// Picks up to `count` entries with low <= ratio <= high, highest sim
/// first. Short intervals are topped up from the closest entries below
/// `low`, then (only if the pool has nothing below) the closest above
/// `high`; either top-up sets `fallback`. Throws Data on an empty pool.
NegativeSelection select_negatives(const CandidatePool& pool, const curriculum::DifficultyInterval& interval,
                                   std::size_t count);

/// Seeded uniform sample of min(count, pool_size) distinct indices in
/// [0, pool_size), drawn by a partial Fisher-Yates shuffle. Throws Data on
/// an empty pool.
std::vector<std::size_t> select_negative_queries(std::size_t pool_size, std::size_t count, std::uint32_t seed);

template <class T>
std::vector<T> select_negative_queries(const std::vector<T>& pool, std::size_t count, std::uint32_t seed) {
    std::vector<T> out;
    for (std::size_t i : select_negative_queries(pool.size(), count, seed)) out.push_back(pool[i]);
    return out;
}

/// {"query_id": str, "sim_pos": f, "entries": [{"doc_id": str, "sim": f, "ratio": f}, ...]}
std::string to_jsonl_line(const CandidatePool& pool);
CandidatePool pool_from_jsonl_line(const std::string& line);

}  // namespace evo::mining
