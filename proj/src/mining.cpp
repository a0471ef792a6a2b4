#include "evo/mining.hpp"

#include <algorithm>
#include <numeric>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "evo/errors.hpp"
#include "evo/rng.hpp"

namespace evo::mining {

double difficulty_ratio(double s_neg, double s_pos) {
    require(s_pos > 0.0, ErrorKind::Data, fmt::format("degenerate positive score {} (must be > 0)", s_pos));
    return s_neg / s_pos;
}

namespace {

CandidatePool mine_one(const QueryInput& q, const std::vector<TokenRecord>& corpus, std::size_t pos_index,
                       std::size_t n) {
    CandidatePool pool;
    pool.query_id = q.id;
    pool.sim_pos = scoring::maxsim(q.tokens, corpus[pos_index].tokens);
    require(pool.sim_pos > 0.0, ErrorKind::Data,
            fmt::format("query {}: degenerate positive score {}", q.id, pool.sim_pos));

    std::vector<PoolEntry> scored;
    scored.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (i == pos_index) continue;
        const double s = scoring::maxsim(q.tokens, corpus[i].tokens);
        scored.push_back({corpus[i].id, s, 0.0});
    }
    auto better = [](const PoolEntry& a, const PoolEntry& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.doc_id < b.doc_id;
    };
    const std::size_t keep = std::min(n, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
    scored.resize(keep);
    for (auto& e : scored) e.ratio = difficulty_ratio(e.sim, pool.sim_pos);
    pool.entries = std::move(scored);
    return pool;
}

}  // namespace

std::vector<CandidatePool> build_candidate_pool(const std::vector<QueryInput>& queries,
                                                const std::vector<TokenRecord>& corpus, std::size_t n,
                                                unsigned threads) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        require(index.emplace(corpus[i].id, i).second, ErrorKind::Data, "duplicate corpus id " + corpus[i].id);

    std::vector<std::size_t> pos(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        auto it = index.find(queries[i].pos_doc_id);
        require(it != index.end(), ErrorKind::Data,
                fmt::format("query {}: positive document {} not in corpus", queries[i].id, queries[i].pos_doc_id));
        pos[i] = it->second;
    }

    std::vector<CandidatePool> out(queries.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, queries.size())));

    // Each worker owns a strided slice of the output, so merge order is irrelevant.
    std::vector<std::exception_ptr> errors(threads);
    auto work = [&](unsigned t) {
        try {
            for (std::size_t i = t; i < queries.size(); i += threads) out[i] = mine_one(queries[i], corpus, pos[i], n);
        } catch (...) {
            errors[t] = std::current_exception();
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

NegativeSelection select_negatives(const CandidatePool& pool, const curriculum::DifficultyInterval& interval,
                                   std::size_t count) {
    require(!pool.entries.empty(), ErrorKind::Data, "candidate pool for " + pool.query_id + " is empty");
    require(count >= 1, ErrorKind::Usage, "negative count must be >= 1");

    NegativeSelection sel;
    auto take = [&](const PoolEntry& e) {
        sel.doc_ids.push_back(e.doc_id);
        sel.ratios.push_back(e.ratio);
    };
    // Entries are sorted by sim descending, which is ratio descending as well.
    for (const auto& e : pool.entries) {
        if (sel.doc_ids.size() == count) break;
        if (interval.contains(e.ratio)) take(e);
    }
    if (sel.doc_ids.size() < count) {
        for (const auto& e : pool.entries) {
            if (sel.doc_ids.size() == count) break;
            if (e.ratio < interval.low) {
                take(e);
                sel.fallback = true;
            }
        }
    }
    if (sel.doc_ids.size() < count) {
        for (auto it = pool.entries.rbegin(); it != pool.entries.rend(); ++it) {
            if (sel.doc_ids.size() == count) break;
            if (it->ratio > interval.high) {
                take(*it);
                sel.fallback = true;
            }
        }
    }
    return sel;
}

std::vector<std::size_t> select_negative_queries(std::size_t pool_size, std::size_t count, std::uint32_t seed) {
    require(pool_size >= 1, ErrorKind::Data, "negative query pool is empty");
    require(count >= 1, ErrorKind::Usage, "negative query count must be >= 1");
    std::vector<std::size_t> idx(pool_size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    const std::size_t take = std::min(count, pool_size);
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + rng.below(static_cast<std::uint32_t>(pool_size - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(take);
    return idx;
}

std::string to_jsonl_line(const CandidatePool& pool) {
    nlohmann::json j;
    j["query_id"] = pool.query_id;
    j["sim_pos"] = pool.sim_pos;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : pool.entries) j["entries"].push_back({{"doc_id", e.doc_id}, {"sim", e.sim}, {"ratio", e.ratio}});
    return j.dump();
}

CandidatePool pool_from_jsonl_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        CandidatePool p;
        p.query_id = j.at("query_id").get<std::string>();
        p.sim_pos = j.at("sim_pos").get<double>();
        for (const auto& e : j.at("entries"))
            p.entries.push_back({e.at("doc_id").get<std::string>(), e.at("sim").get<double>(), e.at("ratio").get<double>()});
        return p;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("bad pool record: ") + e.what());
    }
}

}  // namespace evo::mining
