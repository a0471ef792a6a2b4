#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "evo/curriculum.hpp"
#include "evo/mining.hpp"
#include "support.hpp"

using namespace evo;
using namespace evo::mining;
using evo::curriculum::DifficultyInterval;
using evo::scoring::TokenMatrix;
using evo::scoring::TokenRecord;

namespace {

CandidatePool make_pool(const std::vector<double>& ratios) {
    CandidatePool p;
    p.query_id = "q";
    p.sim_pos = 1.0;
    for (std::size_t i = 0; i < ratios.size(); ++i)
        p.entries.push_back({"d" + std::to_string(i), ratios[i], ratios[i]});
    return p;
}

DifficultyInterval interval(double lo, double hi) { return {0, lo, hi, curriculum::Zone::EffectiveLearning}; }

}  // namespace

TEST_SUITE("mining") {
    TEST_CASE("difficulty ratio") {
        CHECK(difficulty_ratio(0.9, 1.0) == doctest::Approx(0.9));
        CHECK_THROWS_KIND(difficulty_ratio(0.5, 0.0), ErrorKind::Data);
        CHECK_THROWS_KIND(difficulty_ratio(0.5, -1.0), ErrorKind::Data);
    }

    TEST_CASE("pool excludes the positive and sorts by score then id") {
        // One-dimensional tokens make every score a hand-checkable product.
        std::vector<TokenRecord> corpus{
            {"b", TokenMatrix::from_rows({{0.5}})},
            {"pos", TokenMatrix::from_rows({{1.0}})},
            {"a", TokenMatrix::from_rows({{0.5}})},
            {"c", TokenMatrix::from_rows({{0.9}})},
            {"z", TokenMatrix::from_rows({{-1.0}})},
        };
        std::vector<QueryInput> qs{{"q1", TokenMatrix::from_rows({{2.0}}), "pos"}};
        const auto pools = build_candidate_pool(qs, corpus, 3, 1);
        REQUIRE(pools.size() == 1);
        const auto& p = pools[0];
        CHECK(p.query_id == "q1");
        CHECK(p.sim_pos == doctest::Approx(2.0));
        REQUIRE(p.entries.size() == 3);
        CHECK(p.entries[0].doc_id == "c");
        CHECK(p.entries[1].doc_id == "a");
        CHECK(p.entries[2].doc_id == "b");
        CHECK(p.entries[0].ratio == doctest::Approx(0.9));
        CHECK(p.entries[1].sim == doctest::Approx(1.0));
    }

    TEST_CASE("pool errors") {
        std::vector<TokenRecord> corpus{{"a", TokenMatrix::from_rows({{1.0}})}, {"b", TokenMatrix::from_rows({{1.0}})}};
        CHECK_THROWS_KIND(build_candidate_pool({{"q", TokenMatrix::from_rows({{1.0}}), "missing"}}, corpus, 5),
                          ErrorKind::Data);
        CHECK_THROWS_KIND(build_candidate_pool({{"q", TokenMatrix::from_rows({{-1.0}}), "a"}}, corpus, 5),
                          ErrorKind::Data);
        corpus.push_back({"a", TokenMatrix::from_rows({{0.1}})});
        CHECK_THROWS_KIND(build_candidate_pool({{"q", TokenMatrix::from_rows({{1.0}}), "a"}}, corpus, 5),
                          ErrorKind::Data);
    }

    TEST_CASE("threaded mining equals single-threaded mining") {
        Rng rng(21);
        std::vector<TokenRecord> corpus;
        for (int i = 0; i < 40; ++i)
            corpus.push_back({"d" + std::to_string(i), testing::random_unit_matrix(rng, 3, 4)});
        std::vector<QueryInput> qs;
        for (int i = 0; i < 25; ++i) {
            auto q = corpus[static_cast<std::size_t>(i)].tokens;
            qs.push_back({"q" + std::to_string(i), q, corpus[static_cast<std::size_t>(i)].id});
        }
        CHECK(build_candidate_pool(qs, corpus, 10, 1) == build_candidate_pool(qs, corpus, 10, 4));
    }

    TEST_CASE("select_negatives inside the interval, highest first") {
        const auto pool = make_pool({0.99, 0.95, 0.93, 0.91, 0.88, 0.80, 0.70});
        const auto s = select_negatives(pool, interval(0.85, 0.94), 2);
        CHECK(s.doc_ids == std::vector<std::string>{"d2", "d3"});
        CHECK_FALSE(s.fallback);
    }

    TEST_CASE("interval bounds are inclusive") {
        const auto pool = make_pool({0.95, 0.90, 0.85, 0.80});
        const auto s = select_negatives(pool, interval(0.85, 0.90), 3);
        CHECK(s.doc_ids == std::vector<std::string>{"d1", "d2", "d3"});
        CHECK(s.fallback);
    }

    TEST_CASE("short intervals are topped up from below first") {
        const auto pool = make_pool({0.99, 0.93, 0.80, 0.60});
        const auto s = select_negatives(pool, interval(0.85, 0.95), 2);
        CHECK(s.doc_ids == std::vector<std::string>{"d1", "d2"});
        CHECK(s.fallback);
    }

    TEST_CASE("top-up from above takes the closest entries") {
        const auto pool = make_pool({0.99, 0.97, 0.96});
        const auto s = select_negatives(pool, interval(0.70, 0.85), 2);
        CHECK(s.doc_ids == std::vector<std::string>{"d2", "d1"});
        CHECK(s.fallback);
    }

    TEST_CASE("small pools return what they have") {
        const auto pool = make_pool({0.9});
        const auto s = select_negatives(pool, interval(0.7, 0.95), 2);
        CHECK(s.doc_ids == std::vector<std::string>{"d0"});
        CHECK_THROWS_KIND(select_negatives(CandidatePool{}, interval(0.7, 0.9), 2), ErrorKind::Data);
    }

    TEST_CASE("select_negatives against a hand filter on random pools") {
        Rng rng(31);
        for (int t = 0; t < 300; ++t) {
            std::vector<double> ratios;
            const std::size_t n = 1 + rng.below(12);
            for (std::size_t i = 0; i < n; ++i) ratios.push_back(std::round(rng.uniform(0.6, 1.0) * 100) / 100);
            std::sort(ratios.rbegin(), ratios.rend());
            const auto pool = make_pool(ratios);
            const double lo = std::round(rng.uniform(0.6, 0.95) * 100) / 100;
            const double hi = std::min(1.0, lo + 0.01 + std::round(rng.uniform(0.0, 0.2) * 100) / 100);
            const std::size_t k = 1 + rng.below(3);
            const auto s = select_negatives(pool, interval(lo, hi), k);

            std::vector<std::string> in, below, above;
            for (std::size_t i = 0; i < n; ++i) {
                const auto id = "d" + std::to_string(i);
                if (ratios[i] >= lo && ratios[i] <= hi) in.push_back(id);
                else if (ratios[i] < lo) below.push_back(id);
            }
            for (std::size_t i = n; i-- > 0;)
                if (ratios[i] > hi) above.push_back("d" + std::to_string(i));
            std::vector<std::string> expect;
            for (auto* src : {&in, &below, &above})
                for (const auto& id : *src)
                    if (expect.size() < k) expect.push_back(id);
            CHECK(s.doc_ids == expect);
            CHECK(s.fallback == (expect.size() > std::min(in.size(), k)));
        }
    }

    TEST_CASE("negative query sampling") {
        const auto a = select_negative_queries(20, 2, 5);
        CHECK(a == select_negative_queries(20, 2, 5));
        CHECK(a.size() == 2);
        CHECK(a[0] != a[1]);
        CHECK(select_negative_queries(3, 10, 1).size() == 3);
        CHECK_THROWS_KIND(select_negative_queries(0, 2, 1), ErrorKind::Data);
        const std::vector<std::string> pool{"x", "y", "z"};
        const auto picked = select_negative_queries(pool, 2, 9);
        CHECK(picked.size() == 2);
        std::set<std::size_t> seen;
        Rng rng(1);
        for (int t = 0; t < 200; ++t)
            for (auto i : select_negative_queries(20, 2, rng.next_u32())) seen.insert(i);
        CHECK(seen.size() == 20);
    }

    TEST_CASE("pool JSONL round trip") {
        const auto pool = make_pool({0.9, 0.8});
        CHECK(pool_from_jsonl_line(to_jsonl_line(pool)) == pool);
        CHECK_THROWS_KIND(pool_from_jsonl_line("{\"query_id\": \"q\"}"), ErrorKind::Parse);
    }
}
