#include "evo/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "evo/errors.hpp"
#include "evo/hnqs.hpp"
#include "evo/rng.hpp"

namespace evo::sim {

void DatasetConfig::validate() const {
    require(num_docs >= 2, ErrorKind::Usage, "dataset needs at least 2 documents");
    require(min_tokens >= 1 && min_tokens <= max_tokens, ErrorKind::Usage, "bad document token range");
    require(min_query_tokens >= 1 && min_query_tokens <= max_query_tokens, ErrorKind::Usage,
            "bad query token range");
    require(d_in >= 1 && num_topics >= 1, ErrorKind::Usage, "d_in and num_topics must be positive");
    require(noise >= 0.0, ErrorKind::Usage, "noise must be non-negative");
    require(distractor_rate >= 0.0 && distractor_rate < 1.0, ErrorKind::Usage, "distractor_rate must be in [0, 1)");
    require(distractor_min_noise > 0.0 && distractor_min_noise <= distractor_max_noise, ErrorKind::Usage,
            "distractor noise range must be positive and ordered");
    require(heldout_fraction >= 0.0 && heldout_fraction < 1.0, ErrorKind::Usage,
            "heldout_fraction must be in [0, 1)");
    require(negative_variants >= 1, ErrorKind::Usage, "need at least one negative query variant");
}

std::vector<std::size_t> SyntheticDataset::split(bool heldout) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < queries.size(); ++i)
        if (queries[i].heldout == heldout) out.push_back(i);
    return out;
}

bool SyntheticDataset::operator==(const SyntheticDataset& o) const {
    if (corpus.size() != o.corpus.size() || queries.size() != o.queries.size()) return false;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (corpus[i].id != o.corpus[i].id || !(corpus[i].tokens == o.corpus[i].tokens)) return false;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto &a = queries[i], &b = o.queries[i];
        if (a.id != b.id || a.text != b.text || !(a.raw == b.raw) || a.pos_doc_id != b.pos_doc_id ||
            a.heldout != b.heldout || a.negative_variants != b.negative_variants ||
            a.negative_texts != b.negative_texts)
            return false;
    }
    return true;
}

namespace {

std::size_t in_range(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + rng.below(static_cast<std::uint32_t>(hi - lo + 1));
}

std::vector<double> gaussian(Rng& rng, std::size_t d, double scale) {
    std::vector<double> v(d);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

}  // namespace

SyntheticDataset gen_synthetic_dataset(const DatasetConfig& cfg, std::uint32_t seed) {
    cfg.validate();
    Rng rng(seed);
    const std::size_t d = cfg.d_in;

    std::vector<std::vector<double>> topics;
    for (std::size_t t = 0; t < cfg.num_topics; ++t) topics.push_back(gaussian(rng, d, 1.0));

    SyntheticDataset ds;
    std::vector<std::size_t> doc_topic;
    std::vector<std::size_t> family;  // near-duplicates share their source's family
    for (std::size_t i = 0; i < cfg.num_docs; ++i) {
        const std::string id = fmt::format("doc{:04d}", i);
        TokenMatrix tokens;
        if (i > 0 && rng.uniform() < cfg.distractor_rate) {
            // Near-duplicate of an earlier document: every token is perturbed.
            const std::size_t src = rng.below(static_cast<std::uint32_t>(i));
            const double strength = rng.uniform(cfg.distractor_min_noise, cfg.distractor_max_noise);
            const TokenMatrix& base = ds.corpus[src].tokens;
            for (std::size_t r = 0; r < base.rows(); ++r) {
                auto row = base.row(r);
                std::vector<double> tok(row.begin(), row.end());
                for (double& x : tok) x += strength * rng.normal();
                tokens.push_row(tok);
            }
            doc_topic.push_back(doc_topic[src]);
            family.push_back(family[src]);
        } else {
            const std::size_t topic = rng.below(static_cast<std::uint32_t>(cfg.num_topics));
            const std::size_t len = in_range(rng, cfg.min_tokens, cfg.max_tokens);
            for (std::size_t r = 0; r < len; ++r) {
                auto tok = gaussian(rng, d, 1.0);
                for (std::size_t c = 0; c < d; ++c) tok[c] += cfg.topic_weight * topics[topic][c];
                tokens.push_row(tok);
            }
            doc_topic.push_back(topic);
            family.push_back(i);
        }
        ds.corpus.push_back({id, std::move(tokens)});
    }

    std::vector<std::size_t> order(cfg.num_docs);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i + 1 < order.size(); ++i)
        std::swap(order[i], order[i + rng.below(static_cast<std::uint32_t>(order.size() - i))]);
    const auto heldout_count = static_cast<std::size_t>(cfg.heldout_fraction * static_cast<double>(cfg.num_docs));
    std::vector<bool> heldout(cfg.num_docs, false);
    for (std::size_t i = 0; i < heldout_count; ++i) heldout[order[i]] = true;

    for (std::size_t i = 0; i < cfg.num_docs; ++i) {
        const TokenMatrix& pos = ds.corpus[i].tokens;
        SyntheticQuery q;
        q.id = fmt::format("q{:04d}", i);
        q.pos_doc_id = ds.corpus[i].id;
        q.text = fmt::format("What does {} report about topic {}?", ds.corpus[i].id, doc_topic[i]);
        q.heldout = heldout[i];

        std::vector<std::size_t> rows(pos.rows());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        const std::size_t want = std::min(in_range(rng, cfg.min_query_tokens, cfg.max_query_tokens), pos.rows());
        for (std::size_t k = 0; k < want; ++k)
            std::swap(rows[k], rows[k + rng.below(static_cast<std::uint32_t>(rows.size() - k))]);
        for (std::size_t k = 0; k < want; ++k) {
            auto row = pos.row(rows[k]);
            std::vector<double> tok(row.begin(), row.end());
            if (cfg.noise > 0.0)
                for (double& x : tok) x += cfg.noise * rng.normal();
            q.raw.push_row(tok);
        }

        // Negative queries keep part of the query and swap the rest for
        // tokens of a document on another topic.
        std::vector<std::size_t> donors;
        for (std::size_t j = 0; j < cfg.num_docs; ++j)
            if (doc_topic[j] != doc_topic[i]) donors.push_back(j);
        if (donors.empty())
            for (std::size_t j = 0; j < cfg.num_docs; ++j)
                if (family[j] != family[i]) donors.push_back(j);
        if (donors.empty())
            for (std::size_t j = 0; j < cfg.num_docs; ++j)
                if (j != i) donors.push_back(j);
        for (std::size_t v = 0; v < cfg.negative_variants; ++v) {
            TokenMatrix neg = q.raw;
            const std::size_t other = donors[rng.below(static_cast<std::uint32_t>(donors.size()))];
            const TokenMatrix& donor = ds.corpus[other].tokens;
            const std::size_t replace = std::max<std::size_t>(1, (neg.rows() + 1) / 2);
            std::vector<std::size_t> slots(neg.rows());
            std::iota(slots.begin(), slots.end(), std::size_t{0});
            for (std::size_t k = 0; k < replace; ++k) {
                std::swap(slots[k], slots[k + rng.below(static_cast<std::uint32_t>(slots.size() - k))]);
                auto src = donor.row(rng.below(static_cast<std::uint32_t>(donor.rows())));
                auto dst = neg.row(slots[k]);
                for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] + cfg.noise * rng.normal();
            }
            q.negative_variants.push_back(std::move(neg));
        }
        q.negative_texts = hnqs::mock_generate(q.text, derive_seed(seed, i));
        q.negative_texts.resize(q.negative_variants.size());
        ds.queries.push_back(std::move(q));
    }
    return ds;
}

void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream corpus(dir / "corpus.jsonl");
    require(static_cast<bool>(corpus), ErrorKind::Data, "cannot write " + (dir / "corpus.jsonl").string());
    for (const auto& rec : ds.corpus) corpus << scoring::to_jsonl_line(rec) << '\n';

    std::ofstream queries(dir / "queries.jsonl");
    require(static_cast<bool>(queries), ErrorKind::Data, "cannot write " + (dir / "queries.jsonl").string());
    for (const auto& q : ds.queries) {
        nlohmann::json j;
        j["id"] = q.id;
        j["text"] = q.text;
        j["tokens"] = q.raw.to_rows();
        j["pos_doc_id"] = q.pos_doc_id;
        j["split"] = q.heldout ? "heldout" : "train";
        j["negative_tokens"] = nlohmann::json::array();
        for (const auto& n : q.negative_variants) j["negative_tokens"].push_back(n.to_rows());
        queries << j.dump() << '\n';
    }

    std::ofstream hnqs_out(dir / "hnqs.jsonl");
    require(static_cast<bool>(hnqs_out), ErrorKind::Data, "cannot write " + (dir / "hnqs.jsonl").string());
    for (const auto& q : ds.queries) {
        if (q.negative_texts.size() != hnqs::kVariantCount) continue;
        hnqs_out << hnqs::HnqsRecord(q.id, q.text, q.negative_texts, hnqs::Generator::Mock).to_jsonl_line() << '\n';
    }
}

SyntheticDataset load_dataset(const std::filesystem::path& dir) {
    SyntheticDataset ds;
    std::ifstream corpus(dir / "corpus.jsonl");
    require(static_cast<bool>(corpus), ErrorKind::Data, "cannot open " + (dir / "corpus.jsonl").string());
    std::size_t line_no = 0;
    for (std::string line; std::getline(corpus, line);) {
        ++line_no;
        if (line.empty()) continue;
        try {
            ds.corpus.push_back(scoring::token_record_from_jsonl_line(line));
        } catch (const Error& e) {
            fail(ErrorKind::Parse, fmt::format("corpus.jsonl line {}: {}", line_no, e.what()));
        }
    }
    std::ifstream queries(dir / "queries.jsonl");
    require(static_cast<bool>(queries), ErrorKind::Data, "cannot open " + (dir / "queries.jsonl").string());
    line_no = 0;
    for (std::string line; std::getline(queries, line);) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            SyntheticQuery q;
            q.id = j.at("id").get<std::string>();
            q.text = j.at("text").get<std::string>();
            q.raw = TokenMatrix::from_rows(j.at("tokens").get<std::vector<std::vector<double>>>());
            q.pos_doc_id = j.at("pos_doc_id").get<std::string>();
            q.heldout = j.at("split").get<std::string>() == "heldout";
            for (const auto& n : j.at("negative_tokens"))
                q.negative_variants.push_back(TokenMatrix::from_rows(n.get<std::vector<std::vector<double>>>()));
            ds.queries.push_back(std::move(q));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, fmt::format("queries.jsonl line {}: {}", line_no, e.what()));
        } catch (const Error& e) {
            fail(ErrorKind::Parse, fmt::format("queries.jsonl line {}: {}", line_no, e.what()));
        }
    }

    std::ifstream hnqs_in(dir / "hnqs.jsonl");
    if (hnqs_in) {
        std::unordered_map<std::string, std::size_t> by_id;
        for (std::size_t i = 0; i < ds.queries.size(); ++i) by_id[ds.queries[i].id] = i;
        line_no = 0;
        for (std::string line; std::getline(hnqs_in, line);) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const auto rec = hnqs::HnqsRecord::from_jsonl_line(line);
                auto it = by_id.find(rec.query_id());
                require(it != by_id.end(), ErrorKind::Data, "unknown query " + rec.query_id());
                ds.queries[it->second].negative_texts = rec.variants();
            } catch (const Error& e) {
                fail(ErrorKind::Parse, fmt::format("hnqs.jsonl line {}: {}", line_no, e.what()));
            }
        }
    }
    return ds;
}

}  // namespace evo::sim
