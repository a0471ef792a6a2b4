#include "evo/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "evo/errors.hpp"

namespace evo::scoring {

TokenMatrix TokenMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    require(!rows.empty(), ErrorKind::Structural, "token matrix has no rows");
    const std::size_t dim = rows.front().size();
    require(dim > 0, ErrorKind::Structural, "token matrix rows have zero dimension");
    TokenMatrix m(rows.size(), dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require(rows[r].size() == dim, ErrorKind::Structural,
                "token row " + std::to_string(r) + " has dimension " + std::to_string(rows[r].size()) +
                    ", expected " + std::to_string(dim));
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

std::vector<std::vector<double>> TokenMatrix::to_rows() const {
    std::vector<std::vector<double>> out;
    out.reserve(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        auto src = row(r);
        out.emplace_back(src.begin(), src.end());
    }
    return out;
}

void TokenMatrix::push_row(std::span<const double> r) {
    if (rows_ == 0 && dim_ == 0) dim_ = r.size();
    require(r.size() == dim_ && dim_ > 0, ErrorKind::Structural, "pushed row has wrong dimension");
    data_.insert(data_.end(), r.begin(), r.end());
    ++rows_;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

TokenMatrix l2_normalize(const TokenMatrix& m) {
    require(!m.empty(), ErrorKind::Usage, "l2_normalize on empty token matrix");
    TokenMatrix out = m;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        const double norm = std::sqrt(dot(row, row));
        if (norm == 0.0) continue;
        for (double& v : row) v /= norm;
    }
    return out;
}

namespace {

void check_pair(const TokenMatrix& query, const TokenMatrix& doc) {
    require(!query.empty() && !doc.empty(), ErrorKind::Structural, "maxsim on empty token matrix");
    require(query.dim() == doc.dim(), ErrorKind::Structural,
            "maxsim dimension mismatch: " + std::to_string(query.dim()) + " vs " + std::to_string(doc.dim()));
}

}  // namespace

std::vector<std::size_t> maxsim_argmax(const TokenMatrix& query, const TokenMatrix& doc) {
    check_pair(query, doc);
    std::vector<std::size_t> best(query.rows(), 0);
    for (std::size_t l = 0; l < query.rows(); ++l) {
        double best_score = dot(query.row(l), doc.row(0));
        for (std::size_t j = 1; j < doc.rows(); ++j) {
            const double s = dot(query.row(l), doc.row(j));
            if (s > best_score) {
                best_score = s;
                best[l] = j;
            }
        }
    }
    return best;
}

double maxsim(const TokenMatrix& query, const TokenMatrix& doc) {
    check_pair(query, doc);
    double total = 0.0;
    for (std::size_t l = 0; l < query.rows(); ++l) {
        double best = dot(query.row(l), doc.row(0));
        for (std::size_t j = 1; j < doc.rows(); ++j) best = std::max(best, dot(query.row(l), doc.row(j)));
        total += best;
    }
    return total;
}

MaxSimGrad maxsim_backward(const TokenMatrix& query, const TokenMatrix& doc, double upstream) {
    const auto best = maxsim_argmax(query, doc);
    MaxSimGrad g{TokenMatrix(query.rows(), query.dim()), TokenMatrix(doc.rows(), doc.dim())};
    for (std::size_t l = 0; l < query.rows(); ++l) {
        auto q = query.row(l);
        auto d = doc.row(best[l]);
        auto gq = g.query.row(l);
        auto gd = g.doc.row(best[l]);
        for (std::size_t c = 0; c < query.dim(); ++c) {
            gq[c] = upstream * d[c];
            gd[c] += upstream * q[c];
        }
    }
    return g;
}

RankedList::RankedList(std::vector<RankedItem> entries) : entries_(std::move(entries)) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        require(seen.insert(entries_[i].id).second, ErrorKind::Usage, "duplicate id in ranking: " + entries_[i].id);
        if (i > 0)
            require(entries_[i].score <= entries_[i - 1].score, ErrorKind::Usage,
                    "ranking scores must be non-increasing");
    }
}

RankedList RankedList::from_scores(std::vector<RankedItem> items) {
    std::sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return RankedList(std::move(items));
}

double ndcg_at_k(const RankedList& ranking, const std::set<std::string>& relevant, std::size_t k) {
    require(k >= 1, ErrorKind::Usage, "ndcg k must be >= 1");
    if (relevant.empty()) return 0.0;
    double dcg = 0.0;
    const auto& entries = ranking.entries();
    for (std::size_t i = 0; i < std::min(k, entries.size()); ++i)
        if (relevant.contains(entries[i].id)) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, relevant.size()); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

std::string to_jsonl_line(const TokenRecord& rec) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["tokens"] = rec.tokens.to_rows();
    return j.dump();
}

TokenRecord token_record_from_jsonl_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
        return TokenRecord{j.at("id").get<std::string>(),
                           TokenMatrix::from_rows(j.at("tokens").get<std::vector<std::vector<double>>>())};
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("bad token record: ") + e.what());
    }
}

}  // namespace evo::scoring
