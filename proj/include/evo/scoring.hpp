#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace evo::scoring {

/// L x d block of per-token embedding rows, stored row-major.
class TokenMatrix {
public:
    TokenMatrix() = default;
    TokenMatrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

    /// Builds from nested rows. Throws Structural on ragged or empty input.
    static TokenMatrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return rows_ == 0; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

    double& at(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }

    std::vector<std::vector<double>> to_rows() const;

    /// Appends one row; its length must equal dim() (any length if empty).
    void push_row(std::span<const double> row);

    bool operator==(const TokenMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

/// Scales every row to unit length. All-zero rows pass through unchanged.
TokenMatrix l2_normalize(const TokenMatrix& m);

/// Late-interaction score: sum over query rows of the best dot product
/// against any document row.
double maxsim(const TokenMatrix& query, const TokenMatrix& doc);

/// Index of the best-matching doc row for each query row. Ties go to the
/// lowest doc index.
std::vector<std::size_t> maxsim_argmax(const TokenMatrix& query, const TokenMatrix& doc);

struct MaxSimGrad {
    TokenMatrix query;
    TokenMatrix doc;
};

/// Subgradient of maxsim, routed through each query row's argmax doc row
/// and scaled by `upstream`.
MaxSimGrad maxsim_backward(const TokenMatrix& query, const TokenMatrix& doc, double upstream);

struct RankedItem {
    std::string id;
    double score = 0.0;
};

/// Ordered (id, score) list with non-increasing scores and unique ids.
class RankedList {
public:
    RankedList() = default;
    /// Validates ordering and uniqueness; throws Usage otherwise.
    explicit RankedList(std::vector<RankedItem> entries);

    /// Sorts by score descending, ties broken by ascending id.
    static RankedList from_scores(std::vector<RankedItem> items);

    const std::vector<RankedItem>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::vector<RankedItem> entries_;
};

/// Binary-gain nDCG truncated at rank k. Zero when `relevant` is empty.
double ndcg_at_k(const RankedList& ranking, const std::set<std::string>& relevant, std::size_t k);

struct TokenRecord {
    std::string id;
    TokenMatrix tokens;
};

/// One JSON Lines record per item: {"id": str, "tokens": [[f,...],...]}.
std::string to_jsonl_line(const TokenRecord& rec);
TokenRecord token_record_from_jsonl_line(const std::string& line);

}  // namespace evo::scoring
