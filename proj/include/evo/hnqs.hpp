#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace evo::hnqs {

inline constexpr std::size_t kVariantCount = 20;

enum class Generator { Endpoint, Mock };

/// A positive question with exactly 20 synthesized negative questions.
class HnqsRecord {
public:
    /// Throws Format unless there are 20 non-empty variants, none equal to
    /// the positive question.
    HnqsRecord(std::string query_id, std::string positive_question, std::vector<std::string> variants,
               Generator generator);

    const std::string& query_id() const noexcept { return query_id_; }
    const std::string& positive_question() const noexcept { return positive_question_; }
    const std::vector<std::string>& variants() const noexcept { return variants_; }
    Generator generator() const noexcept { return generator_; }

    /// {"query_id", "positive_question", "variants": [20 str], "generator": "endpoint"|"mock"}
    std::string to_jsonl_line() const;
    static HnqsRecord from_jsonl_line(const std::string& line);

private:
    std::string query_id_;
    std::string positive_question_;
    std::vector<std::string> variants_;
    Generator generator_;
};

/// Negative-query generation prompt with the question substituted. Throws
/// Usage on an empty question.
std::string render_hnqs_prompt(std::string_view question);

/// Extracts "Variant <n>: <text>" lines for n = 1..20; other lines are
/// ignored. Throws Format on missing, duplicate or out-of-range indices and
/// on empty text.
std::vector<std::string> parse_variants(std::string_view response);

/// Formats variants as the "Variant n: text" block the generator returns.
std::string format_variants(const std::vector<std::string>& variants);

/// Deterministic template-based stand-in for the generator model.
std::vector<std::string> mock_generate(std::string_view question, std::uint32_t seed);

}  // namespace evo::hnqs
