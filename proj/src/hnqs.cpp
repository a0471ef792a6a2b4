#include "evo/hnqs.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "evo/errors.hpp"
#include "evo/rng.hpp"

namespace evo::hnqs {

HnqsRecord::HnqsRecord(std::string query_id, std::string positive_question, std::vector<std::string> variants,
                       Generator generator)
    : query_id_(std::move(query_id)),
      positive_question_(std::move(positive_question)),
      variants_(std::move(variants)),
      generator_(generator) {
    require(variants_.size() == kVariantCount, ErrorKind::Format,
            fmt::format("HNQS record {} has {} variants, expected {}", query_id_, variants_.size(), kVariantCount));
    for (const auto& v : variants_) {
        require(!v.empty(), ErrorKind::Format, "HNQS record " + query_id_ + " has an empty variant");
        require(v != positive_question_, ErrorKind::Format,
                "HNQS record " + query_id_ + " repeats the positive question");
    }
}

std::string HnqsRecord::to_jsonl_line() const {
    nlohmann::json j;
    j["query_id"] = query_id_;
    j["positive_question"] = positive_question_;
    j["variants"] = variants_;
    j["generator"] = generator_ == Generator::Mock ? "mock" : "endpoint";
    return j.dump();
}

HnqsRecord HnqsRecord::from_jsonl_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        const auto gen = j.at("generator").get<std::string>();
        require(gen == "mock" || gen == "endpoint", ErrorKind::Parse, "unknown HNQS generator " + gen);
        return HnqsRecord(j.at("query_id").get<std::string>(), j.at("positive_question").get<std::string>(),
                          j.at("variants").get<std::vector<std::string>>(),
                          gen == "mock" ? Generator::Mock : Generator::Endpoint);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("bad HNQS record: ") + e.what());
    }
}

std::string render_hnqs_prompt(std::string_view question) {
    require(!question.empty(), ErrorKind::Usage, "HNQS question is empty");
    std::string out = "You are given the following question:\n";
    out += question;
    out += R"(

The image can answer this question.

Now, write 20 new questions that are:
- Related to the topic,
- Seem reasonable,
- But cannot be answered using the image.

These questions should require knowledge that is not in the image.

Do not rephrase the original.

Give exactly 20 new questions. Just list them:
Variant 1: ...
Variant 2: ...
Variant 3: ...
Variant 4: ...
Variant 5: ...
Variant 6: ...
...
)";
    return out;
}

std::vector<std::string> parse_variants(std::string_view response) {
    static const std::regex line_re(R"(^\s*Variant\s+(\d+)\s*:\s*(.*?)\s*$)");
    std::map<std::size_t, std::string> found;
    std::istringstream in{std::string(response)};
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) continue;
        const std::size_t idx = std::stoul(m[1].str());
        require(idx >= 1 && idx <= kVariantCount, ErrorKind::Format,
                fmt::format("line {}: variant index {} outside 1..{}", line_no, idx, kVariantCount));
        require(!m[2].str().empty(), ErrorKind::Format, fmt::format("line {}: variant {} is empty", line_no, idx));
        require(found.emplace(idx, m[2].str()).second, ErrorKind::Format,
                fmt::format("line {}: duplicate variant index {}", line_no, idx));
    }
    require(found.size() == kVariantCount, ErrorKind::Format,
            fmt::format("found {} variants, expected {}", found.size(), kVariantCount));
    std::vector<std::string> out;
    out.reserve(kVariantCount);
    for (auto& [_, text] : found) out.push_back(std::move(text));
    return out;
}

std::string format_variants(const std::vector<std::string>& variants) {
    std::string out;
    for (std::size_t i = 0; i < variants.size(); ++i) out += fmt::format("Variant {}: {}\n", i + 1, variants[i]);
    return out;
}

namespace {

// Each template keeps the topic of the original question but asks for
// information a single page would not contain.
constexpr std::string_view kTemplates[] = {
    "{} according to the previous edition of this document?",
    "{} in the year before this page was published?",
    "Who approved the figures behind: {}?",
    "How did the answer to \"{}\" change in the following quarter?",
    "{} for the regional subsidiary not shown here?",
    "What was the original budget estimate related to: {}?",
    "{} when measured with the competing methodology?",
    "Which external audit confirmed: {}?",
    "{} in the appendix that accompanies this report?",
    "What forecast did analysts make regarding: {}?",
    "{} for the follow-up study published later?",
    "Which department first proposed: {}?",
    "{} before the data were revised?",
    "How does the industry average compare for: {}?",
    "{} in the translated version of this document?",
    "What source was cited in the footnote omitted from: {}?",
    "{} under the alternative scenario discussed elsewhere?",
    "Who was responsible for collecting the data on: {}?",
    "{} in the five-year projection?",
    "What internal memo preceded: {}?",
    "{} for the pilot program that was cancelled?",
    "How was the question \"{}\" answered in the press release?",
    "{} according to the board meeting minutes?",
    "What would the value be if the survey excluded outliers for: {}?",
};

std::string stem_of(std::string_view question) {
    std::string s(question);
    while (!s.empty() && (s.back() == '?' || s.back() == ' ' || s.back() == '.')) s.pop_back();
    return s;
}

}  // namespace

std::vector<std::string> mock_generate(std::string_view question, std::uint32_t seed) {
    require(!question.empty(), ErrorKind::Usage, "HNQS question is empty");
    constexpr std::size_t n = std::size(kTemplates);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i < kVariantCount; ++i) std::swap(order[i], order[i + rng.below(static_cast<std::uint32_t>(n - i))]);

    const std::string stem = stem_of(question);
    std::vector<std::string> out;
    out.reserve(kVariantCount);
    for (std::size_t i = 0; i < kVariantCount; ++i)
        out.push_back(fmt::format(fmt::runtime(kTemplates[order[i]]), stem));
    return out;
}

}  // namespace evo::hnqs
