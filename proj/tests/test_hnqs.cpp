#include <doctest.h>

#include <json.hpp>

#include "evo/hnqs.hpp"
#include "support.hpp"

using namespace evo;
using namespace evo::hnqs;

namespace {

std::vector<std::string> numbered(std::size_t n) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back("Question number " + std::to_string(i + 1) + "?");
    return v;
}

}  // namespace

TEST_SUITE("hnqs") {
    TEST_CASE("mock output round-trips through the variant format") {
        for (std::uint32_t seed : {0u, 7u, 1234u}) {
            const auto v = mock_generate("How many units were sold in 2021?", seed);
            REQUIRE(v.size() == kVariantCount);
            CHECK(parse_variants(format_variants(v)) == v);
        }
    }

    TEST_CASE("mock generator matches the reference draw") {
        const auto v = mock_generate("What does doc0003 report about topic 2?", 7);
        CHECK(format_variants(v) == testing::read_text(testing::golden_dir() / "mock_hnqs_seed7.txt"));
        CHECK(mock_generate("What does doc0003 report about topic 2?", 8) != v);
        CHECK_THROWS_KIND(mock_generate("", 7), ErrorKind::Usage);
    }

    TEST_CASE("parse_variants tolerates surrounding text and order") {
        std::string text = "Sure, here they are:\r\n\n";
        const auto v = numbered(20);
        for (std::size_t i = 20; i-- > 0;) text += "  Variant " + std::to_string(i + 1) + " :  " + v[i] + "  \r\n";
        text += "Hope this helps.\n";
        CHECK(parse_variants(text) == v);
    }

    TEST_CASE("malformed variant lists are rejected") {
        auto v = numbered(20);
        const std::string nineteen = format_variants(numbered(19));
        CHECK_THROWS_KIND(parse_variants(nineteen), ErrorKind::Format);

        std::string dup = format_variants(v);
        dup += "Variant 4: another fourth question?\n";
        CHECK_THROWS_KIND(parse_variants(dup), ErrorKind::Format);

        std::string out_of_range = format_variants(numbered(19)) + "Variant 21: extra?\n";
        CHECK_THROWS_KIND(parse_variants(out_of_range), ErrorKind::Format);

        std::string zero = format_variants(numbered(19)) + "Variant 0: extra?\n";
        CHECK_THROWS_KIND(parse_variants(zero), ErrorKind::Format);

        v[5] = "";
        CHECK_THROWS_KIND(parse_variants(format_variants(v)), ErrorKind::Format);
        CHECK_THROWS_KIND(parse_variants(""), ErrorKind::Format);
    }

    TEST_CASE("record construction enforces twenty variants") {
        CHECK_NOTHROW(HnqsRecord("q1", "Original?", numbered(20), Generator::Mock));
        CHECK_THROWS_KIND(HnqsRecord("q1", "Original?", numbered(19), Generator::Mock), ErrorKind::Format);
        CHECK_THROWS_KIND(HnqsRecord("q1", "Original?", numbered(21), Generator::Mock), ErrorKind::Format);
        auto v = numbered(20);
        v[3] = "Original?";
        CHECK_THROWS_KIND(HnqsRecord("q1", "Original?", v, Generator::Mock), ErrorKind::Format);
        v[3] = "";
        CHECK_THROWS_KIND(HnqsRecord("q1", "Original?", v, Generator::Endpoint), ErrorKind::Format);
    }

    TEST_CASE("record JSON line round-trip") {
        const HnqsRecord r("q0007", "What is \"X\"?", numbered(20), Generator::Endpoint);
        const auto line = r.to_jsonl_line();
        CHECK(line.find('\n') == std::string::npos);
        const auto j = nlohmann::json::parse(line);
        CHECK(j["query_id"] == "q0007");
        CHECK(j["positive_question"] == "What is \"X\"?");
        CHECK(j["variants"].size() == 20);
        CHECK(j["generator"] == "endpoint");
        const auto back = HnqsRecord::from_jsonl_line(line);
        CHECK(back.query_id() == r.query_id());
        CHECK(back.positive_question() == r.positive_question());
        CHECK(back.variants() == r.variants());
        CHECK(back.generator() == Generator::Endpoint);

        CHECK_THROWS_KIND(HnqsRecord::from_jsonl_line("{not json"), ErrorKind::Parse);
        auto bad = j;
        bad["generator"] = "human";
        CHECK_THROWS_KIND(HnqsRecord::from_jsonl_line(bad.dump()), ErrorKind::Parse);
        bad = j;
        bad["variants"].erase(0);
        CHECK_THROWS_KIND(HnqsRecord::from_jsonl_line(bad.dump()), ErrorKind::Format);
    }

    TEST_CASE("prompt substitutes the question") {
        const auto p = render_hnqs_prompt("What is the GDP of France in 2020?");
        CHECK(p.rfind("You are given the following question:\nWhat is the GDP of France in 2020?\n", 0) == 0);
        CHECK(p.find("write 20 new questions") != std::string::npos);
        CHECK(p.find("Variant 1: ...\n") != std::string::npos);
        CHECK(p.find("Variant 6: ...\n...\n") != std::string::npos);
        CHECK_THROWS_KIND(render_hnqs_prompt(""), ErrorKind::Usage);
    }
}
