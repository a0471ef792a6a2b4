#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "evo/controller.hpp"
#include "support.hpp"

using namespace evo;
using namespace evo::control;
using namespace evo::curriculum;

namespace {

constexpr ActionId B = 1, C = 2, D = 3, F = 5;

// Reads the rendered state block and applies the protocol from scratch.
class RuleFollowingModel final : public ChatTransport {
public:
    ChatReply complete(const ChatRequest& request) override {
        const std::string& prompt = request.messages.back().content;
        std::istringstream in(prompt);
        std::string phase;
        char current = 'A';
        double loss = 0, l_start = 0, l_end = 0;
        int low_streak = 0;
        std::vector<char> recent;
        std::vector<std::pair<char, double>> history;
        int table = 0;
        enum { None, Recent, History } section = None;
        const std::regex recent_re(R"(^  Step -?\d+: ([A-Z])$)");
        const std::regex hist_re(R"(^  Step -?\d+: ([A-Z]) avg_loss = (\S+)$)");
        std::smatch m;
        for (std::string line; std::getline(in, line);) {
            if (line.rfind("Current phase: ", 0) == 0) phase = line.substr(15);
            else if (line.rfind("Current action: ", 0) == 0) current = line[16];
            else if (line == "Last 3 actions:") section = Recent;
            else if (line.rfind("History", 0) == 0) section = History;
            else if (line.rfind("hard_negative_loss_mean = ", 0) == 0) loss = std::stod(line.substr(26)), section = None;
            else if (line.rfind("L_start = ", 0) == 0) l_start = std::stod(line.substr(10));
            else if (line.rfind("L_end = ", 0) == 0) l_end = std::stod(line.substr(8));
            else if (line.rfind("Previous consecutive reviews with loss < 0.05: ", 0) == 0)
                low_streak = std::stoi(line.substr(47));
            else if (line.rfind("Action table (", 0) == 0) table = std::stoi(line.substr(14)), section = None;
            else if (section == Recent && std::regex_match(line, m, recent_re)) recent.push_back(m[1].str()[0]);
            else if (section == History && std::regex_match(line, m, hist_re))
                history.emplace_back(m[1].str()[0], std::stod(m[2].str()));
        }
        const int cur = current - 'A', last = table - 1;
        int next = cur;
        if (phase == "EXPLORATION") {
            auto used = [&](int a) { return std::find(recent.begin(), recent.end(), 'A' + a) != recent.end(); };
            if (loss > 1.2) {
                next = std::max(cur - 2, 0);
            } else if (loss < 0.05 && low_streak >= 1) {
                next = std::min(cur + 3, last);
            } else {
                next = -1;
                for (int a = cur + 1; a <= last && next < 0; ++a)
                    if (!used(a)) next = a;
                for (int a = 0; a <= last && next < 0; ++a)
                    if (!used(a)) next = a;
                if (next < 0) next = cur;
            }
        } else if (phase == "TRANSITION") {
            history.emplace_back(current, loss);
            int best = -1;
            for (const auto& [a, l] : history)
                if (l >= 0.3 && l <= 1.2) best = std::max(best, a - 'A');
            next = best >= 0 ? best : cur;
        } else {
            if (l_end < 0.3 || (l_start > 0 && (l_start - l_end) / l_start >= 0.5)) next = std::min(cur + 1, last);
            else if (l_start > 0 && (l_end - l_start) / l_start >= 0.3) next = std::max(cur - 1, 0);
        }
        return {"Following the protocol.\n<answer>" + std::string(1, static_cast<char>('A' + next)) + "</answer>",
                120, 20};
    }
};

LlmEndpoint endpoint_with(std::shared_ptr<ChatTransport> t, int retries = 2) {
    LlmEndpoint ep;
    ep.config.url = "http://unused";
    ep.config.max_retries = retries;
    ep.transport = std::move(t);
    return ep;
}

ControllerState deliberation_state() {
    ControllerState s;
    s.phase = Phase::Exploration;
    s.current_action = B;
    s.step = 34;
    s.history = {{30, F, 0.61}, {32, D, 0.52}};
    return s;
}

}  // namespace

TEST_SUITE("controller") {
    TEST_CASE("summarize_state builds the review report") {
        const auto s = deliberation_state();
        const std::vector<double> window{0.40, 0.3966};
        const auto r = summarize_state(s, window, default_action_space());
        CHECK(r.step == 36);
        CHECK(r.current_action == B);
        CHECK(r.current_low == 0.70);
        CHECK(r.current_high == 0.90);
        CHECK(r.hard_negative_loss_mean == doctest::Approx(0.3983));
        CHECK(r.l_start == 0.40);
        CHECK(r.l_end == 0.3966);
        CHECK(r.recent_actions() == std::vector<ActionId>{B, D, F});
        CHECK(r.recent[0].step == 34);
        CHECK_THROWS_KIND(summarize_state(s, std::vector<double>{}, default_action_space()), ErrorKind::Usage);
    }

    TEST_CASE("rendered report carries the state") {
        const auto s = deliberation_state();
        const std::vector<double> window{0.3983};
        const auto text = render_state_report(summarize_state(s, window, default_action_space()), default_action_space());
        CHECK(text.find("Current phase: EXPLORATION\n") != std::string::npos);
        CHECK(text.find("Current interval: [0.70, 0.90]\n") != std::string::npos);
        CHECK(text.find("Current action: B\n") != std::string::npos);
        CHECK(text.find("  Step 34: B\n  Step 32: D\n  Step 30: F\n") != std::string::npos);
        CHECK(text.find("hard_negative_loss_mean = 0.3983\n") != std::string::npos);
        CHECK(text.find("M: [0.90, 0.985] high-risk\n") != std::string::npos);
        CHECK(text.find("P: [0.95, 0.995] high-risk\n") != std::string::npos);
        CHECK(text.find("<answer>X</answer>") != std::string::npos);
        const auto prompt = render_prompt(summarize_state(s, window, default_action_space()), default_action_space(),
                                          default_protocol_text());
        CHECK(prompt.rfind(std::string(default_protocol_text()), 0) == 0);
    }

    TEST_CASE("parse_decision") {
        const auto space = default_action_space();
        CHECK(parse_decision("<answer>C</answer>", space) == C);
        CHECK(parse_decision("think <answer>A</answer> more <answer> d </answer>", space) == D);
        CHECK(parse_decision("<answer>p</answer>", space) == 15);
        CHECK_THROWS_KIND(parse_decision("C", space), ErrorKind::Parse);
        CHECK_THROWS_KIND(parse_decision("<answer>Q</answer>", space), ErrorKind::Parse);
        CHECK_THROWS_KIND(parse_decision("<answer>CD</answer>", space), ErrorKind::Parse);
        CHECK_THROWS_KIND(parse_decision("<answer>C", space), ErrorKind::Parse);
    }

    TEST_CASE("script parsing") {
        CHECK(ScriptedTransport::parse_script("<answer>A</answer>\n\n<answer>B</answer>\n") ==
              std::vector<std::string>{"<answer>A</answer>", "<answer>B</answer>"});
        CHECK(ScriptedTransport::parse_script("line one\nline two\n---\n<answer>C</answer>\n") ==
              std::vector<std::string>{"line one\nline two", "<answer>C</answer>"});
        ScriptedTransport t({"x"});
        CHECK(t.complete({}).text == "x");
        CHECK_THROWS_KIND(t.complete({}), ErrorKind::Transport);
        CHECK(t.consumed() == 1);
        CHECK(t.requests().size() == 2);
    }

    TEST_CASE("LLM path returns the parsed answer") {
        const auto s = deliberation_state();
        const std::vector<double> window{0.3983};
        const auto space = default_action_space();
        const auto r = summarize_state(s, window, space);
        auto script = std::make_shared<ScriptedTransport>(
            std::vector<std::string>{"B was used last; D and F are recent.\n<answer>C</answer>"});
        const auto d = decide_with_fallback(s, r, space, endpoint_with(script));
        CHECK(d.next_action == C);
        CHECK(d.source == DecisionSource::LLM);
        REQUIRE(script->requests().size() == 1);
        const auto& req = script->requests()[0];
        CHECK(req.temperature == 0.0);
        REQUIRE(req.messages.size() == 2);
        CHECK(req.messages[0].role == "system");
        CHECK(req.messages[1].content == render_state_report(r, space));
    }

    TEST_CASE("retries then falls back to the oracle") {
        const auto s = deliberation_state();
        const std::vector<double> window{0.3983};
        const auto space = default_action_space();
        const auto r = summarize_state(s, window, space);

        auto garbage = std::make_shared<ScriptedTransport>(std::vector<std::string>{"no", "still no", "<answer>Z</answer>"});
        auto d = decide_with_fallback(s, r, space, endpoint_with(garbage));
        CHECK(garbage->consumed() == 3);
        CHECK(d.source == DecisionSource::Oracle);
        CHECK(d.next_action == C);

        auto second = std::make_shared<ScriptedTransport>(std::vector<std::string>{"bad", "<answer>E</answer>"});
        d = decide_with_fallback(s, r, space, endpoint_with(second, 1));
        CHECK(d.source == DecisionSource::LLM);
        CHECK(d.next_action == 4);

        auto none = std::make_shared<ScriptedTransport>(std::vector<std::string>{});
        d = decide_with_fallback(s, r, space, endpoint_with(none, 0));
        CHECK(none->requests().size() == 1);
        CHECK(d.source == DecisionSource::Oracle);
        CHECK(decide_with_fallback(s, r, space, std::nullopt).next_action == C);
    }

    TEST_CASE("calibration failure comes from the rules even on the LLM path") {
        ControllerState s;
        s.phase = Phase::Transition;
        s.current_action = 4;
        s.step = 58;
        s.history = {{56, 2, 2.0}};
        const std::vector<double> window{3.0};
        const auto r = summarize_state(s, window, default_action_space());
        auto t = std::make_shared<ScriptedTransport>(std::vector<std::string>{"<answer>C</answer>"});
        const auto d = decide_with_fallback(s, r, default_action_space(), endpoint_with(t));
        CHECK(d.calibration_failure);
        CHECK(d.next_action == C);
    }

    TEST_CASE("prompt is sufficient for a rule-following model") {
        Rng rng(23);
        const auto space = default_action_space();
        auto model = std::make_shared<RuleFollowingModel>();
        const auto ep = endpoint_with(model);
        for (int t = 0; t < 2000; ++t) {
            ControllerState s;
            s.phase = static_cast<Phase>(rng.below(3));
            s.consecutive_low_loss_reviews = static_cast<int>(rng.below(3));
            std::int64_t step = 0;
            for (std::uint32_t h = 0, n = rng.below(5); h < n; ++h) {
                s.history.push_back({step, rng.below(16), rng.uniform(0, 1.6)});
                step += 1 + rng.below(3);
            }
            s.step = step;
            s.current_action = rng.below(16);
            std::vector<double> window;
            for (std::uint32_t i = 0, n = 1 + rng.below(12); i < n; ++i)
                window.push_back(rng.below(5) == 0 ? rng.uniform(0, 0.06) : rng.uniform(0, 1.6));
            const auto r = summarize_state(s, window, space);
            const auto llm = decide_with_fallback(s, r, space, ep);
            const auto rules = oracle_decide(s, r, space);
            CHECK(llm.source == DecisionSource::LLM);
            CHECK(llm.next_action == rules.next_action);
        }
    }

    TEST_CASE("endpoint config validation") {
        LlmEndpointConfig c;
        CHECK_THROWS_KIND(c.validate(), ErrorKind::Usage);
        c.url = "http://localhost:1";
        CHECK_NOTHROW(c.validate());
        c.timeout_seconds = 0;
        CHECK_THROWS_KIND(c.validate(), ErrorKind::Usage);
        c.timeout_seconds = 1;
        c.max_retries = -1;
        CHECK_THROWS_KIND(c.validate(), ErrorKind::Usage);
    }

    TEST_CASE("chat request and response bodies") {
        ChatRequest req{"m1", {{"system", "rules"}, {"user", "state"}}, 0.0};
        const auto j = nlohmann::json::parse(req.to_json());
        CHECK(j["model"] == "m1");
        CHECK(j["temperature"] == 0.0);
        CHECK(j["messages"][1]["content"] == "state");
        const auto r = HttpChatTransport::parse_response_body(
            R"({"choices":[{"message":{"role":"assistant","content":"<answer>B</answer>"}}],"usage":{"prompt_tokens":10,"completion_tokens":3}})");
        CHECK(r.text == "<answer>B</answer>");
        CHECK(r.prompt_tokens == 10L);
        CHECK(r.completion_tokens == 3L);
        CHECK_THROWS_KIND(HttpChatTransport::parse_response_body("{}"), ErrorKind::Transport);
    }

    TEST_CASE("HTTP transport against a local server") {
        httplib::Server server;
        std::string seen_auth, seen_body;
        std::atomic<int> calls{0};
        server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            seen_auth = req.get_header_value("Authorization");
            seen_body = req.body;
            if (calls++ == 0) {
                res.status = 500;
                return;
            }
            res.set_content(R"({"choices":[{"message":{"content":"<answer>C</answer>"}}],"usage":{"prompt_tokens":5,"completion_tokens":2}})",
                            "application/json");
        });
        const int port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        std::thread th([&] { server.listen_after_bind(); });
        server.wait_until_ready();

        ::setenv("EVO_TEST_KEY", "secret-token", 1);
        LlmEndpoint ep;
        ep.config.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
        ep.config.model_name = "controller";
        ep.config.api_key_env_var = "EVO_TEST_KEY";
        ep.config.timeout_seconds = 5;
        ep.config.max_retries = 1;
        ep.transport = std::make_shared<HttpChatTransport>(ep.config);

        const auto s = deliberation_state();
        const std::vector<double> window{0.3983};
        const auto r = summarize_state(s, window, default_action_space());
        const auto d = decide_with_fallback(s, r, default_action_space(), ep);
        server.stop();
        th.join();

        CHECK(calls == 2);
        CHECK(d.source == DecisionSource::LLM);
        CHECK(d.next_action == C);
        CHECK(seen_auth == "Bearer secret-token");
        CHECK(nlohmann::json::parse(seen_body)["model"] == "controller");

        LlmEndpointConfig dead;
        dead.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
        dead.timeout_seconds = 1;
        HttpChatTransport t(dead);
        CHECK_THROWS_KIND(t.complete(ChatRequest{}), ErrorKind::Transport);
        LlmEndpointConfig bad;
        bad.url = "not a url";
        HttpChatTransport tb(bad);
        CHECK_THROWS_KIND(tb.complete(ChatRequest{}), ErrorKind::Usage);
    }
}
