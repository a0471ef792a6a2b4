#include "evo/controller.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "evo/errors.hpp"

namespace evo::control {

using curriculum::action_letter;
using curriculum::Phase;

void LlmEndpointConfig::validate() const {
    require(!url.empty(), ErrorKind::Usage, "controller endpoint url is empty");
    require(timeout_seconds > 0.0, ErrorKind::Usage, "controller timeout must be positive");
    require(max_retries >= 0, ErrorKind::Usage, "controller max_retries must be >= 0");
}

std::string ChatRequest::to_json() const {
    nlohmann::json j;
    j["model"] = model;
    j["temperature"] = temperature;
    j["messages"] = nlohmann::json::array();
    for (const auto& m : messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
    return j.dump();
}

std::vector<std::string> ScriptedTransport::parse_script(std::string_view text) {
    std::vector<std::string> lines;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    const bool separated = std::find(lines.begin(), lines.end(), "---") != lines.end();
    std::vector<std::string> out;
    if (!separated) {
        for (auto& l : lines)
            if (!l.empty()) out.push_back(l);
        return out;
    }
    std::string cur;
    bool any = false;
    for (const auto& l : lines) {
        if (l == "---") {
            out.push_back(cur);
            cur.clear();
            any = false;
            continue;
        }
        if (any) cur += '\n';
        cur += l;
        any = true;
    }
    if (any) out.push_back(cur);
    return out;
}

ScriptedTransport ScriptedTransport::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Data, "cannot open controller script " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ScriptedTransport(parse_script(ss.str()));
}

ChatReply ScriptedTransport::complete(const ChatRequest& request) {
    seen_.push_back(request);
    if (next_ >= responses_.size()) fail(ErrorKind::Transport, "controller script exhausted");
    return ChatReply{responses_[next_++], std::nullopt, std::nullopt};
}

std::string_view default_protocol_text() {
    return R"(You are the curriculum meta-controller for a contrastive retriever.
Each action selects a difficulty interval over the ratio between a hard
negative's similarity and its positive's similarity. Higher letters are
harder. Apply the rules of the current phase exactly.

EXPLORATION phase
1. If hard_negative_loss_mean > 1.2, choose max(current - 2, 0).
2. Otherwise, if hard_negative_loss_mean < 0.05 in this review and the
   previous review also had loss < 0.05, choose min(current + 3, last action).
3. Otherwise choose the lowest-indexed action greater than the current one
   that is not among the last 3 actions. If no such action exists, choose
   the lowest-indexed action that is not among the last 3 actions.

TRANSITION phase
1. Collect every action in the history, including the current action with
   this review's hard_negative_loss_mean, whose avg_loss lies in [0.3, 1.2].
2. Choose the collected action with the largest action id as the anchor.
3. If nothing qualifies this is a calibration failure: keep the current action.

LOCK-IN phase
L_start and L_end are the mean losses over the first and last 20% of the
review period.
1. Upgrade by one action if L_end < 0.3, or if (L_start - L_end) / L_start >= 0.5.
2. Otherwise downgrade by one action if (L_end - L_start) / L_start >= 0.3.
3. Otherwise keep the current action.
Never move outside the action table.

Think step by step inside <thinking>...</thinking>, then give exactly one
final choice as <answer>X</answer>, where X is an action letter from the table.)";
}

StateReport summarize_state(const ControllerState& state, std::span<const double> window_losses,
                            const ActionSpace& space) {
    require(!window_losses.empty(), ErrorKind::Usage, "review window has no losses");
    StateReport r;
    r.phase = state.phase;
    r.step = state.step + static_cast<std::int64_t>(window_losses.size());
    r.current_action = std::min(state.current_action, space.last());
    const auto& iv = space.at(r.current_action);
    r.current_low = iv.low;
    r.current_high = iv.high;
    r.hard_negative_loss_mean =
        std::accumulate(window_losses.begin(), window_losses.end(), 0.0) / static_cast<double>(window_losses.size());
    const auto trend = curriculum::compute_trend(window_losses);
    r.l_start = trend.l_start;
    r.l_end = trend.l_end;
    r.recent.push_back({state.step, state.current_action});
    for (auto it = state.history.rbegin();
         it != state.history.rend() && r.recent.size() < curriculum::ProtocolRules::kRecentWindow; ++it)
        r.recent.push_back({it->step, it->action});
    r.consecutive_low_loss_reviews = state.consecutive_low_loss_reviews;
    r.history = state.history;
    return r;
}

namespace {

std::string bound(double v) {
    std::string s = fmt::format("{}", v);
    auto dot = s.find('.');
    if (dot == std::string::npos) {
        s += ".00";
    } else if (s.size() - dot - 1 < 2) {
        s.append(2 - (s.size() - dot - 1), '0');
    }
    return s;
}

std::string upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::string render_state_report(const StateReport& r, const ActionSpace& space) {
    std::string out;
    auto line = [&out](std::string_view s) {
        out += s;
        out += '\n';
    };
    line(fmt::format("Current phase: {}", upper(curriculum::phase_name(r.phase))));
    line(fmt::format("Review step: {}", r.step));
    line(fmt::format("Current interval: [{}, {}]", bound(r.current_low), bound(r.current_high)));
    line(fmt::format("Current action: {}", action_letter(r.current_action)));
    line("Last 3 actions:");
    for (const auto& a : r.recent) line(fmt::format("  Step {}: {}", a.step, action_letter(a.action)));
    line(fmt::format("hard_negative_loss_mean = {}", r.hard_negative_loss_mean));
    line(fmt::format("L_start = {}", r.l_start));
    line(fmt::format("L_end = {}", r.l_end));
    line(fmt::format("Previous consecutive reviews with loss < 0.05: {}", r.consecutive_low_loss_reviews));
    line("History (completed windows):");
    if (r.history.empty()) line("  (none)");
    for (const auto& h : r.history)
        line(fmt::format("  Step {}: {} avg_loss = {}", h.step, action_letter(h.action), h.avg_loss));
    line(fmt::format("Action table ({} intervals):", space.size()));
    for (const auto& iv : space.intervals())
        line(fmt::format("{}: [{}, {}] {}", action_letter(iv.action_id), bound(iv.low), bound(iv.high),
                         curriculum::zone_name(iv.zone)));
    line(fmt::format("Reply with your reasoning and end with exactly one <answer>X</answer>, X in A..{}.",
                     action_letter(space.last())));
    return out;
}

std::string render_prompt(const StateReport& report, const ActionSpace& space, std::string_view protocol_text) {
    std::string out(protocol_text);
    out += "\n\n";
    out += render_state_report(report, space);
    return out;
}

ActionId parse_decision(std::string_view response, const ActionSpace& space) {
    constexpr std::string_view open = "<answer>";
    constexpr std::string_view close = "</answer>";
    const auto start = response.rfind(open);
    require(start != std::string_view::npos, ErrorKind::Parse, "controller response has no <answer> tag");
    const auto body_start = start + open.size();
    const auto end = response.find(close, body_start);
    require(end != std::string_view::npos, ErrorKind::Parse, "controller response has an unterminated <answer> tag");
    std::string_view body = response.substr(body_start, end - body_start);
    while (!body.empty() && std::isspace(static_cast<unsigned char>(body.front()))) body.remove_prefix(1);
    while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.remove_suffix(1);
    require(body.size() == 1, ErrorKind::Parse, fmt::format("controller answer '{}' is not a single letter", body));
    const auto id = space.from_letter(body.front());
    require(id.has_value(), ErrorKind::Parse,
            fmt::format("controller answer '{}' outside A..{}", body, action_letter(space.last())));
    return *id;
}

Decision decide_with_fallback(const ControllerState& state, const StateReport& report, const ActionSpace& space,
                              const std::optional<LlmEndpoint>& endpoint) {
    Decision oracle = curriculum::oracle_decide(state, report, space);
    if (!endpoint || !endpoint->transport) return oracle;

    ChatRequest req;
    req.model = endpoint->config.model_name;
    req.temperature = 0.0;
    req.messages = {{"system", endpoint->protocol_text}, {"user", render_state_report(report, space)}};

    const int attempts = 1 + std::max(0, endpoint->config.max_retries);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        try {
            const ChatReply reply = endpoint->transport->complete(req);
            if (reply.prompt_tokens || reply.completion_tokens)
                spdlog::info("controller call at step {}: prompt_tokens={} completion_tokens={}", report.step,
                             reply.prompt_tokens.value_or(-1), reply.completion_tokens.value_or(-1));
            Decision d;
            d.next_action = parse_decision(reply.text, space);
            d.source = curriculum::DecisionSource::LLM;
            d.rationale = reply.text;
            d.calibration_failure = oracle.calibration_failure;
            return d;
        } catch (const Error& e) {
            spdlog::warn("controller attempt {}/{} at step {} failed: {}", attempt, attempts, report.step, e.what());
        } catch (const std::exception& e) {
            spdlog::warn("controller attempt {}/{} at step {} failed: {}", attempt, attempts, report.step, e.what());
        }
    }
    oracle.rationale = "controller unavailable, oracle fallback: " + oracle.rationale;
    return oracle;
}

}  // namespace evo::control
