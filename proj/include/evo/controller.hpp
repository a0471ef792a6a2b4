#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evo/curriculum.hpp"

namespace evo::control {

using curriculum::ActionId;
using curriculum::ActionSpace;
using curriculum::ControllerState;
using curriculum::Decision;
using curriculum::StateReport;

inline constexpr std::string_view kDefaultApiKeyEnv = "EVO_LLM_API_KEY";

struct LlmEndpointConfig {
    std::string url;
    std::string model_name;
    std::string api_key_env_var{kDefaultApiKeyEnv};
    double timeout_seconds = 30.0;
    int max_retries = 2;

    void validate() const;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;

    /// Chat-completion body: {"model", "messages": [{"role","content"}], "temperature"}.
    std::string to_json() const;
};

struct ChatReply {
    std::string text;
    std::optional<long> prompt_tokens;
    std::optional<long> completion_tokens;
};

/// Synchronous chat-completion call. Throws Error(Transport) on I/O failure.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual ChatReply complete(const ChatRequest& request) = 0;
};

/// POSTs the request to LlmEndpointConfig::url with a bearer token read
/// from the configured environment variable (if set).
class HttpChatTransport final : public ChatTransport {
public:
    explicit HttpChatTransport(LlmEndpointConfig config);
    ChatReply complete(const ChatRequest& request) override;

    /// Extracts choices[0].message.content and usage counts. Throws Transport.
    static ChatReply parse_response_body(const std::string& body);

private:
    LlmEndpointConfig config_;
};

/// Replays canned responses in order; throws Transport once exhausted.
class ScriptedTransport final : public ChatTransport {
public:
    explicit ScriptedTransport(std::vector<std::string> responses) : responses_(std::move(responses)) {}

    /// Responses are separated by lines consisting of "---". A file without
    /// separators holds one response per non-empty line.
    static std::vector<std::string> parse_script(std::string_view text);
    static ScriptedTransport from_file(const std::filesystem::path& path);

    ChatReply complete(const ChatRequest& request) override;

    std::size_t consumed() const noexcept { return next_; }
    const std::vector<ChatRequest>& requests() const noexcept { return seen_; }

private:
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
    std::vector<ChatRequest> seen_;
};

/// Rules of the three-phase protocol as given to the controller model.
std::string_view default_protocol_text();

/// Builds the report for a review closing the window `window_losses`
/// (one total loss per step since the current action was adopted). The
/// review step is state.step + window_losses.size(). Throws Usage if empty.
StateReport summarize_state(const ControllerState& state, std::span<const double> window_losses,
                            const ActionSpace& space);

/// State block sent as the user message.
std::string render_state_report(const StateReport& report, const ActionSpace& space);

/// Full prompt text: protocol rules followed by the state block.
std::string render_prompt(const StateReport& report, const ActionSpace& space, std::string_view protocol_text);

/// Letter inside the last <answer>...</answer> span. Throws Parse.
ActionId parse_decision(std::string_view response, const ActionSpace& space);

struct LlmEndpoint {
    LlmEndpointConfig config;
    std::shared_ptr<ChatTransport> transport;
    std::string protocol_text{default_protocol_text()};
};

/// LLM decision with retries, falling back to the rule oracle. Never throws
/// for transport or parse problems; the result is always inside `space`.
Decision decide_with_fallback(const ControllerState& state, const StateReport& report, const ActionSpace& space,
                              const std::optional<LlmEndpoint>& endpoint);

}  // namespace evo::control
