#include <cstdlib>
#include <regex>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "evo/controller.hpp"
#include "evo/errors.hpp"

namespace evo::control {

HttpChatTransport::HttpChatTransport(LlmEndpointConfig config) : config_(std::move(config)) { config_.validate(); }

ChatReply HttpChatTransport::parse_response_body(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        ChatReply r;
        r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
            const auto& u = j["usage"];
            if (u.contains("prompt_tokens")) r.prompt_tokens = u["prompt_tokens"].get<long>();
            if (u.contains("completion_tokens")) r.completion_tokens = u["completion_tokens"].get<long>();
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Transport, std::string("unexpected chat-completion body: ") + e.what());
    }
}

ChatReply HttpChatTransport::complete(const ChatRequest& request) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    require(std::regex_match(config_.url, m, url_re), ErrorKind::Usage, "malformed endpoint url " + config_.url);
    const std::string origin = m[1].str();
    const std::string path = m[2].matched ? m[2].str() : "/";

    httplib::Client client(origin);
    const auto secs = static_cast<time_t>(config_.timeout_seconds);
    const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env_var.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    auto res = client.Post(path, headers, request.to_json(), "application/json");
    if (!res) fail(ErrorKind::Transport, "endpoint request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        fail(ErrorKind::Transport, fmt::format("endpoint returned HTTP {}", res->status));
    return parse_response_body(res->body);
}

}  // namespace evo::control
