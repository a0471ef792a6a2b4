#include "evo/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>

#include <fmt/format.h>

#include "evo/errors.hpp"

namespace evo::cli {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v) {
    double out = 0.0;
    const std::string t = trim(v);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    require(ec == std::errc() && p == t.data() + t.size() && !t.empty(), ErrorKind::Usage,
            "expected a number, got '" + v + "'");
    return out;
}

template <class T>
T to_integer(const std::string& v) {
    T out{};
    const std::string t = trim(v);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    require(ec == std::errc() && p == t.data() + t.size() && !t.empty(), ErrorKind::Usage,
            "expected an integer, got '" + v + "'");
    return out;
}

curriculum::ActionId to_action(const std::string& v) {
    const std::string t = trim(v);
    require(t.size() == 1 && std::isalpha(static_cast<unsigned char>(t[0])), ErrorKind::Usage,
            "expected an action letter, got '" + v + "'");
    return static_cast<curriculum::ActionId>(std::toupper(static_cast<unsigned char>(t[0])) - 'A');
}

std::vector<ConfigKey> build_keys() {
    std::vector<ConfigKey> k;
    auto add = [&](std::string sec, std::string key, std::string def, std::string help,
                   std::function<void(RunConfig&, const std::string&)> set) {
        k.push_back({std::move(sec), std::move(key), std::move(def), std::move(help), std::move(set)});
    };
    add("loss", "tau", "0.02", "margin loss temperature", [](RunConfig& c, const std::string& v) {
        c.train.loss.tau = to_double(v);
    });
    add("loss", "alpha", "1.0", "weight of the image-anchored terms",
        [](RunConfig& c, const std::string& v) { c.train.loss.alpha = to_double(v); });
    add("loss", "beta", "1.0", "weight of the augmented-view terms",
        [](RunConfig& c, const std::string& v) { c.train.loss.beta = to_double(v); });
    add("loss", "K", "2", "hard negatives per anchor",
        [](RunConfig& c, const std::string& v) { c.train.loss.k = to_integer<std::size_t>(v); });

    add("curriculum", "M", "16", "number of difficulty intervals",
        [](RunConfig& c, const std::string& v) { c.m = to_integer<std::size_t>(v); });
    add("curriculum", "exploration_steps", "60", "length of the exploration phase",
        [](RunConfig& c, const std::string& v) { c.train.phases.exploration_steps = to_integer<std::int64_t>(v); });
    add("curriculum", "exploration_review_every", "2", "steps between exploration reviews",
        [](RunConfig& c, const std::string& v) {
            c.train.phases.exploration_review_every = to_integer<std::int64_t>(v);
        });
    add("curriculum", "transition_steps", "200", "length of the transition phase",
        [](RunConfig& c, const std::string& v) { c.train.phases.transition_steps = to_integer<std::int64_t>(v); });
    add("curriculum", "lockin_review_every", "200", "steps between lock-in reviews",
        [](RunConfig& c, const std::string& v) { c.train.phases.lockin_review_every = to_integer<std::int64_t>(v); });
    add("curriculum", "initial_action", "A", "action used before the first review",
        [](RunConfig& c, const std::string& v) { c.train.initial_action = to_action(v); });
    add("curriculum", "intervals", "", "override table, e.g. 0.70-0.85:low-signal;0.75-0.92:effective-learning",
        [](RunConfig& c, const std::string& v) { c.intervals = trim(v); });

    add("controller", "mode", "oracle", "oracle | llm | mock | fixed-window | linear",
        [](RunConfig& c, const std::string& v) {
            const auto m = sim::mode_from_name(trim(v));
            require(m.has_value(), ErrorKind::Usage, "unknown controller mode '" + v + "'");
            c.train.mode = *m;
        });
    add("controller", "url", "", "chat-completions endpoint URL",
        [](RunConfig& c, const std::string& v) { c.endpoint.url = trim(v); });
    add("controller", "model", "", "model name sent to the endpoint",
        [](RunConfig& c, const std::string& v) { c.endpoint.model_name = trim(v); });
    add("controller", "api_key_env", std::string(control::kDefaultApiKeyEnv), "environment variable holding the API key",
        [](RunConfig& c, const std::string& v) { c.endpoint.api_key_env_var = trim(v); });
    add("controller", "timeout_seconds", "30", "per-request timeout",
        [](RunConfig& c, const std::string& v) { c.endpoint.timeout_seconds = to_double(v); });
    add("controller", "max_retries", "2", "retries before falling back to the oracle",
        [](RunConfig& c, const std::string& v) { c.endpoint.max_retries = to_integer<int>(v); });
    add("controller", "mock_script", "", "scripted controller responses (mock mode)",
        [](RunConfig& c, const std::string& v) { c.mock_script = trim(v); });
    add("controller", "fixed_low", "0.80", "lower ratio bound in fixed-window mode",
        [](RunConfig& c, const std::string& v) { c.train.fixed_low = to_double(v); });
    add("controller", "fixed_high", "0.98", "upper ratio bound in fixed-window mode",
        [](RunConfig& c, const std::string& v) { c.train.fixed_high = to_double(v); });

    add("data", "dir", "data", "dataset directory",
        [](RunConfig& c, const std::string& v) { c.data_dir = trim(v); });
    add("data", "out_dir", "out", "directory for checkpoints, pools and logs",
        [](RunConfig& c, const std::string& v) { c.out_dir = trim(v); });
    add("data", "checkpoint", "", "checkpoint path (default <out_dir>/warmup.ckpt)",
        [](RunConfig& c, const std::string& v) { c.checkpoint = trim(v); });
    add("data", "pools", "", "candidate pool path (default <out_dir>/pools.jsonl)",
        [](RunConfig& c, const std::string& v) { c.pools = trim(v); });
    add("data", "seed", "7", "dataset generation seed",
        [](RunConfig& c, const std::string& v) { c.data_seed = to_integer<std::uint32_t>(v); });
    add("data", "num_docs", "200", "corpus size",
        [](RunConfig& c, const std::string& v) { c.data.num_docs = to_integer<std::size_t>(v); });
    add("data", "min_tokens", "4", "fewest tokens per document",
        [](RunConfig& c, const std::string& v) { c.data.min_tokens = to_integer<std::size_t>(v); });
    add("data", "max_tokens", "8", "most tokens per document",
        [](RunConfig& c, const std::string& v) { c.data.max_tokens = to_integer<std::size_t>(v); });
    add("data", "d_in", "12", "raw token dimension",
        [](RunConfig& c, const std::string& v) { c.data.d_in = to_integer<std::size_t>(v); });
    add("data", "topics", "8", "latent topics",
        [](RunConfig& c, const std::string& v) { c.data.num_topics = to_integer<std::size_t>(v); });
    add("data", "noise", "0.6", "query token noise scale",
        [](RunConfig& c, const std::string& v) { c.data.noise = to_double(v); });
    add("data", "distractor_rate", "0.35", "fraction of near-duplicate documents",
        [](RunConfig& c, const std::string& v) { c.data.distractor_rate = to_double(v); });
    add("data", "heldout_fraction", "0.2", "share of queries held out for evaluation",
        [](RunConfig& c, const std::string& v) { c.data.heldout_fraction = to_double(v); });

    add("train", "seed", "7", "training seed",
        [](RunConfig& c, const std::string& v) { c.train.seed = to_integer<std::uint32_t>(v); });
    add("train", "lr", fmt::format("{}", sim::TrainConfig{}.lr), "curriculum learning rate",
        [](RunConfig& c, const std::string& v) { c.train.lr = to_double(v); });
    add("train", "batch", "8", "pairs per step",
        [](RunConfig& c, const std::string& v) { c.train.batch_size = to_integer<std::size_t>(v); });
    add("train", "steps", "0", "curriculum steps (0: exploration + transition + one lock-in period)",
        [](RunConfig& c, const std::string& v) { c.train.steps = to_integer<std::int64_t>(v); });
    add("train", "d_out", "8", "encoder output dimension",
        [](RunConfig& c, const std::string& v) { c.train.d_out = to_integer<std::size_t>(v); });
    add("train", "warmup_tau", fmt::format("{}", sim::TrainConfig{}.warmup_tau), "InfoNCE temperature",
        [](RunConfig& c, const std::string& v) { c.train.warmup_tau = to_double(v); });
    add("train", "warmup_lr", fmt::format("{}", sim::TrainConfig{}.warmup_lr), "warm-up learning rate",
        [](RunConfig& c, const std::string& v) { c.train.warmup_lr = to_double(v); });
    add("train", "warmup_epochs", "1", "warm-up passes over the training split",
        [](RunConfig& c, const std::string& v) { c.train.warmup_epochs = to_integer<std::size_t>(v); });
    add("train", "pool_size", "0", "candidate pool size (0: min(200, corpus - 1))",
        [](RunConfig& c, const std::string& v) { c.train.pool_size = to_integer<std::size_t>(v); });
    add("train", "neg_queries", "2", "synthesized negative queries per pair",
        [](RunConfig& c, const std::string& v) { c.train.neg_queries = to_integer<std::size_t>(v); });
    add("train", "aug_noise", fmt::format("{}", sim::TrainConfig{}.aug_noise), "noise scale of augmented views",
        [](RunConfig& c, const std::string& v) { c.train.aug_noise = to_double(v); });
    add("train", "eval_every", "20", "steps between held-out evaluations (0: start and end only)",
        [](RunConfig& c, const std::string& v) { c.train.eval_every = to_integer<std::int64_t>(v); });
    add("train", "threads", "0", "mining threads (0: hardware count)",
        [](RunConfig& c, const std::string& v) { c.train.threads = to_integer<unsigned>(v); });
    return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = build_keys();
    return keys;
}

void apply_setting(RunConfig& cfg, std::string_view dotted_key, const std::string& value) {
    const auto dot = dotted_key.find('.');
    require(dot != std::string_view::npos, ErrorKind::Usage,
            "setting '" + std::string(dotted_key) + "' must look like section.key");
    const auto sec = dotted_key.substr(0, dot);
    const auto key = dotted_key.substr(dot + 1);
    for (const auto& k : config_keys()) {
        if (k.section == sec && k.key == key) {
            try {
                k.set(cfg, value);
            } catch (const Error& e) {
                fail(ErrorKind::Usage, fmt::format("{}.{}: {}", sec, key, e.what()));
            }
            return;
        }
    }
    fail(ErrorKind::Usage, "unknown config key '" + std::string(dotted_key) + "'");
}

RunConfig load_run_config(const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        fail(ErrorKind::Parse, e.what());
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        require(!body.empty() || body.data().empty(), ErrorKind::Usage,
                "key '" + section + "' appears outside a section");
        for (const auto& [key, value] : body) apply_setting(cfg, section + "." + key, value.data());
    }
    return cfg;
}

std::string describe_config_keys() {
    std::string out = "Config keys (INI sections; override with --set section.key=value):\n";
    std::string current;
    for (const auto& k : config_keys()) {
        if (k.section != current) {
            current = k.section;
            out += fmt::format("  [{}]\n", current);
        }
        out += fmt::format("    {:<26} default: {:<18} {}\n", k.key,
                           k.default_value.empty() ? "(empty)" : k.default_value, k.help);
    }
    return out;
}

curriculum::ActionSpace parse_interval_table(std::string_view text) {
    std::vector<curriculum::DifficultyInterval> rows;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find(';', pos), text.size());
        const std::string item = trim(text.substr(pos, end - pos));
        pos = end + 1;
        if (!item.empty()) {
            const auto colon = item.find(':');
            const auto dash = item.find('-');
            require(colon != std::string::npos && dash != std::string::npos && dash < colon, ErrorKind::Usage,
                    "interval '" + item + "' must look like low-high:zone");
            curriculum::DifficultyInterval iv;
            iv.action_id = rows.size();
            iv.low = to_double(item.substr(0, dash));
            iv.high = to_double(item.substr(dash + 1, colon - dash - 1));
            const auto zone = curriculum::zone_from_name(trim(item.substr(colon + 1)));
            require(zone.has_value(), ErrorKind::Usage, "unknown zone in '" + item + "'");
            iv.zone = *zone;
            rows.push_back(iv);
        }
        if (end == text.size()) break;
    }
    return curriculum::ActionSpace(std::move(rows));
}

curriculum::ActionSpace RunConfig::action_space() const {
    if (intervals.empty()) {
        require(m == 16, ErrorKind::Usage,
                fmt::format("M = {} needs an explicit [curriculum] intervals table", m));
        return curriculum::default_action_space();
    }
    auto space = parse_interval_table(intervals);
    require(space.size() == m, ErrorKind::Usage,
            fmt::format("intervals table has {} rows but M = {}", space.size(), m));
    return space;
}

}  // namespace evo::cli
