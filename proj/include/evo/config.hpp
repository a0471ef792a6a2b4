#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "evo/dataset.hpp"
#include "evo/training.hpp"

namespace evo::cli {

struct RunConfig {
    sim::DatasetConfig data;
    std::uint32_t data_seed = 7;
    std::filesystem::path data_dir = "data";
    std::filesystem::path out_dir = "out";
    std::filesystem::path checkpoint;  // empty: <out_dir>/warmup.ckpt
    std::filesystem::path pools;       // empty: <out_dir>/pools.jsonl
    std::size_t m = 16;
    std::string intervals;  // "low-high:zone;..." override of the action table
    sim::TrainConfig train;
    control::LlmEndpointConfig endpoint;
    std::filesystem::path mock_script;

    /// Resolves the action table from `m` and `intervals`. Throws Usage.
    curriculum::ActionSpace action_space() const;
};

struct ConfigKey {
    std::string section;
    std::string key;
    std::string default_value;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
};

/// Every accepted key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// "section.key" -> value. Throws Usage on unknown keys or bad values.
void apply_setting(RunConfig& cfg, std::string_view dotted_key, const std::string& value);

/// INI file with [loss] [curriculum] [controller] [data] [train] sections.
/// Throws Usage on unknown sections or keys, Parse on malformed files.
RunConfig load_run_config(const std::filesystem::path& path);

/// Plain-text listing of every key with its default.
std::string describe_config_keys();

/// "0.70-0.85:low-signal;0.70-0.90:low-signal;..." Throws Usage.
curriculum::ActionSpace parse_interval_table(std::string_view text);

}  // namespace evo::cli
