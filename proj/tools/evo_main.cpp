#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "evo/config.hpp"
#include "evo/errors.hpp"
#include "evo/hnqs.hpp"
#include "evo/mva.hpp"
#include "evo/plot.hpp"
#include "evo/rng.hpp"
#include "evo/training.hpp"

namespace {

using namespace evo;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCalibration = 3;

struct Common {
    std::string config_path;
    std::vector<std::string> settings;
    std::string mock_controller;
    bool verbose = false;
};

cli::RunConfig resolve(const Common& c) {
    cli::RunConfig cfg = c.config_path.empty() ? cli::RunConfig{} : cli::load_run_config(c.config_path);
    for (const auto& s : c.settings) {
        const auto eq = s.find('=');
        require(eq != std::string::npos, ErrorKind::Usage, "--set expects section.key=value, got '" + s + "'");
        cli::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (!c.mock_controller.empty()) {
        cfg.mock_script = c.mock_controller;
        cfg.train.mode = sim::ControllerMode::Mock;
    }
    cfg.train.actions = cfg.action_space();
    if (cfg.train.mode == sim::ControllerMode::Mock) {
        require(!cfg.mock_script.empty(), ErrorKind::Usage, "mock mode needs --mock-controller or controller.mock_script");
        control::LlmEndpoint ep;
        ep.config = cfg.endpoint;
        ep.transport = std::make_shared<control::ScriptedTransport>(control::ScriptedTransport::from_file(cfg.mock_script));
        cfg.train.endpoint = std::move(ep);
    } else if (cfg.train.mode == sim::ControllerMode::Llm) {
        cfg.endpoint.validate();
        control::LlmEndpoint ep;
        ep.config = cfg.endpoint;
        ep.transport = std::make_shared<control::HttpChatTransport>(cfg.endpoint);
        cfg.train.endpoint = std::move(ep);
    }
    return cfg;
}

std::filesystem::path checkpoint_path(const cli::RunConfig& cfg) {
    return cfg.checkpoint.empty() ? cfg.out_dir / "warmup.ckpt" : cfg.checkpoint;
}

std::filesystem::path pools_path(const cli::RunConfig& cfg) {
    return cfg.pools.empty() ? cfg.out_dir / "pools.jsonl" : cfg.pools;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    require(static_cast<bool>(in), ErrorKind::Data, "cannot open " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p);
    require(static_cast<bool>(out), ErrorKind::Data, "cannot write " + p.string());
    out << text;
}

int cmd_gen_data(const cli::RunConfig& cfg) {
    const auto ds = sim::gen_synthetic_dataset(cfg.data, cfg.data_seed);
    sim::save_dataset(ds, cfg.data_dir);
    fmt::print("wrote {} documents and {} queries to {}\n", ds.corpus.size(), ds.queries.size(),
               cfg.data_dir.string());
    return kExitOk;
}

int cmd_warmup(const cli::RunConfig& cfg) {
    const auto ds = sim::load_dataset(cfg.data_dir);
    auto params = sim::ToyEncoderParams::random(ds.d_in(), cfg.train.d_out, derive_seed(cfg.train.seed, 0x1A17));
    const auto losses = sim::run_warmup(params, ds, cfg.train);
    sim::save_checkpoint(params, 0, checkpoint_path(cfg));
    if (!losses.empty())
        fmt::print("warm-up: {} batches, InfoNCE {:.4f} -> {:.4f}\n", losses.size(), losses.front(), losses.back());
    fmt::print("held-out nDCG@5 {:.4f}; checkpoint {}\n", sim::evaluate_ndcg(params, ds),
               checkpoint_path(cfg).string());
    return kExitOk;
}

int cmd_mine_pool(const cli::RunConfig& cfg) {
    const auto ds = sim::load_dataset(cfg.data_dir);
    const auto ckpt = sim::load_checkpoint(checkpoint_path(cfg));
    const auto pools = sim::mine_pools(ckpt.params, ds, cfg.train.effective_pool_size(ds.corpus.size()),
                                       cfg.train.threads);
    std::string text;
    for (const auto& p : pools) text += mining::to_jsonl_line(p) + "\n";
    write_file(pools_path(cfg), text);
    fmt::print("mined {} pools into {}\n", pools.size(), pools_path(cfg).string());
    return kExitOk;
}

int cmd_train(const cli::RunConfig& cfg) {
    const auto ds = sim::load_dataset(cfg.data_dir);
    sim::TrainingResult result;
    if (std::filesystem::exists(checkpoint_path(cfg)) && std::filesystem::exists(pools_path(cfg))) {
        spdlog::info("resuming from {} and {}", checkpoint_path(cfg).string(), pools_path(cfg).string());
        auto ckpt = sim::load_checkpoint(checkpoint_path(cfg));
        std::vector<mining::CandidatePool> pools;
        std::istringstream in(read_file(pools_path(cfg)));
        std::size_t line_no = 0;
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            if (line.empty()) continue;
            try {
                pools.push_back(mining::pool_from_jsonl_line(line));
            } catch (const Error& e) {
                fail(ErrorKind::Parse, fmt::format("{} line {}: {}", pools_path(cfg).string(), line_no, e.what()));
            }
        }
        result = sim::run_curriculum(ds, std::move(ckpt.params), pools, cfg.train);
    } else {
        result = sim::run_training(ds, cfg.train);
    }
    std::filesystem::create_directories(cfg.out_dir);
    write_file(cfg.out_dir / "trajectory.jsonl", result.log.to_jsonl());
    std::string decisions;
    for (const auto& d : result.log.decisions) decisions += sim::decision_to_jsonl(d) + "\n";
    write_file(cfg.out_dir / "decisions.jsonl", decisions);
    sim::save_checkpoint(result.params, cfg.train.total_steps(), cfg.out_dir / "final.ckpt");
    fmt::print("trained {} steps ({} reviews); nDCG@5 {:.4f} -> {:.4f}\n", result.log.steps.size(),
               result.log.decisions.size(), result.post_warmup_ndcg, result.final_ndcg);
    if (result.log.calibration_failure()) {
        fmt::print(stderr, "controller reported a calibration failure\n");
        return kExitCalibration;
    }
    return kExitOk;
}

int cmd_replay(const cli::RunConfig& cfg, const std::string& log_path) {
    const auto log = sim::parse_decision_log(read_file(log_path));
    const auto report = sim::replay_decisions(log, cfg.action_space(), cfg.train.phases, cfg.train.initial_action);
    fmt::print("entries: {}\ndivergences: {}\nllm flags: {}\n", report.entries, report.divergences.size(),
               report.llm_flags.size());
    for (const auto& d : report.divergences)
        fmt::print("divergence at entry {} (step {}): logged {} expected {}\n", d.index, d.step,
                   curriculum::action_letter(d.logged), curriculum::action_letter(d.expected));
    for (const auto& d : report.llm_flags)
        fmt::print("llm entry {} (step {}): chose {} where the rules give {}\n", d.index, d.step,
                   curriculum::action_letter(d.logged), curriculum::action_letter(d.expected));
    return kExitOk;
}

int cmd_hnqs(const cli::RunConfig& cfg, const std::string& question, const std::string& query_id,
             std::uint32_t seed, bool use_endpoint, const std::string& out) {
    std::vector<std::string> variants;
    hnqs::Generator gen = hnqs::Generator::Mock;
    if (use_endpoint) {
        cfg.endpoint.validate();
        control::HttpChatTransport transport(cfg.endpoint);
        control::ChatRequest req;
        req.model = cfg.endpoint.model_name;
        req.messages = {{"user", hnqs::render_hnqs_prompt(question)}};
        variants = hnqs::parse_variants(transport.complete(req).text);
        gen = hnqs::Generator::Endpoint;
    } else {
        variants = hnqs::mock_generate(question, seed);
    }
    const hnqs::HnqsRecord rec(query_id, question, variants, gen);
    if (out.empty())
        fmt::print("{}\n", rec.to_jsonl_line());
    else
        write_file(out, rec.to_jsonl_line() + "\n");
    return kExitOk;
}

int cmd_mva(const std::string& in, const std::string& out, std::optional<double> angle, double factor,
            std::uint32_t seed) {
    mva::MvaParams p;
    p.angle = angle;
    p.downsample_factor = factor;
    p.seed = seed;
    p.validate();
    const auto img = mva::read_png(in);
    const auto composite = mva::build_composite(img, p);
    mva::write_png(composite, out);
    fmt::print("composite {}x{} (angle {:.3f}) -> {}\n", composite.width(), composite.height(), mva::resolve_angle(p),
               out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Curriculum hard-negative training toolkit"};
    app.footer(cli::describe_config_keys());
    app.require_subcommand(1);
    Common common;
    app.add_option("-c,--config", common.config_path, "INI run configuration")->check(CLI::ExistingFile);
    app.add_option("--set", common.settings, "override a config key, section.key=value (repeatable)");
    app.add_option("--mock-controller", common.mock_controller, "scripted controller responses; implies mode=mock")
        ->check(CLI::ExistingFile);
    app.add_flag("-v,--verbose", common.verbose, "debug logging");

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus and queries");
    auto* warm = app.add_subcommand("warmup", "in-batch InfoNCE warm-up; writes a checkpoint");
    auto* mine = app.add_subcommand("mine-pool", "mine candidate pools with a checkpoint");
    auto* train = app.add_subcommand("train", "curriculum training; writes trajectory and decision logs");

    std::string replay_log;
    auto* replay = app.add_subcommand("replay", "re-run the rule oracle on a decision log");
    replay->add_option("log", replay_log, "decision or trajectory log")->required();

    std::string plot_in, plot_out;
    auto* plot = app.add_subcommand("plot", "render a trajectory log as SVG");
    plot->add_option("log", plot_in, "trajectory log")->required();
    plot->add_option("-o,--out", plot_out, "SVG output path")->required();

    std::string question, query_id = "q0", hnqs_out;
    std::uint32_t hnqs_seed = 0;
    bool hnqs_endpoint = false;
    auto* hq = app.add_subcommand("hnqs-gen", "synthesize 20 negative queries for a question");
    hq->add_option("question", question, "positive question")->required();
    hq->add_option("--id", query_id, "query id");
    hq->add_option("--seed", hnqs_seed, "mock generator seed");
    hq->add_flag("--endpoint", hnqs_endpoint, "use the [controller] endpoint instead of the mock generator");
    hq->add_option("-o,--out", hnqs_out, "JSONL output (stdout when omitted)");

    std::string mva_in, mva_out;
    std::optional<double> mva_angle;
    double mva_factor = 0.5;
    std::uint32_t mva_seed = 0;
    auto* mv = app.add_subcommand("mva", "build the original | downsampled | rotated composite");
    mv->add_option("input,--in", mva_in, "input PNG")->required()->check(CLI::ExistingFile);
    mv->add_option("-o,--out", mva_out, "output PNG")->required();
    mv->add_option("--angle", mva_angle, "rotation in degrees (random when omitted)");
    mv->add_option("--factor", mva_factor, "downsample factor");
    mv->add_option("--seed", mva_seed, "seed for the random angle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }
    spdlog::set_level(common.verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (gen->parsed()) return cmd_gen_data(resolve(common));
        if (warm->parsed()) return cmd_warmup(resolve(common));
        if (mine->parsed()) return cmd_mine_pool(resolve(common));
        if (train->parsed()) return cmd_train(resolve(common));
        if (replay->parsed()) return cmd_replay(resolve(common), replay_log);
        if (plot->parsed()) {
            plot::plot_trajectory_file(plot_in, plot_out);
            return kExitOk;
        }
        if (hq->parsed()) return cmd_hnqs(resolve(common), question, query_id, hnqs_seed, hnqs_endpoint, hnqs_out);
        if (mv->parsed()) return cmd_mva(mva_in, mva_out, mva_angle, mva_factor, mva_seed);
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        switch (e.kind()) {
            case ErrorKind::Usage: return kExitUsage;
            default: return kExitData;
        }
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}
