#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "evo/controller.hpp"
#include "evo/curriculum.hpp"
#include "evo/dataset.hpp"
#include "evo/encoder.hpp"
#include "evo/losses.hpp"
#include "evo/mining.hpp"

namespace evo::sim {

using curriculum::ActionId;
using curriculum::Phase;
using loss::LossBreakdown;

enum class ControllerMode { Oracle, Llm, Mock, FixedWindow, Linear };

std::string_view mode_name(ControllerMode m);
std::optional<ControllerMode> mode_from_name(std::string_view name);

struct TrainConfig {
    loss::LossConfig loss;
    double warmup_tau = 0.1;
    double warmup_lr = 0.5;
    std::size_t warmup_epochs = 1;
    double lr = 0.003;
    std::size_t batch_size = 8;
    std::int64_t steps = 0;  // 0: exploration + transition + one lock-in period
    std::size_t d_out = 8;
    std::size_t pool_size = 0;  // 0: min(200, corpus - 1)
    std::size_t neg_queries = 2;
    double aug_noise = 0.05;
    std::uint32_t seed = 7;
    std::int64_t eval_every = 20;
    curriculum::PhaseConfig phases;
    std::optional<curriculum::ActionSpace> actions;  // default table when empty
    ControllerMode mode = ControllerMode::Oracle;
    double fixed_low = 0.80;
    double fixed_high = 0.98;
    ActionId initial_action = 0;
    std::optional<control::LlmEndpoint> endpoint;  // llm and mock modes
    unsigned threads = 0;

    void validate() const;
    curriculum::ActionSpace action_space() const;
    std::int64_t total_steps() const;
    std::size_t effective_pool_size(std::size_t corpus_size) const;
};

/// Seeded token-level view: one raw row dropped (when more than one) and
/// Gaussian noise of scale `noise` added to the rest.
TokenMatrix augment(const TokenMatrix& raw, std::uint32_t seed, double noise);

/// Everything needed to recompute one pair's loss.
struct PairSpec {
    std::size_t query = 0;  // index into SyntheticDataset::queries
    std::vector<std::string> neg_doc_ids;
    std::vector<std::size_t> neg_query_idx;  // indices into negative_variants
    std::uint32_t aug_seed = 0;
    bool operator==(const PairSpec&) const = default;
};

/// Maps document ids to corpus positions. Throws Data on duplicates.
std::unordered_map<std::string, std::size_t> index_corpus(const SyntheticDataset& ds);

/// Encoded views of one pair under `params`.
loss::PairViews build_pair_views(const ToyEncoderParams& params, const SyntheticDataset& ds,
                                 const std::unordered_map<std::string, std::size_t>& doc_index,
                                 const PairSpec& spec, double aug_noise);

struct StepOutcome {
    LossBreakdown loss;        // batch mean
    std::vector<double> grad;  // d(mean total)/d(projection)
};

StepOutcome compute_step(const ToyEncoderParams& params, const SyntheticDataset& ds,
                         const std::unordered_map<std::string, std::size_t>& doc_index,
                         const std::vector<PairSpec>& batch, const loss::LossConfig& cfg, double aug_noise);

/// One plain gradient-descent update on the batch mean of total_loss.
/// Returns the loss evaluated before the update.
LossBreakdown train_step(ToyEncoderParams& params, const SyntheticDataset& ds,
                         const std::unordered_map<std::string, std::size_t>& doc_index,
                         const std::vector<PairSpec>& batch, const loss::LossConfig& cfg, double aug_noise,
                         double lr);

/// In-batch InfoNCE loss over the positives of `queries`; adds its gradient
/// to `grad` when non-null.
double infonce_batch(const ToyEncoderParams& params, const SyntheticDataset& ds,
                     const std::unordered_map<std::string, std::size_t>& doc_index,
                     const std::vector<std::size_t>& queries, double tau, std::vector<double>* grad);

/// Warm-up epochs over the training split. Returns the loss of every batch,
/// evaluated before its update.
std::vector<double> run_warmup(ToyEncoderParams& params, const SyntheticDataset& ds, const TrainConfig& cfg);

/// Candidate pools for the training split under the current encoder.
std::vector<mining::CandidatePool> mine_pools(const ToyEncoderParams& params, const SyntheticDataset& ds,
                                              std::size_t n, unsigned threads = 0);

/// Mean nDCG@k of the held-out queries against the full corpus.
double evaluate_ndcg(const ToyEncoderParams& params, const SyntheticDataset& ds, std::size_t k = 5);

/// Central-difference check of the projection gradient of one pair's total
/// loss. Entries whose +eps and -eps probes select different argmaxes are
/// skipped. Returns the largest |analytic - numeric| / max(|analytic|,
/// |numeric|, 1e-8).
struct FdReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
};

FdReport fd_gradient_check(const ToyEncoderParams& params, const SyntheticDataset& ds, const PairSpec& pair,
                           const loss::LossConfig& cfg, double aug_noise, double epsilon);

struct WarmupRecord {
    std::size_t batch = 0;
    double loss = 0.0;
    bool operator==(const WarmupRecord&) const = default;
};

struct StepRecord {
    std::int64_t step = 0;
    Phase phase = Phase::Exploration;
    ActionId action = 0;
    double low = 0.0;
    double high = 0.0;
    LossBreakdown loss;
    std::vector<PairSpec> pairs;
    std::vector<bool> fallback;
    bool operator==(const StepRecord&) const;
};

struct DecisionRecord {
    std::int64_t step = 0;
    Phase phase = Phase::Exploration;
    ActionId action = 0;  // decided next action
    double avg_loss = 0.0;
    double l_start = 0.0;
    double l_end = 0.0;
    curriculum::DecisionSource source = curriculum::DecisionSource::Oracle;
    bool calibration_failure = false;
    std::string rationale;
    std::optional<ActionId> current;
    std::optional<std::vector<ActionId>> recent;
    std::optional<int> low_loss_streak;
    bool operator==(const DecisionRecord&) const = default;
};

struct EvalRecord {
    std::int64_t step = 0;
    double ndcg_at_5 = 0.0;
    bool operator==(const EvalRecord&) const = default;
};

/// Warm-up, per-step, per-review and evaluation records of one run.
struct TrajectoryLog {
    std::vector<WarmupRecord> warmup;
    std::vector<StepRecord> steps;
    std::vector<DecisionRecord> decisions;
    std::vector<EvalRecord> evals;

    bool calibration_failure() const;
    /// Chronological JSON Lines, each record tagged with "type".
    std::string to_jsonl() const;
    /// Throws Parse naming the offending line.
    static TrajectoryLog from_jsonl(std::string_view text);
    bool operator==(const TrajectoryLog&) const = default;
};

/// Decision-log line: step, phase, action, avg_loss, l_start, l_end, source,
/// calibration_failure, rationale, plus current/recent/low_loss_streak.
std::string decision_to_jsonl(const DecisionRecord& rec);
DecisionRecord decision_from_json_text(std::string_view line);

/// Parses a decision log. Lines tagged with a "type" other than "decision"
/// are skipped, so a trajectory log is accepted too. Throws Parse.
std::vector<DecisionRecord> parse_decision_log(std::string_view text);

struct ReplayDivergence {
    std::size_t index = 0;
    std::int64_t step = 0;
    ActionId logged = 0;
    ActionId expected = 0;
    bool from_llm = false;
};

struct ReplayReport {
    std::size_t entries = 0;
    std::vector<ReplayDivergence> divergences;  // oracle entries
    std::vector<ReplayDivergence> llm_flags;    // LLM entries disagreeing with the rules
};

/// Re-runs oracle_decide on the state each entry describes.
ReplayReport replay_decisions(const std::vector<DecisionRecord>& log, const curriculum::ActionSpace& space,
                              const curriculum::PhaseConfig& phases, ActionId initial_action = 0);

using StepObserver = std::function<void(const StepRecord&, const ToyEncoderParams& before)>;

struct TrainingResult {
    TrajectoryLog log;
    ToyEncoderParams params;
    curriculum::ControllerState state;
    double post_warmup_ndcg = 0.0;
    double final_ndcg = 0.0;
};

/// Curriculum stage on prepared params and pools.
TrainingResult run_curriculum(const SyntheticDataset& ds, ToyEncoderParams params,
                              const std::vector<mining::CandidatePool>& pools, const TrainConfig& cfg,
                              const StepObserver& observer = {});

/// Warm-up, pool mining and curriculum training.
TrainingResult run_training(const SyntheticDataset& ds, const TrainConfig& cfg, const StepObserver& observer = {});

}  // namespace evo::sim
