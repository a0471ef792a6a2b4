#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evo::curriculum {

using ActionId = std::size_t;

enum class Zone { LowSignal, EffectiveLearning, HighRisk };

std::string_view zone_name(Zone z);
std::optional<Zone> zone_from_name(std::string_view name);

/// Closed range [low, high] over the negative/positive similarity ratio.
struct DifficultyInterval {
    ActionId action_id = 0;
    double low = 0.0;
    double high = 1.0;
    Zone zone = Zone::LowSignal;

    bool contains(double ratio) const noexcept { return low <= ratio && ratio <= high; }
    bool operator==(const DifficultyInterval&) const = default;
};

/// Letter shown for an action id ('A' for 0).
char action_letter(ActionId id);

class ActionSpace {
public:
    /// Takes ownership of the table; ids are renumbered by position.
    /// Throws Usage if any interval violates 0 <= low < high <= 1 or the
    /// table is empty or larger than 26 entries.
    explicit ActionSpace(std::vector<DifficultyInterval> intervals);

    std::size_t size() const noexcept { return intervals_.size(); }
    ActionId last() const noexcept { return intervals_.size() - 1; }
    const DifficultyInterval& at(ActionId id) const;
    const std::vector<DifficultyInterval>& intervals() const noexcept { return intervals_; }

    /// Case-insensitive letter lookup; nullopt when outside this space.
    std::optional<ActionId> from_letter(char c) const;

private:
    std::vector<DifficultyInterval> intervals_;
};

/// The sixteen overlapping ratio windows A..P.
ActionSpace default_action_space();

enum class Phase { Exploration, Transition, LockIn };

std::string_view phase_name(Phase p);
std::optional<Phase> phase_from_name(std::string_view name);

struct PhaseConfig {
    std::int64_t exploration_steps = 60;
    std::int64_t exploration_review_every = 2;
    std::int64_t transition_steps = 200;
    std::int64_t lockin_review_every = 200;

    void validate() const;
    /// Phase of the training window that begins at `step`.
    Phase phase_for_step(std::int64_t step) const;
    bool is_review_step(std::int64_t step) const;
};

struct HistoryEntry {
    std::int64_t step = 0;  // step at which the action was adopted
    ActionId action = 0;
    double avg_loss = 0.0;
    bool operator==(const HistoryEntry&) const = default;
};

struct ControllerState {
    Phase phase = Phase::Exploration;
    ActionId current_action = 0;
    std::vector<HistoryEntry> history;
    std::int64_t step = 0;  // step at which current_action was adopted
    int consecutive_low_loss_reviews = 0;
    PhaseConfig phase_config;

    bool operator==(const ControllerState&) const = default;
};

struct RecentAction {
    std::int64_t step = 0;
    ActionId action = 0;
    bool operator==(const RecentAction&) const = default;
};

struct StateReport {
    Phase phase = Phase::Exploration;
    std::int64_t step = 0;  // review step
    ActionId current_action = 0;
    double current_low = 0.0;
    double current_high = 0.0;
    double hard_negative_loss_mean = 0.0;
    double l_start = 0.0;
    double l_end = 0.0;
    std::vector<RecentAction> recent;  // newest first, at most 3
    int consecutive_low_loss_reviews = 0;
    std::vector<HistoryEntry> history;

    std::vector<ActionId> recent_actions() const;
};

enum class DecisionSource { Oracle, LLM };

struct Decision {
    ActionId next_action = 0;
    DecisionSource source = DecisionSource::Oracle;
    std::string rationale;
    bool calibration_failure = false;
};

/// Fixed thresholds of the three-phase protocol.
struct ProtocolRules {
    static constexpr double kHighLoss = 1.2;
    static constexpr double kLowLoss = 0.05;
    static constexpr int kHighLossStepDown = 2;
    static constexpr int kLowLossStepUp = 3;
    static constexpr double kEffectiveLow = 0.3;
    static constexpr double kEffectiveHigh = 1.2;
    static constexpr double kMastery = 0.3;
    static constexpr double kProgress = 0.5;
    static constexpr double kRegress = 0.3;
    static constexpr std::size_t kRecentWindow = 3;
};

struct Trend {
    double l_start = 0.0;
    double l_end = 0.0;
};

/// Means of the first and last ceil(20%) of the series. Throws Usage if empty.
Trend compute_trend(std::span<const double> losses);

/// Deterministic rule-based decision for the phase named by `report.phase`.
Decision oracle_decide(const ControllerState& state, const StateReport& report, const ActionSpace& space);

/// Records the reviewed window in history, adopts the decision and moves
/// the phase forward according to the phase schedule.
ControllerState advance(ControllerState state, const Decision& decision, const StateReport& report);

/// Baseline scheduler: action id grows linearly from 0 to M-1 over the run.
ActionId linear_action(std::int64_t step, std::int64_t total_steps, std::size_t m);

}  // namespace evo::curriculum
