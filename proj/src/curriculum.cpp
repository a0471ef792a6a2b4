#include "evo/curriculum.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include <fmt/format.h>

#include "evo/errors.hpp"

namespace evo::curriculum {

std::string_view zone_name(Zone z) {
    switch (z) {
        case Zone::LowSignal: return "low-signal";
        case Zone::EffectiveLearning: return "effective-learning";
        case Zone::HighRisk: return "high-risk";
    }
    return "?";
}

std::optional<Zone> zone_from_name(std::string_view name) {
    if (name == "low-signal" || name == "low") return Zone::LowSignal;
    if (name == "effective-learning" || name == "effective") return Zone::EffectiveLearning;
    if (name == "high-risk" || name == "high") return Zone::HighRisk;
    return std::nullopt;
}

char action_letter(ActionId id) { return static_cast<char>('A' + id); }

ActionSpace::ActionSpace(std::vector<DifficultyInterval> intervals) : intervals_(std::move(intervals)) {
    require(!intervals_.empty(), ErrorKind::Usage, "action space is empty");
    require(intervals_.size() <= 26, ErrorKind::Usage, "action space supports at most 26 intervals");
    for (std::size_t i = 0; i < intervals_.size(); ++i) {
        auto& iv = intervals_[i];
        iv.action_id = i;
        require(0.0 <= iv.low && iv.low < iv.high && iv.high <= 1.0, ErrorKind::Usage,
                fmt::format("interval {} [{}, {}] must satisfy 0 <= low < high <= 1", action_letter(i), iv.low,
                            iv.high));
    }
}

const DifficultyInterval& ActionSpace::at(ActionId id) const {
    require(id < intervals_.size(), ErrorKind::Usage, fmt::format("action id {} outside action space", id));
    return intervals_[id];
}

std::optional<ActionId> ActionSpace::from_letter(char c) const {
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up < 'A' || up > 'Z') return std::nullopt;
    const ActionId id = static_cast<ActionId>(up - 'A');
    if (id >= intervals_.size()) return std::nullopt;
    return id;
}

ActionSpace default_action_space() {
    using Z = Zone;
    return ActionSpace({
        {0, 0.70, 0.85, Z::LowSignal},
        {1, 0.70, 0.90, Z::LowSignal},
        {2, 0.70, 0.92, Z::LowSignal},
        {3, 0.75, 0.90, Z::LowSignal},
        {4, 0.75, 0.92, Z::EffectiveLearning},
        {5, 0.75, 0.94, Z::EffectiveLearning},
        {6, 0.80, 0.92, Z::EffectiveLearning},
        {7, 0.80, 0.94, Z::EffectiveLearning},
        {8, 0.80, 0.95, Z::EffectiveLearning},
        {9, 0.85, 0.96, Z::EffectiveLearning},
        {10, 0.85, 0.97, Z::EffectiveLearning},
        {11, 0.85, 0.98, Z::EffectiveLearning},
        {12, 0.90, 0.985, Z::HighRisk},
        {13, 0.92, 0.985, Z::HighRisk},
        {14, 0.95, 0.99, Z::HighRisk},
        {15, 0.95, 0.995, Z::HighRisk},
    });
}

std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::Exploration: return "exploration";
        case Phase::Transition: return "transition";
        case Phase::LockIn: return "lockin";
    }
    return "?";
}

std::optional<Phase> phase_from_name(std::string_view name) {
    std::string lower(name);
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "exploration") return Phase::Exploration;
    if (lower == "transition") return Phase::Transition;
    if (lower == "lockin" || lower == "lock-in") return Phase::LockIn;
    return std::nullopt;
}

void PhaseConfig::validate() const {
    require(exploration_steps >= 0 && transition_steps >= 0, ErrorKind::Usage, "phase lengths must be >= 0");
    require(exploration_review_every >= 1 && lockin_review_every >= 1, ErrorKind::Usage,
            "review cadences must be >= 1");
}

Phase PhaseConfig::phase_for_step(std::int64_t step) const {
    if (step < exploration_steps) return Phase::Exploration;
    if (step < exploration_steps + transition_steps) return Phase::Transition;
    return Phase::LockIn;
}

bool PhaseConfig::is_review_step(std::int64_t step) const {
    if (step <= 0) return false;
    const std::int64_t lockin_start = exploration_steps + transition_steps;
    if (step < exploration_steps) return step % exploration_review_every == 0;
    if (step == exploration_steps || step == lockin_start) return true;
    if (step > lockin_start) return (step - lockin_start) % lockin_review_every == 0;
    return false;
}

std::vector<ActionId> StateReport::recent_actions() const {
    std::vector<ActionId> out;
    out.reserve(recent.size());
    for (const auto& r : recent) out.push_back(r.action);
    return out;
}

Trend compute_trend(std::span<const double> losses) {
    require(!losses.empty(), ErrorKind::Usage, "trend needs at least one loss value");
    const std::size_t n = losses.size();
    const std::size_t w = (n + 4) / 5;  // ceil(0.2 n) without floating error
    const double head = std::accumulate(losses.begin(), losses.begin() + static_cast<std::ptrdiff_t>(w), 0.0);
    const double tail = std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(w), losses.end(), 0.0);
    return {head / static_cast<double>(w), tail / static_cast<double>(w)};
}

namespace {

using R = ProtocolRules;

Decision explore(const ControllerState& state, const StateReport& report, const ActionSpace& space) {
    const ActionId cur = state.current_action;
    const double loss = report.hard_negative_loss_mean;
    Decision d;
    if (loss > R::kHighLoss) {
        d.next_action = cur >= static_cast<ActionId>(R::kHighLossStepDown) ? cur - R::kHighLossStepDown : 0;
        d.rationale = fmt::format("high-loss anomaly: L_neg={} > {}, step down {} intervals", loss, R::kHighLoss,
                                  R::kHighLossStepDown);
        return d;
    }
    if (loss < R::kLowLoss && state.consecutive_low_loss_reviews >= 1) {
        d.next_action = std::min<ActionId>(cur + R::kLowLossStepUp, space.last());
        d.rationale = fmt::format("low-loss anomaly: L_neg={} < {} for two consecutive reviews, step up {} intervals",
                                  loss, R::kLowLoss, R::kLowLossStepUp);
        return d;
    }
    const auto recent = report.recent_actions();
    auto unused = [&](ActionId a) { return std::find(recent.begin(), recent.end(), a) == recent.end(); };
    for (ActionId a = cur + 1; a < space.size(); ++a) {
        if (unused(a)) {
            d.next_action = a;
            d.rationale = fmt::format("default progression: lowest action above {} not used in the last {} reviews",
                                      action_letter(cur), R::kRecentWindow);
            return d;
        }
    }
    for (ActionId a = 0; a < space.size(); ++a) {
        if (unused(a)) {
            d.next_action = a;
            d.rationale = "default progression exhausted above current action; wrapped to lowest unused action";
            return d;
        }
    }
    d.next_action = cur;
    d.rationale = "every action used in the last reviews; keeping current action";
    return d;
}

Decision select_anchor(const ControllerState& state, const StateReport& report) {
    auto effective = [](double l) { return R::kEffectiveLow <= l && l <= R::kEffectiveHigh; };
    std::optional<ActionId> anchor;
    auto consider = [&](ActionId a, double l) {
        if (effective(l) && (!anchor || a > *anchor)) anchor = a;
    };
    for (const auto& h : state.history) consider(h.action, h.avg_loss);
    consider(state.current_action, report.hard_negative_loss_mean);

    Decision d;
    if (!anchor) {
        d.next_action = state.current_action;
        d.calibration_failure = true;
        d.rationale = fmt::format("calibration failure: no explored action had loss within [{}, {}]",
                                  R::kEffectiveLow, R::kEffectiveHigh);
        return d;
    }
    d.next_action = *anchor;
    d.rationale = fmt::format("anchor: hardest action with loss within [{}, {}]", R::kEffectiveLow, R::kEffectiveHigh);
    return d;
}

Decision lock_in(const ControllerState& state, const StateReport& report, const ActionSpace& space) {
    const ActionId cur = state.current_action;
    const double ls = report.l_start;
    const double le = report.l_end;
    Decision d;
    const bool mastery = le < R::kMastery;
    const bool progress = ls > 0.0 && (ls - le) / ls >= R::kProgress;
    const bool regress = ls > 0.0 && (le - ls) / ls >= R::kRegress;
    if (mastery || progress) {
        d.next_action = std::min(cur + 1, space.last());
        d.rationale = mastery ? fmt::format("upgrade: L_end={} < {}", le, R::kMastery)
                              : fmt::format("upgrade: relative reduction >= {}", R::kProgress);
    } else if (regress) {
        d.next_action = cur > 0 ? cur - 1 : 0;
        d.rationale = fmt::format("downgrade: relative increase >= {}", R::kRegress);
    } else {
        d.next_action = std::min(cur, space.last());
        d.rationale = "maintain";
    }
    return d;
}

}  // namespace

Decision oracle_decide(const ControllerState& state, const StateReport& report, const ActionSpace& space) {
    ControllerState s = state;
    s.current_action = std::min(s.current_action, space.last());
    Decision d;
    switch (s.phase) {
        case Phase::Exploration: d = explore(s, report, space); break;
        case Phase::Transition: d = select_anchor(s, report); break;
        case Phase::LockIn: d = lock_in(s, report, space); break;
    }
    d.source = DecisionSource::Oracle;
    return d;
}

ControllerState advance(ControllerState state, const Decision& decision, const StateReport& report) {
    require(report.step > state.step, ErrorKind::Usage,
            fmt::format("review step {} does not follow step {}", report.step, state.step));
    state.history.push_back({state.step, state.current_action, report.hard_negative_loss_mean});
    state.consecutive_low_loss_reviews =
        report.hard_negative_loss_mean < R::kLowLoss ? state.consecutive_low_loss_reviews + 1 : 0;
    state.current_action = decision.next_action;
    state.step = report.step;
    state.phase = state.phase_config.phase_for_step(state.step);
    return state;
}

ActionId linear_action(std::int64_t step, std::int64_t total_steps, std::size_t m) {
    require(m >= 1, ErrorKind::Usage, "action space must be non-empty");
    if (total_steps <= 1 || step <= 0) return 0;
    const auto a = static_cast<ActionId>((static_cast<long double>(step) * static_cast<long double>(m)) /
                                         static_cast<long double>(total_steps));
    return std::min<ActionId>(a, m - 1);
}

}  // namespace evo::curriculum
