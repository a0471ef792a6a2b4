#include <doctest.h>

#include <algorithm>

#include "evo/curriculum.hpp"
#include "support.hpp"

using namespace evo;
using namespace evo::curriculum;

namespace {

constexpr ActionId A = 0, B = 1, C = 2, D = 3, E = 4, F = 5, H = 7, L = 11, P = 15;

StateReport report_for(const ControllerState& s, double loss, std::vector<ActionId> recent = {}) {
    StateReport r;
    r.phase = s.phase;
    r.current_action = s.current_action;
    r.hard_negative_loss_mean = loss;
    r.l_start = loss;
    r.l_end = loss;
    if (recent.empty()) recent.push_back(s.current_action);
    for (ActionId a : recent) r.recent.push_back({0, a});
    r.consecutive_low_loss_reviews = s.consecutive_low_loss_reviews;
    r.history = s.history;
    return r;
}

ControllerState state_in(Phase p, ActionId cur) {
    ControllerState s;
    s.phase = p;
    s.current_action = cur;
    return s;
}

ActionId decide(const ControllerState& s, const StateReport& r) {
    return oracle_decide(s, r, default_action_space()).next_action;
}

StateReport lockin_report(const ControllerState& s, double l_start, double l_end) {
    auto r = report_for(s, (l_start + l_end) / 2);
    r.l_start = l_start;
    r.l_end = l_end;
    return r;
}

}  // namespace

TEST_SUITE("curriculum") {
    TEST_CASE("default action table") {
        const auto space = default_action_space();
        REQUIRE(space.size() == 16);
        const double lows[] = {0.70, 0.70, 0.70, 0.75, 0.75, 0.75, 0.80, 0.80,
                               0.80, 0.85, 0.85, 0.85, 0.90, 0.92, 0.95, 0.95};
        const double highs[] = {0.85, 0.90, 0.92, 0.90, 0.92, 0.94, 0.92, 0.94,
                                0.95, 0.96, 0.97, 0.98, 0.985, 0.985, 0.99, 0.995};
        for (ActionId i = 0; i < 16; ++i) {
            CHECK(space.at(i).action_id == i);
            CHECK(space.at(i).low == lows[i]);
            CHECK(space.at(i).high == highs[i]);
            const Zone z = i < 4 ? Zone::LowSignal : i < 12 ? Zone::EffectiveLearning : Zone::HighRisk;
            CHECK(space.at(i).zone == z);
        }
        CHECK(space.at(9).zone == Zone::EffectiveLearning);
        CHECK_THROWS_KIND(space.at(16), ErrorKind::Usage);
    }

    TEST_CASE("letters and names") {
        CHECK(action_letter(0) == 'A');
        CHECK(action_letter(15) == 'P');
        const auto space = default_action_space();
        CHECK(space.from_letter('c') == ActionId{2});
        CHECK_FALSE(space.from_letter('Q').has_value());
        CHECK_FALSE(space.from_letter('?').has_value());
        for (auto z : {Zone::LowSignal, Zone::EffectiveLearning, Zone::HighRisk})
            CHECK(zone_from_name(zone_name(z)) == z);
        for (auto p : {Phase::Exploration, Phase::Transition, Phase::LockIn}) CHECK(phase_from_name(phase_name(p)) == p);
        CHECK_FALSE(zone_from_name("medium").has_value());
    }

    TEST_CASE("action space validation") {
        CHECK_THROWS_KIND(ActionSpace({}), ErrorKind::Usage);
        CHECK_THROWS_KIND(ActionSpace({{0, 0.9, 0.8, Zone::LowSignal}}), ErrorKind::Usage);
        CHECK_THROWS_KIND(ActionSpace({{0, 0.5, 1.1, Zone::LowSignal}}), ErrorKind::Usage);
        std::vector<DifficultyInterval> many(27, {0, 0.1, 0.2, Zone::LowSignal});
        CHECK_THROWS_KIND(ActionSpace(many), ErrorKind::Usage);
        const ActionSpace renumbered({{7, 0.1, 0.2, Zone::LowSignal}, {7, 0.2, 0.3, Zone::HighRisk}});
        CHECK(renumbered.at(1).action_id == 1);
    }

    TEST_CASE("phase schedule") {
        PhaseConfig pc;
        CHECK(pc.phase_for_step(0) == Phase::Exploration);
        CHECK(pc.phase_for_step(59) == Phase::Exploration);
        CHECK(pc.phase_for_step(60) == Phase::Transition);
        CHECK(pc.phase_for_step(259) == Phase::Transition);
        CHECK(pc.phase_for_step(260) == Phase::LockIn);
        std::vector<std::int64_t> reviews;
        for (std::int64_t s = 0; s <= 700; ++s)
            if (pc.is_review_step(s)) reviews.push_back(s);
        REQUIRE(reviews.size() == 30 + 1 + 2);
        CHECK(reviews.front() == 2);
        CHECK(reviews[29] == 60);
        CHECK(reviews[30] == 260);
        CHECK(reviews[31] == 460);
        CHECK(reviews[32] == 660);

        PhaseConfig scaled{12, 2, 40, 40};
        std::vector<std::int64_t> r2;
        for (std::int64_t s = 0; s <= 132; ++s)
            if (scaled.is_review_step(s)) r2.push_back(s);
        CHECK(r2 == std::vector<std::int64_t>{2, 4, 6, 8, 10, 12, 52, 92, 132});

        PhaseConfig bad{12, 0, 40, 40};
        CHECK_THROWS_KIND(bad.validate(), ErrorKind::Usage);
    }

    TEST_CASE("compute_trend") {
        const std::vector<double> flat(10, 0.5);
        CHECK(compute_trend(flat).l_start == 0.5);
        CHECK(compute_trend(flat).l_end == 0.5);
        const std::vector<double> falling{1.0, 1.0, 0.8, 0.6, 0.4, 0.4, 0.4, 0.4, 0.2, 0.2};
        CHECK(compute_trend(falling).l_start == doctest::Approx(1.0));
        CHECK(compute_trend(falling).l_end == doctest::Approx(0.2));
        const std::vector<double> one{0.7};
        CHECK(compute_trend(one).l_start == 0.7);
        CHECK(compute_trend(one).l_end == 0.7);
        // n = 6 -> window ceil(1.2) = 2.
        const std::vector<double> six{1, 2, 3, 4, 5, 6};
        CHECK(compute_trend(six).l_start == 1.5);
        CHECK(compute_trend(six).l_end == 5.5);
        CHECK_THROWS_KIND(compute_trend(std::vector<double>{}), ErrorKind::Usage);
    }

    TEST_CASE("exploration: deliberation example") {
        auto s = state_in(Phase::Exploration, B);
        CHECK(decide(s, report_for(s, 0.3983, {B, D, F})) == C);
    }

    TEST_CASE("exploration: high loss steps down two") {
        auto s = state_in(Phase::Exploration, F);
        CHECK(decide(s, report_for(s, 1.5)) == D);
        s.current_action = B;
        CHECK(decide(s, report_for(s, 1.5)) == A);
        s.current_action = A;
        CHECK(decide(s, report_for(s, 99.0)) == A);
    }

    TEST_CASE("exploration: low loss needs a previous low review") {
        auto s = state_in(Phase::Exploration, D);
        CHECK(decide(s, report_for(s, 0.01)) == E);  // first low review: default progression
        s.consecutive_low_loss_reviews = 1;
        CHECK(decide(s, report_for(s, 0.01)) == D + 3);
        s.current_action = 14;
        CHECK(decide(s, report_for(s, 0.01)) == P);
        // High loss wins when both could apply is impossible; boundary values are not anomalies.
        s.current_action = D;
        CHECK(decide(s, report_for(s, 0.05)) == E);
        CHECK(decide(s, report_for(s, 1.2)) == E);
    }

    TEST_CASE("exploration: progression skips recent actions and wraps") {
        auto s = state_in(Phase::Exploration, C);
        CHECK(decide(s, report_for(s, 0.5, {C, D, E})) == F);
        s.current_action = P;
        CHECK(decide(s, report_for(s, 0.5, {P, A, B})) == C);
        s.current_action = 14;
        CHECK(decide(s, report_for(s, 0.5, {14, P, A})) == B);
    }

    TEST_CASE("transition picks the hardest action in the window") {
        auto s = state_in(Phase::Transition, L);
        s.history = {{0, A, 0.1}, {2, E, 0.5}, {4, H, 0.9}};
        CHECK(decide(s, report_for(s, 1.4)) == H);
        s.history.push_back({6, L, 1.4});
        s.current_action = B;
        CHECK(decide(s, report_for(s, 2.0)) == H);
        // The window closing at the review counts as well.
        CHECK(decide(s, report_for(s, 0.3)) == H);
        s.current_action = 13;
        CHECK(decide(s, report_for(s, 1.2)) == 13);
    }

    TEST_CASE("transition calibration failure") {
        auto s = state_in(Phase::Transition, E);
        s.history = {{0, A, 0.01}, {2, B, 1.9}};
        const auto d = oracle_decide(s, report_for(s, 2.5), default_action_space());
        CHECK(d.calibration_failure);
        CHECK(d.next_action == E);
    }

    TEST_CASE("lock-in rules") {
        auto s = state_in(Phase::LockIn, H);
        CHECK(decide(s, lockin_report(s, 0.8, 0.29)) == H + 1);   // mastery
        CHECK(decide(s, lockin_report(s, 1.0, 0.4)) == H + 1);    // 60% reduction
        CHECK(decide(s, lockin_report(s, 1.0, 0.5)) == H + 1);    // exactly 50%
        CHECK(decide(s, lockin_report(s, 0.5, 0.7)) == H - 1);    // 40% increase
        CHECK(decide(s, lockin_report(s, 0.5, 0.65)) == H - 1);   // exactly 30%
        CHECK(decide(s, lockin_report(s, 0.5, 0.6)) == H);        // 20% increase
        CHECK(decide(s, lockin_report(s, 0.6, 0.45)) == H);       // 25% reduction
        CHECK(decide(s, lockin_report(s, 0.0, 0.1)) == H + 1);    // zero start, mastery
        CHECK(decide(s, lockin_report(s, 0.0, 0.5)) == H);        // zero start, no division
        s.current_action = P;
        CHECK(decide(s, lockin_report(s, 1.0, 0.1)) == P);
        s.current_action = A;
        CHECK(decide(s, lockin_report(s, 0.5, 1.0)) == A);
    }

    TEST_CASE("oracle clamps an out-of-range current action") {
        auto s = state_in(Phase::LockIn, 40);
        const auto d = decide(s, lockin_report(s, 0.5, 0.5));
        CHECK(d == P);
    }

    TEST_CASE("advance bookkeeping") {
        ControllerState s;
        s.phase_config = {60, 2, 200, 200};
        s.step = 58;
        s.current_action = C;
        StateReport r = report_for(s, 0.02);
        r.step = 60;
        Decision d;
        d.next_action = D;
        const auto next = advance(s, d, r);
        CHECK(next.phase == Phase::Transition);
        CHECK(next.history.size() == s.history.size() + 1);
        CHECK(next.history.back() == HistoryEntry{58, C, 0.02});
        CHECK(next.current_action == D);
        CHECK(next.step == 60);
        CHECK(next.consecutive_low_loss_reviews == 1);
        r.hard_negative_loss_mean = 0.5;
        r.step = 62;
        CHECK(advance(next, d, r).consecutive_low_loss_reviews == 0);
        r.step = 60;
        CHECK_THROWS_KIND(advance(next, d, r), ErrorKind::Usage);
    }

    TEST_CASE("linear schedule") {
        CHECK(linear_action(0, 100, 16) == 0);
        CHECK(linear_action(50, 100, 16) == 8);
        CHECK(linear_action(99, 100, 16) == 15);
        CHECK(linear_action(500, 100, 16) == 15);
        ActionId prev = 0;
        for (std::int64_t s = 0; s < 100; ++s) {
            const auto a = linear_action(s, 100, 16);
            CHECK(a >= prev);
            prev = a;
        }
    }

    TEST_CASE("oracle properties on random inputs") {
        Rng rng(17);
        const auto space = default_action_space();
        for (int t = 0; t < 5000; ++t) {
            ControllerState s;
            s.phase = static_cast<Phase>(rng.below(3));
            s.current_action = rng.below(16);
            s.consecutive_low_loss_reviews = static_cast<int>(rng.below(3));
            for (std::uint32_t h = 0, n = rng.below(6); h < n; ++h)
                s.history.push_back({static_cast<std::int64_t>(h), rng.below(16), rng.uniform(0, 2)});
            std::vector<ActionId> recent{s.current_action};
            for (std::uint32_t i = 0; i < 2; ++i) recent.push_back(rng.below(16));
            auto r = report_for(s, rng.uniform(0, 2), recent);
            r.l_start = rng.uniform(0, 2);
            r.l_end = rng.uniform(0, 2);
            const auto d1 = oracle_decide(s, r, space);
            const auto d2 = oracle_decide(s, r, space);
            CHECK(d1.next_action == d2.next_action);
            CHECK(d1.next_action < 16);
            if (s.phase == Phase::LockIn)
                CHECK(std::max(d1.next_action, s.current_action) - std::min(d1.next_action, s.current_action) <= 1);
            if (s.phase == Phase::Exploration && r.hard_negative_loss_mean >= 0.05 &&
                r.hard_negative_loss_mean <= 1.2 && std::set<ActionId>(recent.begin(), recent.end()).size() < 16)
                CHECK(std::find(recent.begin(), recent.end(), d1.next_action) == recent.end());
            if (s.phase == Phase::Transition && !d1.calibration_failure) {
                bool found = r.hard_negative_loss_mean >= 0.3 && r.hard_negative_loss_mean <= 1.2 &&
                             d1.next_action == s.current_action;
                for (const auto& h : s.history)
                    found = found || (h.action == d1.next_action && h.avg_loss >= 0.3 && h.avg_loss <= 1.2);
                CHECK(found);
            }
        }
    }
}
