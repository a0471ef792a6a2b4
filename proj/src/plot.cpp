#include "evo/plot.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "evo/errors.hpp"

namespace evo::plot {

namespace {

constexpr double kWidth = 800, kHeight = 420;
constexpr double kLeft = 60, kRight = 60, kTop = 30, kBottom = 50;

std::string num(double v) { return fmt::format("{:.2f}", v); }

}  // namespace

std::string render_trajectory_svg(const sim::TrajectoryLog& log) {
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;

    std::int64_t max_step = 1;
    std::size_t actions = 16;
    double max_loss = 0.0;
    for (const auto& s : log.steps) {
        max_step = std::max(max_step, s.step + 1);
        actions = std::max(actions, s.action + 1);
        max_loss = std::max(max_loss, s.loss.total);
    }
    if (max_loss <= 0.0) max_loss = 1.0;

    auto x = [&](double step) { return kLeft + pw * step / static_cast<double>(max_step); };
    auto y_action = [&](double a) { return kTop + ph - ph * a / static_cast<double>(actions - 1); };
    auto y_loss = [&](double l) { return kTop + ph - ph * l / max_loss; };

    std::ostringstream o;
    o << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)",
                     kWidth, kHeight, kWidth, kHeight)
      << '\n';
    o << R"(<rect x="0" y="0" width="800" height="420" fill="white"/>)" << '\n';
    o << R"(<g font-family="monospace" font-size="11" fill="black">)" << '\n';

    // Axes and ticks.
    o << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", num(kLeft), num(kTop + ph),
                     num(kLeft + pw), num(kTop + ph))
      << '\n';
    o << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", num(kLeft), num(kTop), num(kLeft),
                     num(kTop + ph))
      << '\n';
    o << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", num(kLeft + pw), num(kTop),
                     num(kLeft + pw), num(kTop + ph))
      << '\n';
    for (std::size_t a = 0; a < actions; ++a)
        o << fmt::format(R"(<text x="{}" y="{}" text-anchor="end">{}</text>)", num(kLeft - 6),
                         num(y_action(static_cast<double>(a)) + 4), curriculum::action_letter(a))
          << '\n';
    for (int i = 0; i <= 4; ++i) {
        const double l = max_loss * i / 4.0;
        o << fmt::format(R"(<text x="{}" y="{}">{}</text>)", num(kLeft + pw + 6), num(y_loss(l) + 4), num(l)) << '\n';
    }
    for (int i = 0; i <= 4; ++i) {
        const double s = static_cast<double>(max_step) * i / 4.0;
        o << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)", num(x(s)), num(kTop + ph + 16),
                         num(s))
          << '\n';
    }
    o << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">step</text>)", num(kLeft + pw / 2),
                     num(kHeight - 10))
      << '\n';
    o << fmt::format(R"(<text x="{}" y="{}">action</text>)", num(4), num(kTop - 10)) << '\n';
    o << fmt::format(R"(<text x="{}" y="{}">loss</text>)", num(kLeft + pw + 6), num(kTop - 10)) << '\n';
    o << "</g>\n";

    // Phase boundaries.
    for (std::size_t i = 1; i < log.steps.size(); ++i) {
        if (log.steps[i].phase == log.steps[i - 1].phase) continue;
        const double bx = x(static_cast<double>(log.steps[i].step));
        o << fmt::format(
                 R"(<line class="phase-boundary" x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 3"/>)",
                 num(bx), num(kTop), num(bx), num(kTop + ph))
          << '\n';
    }

    if (!log.steps.empty()) {
        std::string action_pts, loss_pts;
        for (const auto& s : log.steps) {
            const double ya = y_action(static_cast<double>(s.action));
            action_pts += fmt::format("{},{} {},{} ", num(x(static_cast<double>(s.step))), num(ya),
                                      num(x(static_cast<double>(s.step + 1))), num(ya));
            loss_pts += fmt::format("{},{} ", num(x(static_cast<double>(s.step) + 0.5)), num(y_loss(s.loss.total)));
        }
        action_pts.pop_back();
        loss_pts.pop_back();
        o << fmt::format(R"(<polyline class="action" points="{}" fill="none" stroke="#1f4e9c" stroke-width="3"/>)",
                         action_pts)
          << '\n';
        o << fmt::format(R"(<polyline class="loss" points="{}" fill="none" stroke="#c0392b" stroke-width="1"/>)",
                         loss_pts)
          << '\n';
    }
    o << "</svg>\n";
    return o.str();
}

void plot_trajectory_file(const std::filesystem::path& log_path, const std::filesystem::path& svg_path) {
    std::ifstream in(log_path);
    require(static_cast<bool>(in), ErrorKind::Data, "cannot open " + log_path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto log = sim::TrajectoryLog::from_jsonl(buf.str());
    std::ofstream out(svg_path);
    require(static_cast<bool>(out), ErrorKind::Data, "cannot write " + svg_path.string());
    out << render_trajectory_svg(log);
}

}  // namespace evo::plot
