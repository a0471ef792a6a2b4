#include "evo/mva.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "evo/errors.hpp"
#include "evo/rng.hpp"

namespace evo::mva {

RasterImage::RasterImage(std::size_t width, std::size_t height, Rgb fill) : width_(width), height_(height) {
    require(width >= 1 && height >= 1, ErrorKind::Usage, "image dimensions must be positive");
    pixels_.resize(width * height * 3);
    for (std::size_t i = 0; i < width * height; ++i) {
        pixels_[3 * i] = fill.r;
        pixels_[3 * i + 1] = fill.g;
        pixels_[3 * i + 2] = fill.b;
    }
}

RasterImage::RasterImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    require(width >= 1 && height >= 1, ErrorKind::Usage, "image dimensions must be positive");
    require(pixels_.size() == width * height * 3, ErrorKind::Usage,
            fmt::format("pixel buffer holds {} bytes, expected {}", pixels_.size(), width * height * 3));
}

Rgb RasterImage::at(std::size_t x, std::size_t y) const {
    const std::size_t i = 3 * (y * width_ + x);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void RasterImage::set(std::size_t x, std::size_t y, Rgb c) {
    const std::size_t i = 3 * (y * width_ + x);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
}

void MvaParams::validate() const {
    if (angle) require(*angle >= -180.0 && *angle <= 180.0, ErrorKind::Usage, "rotation angle outside [-180, 180]");
    require(downsample_factor > 0.0 && downsample_factor <= 1.0, ErrorKind::Usage,
            "downsample factor must be in (0, 1]");
}

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0)); }

struct Sample {
    double r, g, b;
};

// Bilinear lookup at continuous pixel coordinates, clamped to the border.
Sample bilinear(const RasterImage& img, double x, double y) {
    const double cx = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
    const double cy = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
    const auto x0 = static_cast<std::size_t>(std::floor(cx));
    const auto y0 = static_cast<std::size_t>(std::floor(cy));
    const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = cx - static_cast<double>(x0);
    const double fy = cy - static_cast<double>(y0);
    auto mix = [&](auto channel) {
        const double top = channel(img.at(x0, y0)) * (1 - fx) + channel(img.at(x1, y0)) * fx;
        const double bot = channel(img.at(x0, y1)) * (1 - fx) + channel(img.at(x1, y1)) * fx;
        return top * (1 - fy) + bot * fy;
    };
    return {mix([](Rgb c) { return double(c.r); }), mix([](Rgb c) { return double(c.g); }),
            mix([](Rgb c) { return double(c.b); })};
}

std::size_t scaled(std::size_t dim, double factor) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(factor * static_cast<double>(dim))));
}

}  // namespace

RasterImage downsample(const RasterImage& img, double factor) {
    require(factor > 0.0 && factor <= 1.0, ErrorKind::Usage, "downsample factor must be in (0, 1]");
    if (factor == 1.0) return img;
    const std::size_t w = scaled(img.width(), factor);
    const std::size_t h = scaled(img.height(), factor);
    const double sx = static_cast<double>(img.width()) / static_cast<double>(w);
    const double sy = static_cast<double>(img.height()) / static_cast<double>(h);
    RasterImage out(w, h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const auto s = bilinear(img, (static_cast<double>(x) + 0.5) * sx - 0.5,
                                    (static_cast<double>(y) + 0.5) * sy - 0.5);
            out.set(x, y, {to_byte(s.r), to_byte(s.g), to_byte(s.b)});
        }
    }
    return out;
}

namespace {

RasterImage rotate_quarter_turns(const RasterImage& img, int turns) {
    const std::size_t w = img.width();
    const std::size_t h = img.height();
    turns = ((turns % 4) + 4) % 4;
    if (turns == 0) return img;
    if (turns == 2) {
        RasterImage out(w, h);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) out.set(w - 1 - x, h - 1 - y, img.at(x, y));
        return out;
    }
    RasterImage out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (turns == 1)
                out.set(y, w - 1 - x, img.at(x, y));  // counter-clockwise
            else
                out.set(h - 1 - y, x, img.at(x, y));
        }
    }
    return out;
}

}  // namespace

RasterImage rotate(const RasterImage& img, double angle_deg, Rgb pad) {
    require(angle_deg >= -180.0 && angle_deg <= 180.0, ErrorKind::Usage, "rotation angle outside [-180, 180]");
    if (std::fmod(angle_deg, 90.0) == 0.0) return rotate_quarter_turns(img, static_cast<int>(angle_deg / 90.0));

    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double w = static_cast<double>(img.width());
    const double h = static_cast<double>(img.height());
    constexpr double slack = 1e-9;
    const auto out_w = static_cast<std::size_t>(std::ceil(w * std::abs(c) + h * std::abs(s) - slack));
    const auto out_h = static_cast<std::size_t>(std::ceil(w * std::abs(s) + h * std::abs(c) - slack));
    RasterImage out(std::max<std::size_t>(1, out_w), std::max<std::size_t>(1, out_h), pad);

    const double icx = w / 2.0;
    const double icy = h / 2.0;
    const double ocx = static_cast<double>(out.width()) / 2.0;
    const double ocy = static_cast<double>(out.height()) / 2.0;
    for (std::size_t y = 0; y < out.height(); ++y) {
        for (std::size_t x = 0; x < out.width(); ++x) {
            // Image y grows downward, so a counter-clockwise turn on screen
            // uses the transposed rotation in these coordinates.
            const double dx = static_cast<double>(x) + 0.5 - ocx;
            const double dy = static_cast<double>(y) + 0.5 - ocy;
            const double sx = c * dx - s * dy + icx;
            const double sy = s * dx + c * dy + icy;
            if (sx < 0.0 || sy < 0.0 || sx > w || sy > h) continue;
            const auto p = bilinear(img, sx - 0.5, sy - 0.5);
            out.set(x, y, {to_byte(p.r), to_byte(p.g), to_byte(p.b)});
        }
    }
    return out;
}

RasterImage hstack(const std::vector<RasterImage>& imgs, Rgb pad) {
    require(!imgs.empty(), ErrorKind::Usage, "hstack needs at least one image");
    std::size_t width = 0, height = 0;
    for (const auto& im : imgs) {
        width += im.width();
        height = std::max(height, im.height());
    }
    RasterImage out(width, height, pad);
    std::size_t x0 = 0;
    for (const auto& im : imgs) {
        for (std::size_t y = 0; y < im.height(); ++y)
            for (std::size_t x = 0; x < im.width(); ++x) out.set(x0 + x, y, im.at(x, y));
        x0 += im.width();
    }
    return out;
}

double resolve_angle(const MvaParams& params) {
    if (params.angle) return *params.angle;
    Rng rng(params.seed);
    return rng.uniform(-180.0, 180.0);
}

RasterImage build_composite(const RasterImage& img, const MvaParams& params) {
    params.validate();
    return hstack({img, downsample(img, params.downsample_factor), rotate(img, resolve_angle(params), params.pad)},
                  params.pad);
}

}  // namespace evo::mva
