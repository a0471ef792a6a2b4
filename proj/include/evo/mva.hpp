#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace evo::mva {

struct Rgb {
    std::uint8_t r = 255;
    std::uint8_t g = 255;
    std::uint8_t b = 255;
    bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kWhite{255, 255, 255};

/// Row-major 8-bit RGB raster.
class RasterImage {
public:
    RasterImage() = default;
    /// Throws Usage unless width, height >= 1.
    RasterImage(std::size_t width, std::size_t height, Rgb fill = kWhite);
    /// Throws Usage unless pixels.size() == 3 * width * height.
    RasterImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    const std::vector<std::uint8_t>& bytes() const noexcept { return pixels_; }

    Rgb at(std::size_t x, std::size_t y) const;
    void set(std::size_t x, std::size_t y, Rgb c);

    bool operator==(const RasterImage&) const = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

struct MvaParams {
    std::optional<double> angle;  // degrees in [-180, 180]; drawn from `seed` when unset
    double downsample_factor = 0.5;
    Rgb pad = kWhite;
    std::uint32_t seed = 0;

    void validate() const;
};

/// Bilinear resize to max(1, round(factor * dim)) on each axis, sampling at
/// pixel centres. Throws Usage unless 0 < factor <= 1.
RasterImage downsample(const RasterImage& img, double factor);

/// Counter-clockwise rotation (positive angle) onto a canvas grown to the
/// rotated bounding box; uncovered pixels take `pad`. Multiples of 90
/// degrees are exact pixel permutations. Throws Usage outside [-180, 180].
RasterImage rotate(const RasterImage& img, double angle_deg, Rgb pad);

/// Side-by-side concatenation, bottom-padded to the tallest image.
RasterImage hstack(const std::vector<RasterImage>& imgs, Rgb pad);

/// Angle actually used by build_composite for these params.
double resolve_angle(const MvaParams& params);

/// [original | downsampled | rotated] composite.
RasterImage build_composite(const RasterImage& img, const MvaParams& params);

RasterImage read_png(const std::filesystem::path& path);
void write_png(const RasterImage& img, const std::filesystem::path& path);

}  // namespace evo::mva
