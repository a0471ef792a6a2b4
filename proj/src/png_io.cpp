#include <cstring>

#include <png.h>

#include "evo/errors.hpp"
#include "evo/mva.hpp"

namespace evo::mva {

RasterImage read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        fail(ErrorKind::Data, "cannot read PNG " + path.string() + ": " + image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        fail(ErrorKind::Data, "cannot decode PNG " + path.string() + ": " + image.message);
    }
    return RasterImage(image.width, image.height, std::move(pixels));
}

void write_png(const RasterImage& img, const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.bytes().data(), 0, nullptr))
        fail(ErrorKind::Data, "cannot write PNG " + path.string() + ": " + image.message);
}

}  // namespace evo::mva
