#include "cghair/image.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "cghair/error.h"

namespace cghair {

Image::Image(std::size_t w, std::size_t h, const Vec3& fill) : width(w), height(h), rgb(w * h * 3) {
    for (std::size_t i = 0; i < w * h; ++i) {
        rgb[3 * i] = fill.x();
        rgb[3 * i + 1] = fill.y();
        rgb[3 * i + 2] = fill.z();
    }
}

Vec3 Image::pixel(std::size_t x, std::size_t y) const {
    const std::size_t i = 3 * (y * width + x);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void Image::set(std::size_t x, std::size_t y, const Vec3& c) {
    const std::size_t i = 3 * (y * width + x);
    rgb[i] = c.x();
    rgb[i + 1] = c.y();
    rgb[i + 2] = c.z();
}

std::vector<std::uint8_t> write_ppm(const Image& img) {
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.rgb.size());
    for (double v : img.rgb) out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    return out;
}

Image parse_ppm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && (std::isspace(bytes[pos]) || bytes[pos] == '#')) {
            if (bytes[pos] == '#')
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            else
                ++pos;
        }
        std::string tok;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
        return tok;
    };
    if (token() != "P6") throw Error(ErrorCode::BadMagic, "not a binary PPM");
    const std::size_t w = std::stoul(token());
    const std::size_t h = std::stoul(token());
    if (std::stoul(token()) != 255) throw Error(ErrorCode::InvalidArgument, "only 8-bit PPM is supported");
    ++pos;
    if (bytes.size() < pos + w * h * 3) throw Error(ErrorCode::TruncatedFile, "PPM raster is short");
    Image img(w, h);
    for (std::size_t i = 0; i < w * h * 3; ++i) img.rgb[i] = static_cast<double>(bytes[pos + i]) / 255.0;
    return img;
}

}  // namespace cghair
