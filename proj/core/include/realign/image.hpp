// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "realign/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace realign {

/// Owned 8-bit RGB raster, row-major, interleaved. All pixel-exact edits
/// operate on this type; codecs only convert to and from it.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // width * height * 3 bytes

    static Image filled(int width, int height, Rgb color);

    Rgb at(int x, int y) const {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        return Rgb{rgb[i], rgb[i + 1], rgb[i + 2]};
    }
    void set(int x, int y, Rgb color) {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        rgb[i] = color.r;
        rgb[i + 1] = color.g;
        rgb[i + 2] = color.b;
    }

    bool operator==(const Image&) const = default;
};

/// Decodes PNG or JPEG bytes. Throws UnreadableImage.
Image decode_image(std::span<const std::uint8_t> bytes);
Image load_image(const std::string& path);

/// Lossless PNG encoding; used for all tool-call attachments regardless of
/// the source format so attachment digests stay stable.
std::vector<std::uint8_t> encode_png(const Image& image);
void save_png(const std::string& path, const Image& image);

} // namespace realign
