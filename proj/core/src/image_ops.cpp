// SPDX-License-Identifier: Apache-2.0
#include "realign/image_ops.hpp"

#include "realign/errors.hpp"
#include "realign/util.hpp"

#include <algorithm>

namespace realign {

namespace {

int clamp_int(long v, int lo, int hi) {
    return static_cast<int>(std::max<long>(lo, std::min<long>(hi, v)));
}

void require_image(const Image& image) {
    if (image.width <= 0 || image.height <= 0 ||
        image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3)
        throw UnreadableImage("malformed image buffer");
}

Image copy_rect(const Image& image, const PixelRect& rect) {
    Image out;
    out.width = rect.width;
    out.height = rect.height;
    out.rgb.resize(static_cast<std::size_t>(rect.width) * rect.height * 3);
    for (int y = 0; y < rect.height; ++y) {
        const auto* src = &image.rgb[(static_cast<std::size_t>(rect.top + y) * image.width +
                                      rect.left) * 3];
        auto* dst = &out.rgb[static_cast<std::size_t>(y) * rect.width * 3];
        std::copy(src, src + static_cast<std::size_t>(rect.width) * 3, dst);
    }
    return out;
}

} // namespace

PixelRect to_pixels(const NormalizedBox& box, ImageSize size) {
    if (size.width <= 0 || size.height <= 0) throw UsageError("to_pixels: empty image size");
    long left = round_half_up(box.x * size.width);
    long top = round_half_up(box.y * size.height);
    long width = std::max<long>(1, round_half_up(box.w * size.width));
    long height = std::max<long>(1, round_half_up(box.h * size.height));

    PixelRect rect;
    rect.left = clamp_int(left, 0, size.width - 1);
    rect.top = clamp_int(top, 0, size.height - 1);
    rect.width = clamp_int(width, 1, size.width - rect.left);
    rect.height = clamp_int(height, 1, size.height - rect.top);
    return rect;
}

PixelRect extended_rect(const NormalizedBox& box, double factor, ImageSize size) {
    if (factor < 1.0) throw UsageError("extend_factor must be >= 1");
    const PixelRect base = to_pixels(box, size);
    const double cx = base.left + base.width / 2.0;
    const double cy = base.top + base.height / 2.0;
    const double new_w = base.width * factor;
    const double new_h = base.height * factor;

    // Edge-based rounding keeps the base rect contained for any factor >= 1.
    long left = round_half_up(cx - new_w / 2.0);
    long top = round_half_up(cy - new_h / 2.0);
    long right = round_half_up(cx + new_w / 2.0);
    long bottom = round_half_up(cy + new_h / 2.0);

    left = std::min<long>(left, base.left);
    top = std::min<long>(top, base.top);
    right = std::max<long>(right, base.right());
    bottom = std::max<long>(bottom, base.bottom());

    PixelRect rect;
    rect.left = clamp_int(left, 0, size.width - 1);
    rect.top = clamp_int(top, 0, size.height - 1);
    rect.width = clamp_int(right - rect.left, 1, size.width - rect.left);
    rect.height = clamp_int(bottom - rect.top, 1, size.height - rect.top);
    return rect;
}

PixelRect highlight_outer_rect(const NormalizedBox& box, int stroke_px, ImageSize size) {
    if (stroke_px < 1) throw UsageError("stroke_px must be >= 1");
    const PixelRect base = to_pixels(box, size);
    PixelRect rect;
    rect.left = clamp_int(static_cast<long>(base.left) - stroke_px, 0, size.width - 1);
    rect.top = clamp_int(static_cast<long>(base.top) - stroke_px, 0, size.height - 1);
    const long right = std::min<long>(static_cast<long>(base.right()) + stroke_px, size.width);
    const long bottom = std::min<long>(static_cast<long>(base.bottom()) + stroke_px, size.height);
    rect.width = clamp_int(right - rect.left, 1, size.width - rect.left);
    rect.height = clamp_int(bottom - rect.top, 1, size.height - rect.top);
    return rect;
}

Image crop_object(const Image& image, const NormalizedBox& box) {
    require_image(image);
    return copy_rect(image, to_pixels(box, ImageSize{image.width, image.height}));
}

Image crop_extended(const Image& image, const NormalizedBox& box, double extend_factor) {
    require_image(image);
    return copy_rect(image, extended_rect(box, extend_factor,
                                          ImageSize{image.width, image.height}));
}

Image highlight_object(const Image& image, const NormalizedBox& box, int stroke_px,
                       Rgb stroke_color) {
    require_image(image);
    const ImageSize size{image.width, image.height};
    const PixelRect inner = to_pixels(box, size);
    const PixelRect outer = highlight_outer_rect(box, stroke_px, size);

    Image out = image;
    for (int y = outer.top; y < outer.bottom(); ++y) {
        for (int x = outer.left; x < outer.right(); ++x) {
            if (!inner.contains(x, y)) out.set(x, y, stroke_color);
        }
    }
    return out;
}

Image apply_edit(const Image& image, const ImageEditSpec& spec) {
    switch (spec.mode) {
        case ImageEditMode::Crop: return crop_object(image, spec.box);
        case ImageEditMode::ExtendedCrop: return crop_extended(image, spec.box, spec.extend_factor);
        case ImageEditMode::Highlight:
            return highlight_object(image, spec.box, spec.stroke_px, spec.stroke_color);
    }
    throw UsageError("invalid edit mode");
}

} // namespace realign
