// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "realign/image.hpp"
#include "realign/types.hpp"

namespace realign {

/// Pixel-space rectangle. Always within image bounds after clamping, with
/// width >= 1 and height >= 1.
struct PixelRect {
    int left = 0;
    int top = 0;
    int width = 1;
    int height = 1;

    int right() const { return left + width; }    // exclusive
    int bottom() const { return top + height; }   // exclusive
    bool contains(int x, int y) const {
        return x >= left && x < right() && y >= top && y < bottom();
    }
    bool operator==(const PixelRect&) const = default;
};

struct ImageSize {
    int width = 0;
    int height = 0;
};

/// Normalized -> pixel conversion with round-half-up and clamping:
/// left = round(x*W), top = round(y*H), width = max(1, round(w*W)),
/// height = max(1, round(h*H)), then clamped into the image.
PixelRect to_pixels(const NormalizedBox& box, ImageSize size);

/// The extended-crop rectangle: the object's PixelRect scaled about its
/// center by `factor` on each axis and clamped. Always contains the object's
/// PixelRect; factor 1 reproduces it exactly.
PixelRect extended_rect(const NormalizedBox& box, double factor, ImageSize size);

/// Pixels of the highlight stroke: the band of up to stroke_px pixels just
/// outside the object rectangle, clamped to the image. The object region
/// itself and everything beyond the band stay untouched.
PixelRect highlight_outer_rect(const NormalizedBox& box, int stroke_px, ImageSize size);

Image crop_object(const Image& image, const NormalizedBox& box);
Image crop_extended(const Image& image, const NormalizedBox& box, double extend_factor);
Image highlight_object(const Image& image, const NormalizedBox& box, int stroke_px,
                       Rgb stroke_color);

/// Applies one planned edit.
Image apply_edit(const Image& image, const ImageEditSpec& spec);

} // namespace realign
