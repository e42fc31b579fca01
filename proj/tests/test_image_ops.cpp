// SPDX-License-Identifier: Apache-2.0
#include "realign/errors.hpp"
#include "realign/image.hpp"
#include "realign/image_ops.hpp"
#include "realign/util.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace realign;
using realign::test::checkerboard;

namespace {

// ---------------------------------------------------------------------------
// Reference implementations. Deliberately naive, pixel-by-pixel, and
// independent of the library's clamping/rounding code paths: geometry is
// recomputed here from first principles (round-half-up on each quantity,
// clamp last).
// ---------------------------------------------------------------------------

long ref_round(double v) { return static_cast<long>(std::floor(v + 0.5)); }

struct RefRect {
    long left, top, width, height;
};

RefRect ref_to_pixels(const NormalizedBox& box, int W, int H) {
    long left = ref_round(box.x * W);
    long top = ref_round(box.y * H);
    long width = std::max<long>(1, ref_round(box.w * W));
    long height = std::max<long>(1, ref_round(box.h * H));
    if (left < 0) left = 0;
    if (top < 0) top = 0;
    if (left > W - 1) left = W - 1;
    if (top > H - 1) top = H - 1;
    if (width > W - left) width = W - left;
    if (height > H - top) height = H - top;
    if (width < 1) width = 1;
    if (height < 1) height = 1;
    return {left, top, width, height};
}

Image ref_crop(const Image& src, const RefRect& r) {
    Image out;
    out.width = static_cast<int>(r.width);
    out.height = static_cast<int>(r.height);
    out.rgb.resize(static_cast<std::size_t>(r.width) * r.height * 3);
    for (long y = 0; y < r.height; ++y)
        for (long x = 0; x < r.width; ++x)
            out.set(static_cast<int>(x), static_cast<int>(y),
                    src.at(static_cast<int>(r.left + x), static_cast<int>(r.top + y)));
    return out;
}

RefRect ref_extended(const NormalizedBox& box, double factor, int W, int H) {
    const RefRect base = ref_to_pixels(box, W, H);
    const double cx = base.left + base.width / 2.0;
    const double cy = base.top + base.height / 2.0;
    long left = ref_round(cx - base.width * factor / 2.0);
    long top = ref_round(cy - base.height * factor / 2.0);
    long right = ref_round(cx + base.width * factor / 2.0);
    long bottom = ref_round(cy + base.height * factor / 2.0);
    if (left > base.left) left = base.left;
    if (top > base.top) top = base.top;
    if (right < base.left + base.width) right = base.left + base.width;
    if (bottom < base.top + base.height) bottom = base.top + base.height;
    if (left < 0) left = 0;
    if (top < 0) top = 0;
    if (right > W) right = W;
    if (bottom > H) bottom = H;
    return {left, top, right - left, bottom - top};
}

Image ref_highlight(const Image& src, const NormalizedBox& box, int stroke, Rgb color) {
    const RefRect inner = ref_to_pixels(box, src.width, src.height);
    Image out = src;
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            const bool in_outer = x >= inner.left - stroke && x < inner.left + inner.width + stroke &&
                                  y >= inner.top - stroke && y < inner.top + inner.height + stroke;
            const bool in_inner = x >= inner.left && x < inner.left + inner.width &&
                                  y >= inner.top && y < inner.top + inner.height;
            if (in_outer && !in_inner) out.set(x, y, color);
        }
    }
    return out;
}

Image random_image(Rng& rng, int w, int h) {
    Image img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (auto& byte : img.rgb) byte = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

} // namespace

TEST_CASE("to_pixels: exact arithmetic and clamping") {
    CHECK(to_pixels({0.25, 0.25, 0.5, 0.5}, {1000, 800}) == PixelRect{250, 200, 500, 400});
    CHECK(to_pixels({0.68, 0.52, 0.15, 0.05}, {1000, 1000}) == PixelRect{680, 520, 150, 50});
    // degenerate corner box on a tiny image clamps to a 1x1 rect inside bounds
    const PixelRect tiny = to_pixels({0.999, 0.999, 0.001, 0.001}, {10, 10});
    CHECK(tiny == PixelRect{9, 9, 1, 1});
}

TEST_CASE("crop_object: uniform, quadrant oracle, identity") {
    const Image uniform = Image::filled(40, 30, Rgb{9, 99, 199});
    const Image crop = crop_object(uniform, {0.1, 0.2, 0.5, 0.5});
    CHECK(crop.width == 20);
    CHECK(crop.height == 15);
    for (int y = 0; y < crop.height; ++y)
        for (int x = 0; x < crop.width; ++x) CHECK(crop.at(x, y) == Rgb{9, 99, 199});

    // checkerboard quadrant is byte-equal to the brute-force copy
    const Image board = checkerboard(8, 8);
    const Image quadrant = crop_object(board, {0.0, 0.0, 0.5, 0.5});
    CHECK(quadrant == ref_crop(board, ref_to_pixels({0.0, 0.0, 0.5, 0.5}, 8, 8)));
    CHECK(quadrant.width == 4);
    CHECK(quadrant.height == 4);

    CHECK(crop_object(board, {0.0, 0.0, 1.0, 1.0}) == board);
}

TEST_CASE("crop_extended: center scaling, corner clamp, factor one") {
    Rng rng(1);
    const Image img = random_image(rng, 1000, 1000);
    const PixelRect centered = extended_rect({0.4, 0.4, 0.2, 0.2}, 1.5, {1000, 1000});
    CHECK(centered == PixelRect{350, 350, 300, 300});

    const PixelRect corner = extended_rect({0.0, 0.0, 0.2, 0.2}, 1.5, {1000, 1000});
    CHECK(corner == PixelRect{0, 0, 250, 250});

    const NormalizedBox box{0.33, 0.21, 0.17, 0.4};
    CHECK(crop_extended(img, box, 1.0) == crop_object(img, box));
}

TEST_CASE("highlight: stroke band exact, interior preserved, full clamp") {
    const Image white = Image::filled(100, 100, Rgb{255, 255, 255});
    const NormalizedBox box{0.25, 0.25, 0.5, 0.5};
    const Image marked = highlight_object(white, box, 1, Rgb{255, 0, 0});
    const Image reference = ref_highlight(white, box, 1, Rgb{255, 0, 0});
    CHECK(marked == reference);

    // count the red pixels: one-pixel band just outside a 50x50 rect
    long red = 0;
    for (int y = 0; y < 100; ++y)
        for (int x = 0; x < 100; ++x)
            if (marked.at(x, y) == Rgb{255, 0, 0}) ++red;
    CHECK(red == 52 * 52 - 50 * 50);  // one-pixel band around the 50x50 object rect
    CHECK(marked.at(50, 50) == Rgb{255, 255, 255});  // interior untouched
    CHECK(marked.width == 100);
    CHECK(marked.height == 100);

    // stroke wider than the image: fully clamped, no out-of-bounds writes
    const Image tiny = Image::filled(5, 5, Rgb{1, 2, 3});
    const Image clamped = highlight_object(tiny, {0.2, 0.2, 0.6, 0.6}, 50, Rgb{255, 0, 0});
    CHECK(clamped == ref_highlight(tiny, {0.2, 0.2, 0.6, 0.6}, 50, Rgb{255, 0, 0}));
}

TEST_CASE("randomized oracle equivalence over 50 cases with clamped corners") {
    Rng rng(20240511);
    for (int i = 0; i < 50; ++i) {
        const int w = 8 + static_cast<int>(rng.below(120));
        const int h = 8 + static_cast<int>(rng.below(120));
        const Image img = random_image(rng, w, h);

        NormalizedBox box;
        if (i % 5 == 0) {
            // corner-hugging boxes to force clamping
            box = NormalizedBox{0.9 + rng.uniform01() * 0.09, 0.9 + rng.uniform01() * 0.09,
                                0.005 + rng.uniform01() * 0.2, 0.005 + rng.uniform01() * 0.2};
            if (box.x + box.w > 1.0) box.w = 1.0 - box.x;
            if (box.y + box.h > 1.0) box.h = 1.0 - box.y;
            if (box.w <= 0) box.w = 0.001;
            if (box.h <= 0) box.h = 0.001;
        } else {
            box.x = rng.uniform01() * 0.7;
            box.y = rng.uniform01() * 0.7;
            box.w = 0.01 + rng.uniform01() * (1.0 - box.x - 0.01);
            box.h = 0.01 + rng.uniform01() * (1.0 - box.y - 0.01);
        }
        const double factor = 1.0 + rng.uniform01() * 2.0;
        const int stroke = 1 + static_cast<int>(rng.below(6));

        CHECK(crop_object(img, box) == ref_crop(img, ref_to_pixels(box, w, h)));
        CHECK(crop_extended(img, box, factor) == ref_crop(img, ref_extended(box, factor, w, h)));
        CHECK(highlight_object(img, box, stroke, Rgb{255, 0, 0}) ==
              ref_highlight(img, box, stroke, Rgb{255, 0, 0}));

        // containment: the extended rect covers the object rect
        const PixelRect base = to_pixels(box, {w, h});
        const PixelRect ext = extended_rect(box, factor, {w, h});
        CHECK(ext.left <= base.left);
        CHECK(ext.top <= base.top);
        CHECK(ext.right() >= base.right());
        CHECK(ext.bottom() >= base.bottom());
    }
}

TEST_CASE("ops are pure: repeated calls are byte-identical") {
    Rng rng(77);
    const Image img = random_image(rng, 64, 48);
    const NormalizedBox box{0.1, 0.2, 0.4, 0.3};
    CHECK(crop_object(img, box) == crop_object(img, box));
    CHECK(crop_extended(img, box, 1.7) == crop_extended(img, box, 1.7));
    CHECK(highlight_object(img, box, 3, Rgb{255, 0, 0}) ==
          highlight_object(img, box, 3, Rgb{255, 0, 0}));
    CHECK(encode_png(img) == encode_png(img));
}

TEST_CASE("png round-trip and error paths") {
    Rng rng(5);
    const Image img = random_image(rng, 33, 17);
    const auto bytes = encode_png(img);
    CHECK(decode_image(bytes) == img);
    CHECK_THROWS_AS(decode_image({}), UnreadableImage);
    const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5};
    CHECK_THROWS_AS(decode_image(junk), UnreadableImage);
    CHECK_THROWS_AS(load_image("/nonexistent/image.png"), UnreadableImage);
}
