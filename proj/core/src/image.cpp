// SPDX-License-Identifier: Apache-2.0
#include "realign/image.hpp"

#include "realign/errors.hpp"
#include "realign/util.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace realign {

Image Image::filled(int width, int height, Rgb color) {
    Image img;
    img.width = width;
    img.height = height;
    img.rgb.resize(static_cast<std::size_t>(width) * height * 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) img.set(x, y, color);
    return img;
}

Image decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw UnreadableImage("empty image data");
    const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1,
                         const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr = cv::imdecode(buffer, cv::IMREAD_COLOR);
    if (bgr.empty()) throw UnreadableImage("cannot decode image data");

    Image img;
    img.width = bgr.cols;
    img.height = bgr.rows;
    img.rgb.resize(static_cast<std::size_t>(bgr.cols) * bgr.rows * 3);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            const cv::Vec3b& px = row[x];
            img.set(x, y, Rgb{px[2], px[1], px[0]});
        }
    }
    return img;
}

Image load_image(const std::string& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const std::exception& e) {
        throw UnreadableImage(std::string("cannot read ") + path + ": " + e.what());
    }
    try {
        return decode_image(bytes);
    } catch (const UnreadableImage& e) {
        throw UnreadableImage(path + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.width <= 0 || image.height <= 0 ||
        image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3)
        throw ImageEncodingError("malformed image buffer");

    cv::Mat bgr(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x) {
            const Rgb px = image.at(x, y);
            row[x] = cv::Vec3b{px.b, px.g, px.r};
        }
    }
    std::vector<std::uint8_t> out;
    // Fixed compression level keeps encoded bytes stable run to run.
    if (!cv::imencode(".png", bgr, out, {cv::IMWRITE_PNG_COMPRESSION, 6}))
        throw ImageEncodingError("PNG encoding failed");
    return out;
}

void save_png(const std::string& path, const Image& image) {
    const auto bytes = encode_png(image);
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                             bytes.size()));
}

} // namespace realign
