#pragma once

#include <filesystem>
#include <vector>

#include "ovg/autodiff.hpp"

namespace ovg {

/// Row-major H x W x C image with intensities in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c = 3, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const Image&) const = default;
};

Image resize_bilinear(const Image& src, int width, int height);

/// (H*W, C) matrix, one pixel per row in raster order.
ad::Matrix to_pixel_matrix(const Image& img);

/// Binary 8-bit PPM (P6) I/O.
Image load_ppm(const std::filesystem::path& path);
void save_ppm(const Image& img, const std::filesystem::path& path);

}  // namespace ovg
