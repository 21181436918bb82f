// 8-bit RGB images and lossless PNG round trips.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace pignav {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;  // RGB, row-major

    Image() = default;
    Image(int w, int h, std::array<uint8_t, 3> fill = {0, 0, 0});

    uint8_t* px(int x, int y) { return data.data() + 3 * (static_cast<size_t>(y) * width + x); }
    const uint8_t* px(int x, int y) const {
        return data.data() + 3 * (static_cast<size_t>(y) * width + x);
    }

    bool operator==(const Image&) const = default;
};

struct ImageIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_png(const std::filesystem::path& file, const Image& img);

/// Reads a PNG as 8-bit RGB (palette/gray expanded, alpha stripped).
Image read_png(const std::filesystem::path& file);

/// Mean absolute pixel difference in [0, 1]; images must share dimensions.
double mean_abs_diff(const Image& a, const Image& b);

}  // namespace pignav
