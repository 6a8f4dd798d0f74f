#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace egosal {

/// Axis-aligned half-open pixel box [x0,x1) x [y0,y1).
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const {
        return empty() ? 0 : static_cast<long long>(width()) * height();
    }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    bool contains(const BoundingBox& o) const {
        return o.x0 >= x0 && o.y0 >= y0 && o.x1 <= x1 && o.y1 <= y1;
    }
    bool inside(int frame_w, int frame_h) const {
        return x0 >= 0 && y0 >= 0 && x1 <= frame_w && y1 <= frame_h && !empty();
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline BoundingBox intersect(const BoundingBox& a, const BoundingBox& b) {
    BoundingBox r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1),
                  std::min(a.y1, b.y1)};
    if (r.empty()) return {};
    return r;
}

/// Interleaved 8-bit image, row-major, `channels` samples per pixel.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    bool empty() const { return data.empty(); }

    std::uint8_t& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Binary mask, one byte per pixel (0 or 1).
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    long long count() const;
};

Image crop(const Image& img, const BoundingBox& box);

/// Mean sample value over all pixels and channels.
double mean_intensity(const Image& img);

// PNG codec (libpng). Gray and RGB only.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);
std::string encode_png(const Image& img);

}  // namespace egosal
