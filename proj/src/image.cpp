#include "egosal/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <numeric>

#include "egosal/error.hpp"

namespace egosal {

long long Mask::count() const {
    return std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; });
}

Image crop(const Image& img, const BoundingBox& box) {
    Image out(box.width(), box.height(), img.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(box.width()) * img.channels;
    for (int y = 0; y < box.height(); ++y) {
        const auto* src = &img.data[(static_cast<std::size_t>(box.y0 + y) * img.width + box.x0) *
                                    img.channels];
        std::memcpy(&out.data[static_cast<std::size_t>(y) * row_bytes], src, row_bytes);
    }
    return out;
}

double mean_intensity(const Image& img) {
    if (img.data.empty()) return 0.0;
    const double sum = std::accumulate(img.data.begin(), img.data.end(), 0.0);
    return sum / static_cast<double>(img.data.size());
}

namespace {

png_uint_32 format_for(int channels) {
    switch (channels) {
        case 1: return PNG_FORMAT_GRAY;
        case 3: return PNG_FORMAT_RGB;
        default: throw Error(Errc::IoError, "unsupported channel count " + std::to_string(channels));
    }
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    png_image header;
    std::memset(&header, 0, sizeof(header));
    header.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&header, path.c_str())) {
        throw Error(Errc::IoError, "cannot read " + path.string() + ": " + header.message);
    }
    const int channels = (header.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
    header.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    Image img(static_cast<int>(header.width), static_cast<int>(header.height), channels);
    if (!png_image_finish_read(&header, nullptr, img.data.data(), 0, nullptr)) {
        png_image_free(&header);
        throw Error(Errc::IoError, "cannot decode " + path.string() + ": " + header.message);
    }
    return img;
}

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), length);
}

void no_flush(png_structp) {}

[[noreturn]] void png_fail(png_structp, png_const_charp message) {
    throw Error(Errc::IoError, std::string("png encode failed: ") + message);
}

}  // namespace

// Fast zlib level with the Sub filter: frames and patches are written far more
// often than they are archived, and this is several times faster than the defaults.
std::string encode_png(const Image& img) {
    const int color = img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    format_for(img.channels);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(Errc::IoError, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    std::string out;
    try {
        png_set_error_fn(png, nullptr, png_fail, nullptr);
        png_set_write_fn(png, &out, append_bytes, no_flush);
        png_set_compression_level(png, 1);
        png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
        png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8, color,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
        for (int y = 0; y < img.height; ++y) {
            png_write_row(png, const_cast<png_bytep>(img.data.data() + y * stride));
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
    const std::string bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::DiskWriteFailure, "cannot write " + path.string());
}

}  // namespace egosal
