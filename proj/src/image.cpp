#include "trajmatch/image.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>

#include <png.h>

#include "trajmatch/error.hpp"

namespace trajmatch {

RgbImage::RgbImage(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw Error("image dimensions must be non-negative");
    data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

std::size_t RgbImage::count_colored() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        if (data_[i] != 255 || data_[i + 1] != 255 || data_[i + 2] != 255) ++n;
    }
    return n;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error("cannot open '" + path.string() + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng: failed writing '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const auto* base = image.bytes().data();
    for (int y = 0; y < image.height(); ++y) {
        png_write_row(png, const_cast<png_bytep>(base + static_cast<std::size_t>(y) * image.width() * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error("cannot open '" + path.string() + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("libpng: out of memory");
    }
    RgbImage image;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("libpng: failed reading '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    image = RgbImage(w, h);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, image.bytes().data() + static_cast<std::size_t>(y) * w * 3, nullptr);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

RgbImage resample_nearest_colored(const RgbImage& src, int width, int height) {
    if (width <= 0 || height <= 0) throw Error("resample target must be positive");
    if (src.width() == width && src.height() == height) return src;
    RgbImage out(width, height);
    if (src.empty()) return out;

    auto block = [](int i, int src_n, int dst_n) {
        const long lo = static_cast<long>(i) * src_n / dst_n;
        long hi = static_cast<long>(i + 1) * src_n / dst_n;
        if (hi <= lo) hi = lo + 1;
        return std::pair<int, int>(static_cast<int>(lo), static_cast<int>(std::min<long>(hi, src_n)));
    };

    for (int oy = 0; oy < height; ++oy) {
        const auto [y0, y1] = block(oy, src.height(), height);
        for (int ox = 0; ox < width; ++ox) {
            const auto [x0, x1] = block(ox, src.width(), width);
            Rgb c = kWhite;
            for (int y = y0; y < y1 && c == kWhite; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const Rgb p = src.at(x, y);
                    if (p != kWhite) {
                        c = p;
                        break;
                    }
                }
            }
            out.set(ox, oy, c);
        }
    }
    return out;
}

}  // namespace trajmatch
