#include "pnpqn/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "pnpqn/errors.hpp"

namespace pnpqn {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

Image load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("load_png: cannot open '" + path + "'");

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        throw IoError("load_png: '" + path + "' is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                             nullptr);
    if (!png) throw IoError("load_png: libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("load_png: libpng initialization failed");
    }
    std::vector<png_bytep> row_ptrs;
    std::vector<png_byte> buffer;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("load_png: libpng failed decoding '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_swap(png); // stored big-endian; want host LE u16
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    const int out_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * h);
    row_ptrs.resize(h);
    for (png_uint_32 i = 0; i < h; ++i) row_ptrs[i] = buffer.data() + i * rowbytes;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const int color_channels = channels >= 3 ? 3 : 1; // drop alpha if present
    Image img(color_channels, static_cast<int>(h), static_cast<int>(w));
    const double scale = out_depth == 16 ? 65535.0 : 255.0;
    for (png_uint_32 i = 0; i < h; ++i) {
        const png_byte* row = row_ptrs[i];
        for (png_uint_32 j = 0; j < w; ++j) {
            for (int c = 0; c < color_channels; ++c) {
                double v;
                if (out_depth == 16) {
                    const std::size_t k = (j * channels + c) * 2;
                    v = static_cast<double>(row[k] | (row[k + 1] << 8));
                } else {
                    v = static_cast<double>(row[j * channels + c]);
                }
                img(c, static_cast<int>(i), static_cast<int>(j)) = v / scale;
            }
        }
    }
    return img;
}

void save_png(const std::string& path, const Image& img) {
    if (img.channels() != 1 && img.channels() != 3)
        throw IoError("save_png: only 1- or 3-channel images are supported");
    if (img.empty()) throw IoError("save_png: empty image");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("save_png: cannot open '" + path + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                              nullptr);
    if (!png) throw IoError("save_png: libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("save_png: libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("save_png: libpng failed encoding '" + path + "'");
    }
    png_init_io(png, fp.get());

    const int h = img.height(), w = img.width(), nc = img.channels();
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 nc == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<std::size_t>(w) * nc);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j)
            for (int c = 0; c < nc; ++c)
                row[static_cast<std::size_t>(j) * nc + c] = static_cast<png_byte>(
                    std::lround(std::clamp(img(c, i, j), 0.0, 1.0) * 255.0));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace pnpqn
