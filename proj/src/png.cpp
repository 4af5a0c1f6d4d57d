#include "sonoseg/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "sonoseg/error.hpp"

namespace sonoseg {

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), len);
}

struct Reader {
    const std::string* bytes;
    std::size_t pos = 0;
};

void read_bytes(png_structp png, png_bytep data, png_size_t len) {
    auto* r = static_cast<Reader*>(png_get_io_ptr(png));
    if (r->pos + len > r->bytes->size()) png_error(png, "truncated stream");
    std::memcpy(data, r->bytes->data() + r->pos, len);
    r->pos += len;
}

// libpng reports errors by longjmp; everything it touches is allocated
// before setjmp so no destructor is skipped.
bool encode_rows(const Grid<std::uint8_t>& image, std::string& out, std::vector<png_bytep>& rows) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, &out, append_bytes, nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.cols()), static_cast<png_uint_32>(image.rows()), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

bool decode_rows(Reader& reader, Grid<std::uint8_t>& out) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, &reader, read_bytes);
    png_read_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    const auto width = png_get_image_width(png, info), height = png_get_image_height(png, info);
    const bool gray8 = png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) == 8;
    if (gray8) {
        out = Grid<std::uint8_t>(height, width);
        png_bytepp rows = png_get_rows(png, info);
        for (std::size_t r = 0; r < height; ++r) std::memcpy(out.row(r).data(), rows[r], width);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return gray8;
}

}  // namespace

std::string encode_png(const Grid<std::uint8_t>& image) {
    require(!image.empty(), "cannot encode an empty image");
    Grid<std::uint8_t> copy = image;
    std::vector<png_bytep> rows(copy.rows());
    for (std::size_t r = 0; r < copy.rows(); ++r) rows[r] = copy.row(r).data();
    std::string out;
    if (!encode_rows(copy, out, rows)) throw Error("png: encoding failed");
    return out;
}

Grid<std::uint8_t> decode_png(const std::string& bytes) {
    require(bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0,
            "png: bad signature");
    Reader reader{&bytes};
    Grid<std::uint8_t> out;
    if (!decode_rows(reader, out)) throw Error("png: expected a valid 8-bit grayscale image");
    return out;
}

void write_png(const Grid<std::uint8_t>& image, const std::filesystem::path& path) {
    const std::string bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_mask_png(const Grid<unsigned char>& mask, const std::filesystem::path& path) {
    Grid<std::uint8_t> img(mask.rows(), mask.cols());
    std::transform(mask.begin(), mask.end(), img.begin(), [](unsigned char v) { return v ? 255 : 0; });
    write_png(img, path);
}

Grid<std::uint8_t> to_gray(const RealGrid& values) {
    Grid<std::uint8_t> img(values.rows(), values.cols(), 0);
    if (values.empty()) return img;
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn, hi = *mx;
    if (!(hi > lo)) return img;
    for (std::size_t i = 0; i < values.size(); ++i)
        img.data()[i] = static_cast<std::uint8_t>(std::lround((values.data()[i] - lo) / (hi - lo) * 255.0));
    return img;
}

}  // namespace sonoseg
