#include "core/png_io.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <png.h>

namespace sg {

namespace {

    struct FileCloser {
        void operator()(FILE* f) const {
            if (f) {
                std::fclose(f);
            }
        }
    };
    using FilePtr = std::unique_ptr<FILE, FileCloser>;

    void write_png(const std::filesystem::path& file, int width, int height, int bit_depth,
                   int color_type, const uint8_t* pixels, size_t row_bytes) {
        FilePtr fp(std::fopen(file.string().c_str(), "wb"));
        if (!fp) {
            throw IoError("cannot write " + file.string());
        }
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        png_infop info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info) {
            png_destroy_write_struct(&png, &info);
            throw IoError("libpng initialization failed");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw IoError("libpng failure while writing " + file.string());
        }
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                     bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        if (bit_depth == 16) {
            png_set_swap(png); // in-memory samples are little-endian
        }
        std::vector<png_bytep> rows(static_cast<size_t>(height));
        for (int y = 0; y < height; ++y) {
            rows[y] = const_cast<png_bytep>(pixels + static_cast<size_t>(y) * row_bytes);
        }
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }

    struct PngReader {
        png_structp png = nullptr;
        png_infop info = nullptr;
        ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
    };

    // Decodes to 16-bit-per-sample grayscale regardless of source format.
    void read_png_gray(const std::filesystem::path& file, int& width, int& height,
                       std::vector<uint16_t>& samples) {
        FilePtr fp(std::fopen(file.string().c_str(), "rb"));
        if (!fp) {
            throw IoError("cannot open " + file.string());
        }
        PngReader r;
        r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        r.info = r.png ? png_create_info_struct(r.png) : nullptr;
        if (!r.png || !r.info) {
            throw IoError("libpng initialization failed");
        }
        if (setjmp(png_jmpbuf(r.png))) {
            throw ParseError("libpng failure while reading " + file.string());
        }
        png_init_io(r.png, fp.get());
        png_read_info(r.png, r.info);

        width = static_cast<int>(png_get_image_width(r.png, r.info));
        height = static_cast<int>(png_get_image_height(r.png, r.info));
        const int color = png_get_color_type(r.png, r.info);
        const int depth = png_get_bit_depth(r.png, r.info);

        if (color & PNG_COLOR_MASK_ALPHA) {
            png_set_strip_alpha(r.png);
        }
        if (color == PNG_COLOR_TYPE_PALETTE) {
            png_set_palette_to_rgb(r.png);
        }
        if ((color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
             color == PNG_COLOR_TYPE_PALETTE)) {
            png_set_rgb_to_gray_fixed(r.png, 1, -1, -1);
        }
        if (depth < 8) {
            png_set_expand_gray_1_2_4_to_8(r.png);
        }
        png_set_swap(r.png);
        png_read_update_info(r.png, r.info);
        const int out_depth = png_get_bit_depth(r.png, r.info);

        samples.assign(static_cast<size_t>(width) * height, 0);
        if (out_depth == 16) {
            std::vector<png_bytep> rows(static_cast<size_t>(height));
            for (int y = 0; y < height; ++y) {
                rows[y] = reinterpret_cast<png_bytep>(samples.data() +
                                                      static_cast<size_t>(y) * width);
            }
            png_read_image(r.png, rows.data());
        } else {
            std::vector<uint8_t> bytes(static_cast<size_t>(width) * height);
            std::vector<png_bytep> rows(static_cast<size_t>(height));
            for (int y = 0; y < height; ++y) {
                rows[y] = bytes.data() + static_cast<size_t>(y) * width;
            }
            png_read_image(r.png, rows.data());
            for (size_t i = 0; i < bytes.size(); ++i) {
                samples[i] = bytes[i];
            }
        }
        png_read_end(r.png, nullptr);
    }

    void mem_write_cb(png_structp png, png_bytep data, png_size_t length) {
        auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
        out->insert(out->end(), data, data + length);
    }

    void mem_flush_cb(png_structp) {}

} // namespace

void write_png_gray8(const std::filesystem::path& file, int width, int height,
                     const uint8_t* pixels) {
    write_png(file, width, height, 8, PNG_COLOR_TYPE_GRAY, pixels, static_cast<size_t>(width));
}

void write_png_rgb8(const std::filesystem::path& file, int width, int height,
                    const uint8_t* pixels) {
    write_png(file, width, height, 8, PNG_COLOR_TYPE_RGB, pixels,
              static_cast<size_t>(width) * 3);
}

void write_png_gray16(const std::filesystem::path& file, int width, int height,
                      const uint16_t* pixels) {
    write_png(file, width, height, 16, PNG_COLOR_TYPE_GRAY,
              reinterpret_cast<const uint8_t*>(pixels), static_cast<size_t>(width) * 2);
}

void write_png_rgb(const std::filesystem::path& file, const ImageRGB& image) {
    const std::vector<uint8_t> bytes = image.to_rgb8();
    write_png_rgb8(file, image.width, image.height, bytes.data());
}

void write_png_identity(const std::filesystem::path& file, const IdentityMap& map) {
    std::vector<uint16_t> px(map.ids.size());
    for (size_t i = 0; i < map.ids.size(); ++i) {
        px[i] = static_cast<uint16_t>(std::clamp(map.ids[i], 0, 65535));
    }
    write_png_gray16(file, map.width, map.height, px.data());
}

void write_png_mask(const std::filesystem::path& file, const Mask2D& mask) {
    std::vector<uint8_t> px(mask.bits.size());
    for (size_t i = 0; i < mask.bits.size(); ++i) {
        px[i] = mask.bits[i] ? 255 : 0;
    }
    write_png_gray8(file, mask.width, mask.height, px.data());
}

void write_png_soft(const std::filesystem::path& file, int width, int height,
                    const float* values) {
    std::vector<uint8_t> px(static_cast<size_t>(width) * height);
    for (size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<uint8_t>(std::clamp(values[i], 0.0f, 1.0f) * 255.0f + 0.5f);
    }
    write_png_gray8(file, width, height, px.data());
}

IdentityMap read_png_identity(const std::filesystem::path& file) {
    int w = 0, h = 0;
    std::vector<uint16_t> samples;
    read_png_gray(file, w, h, samples);
    IdentityMap map(w, h);
    for (size_t i = 0; i < samples.size(); ++i) {
        map.ids[i] = samples[i];
    }
    return map;
}

Mask2D read_png_mask(const std::filesystem::path& file) {
    int w = 0, h = 0;
    std::vector<uint16_t> samples;
    read_png_gray(file, w, h, samples);
    Mask2D mask(w, h);
    for (size_t i = 0; i < samples.size(); ++i) {
        mask.bits[i] = samples[i] != 0 ? 1 : 0;
    }
    return mask;
}

std::vector<uint8_t> encode_png_rgb8(int width, int height, const uint8_t* pixels) {
    std::vector<uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failure during in-memory encode");
    }
    png_set_write_fn(png, &out, mem_write_cb, mem_flush_cb);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[y] = const_cast<png_bytep>(pixels + static_cast<size_t>(y) * width * 3);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

} // namespace sg
