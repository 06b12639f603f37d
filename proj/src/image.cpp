#include "picat/image.hpp"
#include "picat/rng.hpp"

#include <png.h>

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

namespace picat {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

void validate(const SrgbImage& img) {
    if (img.height < 1 || img.width < 1)
        throw ImageError("image dimensions must be at least 1x1");
    if (img.data.size() != img.pixel_count() * 3)
        throw ImageError("image data length does not match H*W*3");
    for (double v : img.data) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ImageError("image value out of [0,1]");
    }
}

SrgbImage load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ImageError("cannot open PNG file: " + path);

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("failed to read PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    if (color_type != PNG_COLOR_TYPE_RGB && color_type != PNG_COLOR_TYPE_RGB_ALPHA) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("unsupported color type (need RGB or RGBA): " + path);
    }
    const int bit_depth = png_get_bit_depth(png, info);
    if (bit_depth != 8 && bit_depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("unsupported bit depth (need 8 or 16): " + path);
    }
    if (bit_depth == 16) png_set_swap(png); // PNG is big-endian on disk
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int channels = (color_type == PNG_COLOR_TYPE_RGB_ALPHA) ? 4 : 3;

    SrgbImage img(h, w);
    std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
    const double scale = (bit_depth == 8) ? 255.0 : 65535.0;
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v;
                if (bit_depth == 8) {
                    v = row[static_cast<size_t>(x) * channels + c];
                } else {
                    const std::uint16_t* row16 =
                        reinterpret_cast<const std::uint16_t*>(row.data());
                    v = row16[static_cast<size_t>(x) * channels + c];
                }
                img.at(y, x, c) = v / scale;
            }
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_png(const SrgbImage& img, const std::string& path) {
    validate(img);
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw ImageError("cannot open PNG file for writing: " + path);

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("failed to write PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<std::uint8_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(img.at(y, x, c), 0.0, 1.0) * 255.0;
                // round half to even
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<std::uint8_t>(std::nearbyint(v));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

LuminanceMap intensity_max(const SrgbImage& img) {
    LuminanceMap map;
    map.height = img.height;
    map.width = img.width;
    map.data.resize(img.pixel_count());
    for (size_t p = 0; p < map.data.size(); ++p) {
        map.data[p] = std::max({img.data[p * 3], img.data[p * 3 + 1],
                                img.data[p * 3 + 2]});
    }
    return map;
}

PatchSpec random_patch_spec(const SrgbImage& img, int size, std::uint64_t seed) {
    if (size < 1 || size > std::min(img.height, img.width))
        throw ImageError("crop size exceeds image dimensions");
    Rng rng(seed);
    PatchSpec spec;
    spec.size = size;
    spec.top = static_cast<int>(rng.uniform_index(img.height - size + 1));
    spec.left = static_cast<int>(rng.uniform_index(img.width - size + 1));
    return spec;
}

SrgbImage crop(const SrgbImage& img, const PatchSpec& spec) {
    if (spec.top < 0 || spec.left < 0 || spec.size < 1 ||
        spec.top + spec.size > img.height || spec.left + spec.size > img.width)
        throw ImageError("patch does not lie inside the image");
    SrgbImage out(spec.size, spec.size);
    for (int y = 0; y < spec.size; ++y)
        for (int x = 0; x < spec.size; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = img.at(spec.top + y, spec.left + x, c);
    return out;
}

SrgbImage random_crop(const SrgbImage& img, int size, std::uint64_t seed) {
    return crop(img, random_patch_spec(img, size, seed));
}

SrgbImage degrade(const SrgbImage& img, const DegradeSpec& spec) {
    if (spec.gain <= 0.0 || spec.gain > 1.0 || spec.gamma <= 0.0 ||
        spec.noise_std < 0.0)
        throw ImageError("invalid degrade spec");
    Rng rng(spec.seed);
    SrgbImage out(img.height, img.width);
    for (size_t i = 0; i < img.data.size(); ++i) {
        double v = spec.gain * std::pow(img.data[i], spec.gamma);
        if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
        out.data[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

Dataset load_dataset_dir(const std::string& root) {
    namespace fs = std::filesystem;
    const fs::path low_dir = fs::path(root) / "low";
    const fs::path high_dir = fs::path(root) / "high";
    if (!fs::is_directory(low_dir) || !fs::is_directory(high_dir))
        throw ImageError("dataset root must contain low/ and high/ directories");

    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(low_dir)) {
        if (entry.path().extension() == ".png")
            names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw ImageError("empty dataset: " + root);

    Dataset ds;
    for (const auto& name : names) {
        const fs::path high_path = high_dir / name;
        if (!fs::exists(high_path))
            throw ImageError("missing high counterpart for " + name);
        ds.low.push_back(load_png((low_dir / name).string()));
        ds.high.push_back(load_png(high_path.string()));
        ds.names.push_back(name);
    }
    return ds;
}

Dataset make_synthetic_dataset(int count, int size, const DegradeSpec& spec,
                               std::uint64_t seed) {
    if (count < 1 || size < 8) throw ImageError("invalid synthetic dataset spec");
    Rng rng(seed);
    Dataset ds;
    const int grid = 8; // low-resolution noise upsampled to smooth content
    for (int n = 0; n < count; ++n) {
        std::vector<double> coarse(static_cast<size_t>(grid) * grid * 3);
        for (double& v : coarse) v = rng.uniform(0.1, 0.95);
        SrgbImage clean(size, size);
        for (int y = 0; y < size; ++y) {
            double fy = static_cast<double>(y) / size * (grid - 1);
            int y0 = static_cast<int>(fy);
            int y1 = std::min(y0 + 1, grid - 1);
            double wy = fy - y0;
            for (int x = 0; x < size; ++x) {
                double fx = static_cast<double>(x) / size * (grid - 1);
                int x0 = static_cast<int>(fx);
                int x1 = std::min(x0 + 1, grid - 1);
                double wx = fx - x0;
                for (int c = 0; c < 3; ++c) {
                    auto v = [&](int yy, int xx) {
                        return coarse[(static_cast<size_t>(yy) * grid + xx) * 3 + c];
                    };
                    double top = v(y0, x0) * (1 - wx) + v(y0, x1) * wx;
                    double bot = v(y1, x0) * (1 - wx) + v(y1, x1) * wx;
                    clean.at(y, x, c) = top * (1 - wy) + bot * wy;
                }
            }
        }
        DegradeSpec ds_spec = spec;
        ds_spec.seed = rng.next_u64();
        ds.high.push_back(clean);
        ds.low.push_back(degrade(clean, ds_spec));
        ds.names.push_back("synth_" + std::to_string(n));
    }
    return ds;
}

} // namespace picat
