#include <doctest.h>

#include "picat/image.hpp"
#include "picat/rng.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace picat;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// minimal grayscale PNG writer for the unsupported-color-type contract case
void write_gray_png(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    REQUIRE(fp != nullptr);
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    REQUIRE(setjmp(png_jmpbuf(png)) == 0);
    png_init_io(png, fp);
    png_set_IHDR(png, info, 2, 2, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::uint8_t row[2] = {0, 255};
    png_write_row(png, row);
    png_write_row(png, row);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

void write_rgb16_png(const std::string& path, std::uint16_t value) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    REQUIRE(fp != nullptr);
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    REQUIRE(setjmp(png_jmpbuf(png)) == 0);
    png_init_io(png, fp);
    png_set_IHDR(png, info, 1, 1, 16, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);
    std::uint16_t row[3] = {value, value, value};
    png_write_row(png, reinterpret_cast<png_bytep>(row));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

} // namespace

TEST_CASE("png roundtrip of primary colors") {
    SrgbImage img(1, 1);
    img.at(0, 0, 0) = 1.0;
    const std::string path = temp_path("picat_red.png");
    save_png(img, path);
    SrgbImage back = load_png(path);
    CHECK(back.height == 1);
    CHECK(back.width == 1);
    CHECK(back.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(back.at(0, 0, 1) == doctest::Approx(0.0));
    CHECK(back.at(0, 0, 2) == doctest::Approx(0.0));
}

TEST_CASE("16-bit full-scale pixel maps to 1.0") {
    const std::string path = temp_path("picat_16bit.png");
    write_rgb16_png(path, 65535);
    SrgbImage img = load_png(path);
    for (int c = 0; c < 3; ++c) CHECK(img.at(0, 0, c) == doctest::Approx(1.0));
    write_rgb16_png(path, 32768);
    img = load_png(path);
    CHECK(img.at(0, 0, 0) == doctest::Approx(32768.0 / 65535.0));
}

TEST_CASE("grayscale PNG is rejected") {
    const std::string path = temp_path("picat_gray.png");
    write_gray_png(path);
    CHECK_THROWS_WITH_AS(load_png(path),
                         doctest::Contains("unsupported color type"), ImageError);
}

TEST_CASE("unreadable file is an error") {
    CHECK_THROWS_AS(load_png("/nonexistent/nope.png"), ImageError);
}

TEST_CASE("save rounds half to even") {
    SrgbImage img(1, 1, 0.5); // 127.5 rounds to 128
    const std::string path = temp_path("picat_half.png");
    save_png(img, path);
    SrgbImage back = load_png(path);
    CHECK(back.at(0, 0, 0) == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("roundtrip error bounded by 1/255") {
    Rng rng(7);
    SrgbImage img(9, 13);
    for (double& v : img.data) v = rng.uniform();
    const std::string path = temp_path("picat_rand.png");
    save_png(img, path);
    SrgbImage back = load_png(path);
    double max_err = 0.0;
    for (size_t i = 0; i < img.data.size(); ++i)
        max_err = std::max(max_err, std::fabs(img.data[i] - back.data[i]));
    CHECK(max_err <= 1.0 / 255.0 + 1e-12);
}

TEST_CASE("intensity_max basics") {
    SrgbImage img(1, 2);
    img.at(0, 0, 0) = 0.8;
    img.at(0, 0, 1) = 0.4;
    img.at(0, 0, 2) = 0.2;
    img.at(0, 1, 0) = img.at(0, 1, 1) = img.at(0, 1, 2) = 0.3;
    LuminanceMap map = intensity_max(img);
    CHECK(map.at(0, 0) == doctest::Approx(0.8));
    CHECK(map.at(0, 1) == doctest::Approx(0.3));

    SrgbImage black(4, 4, 0.0);
    for (double v : intensity_max(black).data) CHECK(v == 0.0);
}

TEST_CASE("intensity_max is pointwise monotone under brightening") {
    Rng rng(11);
    SrgbImage img(6, 6);
    for (double& v : img.data) v = rng.uniform(0.0, 0.8);
    LuminanceMap before = intensity_max(img);
    SrgbImage brighter = img;
    for (size_t p = 0; p < img.pixel_count(); ++p) {
        int c = static_cast<int>(rng.uniform_index(3));
        brighter.data[p * 3 + c] =
            std::min(1.0, brighter.data[p * 3 + c] + rng.uniform(0.0, 0.2));
    }
    LuminanceMap after = intensity_max(brighter);
    for (size_t p = 0; p < before.data.size(); ++p)
        CHECK(after.data[p] >= before.data[p]);
}

TEST_CASE("random_crop determinism and bounds") {
    Rng rng(3);
    SrgbImage img(10, 10);
    for (double& v : img.data) v = rng.uniform();

    SrgbImage full = random_crop(img, 10, 42);
    CHECK(full.data == img.data);

    SrgbImage a = random_crop(img, 4, 99);
    SrgbImage b = random_crop(img, 4, 99);
    CHECK(a.data == b.data);

    CHECK_THROWS_AS(random_crop(img, 11, 0), ImageError);
}

TEST_CASE("random_crop offsets are uniform (chi-squared)") {
    SrgbImage img(10, 10, 0.5);
    const int side = 7; // offsets 0..6 each dimension
    std::vector<int> counts(side * side, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        PatchSpec spec = random_patch_spec(img, 4, 1000 + i);
        counts[spec.top * side + spec.left]++;
    }
    const double expected = static_cast<double>(draws) / (side * side);
    double chi2 = 0.0;
    for (int c : counts) {
        const double d = c - expected;
        chi2 += d * d / expected;
    }
    // 48 degrees of freedom; 0.999 quantile is ~84
    CHECK(chi2 < 90.0);
}

TEST_CASE("degrade basics") {
    Rng rng(5);
    SrgbImage img(4, 4);
    for (double& v : img.data) v = rng.uniform();

    DegradeSpec identity{1.0, 1.0, 0.0, 0};
    CHECK(degrade(img, identity).data == img.data);

    SrgbImage px(1, 1, 0.8);
    DegradeSpec quarter{0.25, 1.0, 0.0, 0};
    CHECK(degrade(px, quarter).at(0, 0, 0) == doctest::Approx(0.2));
}

TEST_CASE("degrade noise variance matches spec (Monte Carlo)") {
    SrgbImage flat(200, 200, 0.5);
    DegradeSpec spec{1.0, 1.0, 0.05, 123};
    SrgbImage out = degrade(flat, spec);
    double mean = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i) mean += out.data[i] - flat.data[i];
    mean /= static_cast<double>(out.data.size());
    double var = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i) {
        const double d = out.data[i] - flat.data[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(out.data.size());
    CHECK(var == doctest::Approx(0.0025).epsilon(0.10));
}

TEST_CASE("degrade with zero noise is monotone in input intensity") {
    DegradeSpec spec{0.5, 1.7, 0.0, 0};
    double prev = -1.0;
    for (int i = 0; i <= 20; ++i) {
        SrgbImage px(1, 1, i / 20.0);
        double v = degrade(px, spec).at(0, 0, 0);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("synthetic dataset pairs are deterministic") {
    DegradeSpec spec{0.25, 1.2, 0.03, 0};
    Dataset a = make_synthetic_dataset(3, 32, spec, 9);
    Dataset b = make_synthetic_dataset(3, 32, spec, 9);
    REQUIRE(a.size() == 3);
    CHECK(a.low[2].data == b.low[2].data);
    CHECK(a.high[1].data == b.high[1].data);
    for (size_t i = 0; i < a.size(); ++i) {
        validate(a.low[i]);
        validate(a.high[i]);
    }
}
