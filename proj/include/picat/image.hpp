#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace picat {

struct ImageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// H x W x 3 image, row-major, channel order R,G,B, values in [0,1].
struct SrgbImage {
    int height = 0;
    int width = 0;
    std::vector<double> data; // size H*W*3

    SrgbImage() = default;
    SrgbImage(int h, int w, double fill = 0.0)
        : height(h), width(w), data(static_cast<size_t>(h) * w * 3, fill) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
};

// H x W single-channel map in [0,1].
struct LuminanceMap {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    double at(int y, int x) const {
        return data[static_cast<size_t>(y) * width + x];
    }
};

struct PatchSpec {
    int top = 0;
    int left = 0;
    int size = 0;
};

struct DegradeSpec {
    double gain = 1.0;      // in (0,1]
    double gamma = 1.0;     // > 0
    double noise_std = 0.0; // normalized units, >= 0
    std::uint64_t seed = 0;
};

SrgbImage load_png(const std::string& path);
void save_png(const SrgbImage& img, const std::string& path);

LuminanceMap intensity_max(const SrgbImage& img);

PatchSpec random_patch_spec(const SrgbImage& img, int size, std::uint64_t seed);
SrgbImage crop(const SrgbImage& img, const PatchSpec& spec);
SrgbImage random_crop(const SrgbImage& img, int size, std::uint64_t seed);

// clamp(gain * img^gamma + N(0, noise_std^2), 0, 1), per channel
SrgbImage degrade(const SrgbImage& img, const DegradeSpec& spec);

void validate(const SrgbImage& img); // finite, in [0,1], dims consistent

// Paired dataset: low[i] matched to high[i] by filename.
struct Dataset {
    std::vector<SrgbImage> low;
    std::vector<SrgbImage> high;
    std::vector<std::string> names;

    size_t size() const { return low.size(); }
};

// Reads <root>/low/<name>.png paired with <root>/high/<name>.png.
Dataset load_dataset_dir(const std::string& root);

// Smooth random clean images plus degraded counterparts.
Dataset make_synthetic_dataset(int count, int size, const DegradeSpec& spec,
                               std::uint64_t seed);

} // namespace picat
