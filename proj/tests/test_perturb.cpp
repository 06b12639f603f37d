#include "doctest.h"

#include "picat/perturb.hpp"
#include "picat/rng.hpp"

#include <cmath>

using namespace picat;

namespace {

SrgbImage random_image(int h, int w, std::uint64_t seed, double lo = 0.25,
                       double hi = 0.75) {
    Rng rng(seed);
    SrgbImage img(h, w);
    for (double& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

double mean_sq_diff(const SrgbImage& a, const SrgbImage& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

} // namespace

TEST_CASE("sigma 0 is the identity for both kinds") {
    SrgbImage img = random_image(12, 9, 1);
    for (PerturbKind kind : {PerturbKind::Spatial, PerturbKind::Frequency}) {
        PerturbSpec spec{kind, 0.0, 42};
        SrgbImage out = perturb(img, spec);
        for (size_t i = 0; i < img.data.size(); ++i)
            CHECK(out.data[i] == doctest::Approx(img.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("perturb is deterministic in the seed") {
    SrgbImage img = random_image(10, 10, 2);
    PerturbSpec spec{PerturbKind::Spatial, 15.0, 7};
    SrgbImage a = perturb(img, spec);
    SrgbImage b = perturb(img, spec);
    CHECK(a.data == b.data);
    spec.seed = 8;
    SrgbImage c = perturb(img, spec);
    CHECK(a.data != c.data);
}

TEST_CASE("spatial noise has the advertised variance") {
    // values kept away from 0/1 so clamping plays no role
    SrgbImage img = random_image(64, 64, 3, 0.35, 0.65);
    const double sigma = 25.0;
    double acc = 0.0;
    int reps = 8;
    for (int r = 0; r < reps; ++r) {
        PerturbSpec spec{PerturbKind::Spatial, sigma, 100 + static_cast<std::uint64_t>(r)};
        acc += mean_sq_diff(perturb(img, spec), img);
    }
    const double want = (sigma / 255.0) * (sigma / 255.0);
    CHECK(acc / reps == doctest::Approx(want).epsilon(0.05));
}

TEST_CASE("orthonormal dft round trip and Parseval") {
    Rng rng(5);
    const int h = 6, w = 7;
    std::vector<double> x(static_cast<size_t>(h) * w);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);

    auto f = dft2(x, h, w);
    // Parseval: orthonormal transform preserves the 2-norm
    double es = 0.0, ef = 0.0;
    for (double v : x) es += v * v;
    for (auto& c : f) ef += std::norm(c);
    CHECK(ef == doctest::Approx(es).epsilon(1e-10));

    auto back = idft2(f, h, w);
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i)
        worst = std::max(worst, std::abs(back[i] - std::complex<double>(x[i], 0.0)));
    CHECK(worst < 1e-10);

    // DC coefficient of the orthonormal transform is sum/sqrt(N)
    double sum = 0.0;
    for (double v : x) sum += v;
    CHECK(f[0].real() == doctest::Approx(sum / std::sqrt(double(h) * w)).epsilon(1e-10));
    CHECK(f[0].imag() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("frequency noise lands in the image with variance 2 sigma^2") {
    // complex Gaussian with sigma per component on every coefficient maps,
    // through the orthonormal inverse, to spatial noise of variance 2 sigma^2
    SrgbImage img = random_image(48, 48, 6, 0.4, 0.6);
    const double sigma = 0.002; // small: keeps the signal well inside [0,1]
    double acc = 0.0;
    int reps = 8;
    for (int r = 0; r < reps; ++r) {
        PerturbSpec spec{PerturbKind::Frequency, sigma, 200 + static_cast<std::uint64_t>(r)};
        acc += mean_sq_diff(perturb(img, spec), img);
    }
    CHECK(acc / reps == doctest::Approx(2.0 * sigma * sigma).epsilon(0.1));
}

TEST_CASE("frequency perturbation output is real and clamped") {
    SrgbImage img = random_image(16, 16, 7, 0.0, 1.0);
    PerturbSpec spec{PerturbKind::Frequency, 0.05, 9};
    SrgbImage out = perturb(img, spec);
    for (double v : out.data) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}
