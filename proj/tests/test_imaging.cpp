#include <doctest.h>

#include <cmath>
#include <numeric>

#include "srcatr/errors.hpp"
#include "srcatr/imaging.hpp"
#include "test_support.hpp"

using namespace srcatr;
using srcatr::testing::Gen;

namespace {

ImageChip random_chip(Gen& g, int w, int h) {
    std::vector<double> px(static_cast<std::size_t>(w) * h);
    for (auto& v : px) v = g.uniform(0.0, 1.0);
    return ImageChip(w, h, std::move(px));
}

double max_abs_diff(const ImageChip& a, const ImageChip& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.pixels().size(); ++i) {
        m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
    }
    return m;
}

} // namespace

TEST_CASE("class names round-trip and partition into main and foreign") {
    for (ShapeClass c : kAllClasses) {
        CHECK(parse_shape_class(to_string(c)) == c);
    }
    CHECK_FALSE(parse_shape_class("boat").has_value());
    for (ShapeClass c : kMainClasses) CHECK(is_main_class(c));
    for (ShapeClass c : kForeignClasses) CHECK_FALSE(is_main_class(c));
}

TEST_CASE("image chip rejects inconsistent buffers") {
    CHECK_THROWS_AS(ImageChip(4, 4, std::vector<double>(15)), std::invalid_argument);
    CHECK_THROWS_AS(ImageChip(0, 4, {}), std::invalid_argument);
}

TEST_CASE("generate_chip is deterministic per seed") {
    const ImageChip a = generate_chip(ShapeClass::Sphere, 7, {64, 64});
    const ImageChip b = generate_chip(ShapeClass::Sphere, 7, {64, 64});
    CHECK(a.width() == 64);
    CHECK(a.height() == 64);
    CHECK(a == b);
}

TEST_CASE("generate_chip varies with pose seed") {
    CHECK_FALSE(generate_chip(ShapeClass::Block, 1, {64, 64}) ==
                generate_chip(ShapeClass::Block, 2, {64, 64}));
}

TEST_CASE("generated pixels stay in [0,1] for every class and many seeds") {
    for (ShapeClass c : kAllClasses) {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            const ImageChip chip = generate_chip(c, seed * 7919 + 1, {32, 48});
            for (double v : chip.pixels()) {
                REQUIRE(v >= 0.0);
                REQUIRE(v <= 1.0);
            }
        }
    }
}

TEST_CASE("torus has a dark hole inside a bright ring") {
    const ImageChip chip = generate_chip(ShapeClass::Torus, 3, {64, 64});
    // Brute-force radial profile around the intensity-weighted centroid of
    // the brightest pixels.
    const double peak = *std::max_element(chip.pixels().begin(), chip.pixels().end());
    double sx = 0.0, sy = 0.0, n = 0.0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            if (chip.at(x, y) > 0.6 * peak) {
                sx += x;
                sy += y;
                n += 1.0;
            }
        }
    }
    const int cx = static_cast<int>(std::lround(sx / n));
    const int cy = static_cast<int>(std::lround(sy / n));
    CHECK(chip.at(cx, cy) < 0.6 * peak);
    double ring_peak = 0.0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            const double r = std::hypot(x - cx, y - cy);
            if (r > 6.0 && r < 20.0) ring_peak = std::max(ring_peak, chip.at(x, y));
        }
    }
    CHECK(chip.at(cx, cy) < ring_peak);
}

TEST_CASE("generate_chip rejects chips below the minimum side") {
    CHECK_THROWS_AS(generate_chip(ShapeClass::Cone, 1, {15, 64}), std::invalid_argument);
    CHECK_THROWS_AS(generate_chip(ShapeClass::Cone, 1, {64, 8}), std::invalid_argument);
    CHECK_NOTHROW(generate_chip(ShapeClass::Cone, 1, {16, 16}));
}

TEST_CASE("add_noise with zero variance is the identity") {
    const ImageChip chip = generate_chip(ShapeClass::Cylinder, 11, {64, 64});
    CHECK(add_noise(chip, 0.0, 99) == chip);
}

TEST_CASE("add_noise sample statistics match the requested variance") {
    const ImageChip chip = generate_chip(ShapeClass::Block, 5, {64, 64});
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const ImageChip noisy = add_noise(chip, 0.04, seed);
        std::vector<double> d(chip.pixels().size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = noisy.pixels()[i] - chip.pixels()[i];
        const double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
        double var = 0.0;
        for (double v : d) var += (v - mean) * (v - mean);
        var /= static_cast<double>(d.size() - 1);
        CHECK(std::abs(mean) < 0.02);
        CHECK(var == doctest::Approx(0.04).epsilon(0.2));
    }
}

TEST_CASE("add_noise does not clamp and is deterministic per seed") {
    const ImageChip chip = ImageChip::filled(64, 64, 0.5);
    const ImageChip a = add_noise(chip, 0.2, 42);
    CHECK(a == add_noise(chip, 0.2, 42));
    CHECK_FALSE(a == add_noise(chip, 0.2, 43));
    const auto [lo, hi] = std::minmax_element(a.pixels().begin(), a.pixels().end());
    CHECK(*lo < 0.0);
    CHECK(*hi > 1.0);
}

TEST_CASE("add_noise rejects negative variance") {
    CHECK_THROWS_AS(add_noise(ImageChip::filled(16, 16, 0.1), -0.01, 1), std::invalid_argument);
}

TEST_CASE("snr_db follows the mean-power definition") {
    // Unit-energy chip (mean squared intensity 1) at variance 0.1.
    CHECK(snr_db(ImageChip::filled(64, 64, 1.0), 0.1) == doctest::Approx(10.0).epsilon(1e-12));
    const ImageChip chip = ImageChip::filled(16, 16, 0.1);
    CHECK(snr_db(chip, 0.1) == doctest::Approx(-10.0).epsilon(1e-12));
    // Empirical SNR of an actual noisy draw agrees with the nominal value.
    const ImageChip one = ImageChip::filled(64, 64, 1.0);
    const ImageChip noisy = add_noise(one, 0.1, 17);
    double noise_power = 0.0;
    for (std::size_t i = 0; i < one.pixels().size(); ++i) {
        const double d = noisy.pixels()[i] - 1.0;
        noise_power += d * d;
    }
    noise_power /= static_cast<double>(one.pixels().size());
    CHECK(10.0 * std::log10(1.0 / noise_power) == doctest::Approx(10.0).epsilon(0.1));
}

TEST_CASE("blur kernel side rounds to an odd width of at least one") {
    CHECK(blur_kernel_side(0.0) == 1);
    CHECK(blur_kernel_side(0.4) == 1);
    CHECK(blur_kernel_side(1.0) == 1);
    CHECK(blur_kernel_side(1.6) == 3);
    CHECK(blur_kernel_side(2.0) == 3);
    CHECK(blur_kernel_side(3.0) == 3);
    CHECK(blur_kernel_side(4.0) == 5);
    CHECK(blur_kernel_side(6.0) == 7);
    CHECK_THROWS_AS(blur_kernel_side(-1.0), std::invalid_argument);
}

TEST_CASE("blur kernels sum to one") {
    for (double b : {0.5, 1.0, 2.0, 2.5, 3.0, 4.0, 6.0, 9.7}) {
        CHECK(std::abs(blur_kernel(b).sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("blur with b = 0 is the identity") {
    const ImageChip chip = generate_chip(ShapeClass::Cone, 2, {32, 32});
    CHECK(apply_blur(chip, 0.0) == chip);
}

TEST_CASE("impulse response equals the normalized kernel") {
    ImageChip chip = ImageChip::filled(21, 21, 0.0);
    chip.at(10, 10) = 1.0;
    const ImageChip out = apply_blur(chip, 2.0);
    // Direct Gaussian oracle: 3x3 support, std 2.
    double weights[3][3];
    double total = 0.0;
    for (int i = -1; i <= 1; ++i) {
        for (int j = -1; j <= 1; ++j) {
            weights[i + 1][j + 1] = std::exp(-(i * i + j * j) / 8.0);
            total += weights[i + 1][j + 1];
        }
    }
    for (int y = 0; y < 21; ++y) {
        for (int x = 0; x < 21; ++x) {
            const int dy = y - 10, dx = x - 10;
            const double expected =
                (std::abs(dx) <= 1 && std::abs(dy) <= 1) ? weights[dy + 1][dx + 1] / total : 0.0;
            CHECK(out.at(x, y) == doctest::Approx(expected).epsilon(1e-14));
        }
    }
}

TEST_CASE("blur preserves constant images exactly up to rounding") {
    for (double b : {1.5, 3.0, 6.0}) {
        const ImageChip out = apply_blur(ImageChip::filled(17, 23, 0.37), b);
        for (double v : out.pixels()) CHECK(std::abs(v - 0.37) <= 1e-12);
    }
}

TEST_CASE("blur rejects negative intensity") {
    CHECK_THROWS_AS(apply_blur(ImageChip::filled(16, 16, 0.0), -0.5), std::invalid_argument);
}

TEST_CASE("corrupt applies blur then noise") {
    const ImageChip chip = generate_chip(ShapeClass::Sphere, 4, {32, 32});
    CorruptionSpec spec;
    spec.blur_intensity = 2.0;
    spec.noise_variance = 0.01;
    spec.seed = 5;
    CHECK(corrupt(chip, spec) == add_noise(apply_blur(chip, 2.0), 0.01, 5));
    spec.noise_variance = -1.0;
    CHECK_THROWS_AS(corrupt(chip, spec), std::invalid_argument);
}

TEST_CASE("vectorize yields unit-norm vectors of the requested length") {
    const ImageChip chip = generate_chip(ShapeClass::Block, 8, {64, 64});
    const Eigen::VectorXd v = vectorize(chip, {16, 16});
    CHECK(v.size() == 256);
    CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
}

TEST_CASE("vectorize of a constant chip is uniform") {
    for (ChipSize dim : {ChipSize{4, 4}, ChipSize{16, 16}, ChipSize{5, 7}, ChipSize{12, 9}}) {
        const Eigen::VectorXd v = vectorize(ImageChip::filled(48, 36, 0.6), dim);
        const double expected = 1.0 / std::sqrt(static_cast<double>(dim.width * dim.height));
        for (Eigen::Index i = 0; i < v.size(); ++i) CHECK(std::abs(v(i) - expected) <= 1e-12);
    }
}

TEST_CASE("vectorize maps the zero chip to the zero vector") {
    const Eigen::VectorXd v = vectorize(ImageChip::filled(32, 32, 0.0), {8, 8});
    CHECK(v.size() == 64);
    CHECK(v.isZero(0.0));
}

TEST_CASE("vectorize rejects bad feature sizes") {
    const ImageChip chip = ImageChip::filled(16, 16, 0.5);
    CHECK_THROWS_AS(vectorize(chip, {3, 8}), std::invalid_argument);
    CHECK_THROWS_AS(vectorize(chip, {32, 16}), std::invalid_argument);
}

TEST_CASE("area downsample of a 2x2 image to 1x1 is the mean") {
    const ImageChip chip(2, 2, {0.1, 0.7, 0.4, 0.2});
    const ImageChip out = area_downsample(chip, {1, 1});
    CHECK(out.at(0, 0) == doctest::Approx((0.1 + 0.7 + 0.4 + 0.2) / 4.0).epsilon(1e-15));
}

TEST_CASE("area downsample matches a brute-force box average") {
    Gen g(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = g.integer(1, 4);
        const int tw = g.integer(1, 6), th = g.integer(1, 6);
        const ImageChip chip = random_chip(g, tw * k, th * k);
        const ImageChip out = area_downsample(chip, {tw, th});
        for (int y = 0; y < th; ++y) {
            for (int x = 0; x < tw; ++x) {
                double sum = 0.0;
                for (int i = 0; i < k; ++i) {
                    for (int j = 0; j < k; ++j) sum += chip.at(x * k + j, y * k + i);
                }
                CHECK(out.at(x, y) == doctest::Approx(sum / (k * k)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("area downsample preserves the mean for non-integer ratios") {
    Gen g(32);
    for (int trial = 0; trial < 20; ++trial) {
        const ImageChip chip = random_chip(g, g.integer(7, 40), g.integer(7, 40));
        const ImageChip out = area_downsample(chip, {g.integer(1, 7), g.integer(1, 7)});
        const auto mean = [](const ImageChip& c) {
            return std::accumulate(c.pixels().begin(), c.pixels().end(), 0.0) / c.pixels().size();
        };
        CHECK(mean(out) == doctest::Approx(mean(chip)).epsilon(1e-12));
    }
}

TEST_CASE("PGM round-trips all-zero and all-one chips exactly") {
    for (double v : {0.0, 1.0}) {
        const ImageChip chip = ImageChip::filled(4, 4, v);
        CHECK(read_pgm(write_pgm(chip)) == chip);
    }
}

TEST_CASE("PGM round-trip error stays within half a quantization step") {
    Gen g(77);
    for (int trial = 0; trial < 50; ++trial) {
        const ImageChip chip = random_chip(g, 8, 8);
        CHECK(max_abs_diff(read_pgm(write_pgm(chip)), chip) <= 1.0 / 510.0);
    }
}

TEST_CASE("PGM writer clamps and rejects non-finite pixels") {
    const ImageChip chip(2, 1, {-0.5, 1.5});
    const ImageChip back = read_pgm(write_pgm(chip));
    CHECK(back.at(0, 0) == 0.0);
    CHECK(back.at(1, 0) == 1.0);
    CHECK_THROWS_AS(write_pgm(ImageChip(1, 1, {std::nan("")})), std::invalid_argument);
}

TEST_CASE("PGM reader accepts header comments") {
    std::string bytes = "P5\n# made by hand\n2 1\n# depth\n255\n";
    bytes.push_back(static_cast<char>(0));
    bytes.push_back(static_cast<char>(255));
    const ImageChip chip = read_pgm(bytes);
    CHECK(chip.width() == 2);
    CHECK(chip.at(1, 0) == 1.0);
}

TEST_CASE("PGM reader reports malformed input with offsets") {
    try {
        read_pgm("P2\n1 1\n255\n0");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 0);
    }
    const std::string truncated = "P5\n4 4\n255\n" + std::string(10, '\0');
    try {
        read_pgm(truncated);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == truncated.size());
    }
    CHECK_THROWS_AS(read_pgm("P5\n4 x\n255\n"), ParseError);
    CHECK_THROWS_AS(read_pgm("P5\n1 1\n65535\n\0\0"), ParseError);
}
