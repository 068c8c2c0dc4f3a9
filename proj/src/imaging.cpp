#include "srcatr/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "srcatr/errors.hpp"
#include "srcatr/seeding.hpp"

namespace srcatr {

namespace {

constexpr std::array<std::string_view, 6> kClassNames = {"block", "cone",  "cylinder",
                                                         "sphere", "torus", "pipe"};

void require_size(int width, int height) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("image dimensions must be positive, got " +
                                    std::to_string(width) + "x" + std::to_string(height));
    }
}

// Pose and appearance parameters drawn once per chip.
constexpr double kMaxTilt = std::numbers::pi / 6.0;

struct Pose {
    double angle;
    double dx;
    double dy;
    double scale;
    double aspect;
    double level;
    double illumination_slope;
    double shadow_length; // fraction of the chip side
};

Pose draw_pose(ShapeClass cls, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    Pose p{};
    // Seabed targets settle near a resting orientation; jitter around it.
    switch (cls) {
    case ShapeClass::Sphere:
    case ShapeClass::Torus:
        p.angle = 0.0;
        break;
    default:
        p.angle = uniform(-kMaxTilt, kMaxTilt);
        break;
    }
    p.dx = uniform(-1.0, 1.0) / 16.0;
    p.dy = uniform(-1.0, 1.0) / 16.0;
    p.scale = uniform(0.9, 1.1);
    p.aspect = uniform(0.9, 1.1);
    p.level = uniform(0.7, 0.95);
    p.illumination_slope = uniform(0.1, 0.25);

    double base_shadow = 0.1;
    switch (cls) {
    case ShapeClass::Block: base_shadow = 0.16; break;
    case ShapeClass::Cone: base_shadow = 0.2; break;
    case ShapeClass::Cylinder: base_shadow = 0.1; break;
    case ShapeClass::Sphere: base_shadow = 0.14; break;
    case ShapeClass::Torus: base_shadow = 0.07; break;
    case ShapeClass::Pipe: base_shadow = 0.05; break;
    }
    p.shadow_length = base_shadow * uniform(0.8, 1.2);
    return p;
}

double box_sdf(double u, double v, double hx, double hy) {
    const double qx = std::abs(u) - hx;
    const double qy = std::abs(v) - hy;
    const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
    return outside + std::min(std::max(qx, qy), 0.0);
}

// Signed distance (negative inside) in normalized object units, plus a
// [0,1] shading term describing the surface facing the sensor.
struct Sample {
    double sdf;
    double shade;
};

Sample shape_sample(ShapeClass cls, double u, double v, double aspect) {
    switch (cls) {
    case ShapeClass::Block: {
        const double hx = 0.22 * aspect, hy = 0.14 / aspect;
        const double sd = box_sdf(u, v, hx, hy);
        // Bright rim along the faces, flat top.
        const double rim = std::clamp(1.0 + sd / 0.04, 0.0, 1.0);
        return {sd, 0.6 + 0.4 * rim};
    }
    case ShapeClass::Cone: {
        // Apex on +u, base on -u.
        const double apex = 0.22 * aspect, base = -0.16 * aspect, half_base = 0.17 / aspect;
        const double len = apex - base;
        const double nx = half_base, ny = len;
        const double nn = std::hypot(nx, ny);
        const double e1 = ((u - apex) * nx + v * ny) / nn;
        const double e2 = ((u - apex) * nx - v * ny) / nn;
        const double e3 = base - u;
        const double sd = std::max({e1, e2, e3});
        const double along = std::clamp((u - base) / len, 0.0, 1.0);
        return {sd, 1.0 - 0.7 * along};
    }
    case ShapeClass::Cylinder: {
        const double a = 0.3 * aspect, b = 0.09 / aspect;
        const double rho = std::hypot(u / a, v / b);
        const double sd = (rho - 1.0) * b;
        const double across = std::clamp(std::abs(v) / b, 0.0, 1.0);
        return {sd, std::sqrt(1.0 - across * across)};
    }
    case ShapeClass::Sphere: {
        const double r = 0.14 * aspect;
        const double rho = std::hypot(u, v);
        const double t = std::clamp(rho / r, 0.0, 1.0);
        return {rho - r, std::sqrt(1.0 - t * t)};
    }
    case ShapeClass::Torus: {
        const double big = 0.19 * aspect, tube = 0.06;
        const double rho = std::hypot(u, v);
        const double sd = std::abs(rho - big) - tube;
        const double t = std::clamp(std::abs(rho - big) / tube, 0.0, 1.0);
        return {sd, std::sqrt(1.0 - t * t)};
    }
    case ShapeClass::Pipe: {
        const double hx = 0.36 * aspect, hy = 0.035;
        const double sd = box_sdf(u, v, hx, hy);
        const double t = std::clamp(std::abs(v) / hy, 0.0, 1.0);
        return {sd, std::sqrt(1.0 - t * t)};
    }
    }
    return {1.0, 0.0};
}

// Smooth low-amplitude seabed texture: a few Gaussian blobs plus speckle.
std::vector<double> clutter_field(int width, int height, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> field(static_cast<std::size_t>(width) * height, 0.0);
    const int blobs = 6;
    for (int b = 0; b < blobs; ++b) {
        const double cx = unit(rng) * width;
        const double cy = unit(rng) * height;
        const double sigma = (0.05 + 0.08 * unit(rng)) * std::min(width, height);
        const double amp = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.02 + 0.04 * unit(rng));
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double ddx = x + 0.5 - cx, ddy = y + 0.5 - cy;
                field[static_cast<std::size_t>(y) * width + x] +=
                    amp * std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * sigma * sigma));
            }
        }
    }
    for (auto& v : field) v += 0.03 * (unit(rng) - 0.5);
    return field;
}

} // namespace

std::string_view to_string(ShapeClass cls) {
    return kClassNames[static_cast<std::size_t>(cls)];
}

std::optional<ShapeClass> parse_shape_class(std::string_view name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i) {
        if (kClassNames[i] == name) return static_cast<ShapeClass>(i);
    }
    return std::nullopt;
}

bool is_main_class(ShapeClass cls) {
    return std::find(kMainClasses.begin(), kMainClasses.end(), cls) != kMainClasses.end();
}

ImageChip::ImageChip(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    require_size(width, height);
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw std::invalid_argument("pixel buffer has " + std::to_string(pixels_.size()) +
                                    " entries, expected " +
                                    std::to_string(static_cast<std::size_t>(width) * height));
    }
}

ImageChip ImageChip::filled(int width, int height, double value) {
    require_size(width, height);
    return ImageChip(width, height,
                     std::vector<double>(static_cast<std::size_t>(width) * height, value));
}

ImageChip generate_chip(ShapeClass cls, std::uint64_t pose_seed, ChipSize size) {
    if (size.width < kMinChipSide || size.height < kMinChipSide) {
        throw std::invalid_argument("chip size must be at least " + std::to_string(kMinChipSide) +
                                    " per side, got " + std::to_string(size.width) + "x" +
                                    std::to_string(size.height));
    }
    std::mt19937_64 rng(derive_seed(pose_seed, {static_cast<std::uint64_t>(cls)}));
    const Pose pose = draw_pose(cls, rng);
    const auto clutter = clutter_field(size.width, size.height, rng);

    const int w = size.width, h = size.height;
    const double side = std::min(w, h);
    const double unit = pose.scale * side;
    const double cx = 0.5 * w + pose.dx * side;
    const double cy = 0.5 * h + pose.dy * side;
    const double ca = std::cos(pose.angle), sa = std::sin(pose.angle);

    std::vector<double> coverage(static_cast<std::size_t>(w) * h);
    std::vector<double> object(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double px = x + 0.5 - cx, py = y + 0.5 - cy;
            const double u = (ca * px + sa * py) / unit;
            const double v = (-sa * px + ca * py) / unit;
            const Sample s = shape_sample(cls, u, v, pose.aspect);
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            coverage[i] = std::clamp(0.5 - s.sdf * unit, 0.0, 1.0);
            // Sensor looks from the left: returns fade with range.
            const double illum = 1.0 - pose.illumination_slope * (px / (0.3 * side));
            object[i] = pose.level * (0.55 + 0.45 * s.shade) * std::clamp(illum, 0.6, 1.2);
        }
    }

    // Acoustic shadow: background behind the object (in +x) is darkened.
    const int shadow_px = std::max(1, static_cast<int>(std::lround(pose.shadow_length * side)));
    std::vector<double> pixels(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        int since_object = shadow_px + 1;
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (coverage[i] >= 0.5) {
                since_object = 0;
            } else {
                ++since_object;
            }
            double background = 0.22 + clutter[i];
            if (since_object > 0 && since_object <= shadow_px) background *= 0.35;
            const double value = coverage[i] * object[i] + (1.0 - coverage[i]) * background;
            pixels[i] = std::clamp(value, 0.0, 1.0);
        }
    }
    return ImageChip(w, h, std::move(pixels));
}

ImageChip add_noise(const ImageChip& chip, double variance, std::uint64_t seed) {
    if (!(variance >= 0.0) || !std::isfinite(variance)) {
        throw std::invalid_argument("noise variance must be finite and non-negative, got " +
                                    std::to_string(variance));
    }
    ImageChip out = chip;
    if (variance == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(variance));
    for (auto& v : out.pixels()) v += gauss(rng);
    return out;
}

int blur_kernel_side(double b) {
    if (!(b >= 0.0) || !std::isfinite(b)) {
        throw std::invalid_argument("blur intensity must be finite and non-negative, got " +
                                    std::to_string(b));
    }
    int side = std::max(1, static_cast<int>(std::lround(b)));
    if (side % 2 == 0) ++side;
    return side;
}

Eigen::MatrixXd blur_kernel(double b) {
    const int side = blur_kernel_side(b);
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(side, side);
    const int half = side / 2;
    if (b == 0.0) {
        k(half, half) = 1.0;
        return k;
    }
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            const double di = i - half, dj = j - half;
            k(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * b * b));
        }
    }
    return k / k.sum();
}

ImageChip apply_blur(const ImageChip& chip, double b) {
    const Eigen::MatrixXd k = blur_kernel(b);
    if (b == 0.0 || k.rows() == 1) return chip;

    const int half = static_cast<int>(k.rows()) / 2;
    const int w = chip.width(), h = chip.height();
    std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i) {
                const int sy = std::clamp(y + i, 0, h - 1);
                for (int j = -half; j <= half; ++j) {
                    const int sx = std::clamp(x + j, 0, w - 1);
                    acc += k(i + half, j + half) * chip.at(sx, sy);
                }
            }
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    return ImageChip(w, h, std::move(out));
}

ImageChip corrupt(const ImageChip& chip, const CorruptionSpec& spec) {
    if (!(spec.noise_variance >= 0.0) || !(spec.blur_intensity >= 0.0)) {
        throw std::invalid_argument("corruption parameters must be non-negative");
    }
    ImageChip out = spec.blur_intensity > 0.0 ? apply_blur(chip, spec.blur_intensity) : chip;
    if (spec.noise_variance > 0.0) out = add_noise(out, spec.noise_variance, spec.seed);
    return out;
}

namespace {

// Row i holds the fraction of source sample j covered by target cell i,
// divided by the cell width, so each row sums to one.
Eigen::MatrixXd area_weights(int source, int target) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(target, source);
    const double cell = static_cast<double>(source) / target;
    for (int i = 0; i < target; ++i) {
        const double lo = i * cell, hi = (i + 1) * cell;
        const int first = static_cast<int>(std::floor(lo));
        const int last = std::min(source - 1, static_cast<int>(std::ceil(hi)) - 1);
        for (int j = first; j <= last; ++j) {
            const double overlap = std::min(hi, j + 1.0) - std::max(lo, static_cast<double>(j));
            if (overlap > 0.0) m(i, j) = overlap / cell;
        }
    }
    return m;
}

} // namespace

ImageChip area_downsample(const ImageChip& chip, ChipSize target) {
    require_size(target.width, target.height);
    if (target.width > chip.width() || target.height > chip.height()) {
        throw std::invalid_argument("downsample target " + std::to_string(target.width) + "x" +
                                    std::to_string(target.height) + " exceeds chip size " +
                                    std::to_string(chip.width()) + "x" +
                                    std::to_string(chip.height()));
    }
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMajor> img(chip.pixels().data(), chip.height(), chip.width());
    const RowMajor out = area_weights(chip.height(), target.height) * img *
                         area_weights(chip.width(), target.width).transpose();
    return ImageChip(target.width, target.height,
                     std::vector<double>(out.data(), out.data() + out.size()));
}

Eigen::VectorXd vectorize(const ImageChip& chip, ChipSize feature_dim) {
    if (feature_dim.width < kMinFeatureSide || feature_dim.height < kMinFeatureSide) {
        throw std::invalid_argument("feature dimension must be at least " +
                                    std::to_string(kMinFeatureSide) + " per side");
    }
    const ImageChip small = area_downsample(chip, feature_dim);
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(
        small.pixels().data(), static_cast<Eigen::Index>(small.pixels().size()));
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    return v;
}

double snr_db(const ImageChip& clean, double variance) {
    if (!(variance > 0.0)) throw std::invalid_argument("SNR needs a positive noise variance");
    double power = 0.0;
    for (double v : clean.pixels()) power += v * v;
    power /= static_cast<double>(clean.pixels().size());
    return 10.0 * std::log10(power / variance);
}

std::string write_pgm(const ImageChip& chip) {
    std::string out = "P5\n" + std::to_string(chip.width()) + " " +
                      std::to_string(chip.height()) + "\n255\n";
    out.reserve(out.size() + chip.pixels().size());
    for (double v : chip.pixels()) {
        if (!std::isfinite(v)) throw std::invalid_argument("cannot write non-finite pixel to PGM");
        const long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
    }
    return out;
}

namespace {

class PgmHeaderReader {
public:
    explicit PgmHeaderReader(std::string_view bytes) : bytes_(bytes) {}

    void expect_magic() {
        if (bytes_.size() < 2 || bytes_[0] != 'P' || bytes_[1] != '5') {
            throw ParseError("missing P5 magic", 0);
        }
        pos_ = 2;
    }

    int read_int(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        long value = 0;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000) throw ParseError(std::string(what) + " too large", start);
            ++pos_;
        }
        if (pos_ == start) throw ParseError(std::string("expected ") + what, pos_);
        return static_cast<int>(value);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    void single_whitespace() {
        if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) {
            throw ParseError("expected whitespace after maxval", pos_);
        }
        ++pos_;
    }

    std::size_t pos() const { return pos_; }

private:
    static bool is_space(char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
    }

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (is_space(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

ImageChip read_pgm(std::string_view bytes) {
    PgmHeaderReader reader(bytes);
    reader.expect_magic();
    const std::size_t width_at = reader.pos();
    const int width = reader.read_int("width");
    const int height = reader.read_int("height");
    if (width < 1 || height < 1) throw ParseError("zero image dimension", width_at);
    const std::size_t maxval_at = reader.pos();
    const int maxval = reader.read_int("maxval");
    if (maxval < 1 || maxval > 255) {
        throw ParseError("only 8-bit PGM is supported (maxval " + std::to_string(maxval) + ")",
                         maxval_at);
    }
    reader.single_whitespace();
    const std::size_t start = reader.pos();
    const std::size_t count = static_cast<std::size_t>(width) * height;
    if (bytes.size() - start < count) {
        throw ParseError("truncated raster: expected " + std::to_string(count) + " bytes, found " +
                             std::to_string(bytes.size() - start),
                         bytes.size());
    }
    std::vector<double> pixels(count);
    for (std::size_t i = 0; i < count; ++i) {
        pixels[i] = static_cast<unsigned char>(bytes[start + i]) / static_cast<double>(maxval);
    }
    return ImageChip(width, height, std::move(pixels));
}

void save_pgm(const std::filesystem::path& path, const ImageChip& chip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    const std::string bytes = write_pgm(chip);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

ImageChip load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_pgm(bytes);
}

} // namespace srcatr
