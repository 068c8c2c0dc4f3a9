#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace srcatr {

/// Target object categories. Block..Sphere are the main (trained) classes,
/// Torus and Pipe are foreign objects that never appear in a dictionary.
enum class ShapeClass : std::uint8_t { Block = 0, Cone, Cylinder, Sphere, Torus, Pipe };

inline constexpr std::array<ShapeClass, 4> kMainClasses = {
    ShapeClass::Block, ShapeClass::Cone, ShapeClass::Cylinder, ShapeClass::Sphere};
inline constexpr std::array<ShapeClass, 2> kForeignClasses = {ShapeClass::Torus,
                                                             ShapeClass::Pipe};
inline constexpr std::array<ShapeClass, 6> kAllClasses = {
    ShapeClass::Block, ShapeClass::Cone,  ShapeClass::Cylinder,
    ShapeClass::Sphere, ShapeClass::Torus, ShapeClass::Pipe};

std::string_view to_string(ShapeClass cls);
std::optional<ShapeClass> parse_shape_class(std::string_view name);
bool is_main_class(ShapeClass cls);

struct ChipSize {
    int width = 0;
    int height = 0;

    friend bool operator==(const ChipSize&, const ChipSize&) = default;
};

/// Row-major grayscale intensity grid. Nominal range is [0,1]; corrupted
/// chips may leave it.
class ImageChip {
public:
    ImageChip(int width, int height, std::vector<double> pixels);

    static ImageChip filled(int width, int height, double value);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    ChipSize size() const noexcept { return {width_, height_}; }

    double at(int x, int y) const { return pixels_[index(x, y)]; }
    double& at(int x, int y) { return pixels_[index(x, y)]; }

    std::span<const double> pixels() const noexcept { return pixels_; }
    std::span<double> pixels() noexcept { return pixels_; }

    friend bool operator==(const ImageChip&, const ImageChip&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_;
    int height_;
    std::vector<double> pixels_;
};

struct CorruptionSpec {
    double noise_variance = 0.0;
    double blur_intensity = 0.0;
    std::uint64_t seed = 0;
};

inline constexpr int kMinChipSide = 16;
inline constexpr int kMinFeatureSide = 4;
inline constexpr ChipSize kDefaultChipSize{64, 64};
inline constexpr ChipSize kDefaultFeatureDim{16, 16};

/// Render a synthetic sonar-style target chip. Output is a pure function of
/// (cls, pose_seed, size) and every pixel lies in [0,1].
ImageChip generate_chip(ShapeClass cls, std::uint64_t pose_seed,
                        ChipSize size = kDefaultChipSize);

/// Additive i.i.d. Gaussian noise with the given variance. Not clamped.
ImageChip add_noise(const ImageChip& chip, double variance, std::uint64_t seed);

/// Side length of the square blur support: max(1, round(b)) rounded up to odd.
int blur_kernel_side(double b);

/// Normalized Gaussian kernel (std = b) on the support from blur_kernel_side.
Eigen::MatrixXd blur_kernel(double b);

/// Gaussian blur with replicate-edge boundary handling; b = 0 is identity.
ImageChip apply_blur(const ImageChip& chip, double b);

/// Blur first, then noise. Either part is skipped when its parameter is 0.
ImageChip corrupt(const ImageChip& chip, const CorruptionSpec& spec);

/// Exact area-average resampling to `target` (any target no larger than the chip).
ImageChip area_downsample(const ImageChip& chip, ChipSize target);

/// Area-average downsample, flatten row-major, scale to unit l2 norm.
/// The all-zero chip maps to the zero vector.
Eigen::VectorXd vectorize(const ImageChip& chip, ChipSize feature_dim = kDefaultFeatureDim);

/// 10*log10(mean(clean^2) / variance).
double snr_db(const ImageChip& clean, double variance);

// Binary 8-bit PGM ("P5", maxval 255).
std::string write_pgm(const ImageChip& chip);
ImageChip read_pgm(std::string_view bytes);

void save_pgm(const std::filesystem::path& path, const ImageChip& chip);
ImageChip load_pgm(const std::filesystem::path& path);

} // namespace srcatr
