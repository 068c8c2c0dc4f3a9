#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "srcatr/imaging.hpp"

namespace srcatr {

struct LabeledChip {
    ImageChip chip;
    ShapeClass label;
};

/// Half-open column interval [begin, end).
struct ColumnRange {
    Eigen::Index begin = 0;
    Eigen::Index end = 0;

    Eigen::Index size() const noexcept { return end - begin; }
};

/// Class-partitioned dictionary A = [A_1 A_2 ...]. Columns are unit norm and
/// grouped contiguously in ascending label order. Immutable once built.
class Dictionary {
public:
    /// Validates every structural invariant; throws std::invalid_argument.
    Dictionary(Eigen::MatrixXd atoms, std::vector<ShapeClass> labels);

    const Eigen::MatrixXd& atoms() const noexcept { return atoms_; }
    /// A^T A, computed once at construction.
    const Eigen::MatrixXd& gram() const noexcept { return gram_; }
    std::span<const ShapeClass> labels() const noexcept { return labels_; }

    Eigen::Index feature_dim() const noexcept { return atoms_.rows(); }
    Eigen::Index atom_count() const noexcept { return atoms_.cols(); }

    int class_count() const noexcept { return static_cast<int>(classes_.size()); }
    /// Distinct labels, ascending; position in this list is the class index.
    std::span<const ShapeClass> classes() const noexcept { return classes_; }
    ColumnRange class_range(int class_index) const;
    /// Class index of `label`, or throws std::invalid_argument if absent.
    int class_index(ShapeClass label) const;

private:
    Eigen::MatrixXd atoms_;
    Eigen::MatrixXd gram_;
    std::vector<ShapeClass> labels_;
    std::vector<ShapeClass> classes_;
    std::vector<ColumnRange> ranges_;
};

inline constexpr double kColumnNormTolerance = 1e-10;

/// Vectorize each chip and group columns by class (stable within a class).
Dictionary build_dictionary(std::span<const LabeledChip> training, ChipSize feature_dim);

/// Same as build_dictionary but from already-vectorized features.
Dictionary build_dictionary_from_features(std::span<const Eigen::VectorXd> features,
                                          std::span<const ShapeClass> labels);

/// x restricted to the columns of class `class_index`, zeros elsewhere.
Eigen::VectorXd delta(const Dictionary& dict, const Eigen::VectorXd& x, int class_index);

using ChipPool = std::map<ShapeClass, std::vector<ImageChip>>;

/// Indices into a ChipPool, per class.
struct DataSplit {
    std::map<ShapeClass, std::vector<std::size_t>> train;
    std::map<ShapeClass, std::vector<std::size_t>> test;
    std::uint64_t seed = 0;
};

/// Per-class sizes of a pool; convenient for sample_split without chips.
using PoolSizes = std::map<ShapeClass, std::size_t>;

PoolSizes pool_sizes(const ChipPool& pool);

/// `count` distinct indices from [0, available), in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t available, std::size_t count,
                                                    std::uint64_t seed);

/// Uniform sampling without replacement, deterministic per seed. Train and
/// test indices are disjoint within each class.
DataSplit sample_split(const PoolSizes& pool, int train_per_class, int test_per_class,
                       std::uint64_t seed);
DataSplit sample_split(const ChipPool& pool, int train_per_class, int test_per_class,
                       std::uint64_t seed);

// Flat binary container: "SRCD", u32 version, u64 d, u64 N, u32 k,
// k x (u8 label, u64 count), N*d f64 column-major, N label bytes.
// All integers and floats little-endian.
inline constexpr std::uint32_t kDictionaryFormatVersion = 1;

std::string serialize_dictionary(const Dictionary& dict);
Dictionary deserialize_dictionary(std::string_view bytes);

void save_dictionary(const std::filesystem::path& path, const Dictionary& dict);
Dictionary load_dictionary(const std::filesystem::path& path);

} // namespace srcatr
