#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "srcatr/imaging.hpp"
#include "srcatr/l1solver.hpp"

namespace srcatr {

enum class ExperimentKind { TrainingSize, Noise, Blur, SciThreshold };

std::string_view to_string(ExperimentKind kind);
/// Accepts "training-size", "noise", "blur", "sci".
std::optional<ExperimentKind> parse_experiment_kind(std::string_view name);

/// Path floor used by the experiment defaults. Features are unit-norm, so
/// lambda0 <= 1; stopping here keeps codes sparse without fitting noise.
inline constexpr double kExperimentLambdaMin = 0.01;

/// Declarative sweep description. Field names double as config-file keys.
struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::TrainingSize;
    int trials = 20;
    /// Sweep list for training-size and sci; a single value for noise and blur.
    std::vector<int> train_per_class;
    int test_per_class = 10;
    /// Tests drawn from each foreign class (sci experiment only).
    int foreign_test_per_class = 10;
    std::vector<double> noise_variances;
    std::vector<double> blur_intensities;
    std::vector<double> kappas;
    ChipSize chip_size = kDefaultChipSize;
    ChipSize feature_dim = kDefaultFeatureDim;
    /// Synthetic pool size per class; defaults mirror the class imbalance of
    /// the original sonar data set.
    std::map<ShapeClass, int> pool_sizes;
    SolverOptions solver;
    std::uint64_t master_seed = 2015;
    std::filesystem::path output_dir = "results";
    /// Apply the test-time corruption to training chips as well.
    bool corrupt_training = false;
    /// Fill runtime_ms in trial records. Off by default because timings make
    /// output files non-reproducible.
    bool record_timing = false;
    int threads = 1;
};

/// Defaults for one experiment family, including its sweep grid.
ExperimentConfig default_config(ExperimentKind kind);

/// Parses "key = value" lines ('#' starts a comment). Starts from
/// default_config of the experiment named in the file or `kind_override`.
/// Throws ConfigError on unknown keys, duplicates or bad values.
ExperimentConfig parse_config(std::string_view text,
                              std::optional<ExperimentKind> kind_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<ExperimentKind> kind_override = std::nullopt);

/// Throws ConfigError describing the first violated constraint.
void validate(const ExperimentConfig& config);

/// Seed of trial t: master_seed XOR t.
inline std::uint64_t trial_seed(const ExperimentConfig& config, int trial) {
    return config.master_seed ^ static_cast<std::uint64_t>(trial);
}

/// Serializes back to the config-file format (round-trips through parse_config).
std::string format_config(const ExperimentConfig& config);

} // namespace srcatr
