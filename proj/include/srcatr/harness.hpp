#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srcatr/classifier.hpp"
#include "srcatr/config.hpp"
#include "srcatr/dictionary.hpp"

namespace srcatr {

/// One classified test sample. For the sci experiment there is one record
/// per kappa; `kappa` is unset otherwise.
struct TrialRecord {
    ExperimentKind experiment = ExperimentKind::TrainingSize;
    int trial = 0;
    double sweep_value = 0.0;
    std::optional<double> kappa;
    int sample = 0;
    ShapeClass true_class = ShapeClass::Block;
    ShapeClass predicted = ShapeClass::Block;
    ShapeClass nn_predicted = ShapeClass::Block;
    std::vector<double> residuals;
    double sci = 0.0;
    bool rejected = false;
    std::optional<double> runtime_ms;
};

/// Rows are predicted classes, columns true classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::vector<ShapeClass> classes);

    void add(ShapeClass truth, ShapeClass predicted);

    const std::vector<ShapeClass>& classes() const noexcept { return classes_; }
    long count(int predicted_index, int true_index) const;
    long column_total(int true_index) const;
    /// Counts scaled so each non-empty column sums to 100.
    Eigen::MatrixXd column_percentages() const;

private:
    std::vector<ShapeClass> classes_;
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts_;
};

struct AccuracyStats {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Mean and sample-std / sqrt(n) of per-trial accuracies.
AccuracyStats accuracy_stats(const std::vector<double>& per_trial);

struct SweepPoint {
    double value = 0.0;
    AccuracyStats src;
    AccuracyStats baseline;
    std::map<ShapeClass, AccuracyStats> src_per_class;
    std::map<ShapeClass, AccuracyStats> baseline_per_class;
    /// Mean SNR of the corrupted tests (noise experiment only).
    std::optional<double> mean_snr_db;
};

struct SciRow {
    int train_per_class = 0;
    std::string group; // class name, "main_pooled" or "foreign_pooled"
    double mean = 0.0;
    double std_dev = 0.0;
    long count = 0;
};

struct KappaRow {
    int train_per_class = 0;
    double kappa = 0.0;
    std::string group; // class name, "main" or "foreign"
    long tests = 0;
    long accepted = 0;
    long correct_accepted = 0;
    /// correct_accepted / tests: a rejection counts as an error.
    double rate_reject_as_error = 0.0;
    /// correct_accepted / accepted: rejected samples are left out.
    double rate_reject_excluded = 0.0;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<SweepPoint> points;
    std::vector<TrialRecord> records;
    std::map<std::string, ConfusionMatrix> confusions;
    std::vector<SciRow> sci_table;
    std::vector<KappaRow> kappa_table;
    std::vector<std::filesystem::path> files;
    double elapsed_seconds = 0.0;
};

/// Synthetic chip pool: pool_sizes[c] chips of class c, pose seeds derived
/// from master_seed. Foreign classes are included only when `with_foreign`.
ChipPool make_pool(const ExperimentConfig& config, bool with_foreign);

/// Pose seed of chip `index` of class `cls` in the pool.
std::uint64_t pool_pose_seed(std::uint64_t master_seed, ShapeClass cls, std::size_t index);

// Each runner validates the config, executes the sweep and, when
// write_files is set, writes CSVs and plot scripts into config.output_dir.
ExperimentResult run_training_size_sweep(const ExperimentConfig& config, bool write_files = true);
ExperimentResult run_noise_sweep(const ExperimentConfig& config, bool write_files = true);
ExperimentResult run_blur_sweep(const ExperimentConfig& config, bool write_files = true);
ExperimentResult run_sci_sweep(const ExperimentConfig& config, bool write_files = true);
ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files = true);

/// Writes the result tables; returns the written paths.
std::vector<std::filesystem::path> write_result_files(const ExperimentResult& result,
                                                      const std::filesystem::path& dir);

std::string records_csv(const std::vector<TrialRecord>& records,
                        const std::vector<ShapeClass>& classes);
/// Parses a records CSV and checks each predicted class against the argmin
/// of its residuals. Throws DataError on mismatch.
std::vector<TrialRecord> parse_records_csv(std::string_view text);
std::vector<TrialRecord> load_records(const std::filesystem::path& path);

std::string confusion_csv(const ConfusionMatrix& matrix);

/// CSV files an experiment's plot script needs, relative to its output dir.
std::vector<std::string> plot_inputs(ExperimentKind kind);

/// Writes gnuplot scripts for the experiment CSVs found in `dir`. Throws
/// DataError listing missing inputs, or when no experiment outputs exist.
std::vector<std::filesystem::path> emit_plot_scripts(const std::filesystem::path& dir);
std::vector<std::filesystem::path> emit_plot_scripts(const std::filesystem::path& dir,
                                                     ExperimentKind kind);

} // namespace srcatr
