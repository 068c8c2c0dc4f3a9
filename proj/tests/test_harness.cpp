#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "srcatr/errors.hpp"
#include "srcatr/harness.hpp"

using namespace srcatr;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(ExperimentKind kind) {
    ExperimentConfig c = default_config(kind);
    c.trials = 3;
    c.chip_size = {32, 32};
    c.feature_dim = {8, 8};
    c.test_per_class = 4;
    c.foreign_test_per_class = 3;
    c.pool_sizes = {{ShapeClass::Block, 20}, {ShapeClass::Cone, 20}, {ShapeClass::Cylinder, 20},
                    {ShapeClass::Sphere, 20}, {ShapeClass::Torus, 6},  {ShapeClass::Pipe, 6}};
    switch (kind) {
    case ExperimentKind::TrainingSize: c.train_per_class = {2, 6}; break;
    case ExperimentKind::Noise: c.train_per_class = {6}; c.noise_variances = {0.0, 0.05}; break;
    case ExperimentKind::Blur: c.train_per_class = {6}; c.blur_intensities = {0.0, 2.0, 4.0}; break;
    case ExperimentKind::SciThreshold: c.train_per_class = {5, 8}; break;
    }
    return c;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("srcatr_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("accuracy stats use the sample standard error") {
    const AccuracyStats s = accuracy_stats({0.5, 0.75, 1.0});
    CHECK(s.mean == doctest::Approx(0.75));
    CHECK(s.std_error == doctest::Approx(0.25 / std::sqrt(3.0)));
    CHECK(accuracy_stats({0.9}).std_error == 0.0);
}

TEST_CASE("confusion matrix columns are true classes and sum to 100 percent") {
    ConfusionMatrix m({ShapeClass::Block, ShapeClass::Cone, ShapeClass::Cylinder});
    m.add(ShapeClass::Block, ShapeClass::Block);
    m.add(ShapeClass::Block, ShapeClass::Cone);
    m.add(ShapeClass::Block, ShapeClass::Cone);
    m.add(ShapeClass::Cone, ShapeClass::Cone);
    CHECK(m.count(1, 0) == 2);
    CHECK(m.column_total(0) == 3);
    const Eigen::MatrixXd pct = m.column_percentages();
    CHECK(std::abs(pct.col(0).sum() - 100.0) <= 1e-9);
    CHECK(std::abs(pct.col(1).sum() - 100.0) <= 1e-9);
    CHECK(pct.col(2).sum() == 0.0);
    CHECK_THROWS_AS(m.add(ShapeClass::Torus, ShapeClass::Block), std::invalid_argument);
}

TEST_CASE("pool chips are reproducible from their pose seeds") {
    const ExperimentConfig c = small_config(ExperimentKind::SciThreshold);
    const ChipPool pool = make_pool(c, true);
    CHECK(pool.size() == 6);
    CHECK(make_pool(c, false).size() == 4);
    CHECK(pool.at(ShapeClass::Torus).size() == 6);
    CHECK(pool.at(ShapeClass::Cone)[7] ==
          generate_chip(ShapeClass::Cone, pool_pose_seed(c.master_seed, ShapeClass::Cone, 7), c.chip_size));
}

TEST_CASE("training-size sweep produces one record per test per size per trial") {
    const ExperimentConfig c = small_config(ExperimentKind::TrainingSize);
    const ExperimentResult r = run_training_size_sweep(c, false);
    CHECK(r.records.size() == 2u * 3u * 16u);
    CHECK(r.points.size() == 2);
    for (const auto& rec : r.records) {
        CHECK(rec.predicted == kMainClasses[static_cast<std::size_t>(argmin_residual(rec.residuals))]);
        CHECK_FALSE(rec.kappa.has_value());
        CHECK_FALSE(rec.runtime_ms.has_value());
    }
    for (const auto& p : r.points) {
        CHECK(p.src.mean >= 0.0);
        CHECK(p.src.mean <= 1.0);
    }
}

TEST_CASE("records are ordered by sweep index, trial and sample") {
    ExperimentConfig c = small_config(ExperimentKind::TrainingSize);
    c.threads = 3;
    const ExperimentResult r = run_training_size_sweep(c, false);
    for (std::size_t i = 1; i < r.records.size(); ++i) {
        const auto& a = r.records[i - 1];
        const auto& b = r.records[i];
        const bool ordered = a.sweep_value < b.sweep_value ||
                             (a.sweep_value == b.sweep_value &&
                              (a.trial < b.trial || (a.trial == b.trial && a.sample < b.sample)));
        CHECK(ordered);
    }
}

TEST_CASE("threaded runs match single-threaded output byte for byte") {
    ExperimentConfig c = small_config(ExperimentKind::Noise);
    const auto serial = run_noise_sweep(c, false);
    c.threads = 3;
    const auto parallel = run_noise_sweep(c, false);
    const std::vector<ShapeClass> main(kMainClasses.begin(), kMainClasses.end());
    CHECK(records_csv(serial.records, main) == records_csv(parallel.records, main));
}

TEST_CASE("zero noise reproduces the clean classification exactly") {
    ExperimentConfig ts = small_config(ExperimentKind::TrainingSize);
    ts.train_per_class = {6};
    ExperimentConfig noise = small_config(ExperimentKind::Noise);
    const auto clean = run_training_size_sweep(ts, false);
    const auto noisy = run_noise_sweep(noise, false);
    CHECK(noisy.points[0].src.mean == clean.points[0].src.mean);
    CHECK(noisy.points[0].baseline.mean == clean.points[0].baseline.mean);
    CHECK_FALSE(noisy.points[0].mean_snr_db.has_value());
    CHECK(noisy.points[1].mean_snr_db.has_value());
}

TEST_CASE("noise and blur sweeps emit low and high confusion matrices") {
    const auto noise = run_noise_sweep(small_config(ExperimentKind::Noise), false);
    CHECK(noise.confusions.count("src_low") == 1);
    CHECK(noise.confusions.count("nn_high") == 1);
    const auto blur = run_blur_sweep(small_config(ExperimentKind::Blur), false);
    CHECK(blur.confusions.count("src_mid") == 1);
    CHECK(blur.confusions.count("src_high") == 1);
    for (const auto& [name, m] : blur.confusions) {
        for (int t = 0; t < 4; ++t) CHECK(m.column_total(t) == 3 * 4);
    }
}

TEST_CASE("sci sweep records each test once per kappa") {
    const ExperimentConfig c = small_config(ExperimentKind::SciThreshold);
    const ExperimentResult r = run_sci_sweep(c, false);
    const std::size_t tests = 4 * 4 + 2 * 3;
    CHECK(r.records.size() == 2 * 3 * c.kappas.size() * tests);
    for (const auto& rec : r.records) {
        REQUIRE(rec.kappa.has_value());
        CHECK(rec.rejected == (rec.sci < *rec.kappa));
    }
    // Accepted foreign counts never grow with kappa.
    for (int size : c.train_per_class) {
        long previous = std::numeric_limits<long>::max();
        for (const auto& row : r.kappa_table) {
            if (row.train_per_class != size || row.group != "foreign") continue;
            CHECK(row.accepted <= previous);
            CHECK(row.tests == 3 * 2 * 3);
            previous = row.accepted;
        }
    }
    bool pooled = false;
    for (const auto& row : r.sci_table) pooled = pooled || row.group == "foreign_pooled";
    CHECK(pooled);
}

TEST_CASE("runners reject mismatched or invalid configs") {
    ExperimentConfig c = small_config(ExperimentKind::Noise);
    CHECK_THROWS_AS(run_blur_sweep(c, false), ConfigError);
    c.trials = 0;
    CHECK_THROWS_AS(run_noise_sweep(c, false), ConfigError);
    ExperimentConfig s = small_config(ExperimentKind::SciThreshold);
    s.kappas = {0.0};
    CHECK_THROWS_AS(run_sci_sweep(s, false), ConfigError);
}

TEST_CASE("result files are written with versioned headers and parse back") {
    ExperimentConfig c = small_config(ExperimentKind::Blur);
    c.output_dir = scratch_dir("blur");
    const ExperimentResult r = run_blur_sweep(c);
    for (const char* name : {"blur_records.csv", "blur_summary.csv", "blur_per_class.csv",
                             "blur_confusion_src_high.csv", "plot_blur.gp", "blur_config.txt"}) {
        CHECK_MESSAGE(fs::exists(c.output_dir / name), name);
    }
    CHECK(slurp(c.output_dir / "blur_summary.csv").rfind("# srcatr-summary v1", 0) == 0);
    CHECK(slurp(c.output_dir / "blur_summary.csv").find("sample_std") != std::string::npos);
    const auto back = load_records(c.output_dir / "blur_records.csv");
    REQUIRE(back.size() == r.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].predicted == r.records[i].predicted);
        CHECK(back[i].residuals == r.records[i].residuals);
        CHECK(back[i].sci == r.records[i].sci);
    }
    const std::string script = slurp(c.output_dir / "plot_blur.gp");
    CHECK(script.find("'blur_summary.csv'") != std::string::npos);
    CHECK(script.find(c.output_dir.string()) == std::string::npos);
}

TEST_CASE("records whose label disagrees with the residual argmin are rejected") {
    TrialRecord rec;
    rec.residuals = {0.4, 0.2, 0.9, 0.8};
    rec.predicted = ShapeClass::Cone;
    const std::vector<ShapeClass> main(kMainClasses.begin(), kMainClasses.end());
    CHECK(parse_records_csv(records_csv({rec}, main)).size() == 1);
    rec.predicted = ShapeClass::Block;
    CHECK_THROWS_AS(parse_records_csv(records_csv({rec}, main)), DataError);
    CHECK_THROWS_AS(parse_records_csv(""), DataError);
}

TEST_CASE("plot script emission requires CSVs") {
    const fs::path empty = scratch_dir("empty");
    CHECK_THROWS_AS(emit_plot_scripts(empty), DataError);
    fs::create_directories(empty);
    CHECK_THROWS_AS(emit_plot_scripts(empty), DataError);
    std::ofstream(empty / "noise_summary.csv") << "x\n";
    try {
        emit_plot_scripts(empty);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("noise_per_class.csv") != std::string::npos);
    }
    std::ofstream(empty / "noise_per_class.csv") << "x\n";
    const auto scripts = emit_plot_scripts(empty);
    REQUIRE(scripts.size() == 1);
    CHECK(scripts[0].filename() == "plot_noise.gp");
}

TEST_CASE("identical configs give byte-identical files") {
    ExperimentConfig c = small_config(ExperimentKind::SciThreshold);
    c.output_dir = scratch_dir("sci_a");
    run_sci_sweep(c);
    ExperimentConfig d = c;
    d.output_dir = scratch_dir("sci_b");
    d.threads = 2;
    run_sci_sweep(d);
    for (const auto& entry : fs::directory_iterator(c.output_dir)) {
        const auto name = entry.path().filename();
        if (name == "sci_config.txt") continue; // records output_dir and threads
        CHECK_MESSAGE(slurp(entry.path()) == slurp(d.output_dir / name), name.string());
    }
}
