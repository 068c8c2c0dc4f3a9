// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "srcatr/classifier.hpp"
#include "srcatr/harness.hpp"
#include "srcatr/l1solver.hpp"
#include "test_support.hpp"

using namespace srcatr;
using srcatr::testing::Gen;
using srcatr::testing::support_of;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), format, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome solver_optimality() {
    Gen g(1001);
    const auto start = Clock::now();
    int feasible = 0;
    double worst = 0.0;
    const int instances = 1000;
    for (int i = 0; i < instances; ++i) {
        const Eigen::MatrixXd a = g.unit_columns(g.integer(8, 32), g.integer(16, 64));
        const Eigen::VectorXd y = g.gaussian_vector(a.rows());
        const SparseCode code = homotopy_solve(a, y);
        const KktReport r = kkt_check(a, y, code.x, code.lambda_final, 1e-8);
        feasible += r.feasible;
        worst = std::max(worst, r.max_violation);
    }
    const double elapsed = seconds_since(start);
    return {feasible == instances && elapsed < 60.0,
            fmt("%d/%d KKT-feasible at 1e-8 (worst violation %.2e), %.2f s (limit 60 s)", feasible,
                instances, worst, elapsed)};
}

Outcome oracle_equivalence() {
    Gen g(1002);
    const int instances = 100;
    int agree = 0;
    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
        const Eigen::MatrixXd a = g.unit_columns(g.integer(8, 32), g.integer(16, 64));
        const Eigen::VectorXd y = g.gaussian_vector(a.rows());
        const double lambda0 = (a.transpose() * y).cwiseAbs().maxCoeff();
        SolverOptions opts;
        opts.epsilon = 0.0;
        opts.lambda_min = g.uniform(0.02, 0.9) * lambda0;
        const SparseCode code = homotopy_solve(a, y, opts);
        const IstaResult ista = ista_solve(a, y, code.lambda_final, 1e-12, 1'000'000);
        const double fh = lasso_objective(a, y, code.x, code.lambda_final);
        const double rel = std::abs(fh - ista.objective) / std::max(1.0, ista.objective);
        worst = std::max(worst, rel);
        agree += rel <= 1e-6;
    }
    return {agree == instances,
            fmt("%d/%d instances within 1e-6 relative objective (worst %.2e)", agree, instances, worst)};
}

Outcome closed_forms() {
    Gen g(1003);
    double worst_soft = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Eigen::Index d = g.integer(2, 32);
        Eigen::MatrixXd m(d, d);
        for (Eigen::Index j = 0; j < d; ++j) m.col(j) = g.gaussian_vector(d);
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ() *
                                  Eigen::MatrixXd::Identity(d, d);
        const Eigen::VectorXd y = g.gaussian_vector(d);
        const Eigen::VectorXd c = q.transpose() * y;
        SolverOptions opts;
        opts.epsilon = 0.0;
        opts.lambda_min = g.uniform(0.05, 0.95) * c.cwiseAbs().maxCoeff();
        const SparseCode code = homotopy_solve(q, y, opts);
        for (Eigen::Index k = 0; k < d; ++k) {
            worst_soft = std::max(worst_soft,
                                  std::abs(code.x(k) - soft_threshold(c(k), *opts.lambda_min)));
        }
    }
    int matched = 0;
    const int sparse_instances = 50;
    for (int i = 0; i < sparse_instances; ++i) {
        const Eigen::MatrixXd a = g.incoherent(128, 20, 1.0 / 3.0);
        const Eigen::VectorXd x0 = g.sparse_vector(20, 2, 1.0, 2.0);
        const Eigen::VectorXd y = a * x0;
        const double eps = 1e-6 * y.norm();
        const L0Result l0 = l0_brute_force(a, y, eps, 3);
        SolverOptions opts;
        opts.epsilon = eps;
        const SparseCode code = homotopy_solve(a, y, opts);
        matched += l0.feasible && l0.support == support_of(x0) && code.active_set == l0.support;
    }
    return {worst_soft <= 1e-12 && matched == sparse_instances,
            fmt("soft-threshold max error %.2e (limit 1e-12); %d/%d 2-sparse supports match l0",
                worst_soft, matched, sparse_instances)};
}

Outcome sci_exactness() {
    std::vector<Eigen::VectorXd> feats;
    std::vector<ShapeClass> labels;
    for (int i = 0; i < 8; ++i) {
        feats.push_back(Eigen::VectorXd::Unit(8, i));
        labels.push_back(kMainClasses[static_cast<std::size_t>(i / 2)]);
    }
    const Dictionary dict = build_dictionary_from_features(feats, labels);
    Eigen::VectorXd single = Eigen::VectorXd::Zero(8);
    single(2) = 0.3;
    single(3) = -1.1;
    Eigen::VectorXd equal = Eigen::VectorXd::Zero(8);
    equal << 0.5, 0.5, -1.0, 0.0, 0.25, 0.75, 0.0, 1.0;
    Eigen::VectorXd fractions = Eigen::VectorXd::Zero(8);
    fractions << 5.0, 0.0, -3.0, 0.0, 1.0, 0.0, 0.0, 1.0;
    const double s1 = sci(dict, single), s0 = sci(dict, equal), s3 = sci(dict, fractions);
    return {s1 == 1.0 && s0 == 0.0 && s3 == 1.0 / 3.0,
            fmt("single-class %.17g, equal-mass %.17g, (0.5,0.3,0.1,0.1) %.17g", s1, s0, s3)};
}

// Shared across the experiment criteria.
std::optional<ExperimentResult> training_run;

Outcome training_size() {
    ExperimentConfig c = default_config(ExperimentKind::TrainingSize);
    c.threads = 1;
    training_run = run_training_size_sweep(c, false);
    const auto& r = *training_run;
    bool ok = r.elapsed_seconds < 300.0;
    double min_large = 1.0, at5 = 0.0;
    for (const auto& p : r.points) {
        if (p.value >= 20.0) min_large = std::min(min_large, p.src.mean);
        if (p.value == 5.0) at5 = p.src.mean;
    }
    ok = ok && min_large >= 0.95 && at5 > 0.25;
    return {ok, fmt("min accuracy at >=20/class %.4f (need >= 0.95), at 5/class %.4f (chance 0.25), "
                    "%d trials in %.1f s single-threaded (limit 300 s)",
                    min_large, at5, c.trials, r.elapsed_seconds)};
}

Outcome noise_trend() {
    ExperimentConfig c = default_config(ExperimentKind::Noise);
    const ExperimentResult r = run_noise_sweep(c, false);
    bool monotone = true;
    std::string curve;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        curve += fmt("%s%g:%.4f", i ? " " : "", r.points[i].value, r.points[i].src.mean);
        for (std::size_t j = i + 1; j < r.points.size(); ++j) {
            const double se = std::max(r.points[i].src.std_error, r.points[j].src.std_error);
            if (r.points[j].src.mean > r.points[i].src.mean + se) monotone = false;
        }
    }
    if (!training_run) return {false, "training-size run unavailable"};
    const SweepPoint* clean = nullptr;
    for (const auto& p : training_run->points) {
        if (p.value == c.train_per_class.front()) clean = &p;
    }
    if (!clean) return {false, "no clean baseline at the noise training size"};
    const double diff = std::abs(r.points.front().src.mean - clean->src.mean);
    const double tol = 2.0 * std::max(r.points.front().src.std_error, clean->src.std_error);
    const bool baseline = r.points.front().value == 0.0 && diff <= tol;
    return {monotone && baseline,
            fmt("accuracy by variance [%s] %s within 1 SE; sigma^2=0 vs clean differ by %.4f (2 SE = %.4f)",
                curve.c_str(), monotone ? "non-increasing" : "INCREASES", diff, tol)};
}

Outcome blur_robustness() {
    const ExperimentResult r = run_blur_sweep(default_config(ExperimentKind::Blur), false);
    std::vector<const SweepPoint*> by_value;
    for (const auto& p : r.points) by_value.push_back(&p);
    std::sort(by_value.begin(), by_value.end(),
              [](const SweepPoint* a, const SweepPoint* b) { return a->value < b->value; });
    const SweepPoint& high = *by_value.back();
    const SweepPoint& next = *by_value[by_value.size() - 2];
    const bool ok = high.src.mean > 0.60 && high.src.mean >= high.baseline.mean &&
                    next.src.mean >= next.baseline.mean;
    return {ok, fmt("b=%g: SRC %.4f vs NN %.4f; b=%g: SRC %.4f vs NN %.4f (need SRC > 0.60 at top, "
                    "SRC >= NN at both)",
                    high.value, high.src.mean, high.baseline.mean, next.value, next.src.mean,
                    next.baseline.mean)};
}

Outcome sci_separation() {
    const ExperimentConfig c = default_config(ExperimentKind::SciThreshold);
    const ExperimentResult r = run_sci_sweep(c, false);
    const int largest = *std::max_element(c.train_per_class.begin(), c.train_per_class.end());
    double main_mean = -1.0, foreign_mean = -1.0;
    for (const auto& row : r.sci_table) {
        if (row.train_per_class != largest) continue;
        if (row.group == "main_pooled") main_mean = row.mean;
        if (row.group == "foreign_pooled") foreign_mean = row.mean;
    }
    bool monotone = true;
    std::string counts;
    for (int size : c.train_per_class) {
        long previous = std::numeric_limits<long>::max();
        for (const auto& row : r.kappa_table) {
            if (row.train_per_class != size || row.group != "foreign") continue;
            if (row.accepted > previous) monotone = false;
            previous = row.accepted;
            if (size == largest) counts += fmt("%s%g:%ld", counts.empty() ? "" : " ", row.kappa, row.accepted);
        }
    }
    return {foreign_mean >= 0.0 && foreign_mean < main_mean && monotone,
            fmt("at %d/class foreign SCI %.4f vs main %.4f; accepted foreign by kappa [%s] %s", largest,
                foreign_mean, main_mean, counts.c_str(), monotone ? "non-increasing" : "INCREASES")};
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "srcatr_acceptance";
    fs::remove_all(root);
    int compared = 0, identical = 0;
    for (auto kind : {ExperimentKind::TrainingSize, ExperimentKind::Noise, ExperimentKind::Blur,
                      ExperimentKind::SciThreshold}) {
        ExperimentConfig a = default_config(kind);
        a.output_dir = root / "a" / std::string(to_string(kind));
        ExperimentConfig b = a;
        b.output_dir = root / "b" / std::string(to_string(kind));
        run_experiment(a);
        run_experiment(b);
        for (const auto& entry : fs::directory_iterator(a.output_dir)) {
            if (entry.path().extension() != ".csv") continue;
            ++compared;
            identical += slurp(entry.path()) == slurp(b.output_dir / entry.path().filename());
        }
    }

    Gen g(1009);
    bool pgm = true;
    for (double v : {0.0, 1.0}) {
        const ImageChip chip = ImageChip::filled(4, 4, v);
        pgm = pgm && read_pgm(write_pgm(chip)) == chip;
    }
    double pgm_err = 0.0;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> px(64);
        for (auto& p : px) p = g.uniform(0.0, 1.0);
        const ImageChip chip(8, 8, px);
        const ImageChip back = read_pgm(write_pgm(chip));
        for (std::size_t i = 0; i < px.size(); ++i) {
            pgm_err = std::max(pgm_err, std::abs(back.pixels()[i] - px[i]));
        }
    }
    pgm = pgm && pgm_err <= 1.0 / 510.0;

    bool dict_ok = true;
    for (int t = 0; t < 20; ++t) {
        std::vector<Eigen::VectorXd> feats;
        std::vector<ShapeClass> labels;
        for (ShapeClass cls : kMainClasses) {
            for (int i = g.integer(1, 6); i > 0; --i) {
                feats.push_back(g.unit_vector(37));
                labels.push_back(cls);
            }
        }
        const Dictionary dict = build_dictionary_from_features(feats, labels);
        const fs::path file = root / "dict.srcd";
        save_dictionary(file, dict);
        const Dictionary back = load_dictionary(file);
        dict_ok = dict_ok && back.atoms().cwiseEqual(dict.atoms()).all() &&
                  std::equal(back.labels().begin(), back.labels().end(), dict.labels().begin(),
                             dict.labels().end()) &&
                  serialize_dictionary(back) == serialize_dictionary(dict);
    }
    return {compared > 0 && identical == compared && pgm && dict_ok,
            fmt("%d/%d CSVs byte-identical across repeated runs; PGM round-trip %s (max err %.2e); "
                "dictionary round-trip %s",
                identical, compared, pgm ? "ok" : "FAILED", pgm_err, dict_ok ? "bit-exact" : "FAILED")};
}

} // namespace

int main() {
    report("solver optimality", solver_optimality);
    report("oracle equivalence", oracle_equivalence);
    report("closed forms", closed_forms);
    report("SCI exactness", sci_exactness);
    report("training-size sweep", training_size);
    report("noise sweep", noise_trend);
    report("blur sweep", blur_robustness);
    report("SCI separation", sci_separation);
    report("determinism", determinism);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
