// srcatr command-line front end.
//
// Exit codes: 0 success, 2 config/usage error, 3 data error, 4 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "srcatr/classifier.hpp"
#include "srcatr/config.hpp"
#include "srcatr/csv.hpp"
#include "srcatr/dictionary.hpp"
#include "srcatr/errors.hpp"
#include "srcatr/harness.hpp"
#include "srcatr/imaging.hpp"
#include "srcatr/l1solver.hpp"

namespace fs = std::filesystem;
using namespace srcatr;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

ChipSize parse_size(const std::string& text) {
    const auto x = text.find('x');
    try {
        if (x == std::string::npos) throw std::invalid_argument(text);
        return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
    } catch (const std::exception&) {
        throw ConfigError("expected WIDTHxHEIGHT, got '" + text + "'");
    }
}

struct SolverFlags {
    std::optional<double> epsilon;
    std::optional<double> lambda_min;
    std::optional<int> max_breakpoints;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--epsilon", epsilon, "Residual target");
        cmd->add_option("--lambda-min", lambda_min, "Path floor on lambda");
        cmd->add_option("--max-breakpoints", max_breakpoints, "Breakpoint budget");
    }
    SolverOptions options() const {
        SolverOptions o;
        o.epsilon = epsilon;
        o.lambda_min = lambda_min;
        o.max_breakpoints = max_breakpoints;
        return o;
    }
};

Eigen::VectorXd load_feature(const fs::path& chip_path, const Dictionary& dict,
                             const std::string& feature_dim) {
    const ChipSize dim = parse_size(feature_dim);
    if (static_cast<Eigen::Index>(dim.width) * dim.height != dict.feature_dim()) {
        throw DataError("feature size " + feature_dim + " does not match dictionary dimension " +
                        std::to_string(dict.feature_dim()));
    }
    return vectorize(load_pgm(chip_path), dim);
}

void print_code(const SparseCode& code) {
    std::cout << "status: " << to_string(code.status) << "\n"
              << "iterations: " << code.iterations << "\n"
              << "lambda_final: " << csv::format_double(code.lambda_final) << "\n"
              << "residual_norm: " << csv::format_double(code.residual_norm) << "\n"
              << "nonzeros: " << code.active_set.size() << "\n";
    if (!code.dropped_columns.empty()) {
        std::cout << "dropped_columns: " << code.dropped_columns.size() << "\n";
    }
    for (Eigen::Index i : code.active_set) {
        std::cout << "  x[" << i << "] = " << csv::format_double(code.x(i)) << "\n";
    }
}

int cmd_generate(const std::string& config_path, const fs::path& out, int per_class,
                 bool foreign, std::uint64_t seed, const std::string& chip_size) {
    ExperimentConfig config = config_path.empty() ? default_config(ExperimentKind::TrainingSize)
                                                  : load_config(config_path);
    if (seed != 0) config.master_seed = seed;
    if (!chip_size.empty()) config.chip_size = parse_size(chip_size);
    if (per_class > 0) {
        for (auto& [cls, n] : config.pool_sizes) n = per_class;
    }
    fs::create_directories(out);
    std::ofstream manifest(out / "manifest.csv");
    if (!manifest) throw DataError("cannot write " + (out / "manifest.csv").string());
    manifest << "# srcatr-manifest v1\n" << "file,class,index,pose_seed\n";
    const ChipPool pool = make_pool(config, foreign);
    long written = 0;
    for (const auto& [cls, chips] : pool) {
        for (std::size_t i = 0; i < chips.size(); ++i) {
            const std::string name = std::string(to_string(cls)) + "_" + std::to_string(i) + ".pgm";
            save_pgm(out / name, chips[i]);
            manifest << csv::join_row({name, std::string(to_string(cls)), std::to_string(i),
                                       std::to_string(pool_pose_seed(config.master_seed, cls, i))})
                     << "\n";
            ++written;
        }
    }
    std::cout << "wrote " << written << " chips to " << out.string() << "\n";
    return 0;
}

int cmd_build_dict(const fs::path& manifest_path, const fs::path& out, int per_class,
                   const std::string& feature_dim) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open " + manifest_path.string());
    const fs::path base = manifest_path.parent_path();
    std::vector<LabeledChip> training;
    std::map<ShapeClass, int> taken;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        const auto row = csv::split_row(line);
        if (row.size() < 2) throw DataError("malformed manifest row: " + line);
        const auto cls = parse_shape_class(row[1]);
        if (!cls) throw DataError("unknown class '" + row[1] + "' in manifest");
        if (!is_main_class(*cls)) continue;
        if (per_class > 0 && taken[*cls] >= per_class) continue;
        ++taken[*cls];
        training.push_back({load_pgm(base / row[0]), *cls});
    }
    const Dictionary dict = build_dictionary(training, parse_size(feature_dim));
    save_dictionary(out, dict);
    std::cout << "dictionary: " << dict.feature_dim() << " x " << dict.atom_count() << ", "
              << dict.class_count() << " classes -> " << out.string() << "\n";
    return 0;
}

int cmd_solve(const fs::path& dict_path, const fs::path& chip, const std::string& feature_dim,
              const SolverFlags& flags) {
    const Dictionary dict = load_dictionary(dict_path);
    const Eigen::VectorXd y = load_feature(chip, dict, feature_dim);
    const SparseCode code = homotopy_solve(dict.atoms(), dict.gram(), y, flags.options());
    print_code(code);
    return 0;
}

int cmd_classify(const fs::path& dict_path, const fs::path& chip, const std::string& feature_dim,
                 const SolverFlags& flags, std::optional<double> kappa) {
    const Dictionary dict = load_dictionary(dict_path);
    const Eigen::VectorXd y = load_feature(chip, dict, feature_dim);
    SolverOptions opts = flags.options();
    if (!opts.lambda_min) opts.lambda_min = kExperimentLambdaMin;
    const ClassificationResult r =
        kappa ? classify_with_rejection(dict, y, opts, RejectionPolicy(*kappa))
              : classify(dict, y, opts);
    std::cout << "predicted: " << to_string(r.predicted) << "\n"
              << "sci: " << csv::format_double(r.sci) << "\n";
    if (kappa) std::cout << "rejected: " << (r.rejected ? "yes" : "no") << "\n";
    std::cout << "residuals:\n";
    for (int j = 0; j < dict.class_count(); ++j) {
        std::cout << "  " << to_string(dict.classes()[static_cast<std::size_t>(j)]) << " "
                  << csv::format_double(r.residuals[static_cast<std::size_t>(j)]) << "\n";
    }
    std::cout << "nearest_neighbor: " << to_string(nearest_neighbor_baseline(dict, y)) << "\n";
    return 0;
}

int cmd_experiment(const std::string& name, const std::string& config_path, const std::string& out,
                   std::optional<int> trials, std::optional<int> threads) {
    const auto kind = parse_experiment_kind(name);
    if (!kind) {
        throw ConfigError("unknown experiment '" + name +
                          "' (expected training-size, noise, blur or sci)");
    }
    ExperimentConfig config = config_path.empty() ? default_config(*kind)
                                                  : load_config(config_path, *kind);
    if (!out.empty()) config.output_dir = out;
    if (trials) config.trials = *trials;
    if (threads) config.threads = *threads;
    const ExperimentResult result = run_experiment(config);
    for (const auto& p : result.points) {
        std::printf("%-10g src %.4f +- %.4f   nn %.4f +- %.4f\n", p.value, p.src.mean,
                    p.src.std_error, p.baseline.mean, p.baseline.std_error);
    }
    std::cout << "wrote " << result.files.size() << " files to " << config.output_dir.string()
              << " in " << result.elapsed_seconds << " s\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-representation classification of synthetic sonar target chips"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "Write a synthetic chip pool as PGM files plus manifest.csv");
    std::string gen_config, gen_size;
    fs::path gen_out;
    int gen_per_class = 0;
    bool gen_foreign = false;
    std::uint64_t gen_seed = 0;
    gen->add_option("--config", gen_config, "Config file (pool sizes, chip size, seed)");
    gen->add_option("-o,--out", gen_out, "Output directory")->required();
    gen->add_option("--per-class", gen_per_class, "Chips per class, overriding pool sizes");
    gen->add_option("--seed", gen_seed, "Master seed");
    gen->add_option("--chip-size", gen_size, "Chip size WxH");
    gen->add_flag("--foreign", gen_foreign, "Include the foreign classes");

    auto* build = app.add_subcommand("build-dict", "Build a dictionary from a generated manifest");
    fs::path build_manifest, build_out;
    int build_per_class = 0;
    std::string build_dim = "16x16";
    build->add_option("--manifest", build_manifest, "manifest.csv from generate")->required();
    build->add_option("-o,--out", build_out, "Dictionary file")->required();
    build->add_option("--per-class", build_per_class, "Training chips per class (0 = all)");
    build->add_option("--feature-dim", build_dim, "Feature size WxH");

    auto* solve = app.add_subcommand("solve", "Sparse-code one chip against a saved dictionary");
    fs::path solve_dict, solve_chip;
    std::string solve_dim = "16x16";
    SolverFlags solve_flags;
    solve->add_option("--dict", solve_dict, "Dictionary file")->required();
    solve->add_option("--chip", solve_chip, "PGM chip")->required();
    solve->add_option("--feature-dim", solve_dim, "Feature size WxH");
    solve_flags.add_to(solve);

    auto* cls = app.add_subcommand("classify", "Classify one chip against a saved dictionary");
    fs::path cls_dict, cls_chip;
    std::string cls_dim = "16x16";
    SolverFlags cls_flags;
    std::optional<double> cls_kappa;
    cls->add_option("--dict", cls_dict, "Dictionary file")->required();
    cls->add_option("--chip", cls_chip, "PGM chip")->required();
    cls->add_option("--feature-dim", cls_dim, "Feature size WxH");
    cls->add_option("--kappa", cls_kappa, "Reject when SCI < kappa");
    cls_flags.add_to(cls);

    auto* exp = app.add_subcommand("experiment", "Run a sweep: training-size, noise, blur or sci");
    std::string exp_name, exp_config, exp_out;
    std::optional<int> exp_trials, exp_threads;
    exp->add_option("name", exp_name, "Experiment name")->required();
    exp->add_option("--config", exp_config, "Config file");
    exp->add_option("-o,--out", exp_out, "Output directory");
    exp->add_option("--trials", exp_trials, "Override trial count");
    exp->add_option("--threads", exp_threads, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*gen) return cmd_generate(gen_config, gen_out, gen_per_class, gen_foreign, gen_seed, gen_size);
        if (*build) return cmd_build_dict(build_manifest, build_out, build_per_class, build_dim);
        if (*solve) return cmd_solve(solve_dict, solve_chip, solve_dim, solve_flags);
        if (*cls) return cmd_classify(cls_dict, cls_chip, cls_dim, cls_flags, cls_kappa);
        if (*exp) return cmd_experiment(exp_name, exp_config, exp_out, exp_trials, exp_threads);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
