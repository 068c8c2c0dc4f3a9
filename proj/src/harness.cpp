#include "srcatr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "srcatr/csv.hpp"
#include "srcatr/errors.hpp"
#include "srcatr/seeding.hpp"

namespace srcatr {

namespace {

// Stream identifiers mixed into derived seeds.
constexpr std::uint64_t kPoolStream = 0x706f6f6cULL;
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;
constexpr std::uint64_t kForeignStream = 0x666f726569676eULL;
constexpr std::uint64_t kTrainNoiseStream = 0x747261696eULL;

constexpr std::string_view kRecordsSchema = "srcatr-records v1";
constexpr std::string_view kSummarySchema = "srcatr-summary v1";

std::string file_prefix(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::TrainingSize: return "training_size";
    case ExperimentKind::Noise: return "noise";
    case ExperimentKind::Blur: return "blur";
    case ExperimentKind::SciThreshold: return "sci";
    }
    return "experiment";
}

std::string sweep_axis(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::TrainingSize: return "train_per_class";
    case ExperimentKind::Noise: return "noise_variance";
    case ExperimentKind::Blur: return "blur_intensity";
    case ExperimentKind::SciThreshold: return "train_per_class";
    }
    return "value";
}

std::vector<ShapeClass> main_classes() { return {kMainClasses.begin(), kMainClasses.end()}; }

struct KeyedRecord {
    int sweep_index = 0;
    int kappa_index = 0;
    TrialRecord record;
};

// Vectorized clean pool, shared read-only across trials.
struct PreparedPool {
    ChipPool chips;
    std::map<ShapeClass, std::vector<Eigen::VectorXd>> features;
};

PreparedPool prepare_pool(const ExperimentConfig& config, bool with_foreign) {
    PreparedPool p;
    p.chips = make_pool(config, with_foreign);
    for (const auto& [cls, chips] : p.chips) {
        auto& feats = p.features[cls];
        feats.reserve(chips.size());
        for (const auto& chip : chips) feats.push_back(vectorize(chip, config.feature_dim));
    }
    return p;
}

PoolSizes main_pool_sizes(const PreparedPool& pool) {
    PoolSizes sizes;
    for (ShapeClass cls : kMainClasses) sizes[cls] = pool.chips.at(cls).size();
    return sizes;
}

struct TestItem {
    ShapeClass cls;
    std::size_t pool_index;
};

std::vector<TestItem> test_items(const DataSplit& split) {
    std::vector<TestItem> items;
    for (ShapeClass cls : kMainClasses) {
        const auto it = split.test.find(cls);
        if (it == split.test.end()) continue;
        for (std::size_t idx : it->second) items.push_back({cls, idx});
    }
    return items;
}

Dictionary dictionary_from(const PreparedPool& pool, const DataSplit& split,
                           const std::function<Eigen::VectorXd(ShapeClass, std::size_t)>& feature) {
    std::vector<Eigen::VectorXd> feats;
    std::vector<ShapeClass> labels;
    for (const auto& [cls, indices] : split.train) {
        for (std::size_t idx : indices) {
            feats.push_back(feature ? feature(cls, idx) : pool.features.at(cls)[idx]);
            labels.push_back(cls);
        }
    }
    return build_dictionary_from_features(feats, labels);
}

TrialRecord classify_record(const ExperimentConfig& config, const Dictionary& dict,
                            const Eigen::VectorXd& y, ShapeClass truth) {
    TrialRecord rec;
    rec.experiment = config.experiment;
    rec.true_class = truth;
    const auto start = std::chrono::steady_clock::now();
    const ClassificationResult result = classify(dict, y, config.solver);
    const auto stop = std::chrono::steady_clock::now();
    rec.predicted = result.predicted;
    rec.residuals = result.residuals;
    rec.sci = result.sci;
    rec.nn_predicted = nearest_neighbor_baseline(dict, y);
    if (config.record_timing) {
        rec.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    }
    return rec;
}

// Runs `trial_fn(t)` for every trial, in parallel when configured, and
// returns the concatenated records in a fixed order.
std::vector<KeyedRecord> run_trials(const ExperimentConfig& config,
                                    const std::function<std::vector<KeyedRecord>(int)>& trial_fn) {
    std::vector<std::vector<KeyedRecord>> per_trial(static_cast<std::size_t>(config.trials));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.trials));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int t = next++; t < config.trials; t = next++) {
            try {
                per_trial[static_cast<std::size_t>(t)] = trial_fn(t);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        }
    };
    const int workers = std::min(config.threads, config.trials);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::vector<KeyedRecord> all;
    for (auto& recs : per_trial) {
        std::move(recs.begin(), recs.end(), std::back_inserter(all));
    }
    std::stable_sort(all.begin(), all.end(), [](const KeyedRecord& a, const KeyedRecord& b) {
        return std::tie(a.sweep_index, a.kappa_index, a.record.trial, a.record.sample) <
               std::tie(b.sweep_index, b.kappa_index, b.record.trial, b.record.sample);
    });
    return all;
}

std::vector<SweepPoint> summarize(const ExperimentConfig& config,
                                  const std::vector<KeyedRecord>& records,
                                  const std::vector<double>& sweep_values) {
    std::vector<SweepPoint> points;
    for (std::size_t si = 0; si < sweep_values.size(); ++si) {
        // correct counts per trial, overall and per class
        std::vector<double> src_hits(static_cast<std::size_t>(config.trials), 0.0);
        std::vector<double> nn_hits(src_hits.size(), 0.0);
        std::vector<double> totals(src_hits.size(), 0.0);
        std::map<ShapeClass, std::vector<double>> cls_src, cls_nn, cls_tot;
        for (ShapeClass c : kMainClasses) {
            cls_src[c].assign(src_hits.size(), 0.0);
            cls_nn[c].assign(src_hits.size(), 0.0);
            cls_tot[c].assign(src_hits.size(), 0.0);
        }
        for (const auto& kr : records) {
            if (kr.sweep_index != static_cast<int>(si) || kr.kappa_index != 0) continue;
            const TrialRecord& r = kr.record;
            if (!is_main_class(r.true_class)) continue;
            const auto t = static_cast<std::size_t>(r.trial);
            totals[t] += 1.0;
            cls_tot[r.true_class][t] += 1.0;
            if (r.predicted == r.true_class) {
                src_hits[t] += 1.0;
                cls_src[r.true_class][t] += 1.0;
            }
            if (r.nn_predicted == r.true_class) {
                nn_hits[t] += 1.0;
                cls_nn[r.true_class][t] += 1.0;
            }
        }
        auto rates = [](const std::vector<double>& hits, const std::vector<double>& tot) {
            std::vector<double> out(hits.size());
            for (std::size_t i = 0; i < hits.size(); ++i) {
                out[i] = tot[i] > 0.0 ? hits[i] / tot[i] : 0.0;
            }
            return out;
        };
        SweepPoint p;
        p.value = sweep_values[si];
        p.src = accuracy_stats(rates(src_hits, totals));
        p.baseline = accuracy_stats(rates(nn_hits, totals));
        for (ShapeClass c : kMainClasses) {
            p.src_per_class[c] = accuracy_stats(rates(cls_src[c], cls_tot[c]));
            p.baseline_per_class[c] = accuracy_stats(rates(cls_nn[c], cls_tot[c]));
        }
        points.push_back(std::move(p));
    }
    return points;
}

ConfusionMatrix confusion_at(const std::vector<KeyedRecord>& records, int sweep_index,
                             bool baseline) {
    ConfusionMatrix m(main_classes());
    for (const auto& kr : records) {
        if (kr.sweep_index != sweep_index || kr.kappa_index != 0) continue;
        if (!is_main_class(kr.record.true_class)) continue;
        m.add(kr.record.true_class, baseline ? kr.record.nn_predicted : kr.record.predicted);
    }
    return m;
}

void add_confusions(ExperimentResult& result, const std::vector<KeyedRecord>& records,
                    const std::vector<double>& values, int index, const std::string& tag) {
    (void)values;
    result.confusions.emplace("src_" + tag, confusion_at(records, index, false));
    result.confusions.emplace("nn_" + tag, confusion_at(records, index, true));
}

std::vector<double> as_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

ExperimentResult finish(ExperimentResult result, std::vector<KeyedRecord> keyed,
                        bool write_files, std::chrono::steady_clock::time_point start) {
    result.records.reserve(keyed.size());
    for (auto& kr : keyed) result.records.push_back(std::move(kr.record));
    result.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (write_files) result.files = write_result_files(result, result.config.output_dir);
    return result;
}

void require_kind(const ExperimentConfig& config, ExperimentKind kind) {
    if (config.experiment != kind) {
        throw ConfigError("config is for experiment '" + std::string(to_string(config.experiment)) +
                          "', expected '" + std::string(to_string(kind)) + "'");
    }
    validate(config);
}

// Shared by the noise and blur sweeps: one split and dictionary per trial,
// every test chip corrupted at each sweep value.
ExperimentResult run_corruption_sweep(const ExperimentConfig& config, bool write_files,
                                      const std::vector<double>& values, bool noise) {
    const auto start = std::chrono::steady_clock::now();
    const PreparedPool pool = prepare_pool(config, false);
    const int train = config.train_per_class.front();

    auto corrupt_chip = [&](const ImageChip& chip, double value, std::uint64_t seed) {
        return noise ? add_noise(chip, value, seed) : apply_blur(chip, value);
    };

    auto trial_fn = [&](int t) {
        const std::uint64_t seed = trial_seed(config, t);
        const DataSplit split = sample_split(main_pool_sizes(pool), train, config.test_per_class, seed);
        const auto items = test_items(split);
        std::optional<Dictionary> clean_dict;
        std::vector<KeyedRecord> out;
        for (std::size_t si = 0; si < values.size(); ++si) {
            const double value = values[si];
            std::optional<Dictionary> corrupted_dict;
            if (config.corrupt_training && value > 0.0) {
                corrupted_dict = dictionary_from(pool, split, [&](ShapeClass cls, std::size_t idx) {
                    const std::uint64_t s = derive_seed(seed, {kTrainNoiseStream,
                                                               static_cast<std::uint64_t>(cls), idx});
                    return vectorize(corrupt_chip(pool.chips.at(cls)[idx], value, s),
                                     config.feature_dim);
                });
            } else if (!clean_dict) {
                clean_dict = dictionary_from(pool, split, {});
            }
            const Dictionary& dict = corrupted_dict ? *corrupted_dict : *clean_dict;
            for (std::size_t s = 0; s < items.size(); ++s) {
                const TestItem& item = items[s];
                Eigen::VectorXd y;
                if (value == 0.0) {
                    y = pool.features.at(item.cls)[item.pool_index];
                } else {
                    // Same base noise draw at every variance for a given chip.
                    const std::uint64_t noise_seed = derive_seed(
                        seed, {kNoiseStream, static_cast<std::uint64_t>(item.cls), item.pool_index});
                    y = vectorize(corrupt_chip(pool.chips.at(item.cls)[item.pool_index], value,
                                               noise_seed),
                                  config.feature_dim);
                }
                KeyedRecord kr{static_cast<int>(si), 0, classify_record(config, dict, y, item.cls)};
                kr.record.trial = t;
                kr.record.sample = static_cast<int>(s);
                kr.record.sweep_value = value;
                out.push_back(std::move(kr));
            }
        }
        return out;
    };

    auto keyed = run_trials(config, trial_fn);
    ExperimentResult result;
    result.config = config;
    result.points = summarize(config, keyed, values);

    if (noise) {
        // Mean SNR over every clean test chip seen at each variance.
        for (std::size_t si = 0; si < values.size(); ++si) {
            if (values[si] <= 0.0) continue;
            double total = 0.0;
            long n = 0;
            for (int t = 0; t < config.trials; ++t) {
                const DataSplit split = sample_split(main_pool_sizes(pool), train,
                                                     config.test_per_class, trial_seed(config, t));
                for (const auto& item : test_items(split)) {
                    total += snr_db(pool.chips.at(item.cls)[item.pool_index], values[si]);
                    ++n;
                }
            }
            result.points[si].mean_snr_db = total / static_cast<double>(n);
        }
    }

    // Confusion matrices at a low/mid and the highest corruption level.
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t high = order.back();
    std::size_t low = order.front();
    if (noise) {
        for (std::size_t i : order) {
            if (values[i] > 0.0) {
                low = i;
                break;
            }
        }
    } else {
        low = order[order.size() / 2];
    }
    add_confusions(result, keyed, values, static_cast<int>(low), noise ? "low" : "mid");
    add_confusions(result, keyed, values, static_cast<int>(high), "high");
    return finish(std::move(result), std::move(keyed), write_files, start);
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace

std::uint64_t pool_pose_seed(std::uint64_t master_seed, ShapeClass cls, std::size_t index) {
    return derive_seed(master_seed, {kPoolStream, static_cast<std::uint64_t>(cls), index});
}

ChipPool make_pool(const ExperimentConfig& config, bool with_foreign) {
    ChipPool pool;
    for (ShapeClass cls : kAllClasses) {
        if (!with_foreign && !is_main_class(cls)) continue;
        const auto it = config.pool_sizes.find(cls);
        const int n = it == config.pool_sizes.end() ? 0 : it->second;
        auto& chips = pool[cls];
        chips.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            chips.push_back(generate_chip(
                cls, pool_pose_seed(config.master_seed, cls, static_cast<std::size_t>(i)),
                config.chip_size));
        }
    }
    return pool;
}

ConfusionMatrix::ConfusionMatrix(std::vector<ShapeClass> classes)
    : classes_(std::move(classes)),
      counts_(Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(
          static_cast<Eigen::Index>(classes_.size()), static_cast<Eigen::Index>(classes_.size()))) {}

void ConfusionMatrix::add(ShapeClass truth, ShapeClass predicted) {
    const auto ti = std::find(classes_.begin(), classes_.end(), truth);
    const auto pi = std::find(classes_.begin(), classes_.end(), predicted);
    if (ti == classes_.end() || pi == classes_.end()) {
        throw std::invalid_argument("class outside confusion matrix");
    }
    ++counts_(pi - classes_.begin(), ti - classes_.begin());
}

long ConfusionMatrix::count(int predicted_index, int true_index) const {
    return counts_(predicted_index, true_index);
}

long ConfusionMatrix::column_total(int true_index) const { return counts_.col(true_index).sum(); }

Eigen::MatrixXd ConfusionMatrix::column_percentages() const {
    Eigen::MatrixXd out = counts_.cast<double>();
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        const double total = out.col(c).sum();
        if (total > 0.0) out.col(c) *= 100.0 / total;
    }
    return out;
}

AccuracyStats accuracy_stats(const std::vector<double>& per_trial) {
    AccuracyStats s;
    if (per_trial.empty()) return s;
    s.mean = mean_of(per_trial);
    s.std_error = sample_std(per_trial) / std::sqrt(static_cast<double>(per_trial.size()));
    return s;
}

ExperimentResult run_training_size_sweep(const ExperimentConfig& config, bool write_files) {
    require_kind(config, ExperimentKind::TrainingSize);
    const auto start = std::chrono::steady_clock::now();
    const PreparedPool pool = prepare_pool(config, false);
    const auto sizes = config.train_per_class;

    auto trial_fn = [&](int t) {
        const std::uint64_t seed = trial_seed(config, t);
        std::vector<KeyedRecord> out;
        for (std::size_t si = 0; si < sizes.size(); ++si) {
            const DataSplit split =
                sample_split(main_pool_sizes(pool), sizes[si], config.test_per_class, seed);
            const Dictionary dict = dictionary_from(pool, split, {});
            const auto items = test_items(split);
            for (std::size_t s = 0; s < items.size(); ++s) {
                const auto& y = pool.features.at(items[s].cls)[items[s].pool_index];
                KeyedRecord kr{static_cast<int>(si), 0, classify_record(config, dict, y, items[s].cls)};
                kr.record.trial = t;
                kr.record.sample = static_cast<int>(s);
                kr.record.sweep_value = sizes[si];
                out.push_back(std::move(kr));
            }
        }
        return out;
    };

    auto keyed = run_trials(config, trial_fn);
    ExperimentResult result;
    result.config = config;
    result.points = summarize(config, keyed, as_doubles(sizes));
    return finish(std::move(result), std::move(keyed), write_files, start);
}

ExperimentResult run_noise_sweep(const ExperimentConfig& config, bool write_files) {
    require_kind(config, ExperimentKind::Noise);
    return run_corruption_sweep(config, write_files, config.noise_variances, true);
}

ExperimentResult run_blur_sweep(const ExperimentConfig& config, bool write_files) {
    require_kind(config, ExperimentKind::Blur);
    return run_corruption_sweep(config, write_files, config.blur_intensities, false);
}

ExperimentResult run_sci_sweep(const ExperimentConfig& config, bool write_files) {
    require_kind(config, ExperimentKind::SciThreshold);
    const auto start = std::chrono::steady_clock::now();
    const PreparedPool pool = prepare_pool(config, true);
    const auto sizes = config.train_per_class;
    std::vector<double> kappas = config.kappas;
    std::sort(kappas.begin(), kappas.end());

    auto trial_fn = [&](int t) {
        const std::uint64_t seed = trial_seed(config, t);
        std::vector<KeyedRecord> out;
        for (std::size_t si = 0; si < sizes.size(); ++si) {
            const DataSplit split =
                sample_split(main_pool_sizes(pool), sizes[si], config.test_per_class, seed);
            const Dictionary dict = dictionary_from(pool, split, {});
            auto items = test_items(split);
            for (ShapeClass cls : kForeignClasses) {
                const auto picks = sample_without_replacement(
                    pool.chips.at(cls).size(),
                    static_cast<std::size_t>(config.foreign_test_per_class),
                    derive_seed(seed, {kForeignStream, static_cast<std::uint64_t>(cls)}));
                for (std::size_t idx : picks) items.push_back({cls, idx});
            }
            for (std::size_t s = 0; s < items.size(); ++s) {
                const auto& y = pool.features.at(items[s].cls)[items[s].pool_index];
                TrialRecord base = classify_record(config, dict, y, items[s].cls);
                base.trial = t;
                base.sample = static_cast<int>(s);
                base.sweep_value = sizes[si];
                for (std::size_t ki = 0; ki < kappas.size(); ++ki) {
                    KeyedRecord kr{static_cast<int>(si), static_cast<int>(ki), base};
                    kr.record.kappa = kappas[ki];
                    kr.record.rejected = RejectionPolicy(kappas[ki]).rejects(base.sci);
                    out.push_back(std::move(kr));
                }
            }
        }
        return out;
    };

    auto keyed = run_trials(config, trial_fn);
    ExperimentResult result;
    result.config = config;
    result.config.kappas = kappas;
    result.points = summarize(config, keyed, as_doubles(sizes));

    for (std::size_t si = 0; si < sizes.size(); ++si) {
        std::map<ShapeClass, std::vector<double>> by_class;
        for (const auto& kr : keyed) {
            if (kr.sweep_index != static_cast<int>(si) || kr.kappa_index != 0) continue;
            by_class[kr.record.true_class].push_back(kr.record.sci);
        }
        std::vector<double> main_all, foreign_all;
        for (ShapeClass cls : kAllClasses) {
            const auto& v = by_class[cls];
            result.sci_table.push_back(
                {sizes[si], std::string(to_string(cls)), mean_of(v), sample_std(v),
                 static_cast<long>(v.size())});
            auto& pooled = is_main_class(cls) ? main_all : foreign_all;
            pooled.insert(pooled.end(), v.begin(), v.end());
        }
        result.sci_table.push_back({sizes[si], "main_pooled", mean_of(main_all),
                                    sample_std(main_all), static_cast<long>(main_all.size())});
        result.sci_table.push_back({sizes[si], "foreign_pooled", mean_of(foreign_all),
                                    sample_std(foreign_all), static_cast<long>(foreign_all.size())});

        for (std::size_t ki = 0; ki < kappas.size(); ++ki) {
            std::map<std::string, KappaRow> rows;
            for (const auto& kr : keyed) {
                if (kr.sweep_index != static_cast<int>(si) || kr.kappa_index != static_cast<int>(ki)) {
                    continue;
                }
                const TrialRecord& r = kr.record;
                for (const std::string& group :
                     {std::string(to_string(r.true_class)),
                      std::string(is_main_class(r.true_class) ? "main" : "foreign")}) {
                    KappaRow& row = rows[group];
                    row.tests += 1;
                    if (!r.rejected) {
                        row.accepted += 1;
                        if (r.predicted == r.true_class) row.correct_accepted += 1;
                    }
                }
            }
            std::vector<std::string> groups;
            for (ShapeClass cls : kAllClasses) groups.emplace_back(to_string(cls));
            groups.emplace_back("main");
            groups.emplace_back("foreign");
            for (const auto& g : groups) {
                KappaRow row = rows[g];
                row.train_per_class = sizes[si];
                row.kappa = kappas[ki];
                row.group = g;
                row.rate_reject_as_error =
                    row.tests > 0 ? static_cast<double>(row.correct_accepted) / row.tests : 0.0;
                row.rate_reject_excluded =
                    row.accepted > 0 ? static_cast<double>(row.correct_accepted) / row.accepted : 0.0;
                result.kappa_table.push_back(row);
            }
        }
    }
    add_confusions(result, keyed, as_doubles(sizes), static_cast<int>(sizes.size() - 1), "largest");
    return finish(std::move(result), std::move(keyed), write_files, start);
}

ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files) {
    switch (config.experiment) {
    case ExperimentKind::TrainingSize: return run_training_size_sweep(config, write_files);
    case ExperimentKind::Noise: return run_noise_sweep(config, write_files);
    case ExperimentKind::Blur: return run_blur_sweep(config, write_files);
    case ExperimentKind::SciThreshold: return run_sci_sweep(config, write_files);
    }
    throw ConfigError("unknown experiment");
}

// ---------------------------------------------------------------------------
// CSV output

std::string records_csv(const std::vector<TrialRecord>& records,
                        const std::vector<ShapeClass>& classes) {
    std::ostringstream out;
    out << "# " << kRecordsSchema
        << "; one row per (trial, test sample, sweep value[, kappa]); residual_<class> = "
           "||y - A delta_class(x)||_2\n";
    std::vector<std::string> header = {"experiment", "trial",           "sweep_value",
                                       "kappa",      "sample",          "true_class",
                                       "predicted_class", "nn_predicted_class", "sci",
                                       "rejected",   "runtime_ms"};
    for (ShapeClass c : classes) header.push_back("residual_" + std::string(to_string(c)));
    out << csv::join_row(header) << "\n";
    for (const auto& r : records) {
        std::vector<std::string> row = {
            std::string(to_string(r.experiment)),
            std::to_string(r.trial),
            csv::format_double(r.sweep_value),
            r.kappa ? csv::format_double(*r.kappa) : "",
            std::to_string(r.sample),
            std::string(to_string(r.true_class)),
            std::string(to_string(r.predicted)),
            std::string(to_string(r.nn_predicted)),
            csv::format_double(r.sci),
            r.rejected ? "1" : "0",
            r.runtime_ms ? csv::format_double(*r.runtime_ms) : ""};
        if (r.residuals.size() != classes.size()) {
            throw std::invalid_argument("record residual count does not match class list");
        }
        for (double v : r.residuals) row.push_back(csv::format_double(v));
        out << csv::join_row(row) << "\n";
    }
    return out.str();
}

std::vector<TrialRecord> parse_records_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::vector<std::string> header;
    std::vector<TrialRecord> records;
    std::vector<ShapeClass> residual_classes;
    std::map<std::string, std::size_t> col;
    int line_no = 0;
    auto field = [&](const std::vector<std::string>& row, const char* name) -> const std::string& {
        const auto it = col.find(name);
        if (it == col.end()) throw DataError(std::string("records CSV lacks column ") + name);
        return row[it->second];
    };
    auto shape = [&](const std::string& s) {
        const auto cls = parse_shape_class(s);
        if (!cls) throw DataError("line " + std::to_string(line_no) + ": unknown class '" + s + "'");
        return *cls;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto row = csv::split_row(line);
        if (header.empty()) {
            header = row;
            for (std::size_t i = 0; i < header.size(); ++i) {
                col[header[i]] = i;
                if (header[i].rfind("residual_", 0) == 0) {
                    residual_classes.push_back(shape(header[i].substr(9)));
                }
            }
            continue;
        }
        if (row.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(row.size()));
        }
        TrialRecord r;
        const auto kind = parse_experiment_kind(field(row, "experiment"));
        if (!kind) throw DataError("line " + std::to_string(line_no) + ": unknown experiment");
        r.experiment = *kind;
        r.trial = static_cast<int>(csv::parse_int(field(row, "trial")));
        r.sweep_value = csv::parse_double(field(row, "sweep_value"));
        if (!field(row, "kappa").empty()) r.kappa = csv::parse_double(field(row, "kappa"));
        r.sample = static_cast<int>(csv::parse_int(field(row, "sample")));
        r.true_class = shape(field(row, "true_class"));
        r.predicted = shape(field(row, "predicted_class"));
        r.nn_predicted = shape(field(row, "nn_predicted_class"));
        r.sci = csv::parse_double(field(row, "sci"));
        r.rejected = field(row, "rejected") == "1";
        if (!field(row, "runtime_ms").empty()) {
            r.runtime_ms = csv::parse_double(field(row, "runtime_ms"));
        }
        for (ShapeClass c : residual_classes) {
            r.residuals.push_back(
                csv::parse_double(row[col.at("residual_" + std::string(to_string(c)))]));
        }
        if (r.residuals.empty()) throw DataError("records CSV has no residual columns");
        const ShapeClass expected =
            residual_classes[static_cast<std::size_t>(argmin_residual(r.residuals))];
        if (expected != r.predicted) {
            throw DataError("line " + std::to_string(line_no) + ": predicted class '" +
                            std::string(to_string(r.predicted)) +
                            "' is not the argmin of the stored residuals ('" +
                            std::string(to_string(expected)) + "')");
        }
        records.push_back(std::move(r));
    }
    if (header.empty()) throw DataError("records CSV has no header row");
    return records;
}

std::vector<TrialRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_records_csv(text);
}

std::string confusion_csv(const ConfusionMatrix& m) {
    std::ostringstream out;
    out << "# srcatr-confusion v1; rows = predicted class, columns = true class; "
           "column_percent sums to 100 per true class\n";
    out << "predicted_class,true_class,count,column_percent\n";
    const Eigen::MatrixXd pct = m.column_percentages();
    const auto& cls = m.classes();
    for (std::size_t p = 0; p < cls.size(); ++p) {
        for (std::size_t t = 0; t < cls.size(); ++t) {
            out << csv::join_row({std::string(to_string(cls[p])), std::string(to_string(cls[t])),
                                  std::to_string(m.count(static_cast<int>(p), static_cast<int>(t))),
                                  csv::format_double(pct(static_cast<Eigen::Index>(p),
                                                         static_cast<Eigen::Index>(t)))})
                << "\n";
        }
    }
    return out.str();
}

namespace {

std::string summary_csv(const ExperimentResult& r) {
    const bool snr = r.config.experiment == ExperimentKind::Noise;
    std::ostringstream out;
    out << "# " << kSummarySchema << "; experiment=" << to_string(r.config.experiment)
        << "; accuracy = per-trial fraction of main-class tests classified correctly; "
           "std_error = sample_std(per-trial accuracy) / sqrt(trials); nn = nearest-neighbor "
           "baseline\n";
    std::vector<std::string> header = {sweep_axis(r.config.experiment), "trials",
                                       "src_mean_accuracy", "src_std_error",
                                       "nn_mean_accuracy", "nn_std_error"};
    if (snr) header.emplace_back("mean_snr_db");
    out << csv::join_row(header) << "\n";
    for (const auto& p : r.points) {
        std::vector<std::string> row = {csv::format_double(p.value), std::to_string(r.config.trials),
                                        csv::format_double(p.src.mean),
                                        csv::format_double(p.src.std_error),
                                        csv::format_double(p.baseline.mean),
                                        csv::format_double(p.baseline.std_error)};
        if (snr) row.push_back(p.mean_snr_db ? csv::format_double(*p.mean_snr_db) : "");
        out << csv::join_row(row) << "\n";
    }
    return out.str();
}

std::string per_class_csv(const ExperimentResult& r) {
    std::ostringstream out;
    out << "# " << kSummarySchema << "; per-class accuracy; std_error = sample_std / sqrt(trials)\n";
    out << csv::join_row({sweep_axis(r.config.experiment), "class", "src_mean_accuracy",
                          "src_std_error", "nn_mean_accuracy", "nn_std_error"})
        << "\n";
    for (const auto& p : r.points) {
        for (ShapeClass c : kMainClasses) {
            out << csv::join_row({csv::format_double(p.value), std::string(to_string(c)),
                                  csv::format_double(p.src_per_class.at(c).mean),
                                  csv::format_double(p.src_per_class.at(c).std_error),
                                  csv::format_double(p.baseline_per_class.at(c).mean),
                                  csv::format_double(p.baseline_per_class.at(c).std_error)})
                << "\n";
        }
    }
    return out.str();
}

std::string sci_table_csv(const ExperimentResult& r) {
    std::ostringstream out;
    out << "# " << kSummarySchema << "; SCI per true class over all trials; std = sample std\n";
    out << "train_per_class,group,mean_sci,std_sci,count\n";
    for (const auto& row : r.sci_table) {
        out << csv::join_row({std::to_string(row.train_per_class), row.group,
                              csv::format_double(row.mean), csv::format_double(row.std_dev),
                              std::to_string(row.count)})
            << "\n";
    }
    return out.str();
}

std::string kappa_csv(const ExperimentResult& r) {
    std::ostringstream out;
    out << "# " << kSummarySchema
        << "; rejection when SCI < kappa; rate_reject_as_error = correct_accepted/tests; "
           "rate_reject_excluded = correct_accepted/accepted\n";
    out << "train_per_class,kappa,group,tests,accepted,rejected,correct_accepted,"
           "rate_reject_as_error,rate_reject_excluded\n";
    for (const auto& row : r.kappa_table) {
        out << csv::join_row({std::to_string(row.train_per_class), csv::format_double(row.kappa),
                              row.group, std::to_string(row.tests), std::to_string(row.accepted),
                              std::to_string(row.tests - row.accepted),
                              std::to_string(row.correct_accepted),
                              csv::format_double(row.rate_reject_as_error),
                              csv::format_double(row.rate_reject_excluded)})
            << "\n";
    }
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

std::string gnuplot_curve(const std::string& summary, const std::string& png,
                          const std::string& xlabel, const std::string& title, bool logx) {
    std::ostringstream s;
    s << "# generated by srcatr; run from this directory: gnuplot " << "<script>\n"
      << "set datafile separator ','\n"
      << "set terminal pngcairo size 800,600\n"
      << "set output '" << png << "'\n"
      << "set title '" << title << "'\n"
      << "set xlabel '" << xlabel << "'\n"
      << "set ylabel 'classification rate'\n"
      << "set yrange [0:1.05]\n"
      << "set key bottom left\n";
    if (logx) s << "set logscale x\n";
    s << "plot '" << summary << "' skip 2 using 1:3:4 with yerrorlines title 'SRC', \\\n"
      << "     '" << summary << "' skip 2 using 1:5:6 with yerrorlines title 'nearest neighbor'\n";
    return s.str();
}

} // namespace

std::vector<std::string> plot_inputs(ExperimentKind kind) {
    if (kind == ExperimentKind::SciThreshold) return {"sci_table.csv", "sci_kappa.csv"};
    const std::string p = file_prefix(kind);
    return {p + "_summary.csv", p + "_per_class.csv"};
}

std::vector<std::filesystem::path> emit_plot_scripts(const std::filesystem::path& dir,
                                                     ExperimentKind kind) {
    std::vector<std::string> missing;
    for (const auto& f : plot_inputs(kind)) {
        if (!std::filesystem::exists(dir / f)) missing.push_back(f);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw DataError("cannot emit plot script for '" + std::string(to_string(kind)) + "' in " +
                        dir.string() + ": missing " + list);
    }
    const std::string p = file_prefix(kind);
    const auto script = dir / ("plot_" + p + ".gp");
    std::string text;
    switch (kind) {
    case ExperimentKind::TrainingSize:
        text = gnuplot_curve(p + "_summary.csv", p + "_accuracy.png", "training samples per class",
                             "Classification rate vs training size", false);
        break;
    case ExperimentKind::Noise:
        text = gnuplot_curve(p + "_summary.csv", p + "_accuracy.png", "noise variance",
                             "Classification rate under additive Gaussian noise", false);
        break;
    case ExperimentKind::Blur:
        text = gnuplot_curve(p + "_summary.csv", p + "_accuracy.png", "blur intensity (pixels)",
                             "Classification rate under Gaussian blur", false);
        break;
    case ExperimentKind::SciThreshold: {
        std::ostringstream s;
        s << "# generated by srcatr; run from this directory\n"
          << "set datafile separator ','\n"
          << "set terminal pngcairo size 800,600\n"
          << "set output 'sci_kappa.png'\n"
          << "set title 'Accepted fraction vs kappa'\n"
          << "set xlabel 'kappa'\n"
          << "set ylabel 'accepted / tests'\n"
          << "set yrange [0:1.05]\n"
          << "plot 'sci_kappa.csv' skip 2 using 2:(strcol(3) eq 'main' ? $5/$4 : NaN) "
             "with linespoints title 'main classes', \\\n"
          << "     'sci_kappa.csv' skip 2 using 2:(strcol(3) eq 'foreign' ? $5/$4 : NaN) "
             "with linespoints title 'foreign classes'\n";
        text = s.str();
        break;
    }
    }
    write_text(script, text);
    return {script};
}

std::vector<std::filesystem::path> emit_plot_scripts(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("output directory " + dir.string() + " does not exist");
    }
    std::vector<std::filesystem::path> written;
    std::string expected;
    for (auto kind : {ExperimentKind::TrainingSize, ExperimentKind::Noise, ExperimentKind::Blur,
                      ExperimentKind::SciThreshold}) {
        bool any = false;
        for (const auto& f : plot_inputs(kind)) {
            expected += (expected.empty() ? "" : ", ") + f;
            any = any || std::filesystem::exists(dir / f);
        }
        if (any) {
            auto files = emit_plot_scripts(dir, kind);
            written.insert(written.end(), files.begin(), files.end());
        }
    }
    if (written.empty()) {
        throw DataError("no experiment CSVs in " + dir.string() + " (looked for " + expected + ")");
    }
    return written;
}

std::vector<std::filesystem::path> write_result_files(const ExperimentResult& result,
                                                      const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const ExperimentKind kind = result.config.experiment;
    const std::string p = file_prefix(kind);
    std::vector<std::filesystem::path> files;
    auto put = [&](const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        files.push_back(dir / name);
    };
    put(p + "_config.txt", format_config(result.config));
    put(p + "_records.csv", records_csv(result.records, main_classes()));
    if (kind == ExperimentKind::SciThreshold) {
        put("sci_table.csv", sci_table_csv(result));
        put("sci_kappa.csv", kappa_csv(result));
    } else {
        put(p + "_summary.csv", summary_csv(result));
        put(p + "_per_class.csv", per_class_csv(result));
    }
    for (const auto& [tag, matrix] : result.confusions) {
        put(p + "_confusion_" + tag + ".csv", confusion_csv(matrix));
    }
    auto scripts = emit_plot_scripts(dir, kind);
    files.insert(files.end(), scripts.begin(), scripts.end());
    return files;
}

} // namespace srcatr
