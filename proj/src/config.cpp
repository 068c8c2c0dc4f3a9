#include "srcatr/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <system_error>

#include "srcatr/csv.hpp"
#include "srcatr/errors.hpp"

namespace srcatr {

std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::TrainingSize: return "training-size";
    case ExperimentKind::Noise: return "noise";
    case ExperimentKind::Blur: return "blur";
    case ExperimentKind::SciThreshold: return "sci";
    }
    return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) {
    for (auto k : {ExperimentKind::TrainingSize, ExperimentKind::Noise, ExperimentKind::Blur,
                   ExperimentKind::SciThreshold}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig c;
    c.experiment = kind;
    c.pool_sizes = {{ShapeClass::Block, 88},  {ShapeClass::Cone, 66}, {ShapeClass::Cylinder, 308},
                    {ShapeClass::Sphere, 66}, {ShapeClass::Torus, 22}, {ShapeClass::Pipe, 22}};
    c.noise_variances = {0.0, 0.01, 0.025, 0.05, 0.1, 0.2};
    c.blur_intensities = {0.0, 1.0, 2.0, 3.0, 4.0, 6.0};
    c.kappas = {0.05, 0.15, 0.25};
    c.solver.lambda_min = kExperimentLambdaMin;
    switch (kind) {
    case ExperimentKind::TrainingSize:
        c.train_per_class = {5, 10, 15, 20, 25, 30, 35, 40, 45};
        break;
    case ExperimentKind::Noise:
    case ExperimentKind::Blur:
        c.train_per_class = {25};
        break;
    case ExperimentKind::SciThreshold:
        c.train_per_class = {25, 35, 45};
        c.test_per_class = 20;
        break;
    }
    c.output_dir = std::filesystem::path("results") / std::string(to_string(kind));
    return c;
}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, int line,
                            const std::string& why) {
    throw ConfigError("line " + std::to_string(line) + ": invalid value '" + value + "' for '" +
                      key + "': " + why);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, int line) {
    T out{};
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        bad_value(key, value, line, "not a number");
    }
    return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value, int line) {
    std::vector<T> out;
    for (const auto& item : split_list(value)) out.push_back(parse_number<T>(key, item, line));
    if (out.empty()) bad_value(key, value, line, "empty list");
    return out;
}

ChipSize parse_size(const std::string& key, const std::string& value, int line) {
    const auto x = value.find('x');
    if (x == std::string::npos) bad_value(key, value, line, "expected WIDTHxHEIGHT");
    return {parse_number<int>(key, trim(value.substr(0, x)), line),
            parse_number<int>(key, trim(value.substr(x + 1)), line)};
}

bool parse_bool(const std::string& key, const std::string& value, int line) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad_value(key, value, line, "expected true or false");
}

struct Entry {
    std::string value;
    int line;
};

} // namespace

ExperimentConfig parse_config(std::string_view text, std::optional<ExperimentKind> kind_override) {
    std::map<std::string, Entry> entries;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (!entries.emplace(key, Entry{value, line_no}).second) {
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }

    ExperimentKind kind = ExperimentKind::TrainingSize;
    if (auto it = entries.find("experiment"); it != entries.end()) {
        const auto parsed = parse_experiment_kind(it->second.value);
        if (!parsed) bad_value("experiment", it->second.value, it->second.line,
                               "expected training-size, noise, blur or sci");
        kind = *parsed;
        if (kind_override && *kind_override != kind) {
            throw ConfigError("config file is for experiment '" + it->second.value +
                              "' but '" + std::string(to_string(*kind_override)) +
                              "' was requested");
        }
    } else if (kind_override) {
        kind = *kind_override;
    }

    ExperimentConfig c = default_config(kind);
    for (const auto& [key, e] : entries) {
        const std::string& v = e.value;
        const int ln = e.line;
        if (key == "experiment") {
            continue;
        } else if (key == "trials") {
            c.trials = parse_number<int>(key, v, ln);
        } else if (key == "train_per_class") {
            c.train_per_class = parse_list<int>(key, v, ln);
        } else if (key == "test_per_class") {
            c.test_per_class = parse_number<int>(key, v, ln);
        } else if (key == "foreign_test_per_class") {
            c.foreign_test_per_class = parse_number<int>(key, v, ln);
        } else if (key == "noise_variances") {
            c.noise_variances = parse_list<double>(key, v, ln);
        } else if (key == "blur_intensities") {
            c.blur_intensities = parse_list<double>(key, v, ln);
        } else if (key == "kappas") {
            c.kappas = parse_list<double>(key, v, ln);
        } else if (key == "chip_size") {
            c.chip_size = parse_size(key, v, ln);
        } else if (key == "feature_dim") {
            c.feature_dim = parse_size(key, v, ln);
        } else if (key == "pool_sizes") {
            for (const auto& item : split_list(v)) {
                const auto colon = item.find(':');
                if (colon == std::string::npos) bad_value(key, v, ln, "expected class:count");
                const auto cls = parse_shape_class(trim(item.substr(0, colon)));
                if (!cls) bad_value(key, v, ln, "unknown class '" + item.substr(0, colon) + "'");
                c.pool_sizes[*cls] = parse_number<int>(key, trim(item.substr(colon + 1)), ln);
            }
        } else if (key == "epsilon") {
            c.solver.epsilon = parse_number<double>(key, v, ln);
        } else if (key == "lambda_min") {
            c.solver.lambda_min = parse_number<double>(key, v, ln);
        } else if (key == "max_breakpoints") {
            c.solver.max_breakpoints = parse_number<int>(key, v, ln);
        } else if (key == "kkt_tol") {
            c.solver.kkt_tol = parse_number<double>(key, v, ln);
        } else if (key == "master_seed") {
            c.master_seed = parse_number<std::uint64_t>(key, v, ln);
        } else if (key == "output_dir") {
            c.output_dir = v;
        } else if (key == "corrupt_training") {
            c.corrupt_training = parse_bool(key, v, ln);
        } else if (key == "record_timing") {
            c.record_timing = parse_bool(key, v, ln);
        } else if (key == "threads") {
            c.threads = parse_number<int>(key, v, ln);
        } else {
            throw ConfigError("line " + std::to_string(ln) + ": unknown key '" + key + "'");
        }
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<ExperimentKind> kind_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text, kind_override);
}

void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (c.trials < 1) fail("trials must be at least 1");
    if (c.threads < 1) fail("threads must be at least 1");
    if (c.train_per_class.empty()) fail("train_per_class must not be empty");
    for (int t : c.train_per_class) {
        if (t < 1) fail("train_per_class values must be at least 1");
    }
    if (c.test_per_class < 1) fail("test_per_class must be at least 1");
    if ((c.experiment == ExperimentKind::Noise || c.experiment == ExperimentKind::Blur) &&
        c.train_per_class.size() != 1) {
        fail("noise and blur experiments take a single train_per_class value");
    }
    if (c.chip_size.width < kMinChipSide || c.chip_size.height < kMinChipSide) {
        fail("chip_size must be at least " + std::to_string(kMinChipSide) + " per side");
    }
    if (c.feature_dim.width < kMinFeatureSide || c.feature_dim.height < kMinFeatureSide ||
        c.feature_dim.width > c.chip_size.width || c.feature_dim.height > c.chip_size.height) {
        fail("feature_dim must be at least " + std::to_string(kMinFeatureSide) +
             " per side and no larger than chip_size");
    }
    switch (c.experiment) {
    case ExperimentKind::Noise:
        if (c.noise_variances.empty()) fail("noise_variances must not be empty");
        for (double v : c.noise_variances) {
            if (!(v >= 0.0)) fail("noise variances must be non-negative");
        }
        break;
    case ExperimentKind::Blur:
        if (c.blur_intensities.empty()) fail("blur_intensities must not be empty");
        for (double b : c.blur_intensities) {
            if (!(b >= 0.0)) fail("blur intensities must be non-negative");
        }
        break;
    case ExperimentKind::SciThreshold:
        if (c.kappas.empty()) fail("kappas must not be empty");
        for (double k : c.kappas) {
            if (!(k > 0.0 && k < 1.0)) fail("kappa values must lie strictly between 0 and 1");
        }
        if (c.foreign_test_per_class < 1) fail("foreign_test_per_class must be at least 1");
        break;
    case ExperimentKind::TrainingSize:
        break;
    }
    if (c.solver.epsilon && !(*c.solver.epsilon >= 0.0)) fail("epsilon must be non-negative");
    if (c.solver.lambda_min && !(*c.solver.lambda_min > 0.0)) fail("lambda_min must be positive");
    if (c.solver.max_breakpoints && *c.solver.max_breakpoints < 1) {
        fail("max_breakpoints must be positive");
    }
    if (!(c.solver.kkt_tol > 0.0)) fail("kkt_tol must be positive");

    const int max_train = *std::max_element(c.train_per_class.begin(), c.train_per_class.end());
    for (ShapeClass cls : kMainClasses) {
        const auto it = c.pool_sizes.find(cls);
        const int have = it == c.pool_sizes.end() ? 0 : it->second;
        if (have < max_train + c.test_per_class) {
            fail("pool for class '" + std::string(to_string(cls)) + "' has " +
                 std::to_string(have) + " chips, need " +
                 std::to_string(max_train + c.test_per_class));
        }
    }
    if (c.experiment == ExperimentKind::SciThreshold) {
        for (ShapeClass cls : kForeignClasses) {
            const auto it = c.pool_sizes.find(cls);
            const int have = it == c.pool_sizes.end() ? 0 : it->second;
            if (have < c.foreign_test_per_class) {
                fail("pool for foreign class '" + std::string(to_string(cls)) + "' has " +
                     std::to_string(have) + " chips, need " +
                     std::to_string(c.foreign_test_per_class));
            }
        }
    }
}

std::string format_config(const ExperimentConfig& c) {
    auto ints = [](const std::vector<int>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
        return s;
    };
    auto reals = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + csv::format_double(v[i]);
        return s;
    };
    std::ostringstream out;
    out << "experiment = " << to_string(c.experiment) << "\n"
        << "trials = " << c.trials << "\n"
        << "train_per_class = " << ints(c.train_per_class) << "\n"
        << "test_per_class = " << c.test_per_class << "\n"
        << "foreign_test_per_class = " << c.foreign_test_per_class << "\n"
        << "noise_variances = " << reals(c.noise_variances) << "\n"
        << "blur_intensities = " << reals(c.blur_intensities) << "\n"
        << "kappas = " << reals(c.kappas) << "\n"
        << "chip_size = " << c.chip_size.width << "x" << c.chip_size.height << "\n"
        << "feature_dim = " << c.feature_dim.width << "x" << c.feature_dim.height << "\n"
        << "pool_sizes = ";
    bool first = true;
    for (const auto& [cls, n] : c.pool_sizes) {
        out << (first ? "" : ", ") << to_string(cls) << ":" << n;
        first = false;
    }
    out << "\n";
    if (c.solver.epsilon) out << "epsilon = " << csv::format_double(*c.solver.epsilon) << "\n";
    if (c.solver.lambda_min) {
        out << "lambda_min = " << csv::format_double(*c.solver.lambda_min) << "\n";
    }
    if (c.solver.max_breakpoints) out << "max_breakpoints = " << *c.solver.max_breakpoints << "\n";
    out << "kkt_tol = " << csv::format_double(c.solver.kkt_tol) << "\n"
        << "master_seed = " << c.master_seed << "\n"
        << "output_dir = " << c.output_dir.string() << "\n"
        << "corrupt_training = " << (c.corrupt_training ? "true" : "false") << "\n"
        << "record_timing = " << (c.record_timing ? "true" : "false") << "\n"
        << "threads = " << c.threads << "\n";
    return out.str();
}

} // namespace srcatr
