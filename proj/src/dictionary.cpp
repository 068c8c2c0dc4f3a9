#include "srcatr/dictionary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "srcatr/errors.hpp"
#include "srcatr/seeding.hpp"

namespace srcatr {

Dictionary::Dictionary(Eigen::MatrixXd atoms, std::vector<ShapeClass> labels)
    : atoms_(std::move(atoms)), labels_(std::move(labels)) {
    if (static_cast<Eigen::Index>(labels_.size()) != atoms_.cols()) {
        throw std::invalid_argument("dictionary has " + std::to_string(atoms_.cols()) +
                                    " columns but " + std::to_string(labels_.size()) + " labels");
    }
    if (atoms_.rows() == 0 || atoms_.cols() == 0) {
        throw std::invalid_argument("dictionary must be non-empty");
    }
    if (!atoms_.allFinite()) throw std::invalid_argument("dictionary contains non-finite values");
    for (Eigen::Index i = 0; i < atoms_.cols(); ++i) {
        const double n = atoms_.col(i).norm();
        if (std::abs(n - 1.0) > kColumnNormTolerance) {
            throw std::invalid_argument("dictionary column " + std::to_string(i) +
                                        " is not unit norm (norm " + std::to_string(n) + ")");
        }
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (i == 0 || labels_[i] != labels_[i - 1]) {
            if (i > 0 && labels_[i] < labels_[i - 1]) {
                throw std::invalid_argument("dictionary columns are not grouped in ascending "
                                            "label order at column " + std::to_string(i));
            }
            if (!ranges_.empty()) ranges_.back().end = static_cast<Eigen::Index>(i);
            classes_.push_back(labels_[i]);
            ranges_.push_back({static_cast<Eigen::Index>(i), 0});
        }
    }
    ranges_.back().end = atoms_.cols();
    if (classes_.size() < 2) {
        throw std::invalid_argument("dictionary needs at least two classes");
    }
    gram_ = atoms_.transpose() * atoms_;
}

ColumnRange Dictionary::class_range(int class_index) const {
    if (class_index < 0 || class_index >= class_count()) {
        throw std::invalid_argument("class index " + std::to_string(class_index) +
                                    " out of range [0, " + std::to_string(class_count()) + ")");
    }
    return ranges_[static_cast<std::size_t>(class_index)];
}

int Dictionary::class_index(ShapeClass label) const {
    const auto it = std::find(classes_.begin(), classes_.end(), label);
    if (it == classes_.end()) {
        throw std::invalid_argument("class '" + std::string(to_string(label)) +
                                    "' is not in the dictionary");
    }
    return static_cast<int>(it - classes_.begin());
}

Dictionary build_dictionary_from_features(std::span<const Eigen::VectorXd> features,
                                          std::span<const ShapeClass> labels) {
    if (features.size() != labels.size()) {
        throw std::invalid_argument("feature/label count mismatch");
    }
    if (features.empty()) throw std::invalid_argument("no training samples");
    const Eigen::Index d = features.front().size();

    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });

    Eigen::MatrixXd atoms(d, static_cast<Eigen::Index>(features.size()));
    std::vector<ShapeClass> sorted_labels;
    sorted_labels.reserve(features.size());
    for (std::size_t c = 0; c < order.size(); ++c) {
        const auto& f = features[order[c]];
        if (f.size() != d) {
            throw std::invalid_argument("inconsistent feature dimension: " +
                                        std::to_string(f.size()) + " vs " + std::to_string(d));
        }
        const double n = f.norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw std::invalid_argument("training sample " + std::to_string(order[c]) +
                                        " has zero or non-finite norm");
        }
        atoms.col(static_cast<Eigen::Index>(c)) = f / n;
        sorted_labels.push_back(labels[order[c]]);
    }
    return Dictionary(std::move(atoms), std::move(sorted_labels));
}

Dictionary build_dictionary(std::span<const LabeledChip> training, ChipSize feature_dim) {
    if (training.empty()) throw std::invalid_argument("no training chips");
    const ChipSize first = training.front().chip.size();
    std::vector<Eigen::VectorXd> features;
    std::vector<ShapeClass> labels;
    features.reserve(training.size());
    labels.reserve(training.size());
    for (const auto& sample : training) {
        if (!(sample.chip.size() == first)) {
            throw std::invalid_argument("inconsistent chip sizes in training set");
        }
        features.push_back(vectorize(sample.chip, feature_dim));
        labels.push_back(sample.label);
    }
    return build_dictionary_from_features(features, labels);
}

Eigen::VectorXd delta(const Dictionary& dict, const Eigen::VectorXd& x, int class_index) {
    if (x.size() != dict.atom_count()) {
        throw std::invalid_argument("coefficient vector has length " + std::to_string(x.size()) +
                                    ", dictionary has " + std::to_string(dict.atom_count()) +
                                    " atoms");
    }
    const ColumnRange r = dict.class_range(class_index);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
    out.segment(r.begin, r.size()) = x.segment(r.begin, r.size());
    return out;
}

PoolSizes pool_sizes(const ChipPool& pool) {
    PoolSizes sizes;
    for (const auto& [cls, chips] : pool) sizes[cls] = chips.size();
    return sizes;
}

namespace {

// Unbiased draw in [0, n) by rejection; independent of the standard
// library's distribution implementation.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = 0;
    do {
        r = rng();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
}

} // namespace

std::vector<std::size_t> sample_without_replacement(std::size_t available, std::size_t count,
                                                    std::uint64_t seed) {
    if (count > available) {
        throw std::invalid_argument("cannot draw " + std::to_string(count) + " of " +
                                    std::to_string(available) + " items");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(available);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first `count` slots are the sample.
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + uniform_index(rng, available - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
}

DataSplit sample_split(const PoolSizes& pool, int train_per_class, int test_per_class,
                       std::uint64_t seed) {
    if (train_per_class < 1) {
        throw std::invalid_argument("train_per_class must be at least 1, got " +
                                    std::to_string(train_per_class));
    }
    if (test_per_class < 0) throw std::invalid_argument("test_per_class must be non-negative");
    if (pool.empty()) throw std::invalid_argument("empty chip pool");

    const auto need = static_cast<std::size_t>(train_per_class + test_per_class);
    DataSplit split;
    split.seed = seed;
    for (const auto& [cls, available] : pool) {
        if (available < need) {
            throw std::invalid_argument("class '" + std::string(to_string(cls)) + "' has " +
                                        std::to_string(available) + " samples, need " +
                                        std::to_string(need));
        }
        const auto idx = sample_without_replacement(
            available, need, derive_seed(seed, {static_cast<std::uint64_t>(cls)}));
        split.train[cls].assign(idx.begin(), idx.begin() + train_per_class);
        split.test[cls].assign(idx.begin() + train_per_class, idx.begin() + need);
    }
    return split;
}

DataSplit sample_split(const ChipPool& pool, int train_per_class, int test_per_class,
                       std::uint64_t seed) {
    return sample_split(pool_sizes(pool), train_per_class, test_per_class, seed);
}

namespace {

constexpr std::string_view kMagic = "SRCD";

template <typename T>
void put_le(std::string& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>(static_cast<unsigned char>(u & 0xffu)));
        u = static_cast<U>(u >> 8);
    }
}

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char* what) {
        if (bytes_.size() - pos_ < sizeof(T)) {
            throw ParseError(std::string("truncated dictionary container reading ") + what,
                             bytes_.size());
        }
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string serialize_dictionary(const Dictionary& dict) {
    std::string out(kMagic);
    put_le<std::uint32_t>(out, kDictionaryFormatVersion);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(dict.feature_dim()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(dict.atom_count()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dict.class_count()));
    for (int j = 0; j < dict.class_count(); ++j) {
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dict.classes()[j]));
        put_le<std::uint64_t>(out, static_cast<std::uint64_t>(dict.class_range(j).size()));
    }
    const Eigen::MatrixXd& a = dict.atoms();
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(a(r, c)));
        }
    }
    for (ShapeClass l : dict.labels()) put_le<std::uint8_t>(out, static_cast<std::uint8_t>(l));
    return out;
}

Dictionary deserialize_dictionary(std::string_view bytes) {
    if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
        throw ParseError("missing SRCD magic", 0);
    }
    ByteReader in(bytes.substr(kMagic.size()));
    const std::size_t base = kMagic.size();
    const auto version = in.get<std::uint32_t>("version");
    if (version != kDictionaryFormatVersion) {
        throw ParseError("unsupported dictionary version " + std::to_string(version), base);
    }
    const std::size_t dims_at = base + in.pos();
    const auto d = in.get<std::uint64_t>("feature dimension");
    const auto n = in.get<std::uint64_t>("atom count");
    const auto k = in.get<std::uint32_t>("class count");
    if (d == 0 || n == 0 || d > (1u << 24) || n > (1u << 24) || k > kAllClasses.size()) {
        throw ParseError("implausible dictionary dimensions", dims_at);
    }
    std::vector<std::pair<std::uint8_t, std::uint64_t>> counts;
    std::uint64_t total = 0;
    for (std::uint32_t j = 0; j < k; ++j) {
        const std::size_t at = base + in.pos();
        const auto label = in.get<std::uint8_t>("class label");
        const auto count = in.get<std::uint64_t>("class count");
        if (label >= kAllClasses.size()) {
            throw ParseError("unknown class label " + std::to_string(label), at);
        }
        counts.emplace_back(label, count);
        total += count;
    }
    if (total != n) throw ParseError("per-class counts do not sum to atom count", dims_at);
    if (in.remaining() < d * n * 8 + n) {
        throw ParseError("truncated dictionary payload", bytes.size());
    }
    Eigen::MatrixXd atoms(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (Eigen::Index c = 0; c < atoms.cols(); ++c) {
        for (Eigen::Index r = 0; r < atoms.rows(); ++r) {
            atoms(r, c) = std::bit_cast<double>(in.get<std::uint64_t>("atom"));
        }
    }
    std::vector<ShapeClass> labels;
    labels.reserve(n);
    const std::size_t labels_at = base + in.pos();
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto l = in.get<std::uint8_t>("label");
        if (l >= kAllClasses.size()) {
            throw ParseError("unknown column label " + std::to_string(l), labels_at + i);
        }
        labels.push_back(static_cast<ShapeClass>(l));
    }
    if (in.remaining() != 0) throw ParseError("trailing bytes after dictionary", base + in.pos());

    try {
        Dictionary dict(std::move(atoms), std::move(labels));
        for (std::uint32_t j = 0; j < k; ++j) {
            if (static_cast<std::uint8_t>(dict.classes()[j]) != counts[j].first ||
                static_cast<std::uint64_t>(dict.class_range(static_cast<int>(j)).size()) !=
                    counts[j].second) {
                throw ParseError("header class counts disagree with column labels", dims_at);
            }
        }
        if (dict.class_count() != static_cast<int>(k)) {
            throw ParseError("header class count disagrees with column labels", dims_at);
        }
        return dict;
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("invalid dictionary container: ") + e.what());
    }
}

void save_dictionary(const std::filesystem::path& path, const Dictionary& dict) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    const std::string bytes = serialize_dictionary(dict);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

Dictionary load_dictionary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_dictionary(bytes);
}

} // namespace srcatr
