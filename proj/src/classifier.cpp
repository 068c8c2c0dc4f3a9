#include "srcatr/classifier.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "srcatr/errors.hpp"

namespace srcatr {

namespace {

void require_feature_dim(const Dictionary& dict, const Eigen::VectorXd& y) {
    if (y.size() != dict.feature_dim()) {
        throw std::invalid_argument("feature vector has length " + std::to_string(y.size()) +
                                    ", dictionary expects " + std::to_string(dict.feature_dim()));
    }
}

} // namespace

RejectionPolicy::RejectionPolicy(double kappa) : kappa_(kappa) {
    if (!(kappa > 0.0 && kappa < 1.0)) {
        throw std::invalid_argument("kappa must lie in (0, 1), got " + std::to_string(kappa));
    }
}

std::vector<double> class_residuals(const Dictionary& dict, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& x) {
    require_feature_dim(dict, y);
    if (x.size() != dict.atom_count()) {
        throw std::invalid_argument("coefficient vector length does not match dictionary");
    }
    std::vector<double> out(static_cast<std::size_t>(dict.class_count()));
    for (int j = 0; j < dict.class_count(); ++j) {
        const ColumnRange r = dict.class_range(j);
        const Eigen::VectorXd fit = dict.atoms().middleCols(r.begin, r.size()) *
                                    x.segment(r.begin, r.size());
        out[static_cast<std::size_t>(j)] = (y - fit).norm();
    }
    return out;
}

int argmin_residual(const std::vector<double>& residuals) {
    if (residuals.empty()) throw std::invalid_argument("no residuals to compare");
    int best = 0;
    for (std::size_t j = 1; j < residuals.size(); ++j) {
        if (residuals[j] < residuals[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
    }
    return best;
}

double sci(const Dictionary& dict, const Eigen::VectorXd& x) {
    if (x.size() != dict.atom_count()) {
        throw std::invalid_argument("coefficient vector length does not match dictionary");
    }
    const double total = x.lpNorm<1>();
    if (total == 0.0) return 0.0;
    double largest = 0.0;
    for (int j = 0; j < dict.class_count(); ++j) {
        const ColumnRange r = dict.class_range(j);
        largest = std::max(largest, x.segment(r.begin, r.size()).lpNorm<1>());
    }
    const double k = dict.class_count();
    return (k * (largest / total) - 1.0) / (k - 1.0);
}

ClassificationResult classify(const Dictionary& dict, const Eigen::VectorXd& y,
                              const SolverOptions& opts) {
    require_feature_dim(dict, y);
    ClassificationResult out;
    try {
        out.code = homotopy_solve(dict.atoms(), dict.gram(), y, opts);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("sparse coding failed during classification: ") +
                             e.what());
    }
    out.residuals = class_residuals(dict, y, out.code.x);
    out.predicted_index = argmin_residual(out.residuals);
    out.predicted = dict.classes()[static_cast<std::size_t>(out.predicted_index)];
    out.sci = sci(dict, out.code.x);
    return out;
}

ClassificationResult classify_with_rejection(const Dictionary& dict, const Eigen::VectorXd& y,
                                             const SolverOptions& opts,
                                             const RejectionPolicy& policy) {
    ClassificationResult out = classify(dict, y, opts);
    out.rejected = policy.rejects(out.sci);
    return out;
}

ShapeClass nearest_neighbor_baseline(const Dictionary& dict, const Eigen::VectorXd& y) {
    require_feature_dim(dict, y);
    const Eigen::VectorXd scores = dict.atoms().transpose() * y;
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < scores.size(); ++i) {
        if (scores(i) > scores(best)) best = i;
    }
    return dict.labels()[static_cast<std::size_t>(best)];
}

} // namespace srcatr
