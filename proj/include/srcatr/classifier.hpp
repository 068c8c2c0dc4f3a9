#pragma once

#include <vector>

#include <Eigen/Dense>

#include "srcatr/dictionary.hpp"
#include "srcatr/l1solver.hpp"

namespace srcatr {

struct ClassificationResult {
    /// r_j = ||y - A delta_j(x)||_2, one per dictionary class.
    std::vector<double> residuals;
    int predicted_index = 0;
    ShapeClass predicted = ShapeClass::Block;
    double sci = 0.0;
    bool rejected = false;
    SparseCode code;
};

/// Reject when SCI < kappa. A zero code has SCI 0 and is always rejected.
class RejectionPolicy {
public:
    explicit RejectionPolicy(double kappa);

    double kappa() const noexcept { return kappa_; }
    bool rejects(double sci_value) const noexcept { return sci_value < kappa_; }

private:
    double kappa_;
};

/// Per-class reconstruction residuals of y from the class-restricted code.
std::vector<double> class_residuals(const Dictionary& dict, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& x);

/// Index of the smallest residual; ties go to the lowest index.
int argmin_residual(const std::vector<double>& residuals);

/// Sparsity concentration index (k * max_j ||delta_j(x)||_1 / ||x||_1 - 1) / (k - 1).
/// Defined as 0 for the zero vector.
double sci(const Dictionary& dict, const Eigen::VectorXd& x);

/// Sparse-code y over the dictionary and pick the class with the smallest
/// residual. No rejection is applied.
ClassificationResult classify(const Dictionary& dict, const Eigen::VectorXd& y,
                              const SolverOptions& opts = {});

/// classify() followed by the SCI threshold test. The argmin label is kept
/// on rejected results.
ClassificationResult classify_with_rejection(const Dictionary& dict, const Eigen::VectorXd& y,
                                             const SolverOptions& opts,
                                             const RejectionPolicy& policy);

/// Label of the atom with the largest inner product with y.
ShapeClass nearest_neighbor_baseline(const Dictionary& dict, const Eigen::VectorXd& y);

} // namespace srcatr
