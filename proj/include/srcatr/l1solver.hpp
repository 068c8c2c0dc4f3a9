#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace srcatr {

using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

enum class SolveStatus { ResidualTarget, LambdaFloor, MaxIterations };

std::string_view to_string(SolveStatus status);

/// Stopping rules for homotopy_solve. Unset fields are derived from the
/// problem: epsilon = 1e-3 * ||y||, lambda_min = 1e-8 * ||A^T y||_inf,
/// max_breakpoints = 4 * min(d, N).
struct SolverOptions {
    std::optional<double> epsilon;
    std::optional<double> lambda_min;
    std::optional<int> max_breakpoints;
    double kkt_tol = 1e-8;
};

struct ResolvedOptions {
    double epsilon;
    double lambda_min;
    int max_breakpoints;
    double kkt_tol;
};

/// Fills defaults; throws std::invalid_argument on out-of-range values.
ResolvedOptions resolve_options(const SolverOptions& opts, double y_norm, double lambda0,
                                Eigen::Index rows, Eigen::Index cols);

struct SparseCode {
    Eigen::VectorXd x;
    double lambda_final = 0.0;
    double residual_norm = 0.0;
    std::vector<Eigen::Index> active_set;
    int iterations = 0;
    SolveStatus status = SolveStatus::ResidualTarget;
    /// lambda at the start and at every breakpoint, strictly decreasing.
    std::vector<double> lambda_path;
    /// Columns discarded because they made the active Gram matrix singular.
    std::vector<Eigen::Index> dropped_columns;
};

/// Follows the lasso path of 0.5*||y - A x||^2 + lambda*||x||_1 from
/// lambda0 = ||A^T y||_inf down until the residual drops to epsilon, lambda
/// reaches lambda_min, or the breakpoint budget runs out. Columns of A must
/// have unit norm.
SparseCode homotopy_solve(const MatrixRef& a, const VectorRef& y, const SolverOptions& opts = {});

/// As above with a precomputed Gram matrix A^T A, for repeated solves
/// against one dictionary.
SparseCode homotopy_solve(const MatrixRef& a, const MatrixRef& gram, const VectorRef& y,
                          const SolverOptions& opts = {});

struct IstaResult {
    Eigen::VectorXd x;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Proximal-gradient (iterative shrinkage) reference solver for the same
/// objective. Stops when one step lowers the objective by less than `tol`.
IstaResult ista_solve(const MatrixRef& a, const VectorRef& y, double lambda, double tol = 1e-12,
                      int max_iter = 1'000'000);

struct KktReport {
    double max_violation = 0.0;
    Eigen::Index worst_index = -1;
    bool feasible = true;
};

/// Subgradient optimality of x for the lambda-problem:
///   |a_i^T r| <= lambda               for x_i == 0
///   a_i^T r == lambda * sign(x_i)     for x_i != 0
KktReport kkt_check(const MatrixRef& a, const VectorRef& y, const VectorRef& x, double lambda,
                    double tol = 1e-8);

struct L0Result {
    bool feasible = false;
    Eigen::VectorXd x;
    std::vector<Eigen::Index> support;
    double residual_norm = 0.0;
};

/// Sparsest x with ||y - A x||_2 < epsilon by exhaustive support
/// enumeration (N <= 20, max_support <= 5).
L0Result l0_brute_force(const MatrixRef& a, const VectorRef& y, double epsilon, int max_support);

double lasso_objective(const MatrixRef& a, const VectorRef& y, const VectorRef& x, double lambda);

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

/// Largest eigenvalue of A^T A by power iteration.
double spectral_norm_squared(const MatrixRef& a, int iterations = 500);

} // namespace srcatr
