#include "srcatr/l1solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "srcatr/errors.hpp"

namespace srcatr {

std::string_view to_string(SolveStatus status) {
    switch (status) {
    case SolveStatus::ResidualTarget: return "residual-target";
    case SolveStatus::LambdaFloor: return "lambda-floor";
    case SolveStatus::MaxIterations: return "max-iterations";
    }
    return "unknown";
}

ResolvedOptions resolve_options(const SolverOptions& opts, double y_norm, double lambda0,
                                Eigen::Index rows, Eigen::Index cols) {
    ResolvedOptions r{};
    r.epsilon = opts.epsilon.value_or(1e-3 * y_norm);
    r.lambda_min = opts.lambda_min.value_or(1e-8 * lambda0);
    r.max_breakpoints =
        opts.max_breakpoints.value_or(static_cast<int>(4 * std::min(rows, cols)));
    r.kkt_tol = opts.kkt_tol;
    if (!(r.epsilon >= 0.0) || !std::isfinite(r.epsilon)) {
        throw std::invalid_argument("epsilon must be finite and non-negative");
    }
    if (opts.lambda_min && !(*opts.lambda_min > 0.0)) {
        throw std::invalid_argument("lambda_min must be positive");
    }
    if (r.max_breakpoints < 1) throw std::invalid_argument("max_breakpoints must be positive");
    if (!(r.kkt_tol > 0.0)) throw std::invalid_argument("kkt_tol must be positive");
    return r;
}

namespace {

// Cholesky factor of the Gram matrix of the active columns, grown one
// column at a time.
class ActiveCholesky {
public:
    explicit ActiveCholesky(Eigen::Index capacity) : l_(capacity, capacity) {}

    Eigen::Index size() const noexcept { return size_; }

    // Appends column j given its Gram entries against the current active
    // columns (`cross`) and itself (`self`). Returns false when the extended
    // Gram matrix is numerically singular.
    bool append(const Eigen::VectorXd& cross, double self,
                const std::vector<Eigen::Index>& active_after, const MatrixRef& gram) {
        if (size_ == l_.rows()) return false;
        const Eigen::Index s = size_;
        Eigen::VectorXd w = cross;
        if (s > 0) {
            l_.topLeftCorner(s, s).triangularView<Eigen::Lower>().solveInPlace(w);
        }
        const double pivot = self - w.squaredNorm();
        if (pivot >= kPivotFloor) {
            l_.block(s, 0, 1, s) = w.transpose();
            l_(s, s) = std::sqrt(pivot);
            ++size_;
            return true;
        }
        // The rank-1 update lost too much precision; refactor from scratch.
        return refactor(active_after, gram);
    }

    bool refactor(const std::vector<Eigen::Index>& active, const MatrixRef& gram) {
        const auto s = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd g(s, s);
        for (Eigen::Index i = 0; i < s; ++i) {
            for (Eigen::Index j = 0; j < s; ++j) g(i, j) = gram(active[i], active[j]);
        }
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        if (llt.info() != Eigen::Success) return false;
        const Eigen::MatrixXd l = llt.matrixL();
        if (s > 0 && l.diagonal().array().square().minCoeff() < kPivotFloor) return false;
        l_.topLeftCorner(s, s) = l;
        size_ = s;
        return true;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        const Eigen::Index s = size_;
        Eigen::VectorXd z = rhs;
        if (s == 0) return z;
        l_.topLeftCorner(s, s).triangularView<Eigen::Lower>().solveInPlace(z);
        l_.topLeftCorner(s, s).transpose().triangularView<Eigen::Upper>().solveInPlace(z);
        return z;
    }

private:
    static constexpr double kPivotFloor = 1e-12;

    Eigen::MatrixXd l_;
    Eigen::Index size_ = 0;
};

enum class EventKind { Entry, Crossing };

struct PathEvent {
    double gamma = std::numeric_limits<double>::infinity();
    EventKind kind = EventKind::Entry;
    Eigen::Index column = -1;   // dictionary column
    std::size_t position = 0;   // position in the active list (crossings)
    double sign = 0.0;          // entry sign
};

// Earliest event first; simultaneous events resolve entries before
// crossings, then lowest column index.
bool precedes(const PathEvent& a, const PathEvent& b, double tie_tol) {
    if (std::abs(a.gamma - b.gamma) > tie_tol) return a.gamma < b.gamma;
    if (a.kind != b.kind) return a.kind == EventKind::Entry;
    return a.column < b.column;
}

void require_finite(const MatrixRef& a, const VectorRef& y) {
    if (!a.allFinite()) throw std::invalid_argument("dictionary contains NaN or Inf");
    if (!y.allFinite()) throw std::invalid_argument("signal contains NaN or Inf");
}

constexpr int kMaxConsecutiveDrops = 3;

} // namespace

SparseCode homotopy_solve(const MatrixRef& a, const VectorRef& y, const SolverOptions& opts) {
    if (!a.allFinite()) throw std::invalid_argument("dictionary contains NaN or Inf");
    const Eigen::MatrixXd gram = a.transpose() * a;
    return homotopy_solve(a, gram, y, opts);
}

SparseCode homotopy_solve(const MatrixRef& a, const MatrixRef& gram, const VectorRef& y,
                          const SolverOptions& opts) {
    if (a.rows() != y.size()) {
        throw std::invalid_argument("signal length " + std::to_string(y.size()) +
                                    " does not match dictionary rows " + std::to_string(a.rows()));
    }
    if (a.cols() == 0) throw std::invalid_argument("dictionary has no columns");
    require_finite(a, y);

    const Eigen::Index d = a.rows();
    const Eigen::Index n = a.cols();
    if (gram.rows() != n || gram.cols() != n) {
        throw std::invalid_argument("Gram matrix shape does not match dictionary");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(std::sqrt(gram(i, i)) - 1.0) > 1e-6) {
            throw std::invalid_argument("dictionary column " + std::to_string(i) +
                                        " is not unit norm");
        }
    }

    const Eigen::VectorXd aty = a.transpose() * y;
    Eigen::Index first = 0;
    const double lambda0 = aty.cwiseAbs().maxCoeff(&first);
    const double y_norm = y.norm();
    const ResolvedOptions o = resolve_options(opts, y_norm, lambda0, d, n);
    // Aim slightly inside epsilon: the final residual is recomputed from x
    // and carries rounding on the scale of ||y||.
    const double target = std::max(0.0, o.epsilon * (1.0 - 1e-9) - 1e-14 * y_norm);
    const double tie_tol = 1e-14 * std::max(lambda0, 1.0);

    SparseCode out;
    out.x = Eigen::VectorXd::Zero(n);
    out.lambda_path.push_back(lambda0);

    std::vector<Eigen::Index> active;
    std::vector<double> signs;
    std::vector<char> in_active(static_cast<std::size_t>(n), 0);
    std::vector<char> excluded(static_cast<std::size_t>(n), 0);
    ActiveCholesky chol(std::min(d, n));
    Eigen::VectorXd x_active(0);
    Eigen::VectorXd residual = y;
    Eigen::VectorXd corr = aty;
    double lambda = lambda0;

    auto finish = [&](SolveStatus status, double lambda_final) {
        out.x.setZero();
        for (std::size_t p = 0; p < active.size(); ++p) out.x(active[p]) = x_active(p);
        out.lambda_final = lambda_final;
        out.status = status;
        out.residual_norm = (y - a * out.x).norm();
        out.active_set.clear();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (out.x(i) != 0.0) out.active_set.push_back(i);
        }
        return out;
    };

    // Coefficients on the active set that are exactly optimal at `lam`.
    auto active_solution = [&](double lam) {
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(active.size()));
        for (std::size_t p = 0; p < active.size(); ++p) {
            rhs(p) = aty(active[p]) - lam * signs[p];
        }
        return chol.solve(rhs);
    };

    auto refresh = [&](double lam) {
        x_active = active_solution(lam);
        residual = y;
        for (std::size_t p = 0; p < active.size(); ++p) residual -= x_active(p) * a.col(active[p]);
        corr = aty;
        for (std::size_t p = 0; p < active.size(); ++p) corr -= x_active(p) * gram.col(active[p]);
    };

    auto try_enter = [&](Eigen::Index j, double sign) {
        Eigen::VectorXd cross(static_cast<Eigen::Index>(active.size()));
        for (std::size_t p = 0; p < active.size(); ++p) cross(p) = gram(active[p], j);
        std::vector<Eigen::Index> after = active;
        after.push_back(j);
        if (!chol.append(cross, gram(j, j), after, gram)) {
            // Restore the factor of the unchanged active set.
            chol.refactor(active, gram);
            return false;
        }
        active.push_back(j);
        signs.push_back(sign);
        in_active[static_cast<std::size_t>(j)] = 1;
        return true;
    };

    if (y_norm <= o.epsilon) return finish(SolveStatus::ResidualTarget, lambda0);
    if (lambda0 <= o.lambda_min) return finish(SolveStatus::LambdaFloor, lambda0);

    int consecutive_drops = 0;
    // A column that just left the active set sits exactly on its old-sign
    // boundary; that boundary only recedes along the new segment. A column
    // that just entered has a zero coefficient moving away from zero.
    Eigen::Index just_dropped = -1;
    double dropped_sign = 0.0;
    Eigen::Index just_entered = first;
    try_enter(first, aty(first) > 0.0 ? 1.0 : -1.0);
    refresh(lambda);

    for (;;) {
        if (residual.norm() <= o.epsilon) return finish(SolveStatus::ResidualTarget, lambda);

        const auto s = static_cast<Eigen::Index>(active.size());
        Eigen::VectorXd sign_vec(s);
        for (Eigen::Index p = 0; p < s; ++p) sign_vec(p) = signs[static_cast<std::size_t>(p)];
        // Moving lambda down by gamma moves x_active by gamma * direction.
        const Eigen::VectorXd direction = chol.solve(sign_vec);
        Eigen::VectorXd fitted_step = Eigen::VectorXd::Zero(d);
        Eigen::VectorXd corr_step = Eigen::VectorXd::Zero(n);
        for (Eigen::Index p = 0; p < s; ++p) {
            fitted_step += direction(p) * a.col(active[static_cast<std::size_t>(p)]);
            corr_step += direction(p) * gram.col(active[static_cast<std::size_t>(p)]);
        }

        PathEvent best;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            if (in_active[uj] || excluded[uj]) continue;
            const double up = 1.0 - corr_step(j);
            const double down = 1.0 + corr_step(j);
            const bool recent = j == just_dropped;
            if (up > 0.0 && !(recent && dropped_sign > 0.0)) {
                PathEvent e{std::max(0.0, (lambda - corr(j)) / up), EventKind::Entry, j, 0, 1.0};
                if (precedes(e, best, tie_tol)) best = e;
            }
            if (down > 0.0 && !(recent && dropped_sign < 0.0)) {
                PathEvent e{std::max(0.0, (lambda + corr(j)) / down), EventKind::Entry, j, 0, -1.0};
                if (precedes(e, best, tie_tol)) best = e;
            }
        }
        for (Eigen::Index p = 0; p < s; ++p) {
            if (direction(p) == 0.0 || active[static_cast<std::size_t>(p)] == just_entered) continue;
            const double g = -x_active(p) / direction(p);
            if (g > 0.0) {
                PathEvent e{g, EventKind::Crossing, active[static_cast<std::size_t>(p)],
                            static_cast<std::size_t>(p), 0.0};
                if (precedes(e, best, tie_tol)) best = e;
            }
        }

        const double gamma_floor = lambda - o.lambda_min;
        const double gamma_stop = std::min(best.gamma, gamma_floor);

        // The residual shrinks monotonically along a segment; find where it
        // first reaches the target, if it does before gamma_stop.
        const Eigen::VectorXd end_residual = residual - gamma_stop * fitted_step;
        if (end_residual.norm() <= target) {
            // Split the residual along the step direction so the root does
            // not depend on differences of squared norms.
            const double step_norm = fitted_step.norm();
            double gamma = 0.0;
            if (step_norm > 0.0) {
                const Eigen::VectorXd unit = fitted_step / step_norm;
                const double along = residual.dot(unit);
                const double across = (residual - along * unit).squaredNorm();
                const double reach = std::sqrt(std::max(0.0, target * target - across));
                gamma = (along - reach) / step_norm;
            }
            gamma = std::clamp(gamma, 0.0, gamma_stop);
            x_active = active_solution(lambda - gamma);
            return finish(SolveStatus::ResidualTarget, lambda - gamma);
        }
        if (gamma_floor <= best.gamma) {
            x_active = active_solution(o.lambda_min);
            return finish(SolveStatus::LambdaFloor, o.lambda_min);
        }

        lambda -= best.gamma;
        ++out.iterations;
        if (lambda < out.lambda_path.back()) out.lambda_path.push_back(lambda);
        just_dropped = -1;
        just_entered = -1;

        if (best.kind == EventKind::Entry) {
            if (try_enter(best.column, best.sign)) {
                consecutive_drops = 0;
                just_entered = best.column;
            } else {
                excluded[static_cast<std::size_t>(best.column)] = 1;
                out.dropped_columns.push_back(best.column);
                if (++consecutive_drops > kMaxConsecutiveDrops) {
                    throw NumericalError("homotopy path aborted: " +
                                         std::to_string(consecutive_drops) +
                                         " consecutive rank-deficient active-set updates");
                }
            }
        } else {
            consecutive_drops = 0;
            in_active[static_cast<std::size_t>(best.column)] = 0;
            dropped_sign = signs[best.position];
            active.erase(active.begin() + static_cast<std::ptrdiff_t>(best.position));
            signs.erase(signs.begin() + static_cast<std::ptrdiff_t>(best.position));
            if (!chol.refactor(active, gram)) {
                throw NumericalError("active-set Gram matrix became singular after removal");
            }
            just_dropped = best.column;
        }
        refresh(lambda);

        if (out.iterations >= o.max_breakpoints) {
            return finish(SolveStatus::MaxIterations, lambda);
        }
    }
}

double lasso_objective(const MatrixRef& a, const VectorRef& y, const VectorRef& x, double lambda) {
    return 0.5 * (y - a * x).squaredNorm() + lambda * x.lpNorm<1>();
}

double spectral_norm_squared(const MatrixRef& a, int iterations) {
    const Eigen::Index n = a.cols();
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + static_cast<double>(i) / n;
    v.normalize();
    double estimate = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd w = a.transpose() * (a * v);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        const double next = v.dot(w);
        v = w / norm;
        if (std::abs(next - estimate) <= 1e-15 * next) {
            estimate = next;
            break;
        }
        estimate = next;
    }
    return estimate;
}

IstaResult ista_solve(const MatrixRef& a, const VectorRef& y, double lambda, double tol,
                      int max_iter) {
    if (!(lambda > 0.0)) throw std::invalid_argument("ista_solve needs lambda > 0");
    if (a.rows() != y.size()) throw std::invalid_argument("dimension mismatch in ista_solve");
    require_finite(a, y);

    // Power iteration approaches the top eigenvalue from below; pad it so
    // the step never exceeds 1/L.
    const double lipschitz = 1.01 * spectral_norm_squared(a);
    const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

    IstaResult out;
    out.x = Eigen::VectorXd::Zero(a.cols());
    Eigen::VectorXd residual = y;
    double objective = 0.5 * residual.squaredNorm();
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd gradient_step = out.x + step * (a.transpose() * residual);
        Eigen::VectorXd next(a.cols());
        for (Eigen::Index i = 0; i < next.size(); ++i) {
            next(i) = soft_threshold(gradient_step(i), step * lambda);
        }
        const Eigen::VectorXd next_residual = y - a * next;
        const double next_objective = 0.5 * next_residual.squaredNorm() + lambda * next.lpNorm<1>();
        out.iterations = it + 1;
        const double decrease = objective - next_objective;
        if (next_objective <= objective) {
            out.x = next;
            residual = next_residual;
            objective = next_objective;
        }
        if (decrease < tol) {
            out.converged = true;
            break;
        }
    }
    out.objective = objective;
    return out;
}

KktReport kkt_check(const MatrixRef& a, const VectorRef& y, const VectorRef& x, double lambda,
                    double tol) {
    const Eigen::VectorXd corr = a.transpose() * (y - a * x);
    KktReport report;
    for (Eigen::Index i = 0; i < corr.size(); ++i) {
        double violation = 0.0;
        if (x(i) != 0.0) {
            violation = std::abs(corr(i) - lambda * (x(i) > 0.0 ? 1.0 : -1.0));
        } else {
            violation = std::max(0.0, std::abs(corr(i)) - lambda);
        }
        if (report.worst_index < 0 || violation > report.max_violation) {
            report.max_violation = violation;
            report.worst_index = i;
        }
    }
    report.feasible = report.max_violation <= tol;
    return report;
}

L0Result l0_brute_force(const MatrixRef& a, const VectorRef& y, double epsilon, int max_support) {
    const Eigen::Index n = a.cols();
    if (n > 20) throw std::invalid_argument("l0_brute_force is limited to 20 columns");
    if (max_support < 0 || max_support > 5) {
        throw std::invalid_argument("l0_brute_force max_support must be in [0, 5]");
    }
    if (a.rows() != y.size()) throw std::invalid_argument("dimension mismatch in l0_brute_force");
    require_finite(a, y);

    L0Result best;
    best.x = Eigen::VectorXd::Zero(n);
    best.residual_norm = y.norm();
    if (best.residual_norm < epsilon) {
        best.feasible = true;
        return best;
    }

    const int max_k = static_cast<int>(std::min<Eigen::Index>(max_support, n));
    for (int k = 1; k <= max_k; ++k) {
        std::vector<Eigen::Index> support(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) support[static_cast<std::size_t>(i)] = i;
        bool found = false;
        double best_residual = std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_coef;
        std::vector<Eigen::Index> best_support;
        for (;;) {
            Eigen::MatrixXd sub(a.rows(), k);
            for (int i = 0; i < k; ++i) sub.col(i) = a.col(support[static_cast<std::size_t>(i)]);
            const Eigen::VectorXd coef = sub.colPivHouseholderQr().solve(y);
            const double res = (y - sub * coef).norm();
            // Enumeration is lexicographic, so strict improvement keeps the
            // lexicographically first support among equal residuals.
            if (res < epsilon && res < best_residual) {
                found = true;
                best_residual = res;
                best_coef = coef;
                best_support = support;
            }
            int i = k - 1;
            while (i >= 0 && support[static_cast<std::size_t>(i)] == n - k + i) --i;
            if (i < 0) break;
            ++support[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < k; ++j) {
                support[static_cast<std::size_t>(j)] = support[static_cast<std::size_t>(j - 1)] + 1;
            }
        }
        if (found) {
            best.feasible = true;
            best.support = best_support;
            best.residual_norm = best_residual;
            for (int i = 0; i < k; ++i) best.x(best_support[static_cast<std::size_t>(i)]) = best_coef(i);
            return best;
        }
    }
    return best;
}

} // namespace srcatr
