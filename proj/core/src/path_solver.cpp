#include "mfdr/path_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "family_ops.hpp"

namespace mfdr {

namespace {

using detail::FamilyModel;
using detail::WorkingState;

constexpr double kInf = std::numeric_limits<double>::infinity();

double soft_threshold(double value, double threshold) {
    if (value > threshold) return value - threshold;
    if (value < -threshold) return value + threshold;
    return 0.0;
}

double penalty_term(const VectorXd& beta, const VectorXd& pf, double lambda) {
    return lambda * pf.cwiseProduct(beta.cwiseAbs()).sum();
}

// Weighted least-squares lasso subproblem
//   min (1/2n) sum_i w_i r_i^2 + lambda sum_j pf_j |beta_j|
// solved in place on (beta, intercept, r) where r is the current residual.
struct Subproblem {
    const MatrixXd& x;
    const VectorXd& w;
    const VectorXd& v;  // x_j' W x_j / n
    const VectorXd& pf;
    double lambda;
    bool intercept;
    bool unit_weights;
};

double sweep(const Subproblem& sp, const std::vector<Eigen::Index>& cols, VectorXd& beta,
             double& b0, VectorXd& r) {
    const double n = static_cast<double>(sp.x.rows());
    double max_change = 0.0;
    if (sp.intercept) {
        const double shift = sp.unit_weights ? r.sum() / n : sp.w.dot(r) / sp.w.sum();
        if (shift != 0.0) {
            b0 += shift;
            r.array() -= shift;
            max_change = std::abs(shift);
        }
    }
    for (Eigen::Index j : cols) {
        const auto xj = sp.x.col(j);
        const double grad = (sp.unit_weights ? xj.dot(r) : xj.cwiseProduct(sp.w).dot(r)) / n;
        // pf = 0 must stay unthresholded even when lambda is +inf
        const double t = sp.pf[j] == 0.0 ? 0.0 : sp.lambda * sp.pf[j];
        const double updated = soft_threshold(grad + sp.v[j] * beta[j], t) / sp.v[j];
        const double delta = updated - beta[j];
        if (delta != 0.0) {
            r -= delta * xj;
            beta[j] = updated;
            max_change = std::max(max_change, std::abs(delta));
        }
    }
    return max_change;
}

double quadratic_part(const Subproblem& sp, const VectorXd& r) {
    const double n = static_cast<double>(sp.x.rows());
    return sp.unit_weights ? 0.5 * r.squaredNorm() / n : 0.5 * sp.w.dot(r.cwiseAbs2()) / n;
}

// Newton step on the current support and sign pattern: solve the
// stationarity equations, then move as far towards that solution as the
// signs allow. A blocked step zeroes the coefficients whose signs would flip
// and retries on the smaller support. The objective is convex along the step,
// so it never rises; coordinate descent resumes from the result.
bool active_set_solve(const Subproblem& sp, VectorXd& beta, double& b0, VectorXd& r) {
    const Eigen::Index n = sp.x.rows();
    const Eigen::Index extra = sp.intercept ? 1 : 0;
    bool moved = false;
    for (int attempt = 0; attempt < 4; ++attempt) {
        std::vector<Eigen::Index> support;
        for (Eigen::Index j = 0; j < beta.size(); ++j)
            if (beta[j] != 0.0 || sp.pf[j] == 0.0) support.push_back(j);
        const auto k = static_cast<Eigen::Index>(support.size());
        if (k == 0 || k + extra >= n) return moved;
        MatrixXd xa(n, k + extra);
        for (Eigen::Index a = 0; a < k; ++a) xa.col(a) = sp.x.col(support[static_cast<std::size_t>(a)]);
        if (sp.intercept) xa.col(k).setOnes();
        const MatrixXd wx = sp.unit_weights ? xa : MatrixXd(sp.w.asDiagonal() * xa);
        const MatrixXd gram = xa.transpose() * wx;
        VectorXd rhs = wx.transpose() * r;
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::Index j = support[static_cast<std::size_t>(a)];
            if (sp.pf[j] != 0.0) rhs[a] -= static_cast<double>(n) * sp.lambda * sp.pf[j] * (beta[j] > 0 ? 1.0 : -1.0);
        }
        const Eigen::LDLT<MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12) return moved;
        const VectorXd delta = ldlt.solve(rhs);
        if (!delta.allFinite()) return moved;

        double step = 1.0;
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::Index j = support[static_cast<std::size_t>(a)];
            if (sp.pf[j] != 0.0 && (beta[j] + delta[a]) * beta[j] <= 0.0) step = std::min(step, -beta[j] / delta[a]);
        }
        if (!(step > 0.0)) return moved;
        VectorXd taken(k + extra);
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::Index j = support[static_cast<std::size_t>(a)];
            const double next = beta[j] + step * delta[a];
            const double updated = sp.pf[j] != 0.0 && next * beta[j] <= 0.0 ? 0.0 : next;
            taken[a] = updated - beta[j];
            beta[j] = updated;
        }
        if (sp.intercept) {
            taken[k] = step * delta[k];
            b0 += taken[k];
        }
        r -= xa * taken;
        moved = true;
        if (step >= 1.0) return true;
    }
    return moved;
}

struct CdOutcome {
    std::size_t sweeps = 0;
    bool converged = false;
};

double threshold(double tol, const VectorXd& beta) {
    const double scale = beta.size() > 0 ? beta.cwiseAbs().maxCoeff() : 0.0;
    return tol * std::max(1.0, scale);
}

// Cyclic coordinate descent with an active-set strategy: iterate over the
// current support until it settles, then confirm with a full sweep.
CdOutcome coordinate_descent(const Subproblem& sp, VectorXd& beta, double& b0, VectorXd& r,
                             double tol, std::size_t max_sweeps,
                             std::vector<double>* trace, double objective_lambda) {
    const Eigen::Index p = sp.x.cols();
    std::vector<Eigen::Index> all(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;

    auto record = [&] {
        if (trace) trace->push_back(quadratic_part(sp, r) + penalty_term(beta, sp.pf, objective_lambda));
    };

    CdOutcome out;
    std::vector<Eigen::Index> active;
    while (out.sweeps < max_sweeps) {
        const double full_change = sweep(sp, all, beta, b0, r);
        ++out.sweeps;
        record();
        if (full_change < threshold(tol, beta)) {
            out.converged = true;
            break;
        }
        active.clear();
        for (Eigen::Index j = 0; j < p; ++j)
            if (beta[j] != 0.0 || sp.pf[j] == 0.0) active.push_back(j);
        std::size_t inner = 0;
        std::size_t next_solve = 20;
        while (out.sweeps < max_sweeps) {
            const double change = sweep(sp, active, beta, b0, r);
            ++out.sweeps;
            record();
            if (change < threshold(tol, beta)) break;
            // Slow progress on a settled support: jump to its exact solution.
            if (++inner == next_solve && std::isfinite(sp.lambda)) {
                next_solve *= 4;
                if (active_set_solve(sp, beta, b0, r)) record();
            }
        }
    }
    return out;
}

struct SolveOutcome {
    std::size_t sweeps = 0;
    bool converged = false;
    bool saturated = false;
};

// Minimizes loss + lambda * pen at one penalty value, warm-started from
// (beta, b0). `lambda` may be +inf (only unpenalized terms move).
SolveOutcome solve_at(const FamilyModel& model, const Dataset& data, double lambda,
                      double objective_lambda, VectorXd& beta, double& b0,
                      const SolverOptions& options, std::vector<double>* trace) {
    const MatrixXd& x = data.x();
    const VectorXd& pf = data.design().penalty_factor();
    const double n = static_cast<double>(data.n());
    SolveOutcome out;

    if (model.family() == Family::Linear) {
        const VectorXd unit = VectorXd::Ones(x.rows());
        const VectorXd v = x.colwise().squaredNorm().transpose() / n;
        VectorXd r = response_values(data).array() - b0;
        r -= x * beta;
        const Subproblem sp{x, unit, v, pf, lambda, true, true};
        const CdOutcome cd = coordinate_descent(sp, beta, b0, r, options.tol, options.max_iter, trace,
                                                objective_lambda);
        out.sweeps = cd.sweeps;
        out.converged = cd.converged;
        return out;
    }

    const bool intercept = model.has_intercept();
    WorkingState state;
    VectorXd eta = x * beta;
    eta.array() += b0;
    model.working(eta, state);
    double q_old = state.loss + penalty_term(beta, pf, objective_lambda);
    // Inner solves only need to be as precise as the outer iteration is
    // close to converging.
    double inner_tol = 1e-3;
    for (;;) {
        out.saturated = out.saturated || state.saturated;
        VectorXd v(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            v[j] = x.col(j).cwiseAbs2().dot(state.weights) / n;
        const VectorXd beta_prev = beta;
        const double b0_prev = b0;
        VectorXd r = state.residual;
        const Subproblem sp{x, state.weights, v, pf, lambda, intercept, false};
        const std::size_t budget = options.max_iter > out.sweeps ? options.max_iter - out.sweeps : 0;
        const CdOutcome cd = coordinate_descent(sp, beta, b0, r, inner_tol, budget, nullptr, 0.0);
        out.sweeps += cd.sweeps;

        // Step halving keeps the true objective monotone.
        const VectorXd beta_full = beta;
        const double b0_full = b0;
        double step = 1.0;
        double q_new = kInf;
        for (int halving = 0; halving < 40; ++halving) {
            beta = beta_prev + step * (beta_full - beta_prev);
            b0 = b0_prev + step * (b0_full - b0_prev);
            eta = x * beta;
            eta.array() += b0;
            model.working(eta, state);
            q_new = state.loss + penalty_term(beta, pf, objective_lambda);
            if (q_new <= q_old + 1e-13 * std::abs(q_old)) break;
            step *= 0.5;
        }
        if (trace) trace->push_back(q_new);

        double change = (beta - beta_prev).cwiseAbs().maxCoeff();
        if (intercept) change = std::max(change, std::abs(b0 - b0_prev));
        q_old = std::min(q_old, q_new);
        const bool precise = inner_tol <= options.tol;
        inner_tol = std::max(options.tol, std::min(inner_tol, 0.1 * change / std::max(1.0, beta.cwiseAbs().maxCoeff())));
        if (change < threshold(options.tol, beta) && cd.converged && precise) {
            out.converged = true;
            break;
        }
        if (out.sweeps >= options.max_iter) break;
    }
    out.saturated = out.saturated || state.saturated;
    return out;
}

double initial_intercept(const Dataset& data, Family family) {
    switch (family) {
        case Family::Linear:
            return response_values(data).mean();
        case Family::Logistic: {
            const double ybar = response_values(data).mean();
            if (!(ybar > 0.0 && ybar < 1.0))
                throw Error(ErrorCode::InvalidResponse, "binary response needs both classes");
            return std::log(ybar / (1.0 - ybar));
        }
        case Family::Cox:
            if (survival_response(data).status.sum() < 1.0)
                throw Error(ErrorCode::InvalidResponse, "survival response has no events");
            return 0.0;
    }
    return 0.0;
}

struct NullFit {
    VectorXd beta;
    double intercept = 0.0;
    double bound = 0.0;
};

NullFit null_fit(const FamilyModel& model, const Dataset& data) {
    NullFit out;
    out.beta = VectorXd::Zero(static_cast<Eigen::Index>(data.p()));
    out.intercept = initial_intercept(data, model.family());
    if (data.design().unpenalized_count() > 0) {
        SolverOptions options;
        options.tol = 1e-10;
        solve_at(model, data, kInf, 0.0, out.beta, out.intercept, options, nullptr);
    }
    VectorXd eta = data.x() * out.beta;
    eta.array() += out.intercept;
    const VectorXd u = model.score(eta);
    const VectorXd grad = data.x().transpose() * u / static_cast<double>(data.n());
    for (std::size_t j = 0; j < data.p(); ++j)
        if (data.design().is_penalized(j))
            out.bound = std::max(out.bound, std::abs(grad[static_cast<Eigen::Index>(j)]));
    return out;
}

}  // namespace

double default_min_ratio(std::size_t n, std::size_t p) noexcept { return p > n ? 0.001 : 0.05; }

double lambda_max(const Dataset& data, Family family) {
    if (data.design().unpenalized_count() == data.p())
        throw Error(ErrorCode::EmptyPenalizedSet, "every feature is unpenalized");
    const FamilyModel model(data, family);
    const double bound = null_fit(model, data).bound;
    if (!(bound >= 1e-12))
        throw Error(ErrorCode::DegenerateNull, "response is orthogonal to every penalized feature");
    return bound;
}

LambdaGrid lambda_grid(const Dataset& data, Family family, std::size_t length,
                       std::optional<double> min_ratio) {
    if (length < 2) throw Error(ErrorCode::InvalidArgument, "grid length must be at least 2");
    const double ratio = min_ratio.value_or(default_min_ratio(data.n(), data.p()));
    if (!(ratio > 0.0 && ratio < 1.0))
        throw Error(ErrorCode::InvalidArgument, "min_ratio must lie in (0, 1)");
    LambdaGrid grid;
    grid.lambda_max = lambda_max(data, family);
    grid.min_ratio = ratio;
    grid.values.resize(length);
    const double log_ratio = std::log(ratio);
    grid.values[0] = grid.lambda_max;
    for (std::size_t l = 1; l < length; ++l)
        grid.values[l] = grid.lambda_max *
                         std::exp(log_ratio * static_cast<double>(l) / static_cast<double>(length - 1));
    return grid;
}

LambdaGrid explicit_grid(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "empty lambda grid");
    for (std::size_t l = 0; l < values.size(); ++l) {
        if (!(values[l] > 0.0) || !std::isfinite(values[l]))
            throw Error(ErrorCode::InvalidArgument, "lambda values must be positive", l);
        if (l > 0 && !(values[l] < values[l - 1]))
            throw Error(ErrorCode::InvalidArgument, "lambda values must be strictly decreasing", l);
    }
    LambdaGrid grid;
    grid.lambda_max = values.front();
    grid.min_ratio = values.back() / values.front();
    grid.values = std::move(values);
    return grid;
}

std::vector<std::size_t> PathFit::not_converged() const {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < converged.size(); ++l)
        if (!converged[l]) out.push_back(l);
    return out;
}

bool PathFit::all_converged() const noexcept {
    return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

PathFit fit_path(const Dataset& data, Family family, const LambdaGrid& grid,
                 const SolverOptions& options) {
    if (grid.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty lambda grid");
    if (data.design().unpenalized_count() == data.p())
        throw Error(ErrorCode::EmptyPenalizedSet, "every feature is unpenalized");
    const FamilyModel model(data, family);
    const Eigen::Index n = static_cast<Eigen::Index>(data.n());
    const Eigen::Index p = static_cast<Eigen::Index>(data.p());
    const auto L = static_cast<Eigen::Index>(grid.size());
    const VectorXd& pf = data.design().penalty_factor();

    PathFit fit;
    fit.family = family;
    fit.grid = grid;
    fit.beta = MatrixXd::Zero(p, L);
    fit.intercepts = VectorXd::Zero(L);
    fit.df.assign(grid.size(), 0);
    fit.loss = VectorXd::Zero(L);
    fit.converged.assign(grid.size(), false);
    fit.iterations.assign(grid.size(), 0);
    fit.saturated.assign(grid.size(), false);
    fit.weights.resize(n, L);
    fit.working_residuals.resize(n, L);
    if (options.record_objective) fit.objective_trace.resize(grid.size());

    NullFit start = null_fit(model, data);
    VectorXd beta = start.beta;
    double b0 = start.intercept;
    const std::size_t unpenalized = data.design().unpenalized_count();
    const double null_loss = model.loss(linear_predictor(data, start.beta, start.intercept));
    // Cox: the partial likelihood has no more information than events.
    const std::size_t parameters_cap =
        family == Family::Cox ? static_cast<std::size_t>(survival_response(data).status.sum())
                              : data.n() - (model.has_intercept() ? 1 : 0);

    for (Eigen::Index l = 0; l < L; ++l) {
        const double lambda = grid.values[static_cast<std::size_t>(l)];
        // At or above the null bound the empty model satisfies KKT exactly.
        const double effective = lambda >= start.bound ? kInf : lambda;
        if (effective == kInf) {
            beta = start.beta;
            b0 = start.intercept;
        }
        std::vector<double>* trace =
            options.record_objective ? &fit.objective_trace[static_cast<std::size_t>(l)] : nullptr;
        const SolveOutcome outcome = solve_at(model, data, effective, lambda, beta, b0, options, trace);

        fit.beta.col(l) = beta;
        fit.intercepts[l] = model.has_intercept() ? b0 : 0.0;
        std::size_t nonzero = unpenalized;
        for (Eigen::Index j = 0; j < p; ++j)
            if (pf[j] != 0.0 && beta[j] != 0.0) ++nonzero;
        fit.df[static_cast<std::size_t>(l)] = nonzero;
        fit.converged[static_cast<std::size_t>(l)] = outcome.converged;
        fit.iterations[static_cast<std::size_t>(l)] = outcome.sweeps;

        WorkingState state;
        VectorXd eta = data.x() * beta;
        eta.array() += b0;
        model.working(eta, state);
        fit.saturated[static_cast<std::size_t>(l)] = outcome.saturated || state.saturated;
        fit.loss[l] = state.loss;
        fit.weights.col(l) = state.weights;
        fit.working_residuals.col(l) = state.residual;
        fit.fitted = static_cast<std::size_t>(l) + 1;

        const bool explained = null_loss > 0.0 && 1.0 - state.loss / null_loss >= options.saturation_ratio;
        if (options.stop_at_saturation && l + 1 < L && (explained || nonzero >= parameters_cap)) {
            for (Eigen::Index k = l + 1; k < L; ++k) {
                fit.beta.col(k) = fit.beta.col(l);
                fit.intercepts[k] = fit.intercepts[l];
                fit.df[static_cast<std::size_t>(k)] = nonzero;
                fit.saturated[static_cast<std::size_t>(k)] = fit.saturated[static_cast<std::size_t>(l)];
                fit.loss[k] = fit.loss[l];
                fit.weights.col(k) = fit.weights.col(l);
                fit.working_residuals.col(k) = fit.working_residuals.col(l);
            }
            break;
        }
    }
    return fit;
}

VectorXd linear_predictor(const Dataset& data, const VectorXd& beta, double intercept) {
    if (static_cast<std::size_t>(beta.size()) != data.p())
        throw Error(ErrorCode::DimensionMismatch, "coefficient length does not match design");
    VectorXd eta = data.x() * beta;
    eta.array() += intercept;
    return eta;
}

double penalized_loss(const Dataset& data, Family family, const VectorXd& beta, double intercept) {
    const FamilyModel model(data, family);
    return model.loss(linear_predictor(data, beta, family == Family::Cox ? 0.0 : intercept));
}

double objective(const Dataset& data, Family family, const VectorXd& beta, double intercept,
                 double lambda) {
    return penalized_loss(data, family, beta, intercept) +
           penalty_term(beta, data.design().penalty_factor(), lambda);
}

VectorXd score_at(const Dataset& data, Family family, const VectorXd& beta, double intercept) {
    const FamilyModel model(data, family);
    return model.score(linear_predictor(data, beta, family == Family::Cox ? 0.0 : intercept));
}

KktReport kkt_check(const Dataset& data, Family family, const VectorXd& beta, double intercept,
                    double lambda, double tol) {
    const VectorXd u = score_at(data, family, beta, intercept);
    const VectorXd grad = data.x().transpose() * u / static_cast<double>(data.n());
    const VectorXd& pf = data.design().penalty_factor();
    KktReport report;
    for (Eigen::Index j = 0; j < grad.size(); ++j) {
        const bool active = beta[j] != 0.0;
        const double bound = lambda * pf[j];
        const double excess = active ? std::abs(grad[j] - bound * (beta[j] > 0 ? 1.0 : -1.0))
                                     : std::abs(grad[j]) - bound;
        report.max_excess = std::max(report.max_excess, excess);
        if (excess > tol)
            report.violations.push_back({static_cast<std::size_t>(j), active, grad[j], excess});
    }
    return report;
}

KktReport kkt_check(const Dataset& data, const PathFit& fit, std::size_t l, double tol) {
    return kkt_check(data, fit.family, fit.beta_at(l), fit.intercepts[static_cast<Eigen::Index>(l)],
                     fit.grid[l], tol);
}

}  // namespace mfdr
