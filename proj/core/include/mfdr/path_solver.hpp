#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mfdr/data.hpp"

namespace mfdr {

// Strictly decreasing, positive penalty values; values.front() is the
// smallest penalty at which every penalized coefficient is zero (for grids
// built by lambda_grid).
struct LambdaGrid {
    std::vector<double> values;
    double lambda_max = 0.0;
    double min_ratio = 0.0;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t l) const { return values[l]; }
};

// 0.001 when p > n, else 0.05.
double default_min_ratio(std::size_t n, std::size_t p) noexcept;

// max over penalized j of |x_j' u0| / n, u0 the score of the fit with only
// the intercept and unpenalized columns. Throws EmptyPenalizedSet and
// DegenerateNull (below 1e-12).
double lambda_max(const Dataset& data, Family family);

LambdaGrid lambda_grid(const Dataset& data, Family family, std::size_t length = 100,
                       std::optional<double> min_ratio = std::nullopt);

// Grid from user-supplied values; validates strict decrease and positivity.
LambdaGrid explicit_grid(std::vector<double> values);

struct SolverOptions {
    double tol = 1e-7;
    std::size_t max_iter = 10000;  // coordinate sweeps per lambda
    bool record_objective = false;
    // Stop once the fit explains at least this fraction of the null
    // deviance, or the model has as many parameters as observations. Later
    // grid points keep the last solution and are flagged not converged.
    bool stop_at_saturation = true;
    double saturation_ratio = 0.999;
};

// Lasso path on the standardized scale. For the linear family y is centered
// and the intercept is mean(y); logistic carries an unpenalized intercept;
// Cox has none.
struct PathFit {
    Family family = Family::Linear;
    LambdaGrid grid;
    MatrixXd beta;                 // p x L
    VectorXd intercepts;           // L (zeros for Cox)
    std::vector<std::size_t> df;   // nonzero penalized + unpenalized columns
    VectorXd loss;                 // -(1/n) loglik; RSS/(2n) for linear
    std::vector<bool> converged;
    std::vector<std::size_t> iterations;
    std::vector<bool> saturated;   // logistic linear predictor beyond the separation cap
    // Quadratic approximation at the solution: weights W (n x L) and the
    // working residual W^-1 u = pseudo-response minus linear predictor.
    // Linear fits store unit weights and the ordinary residual.
    MatrixXd weights;
    MatrixXd working_residuals;
    // Objective after every coordinate sweep (linear) or IRLS step (GLM/Cox),
    // filled when SolverOptions::record_objective is set.
    std::vector<std::vector<double>> objective_trace;
    std::size_t fitted = 0;        // grid points actually solved

    std::size_t size() const noexcept { return grid.size(); }
    VectorXd beta_at(std::size_t l) const { return beta.col(static_cast<Eigen::Index>(l)); }
    VectorXd weights_at(std::size_t l) const { return weights.col(static_cast<Eigen::Index>(l)); }
    VectorXd residual_at(std::size_t l) const {
        return working_residuals.col(static_cast<Eigen::Index>(l));
    }
    std::vector<std::size_t> not_converged() const;
    bool all_converged() const noexcept;
};

PathFit fit_path(const Dataset& data, Family family, const LambdaGrid& grid,
                 const SolverOptions& options = {});

VectorXd linear_predictor(const Dataset& data, const VectorXd& beta, double intercept);

// -(1/n) loglik at the given coefficients (standardized scale).
double penalized_loss(const Dataset& data, Family family, const VectorXd& beta, double intercept);

// Q = loss + lambda * sum_j pf_j |beta_j|.
double objective(const Dataset& data, Family family, const VectorXd& beta, double intercept,
                 double lambda);

// Score vector u = d loglik / d eta at the given coefficients.
VectorXd score_at(const Dataset& data, Family family, const VectorXd& beta, double intercept);

struct KktViolation {
    std::size_t feature = 0;
    bool active = false;
    double gradient = 0.0;  // x_j' u / n
    double excess = 0.0;    // amount by which the condition fails
};

struct KktReport {
    std::vector<KktViolation> violations;
    double max_excess = 0.0;
    bool ok() const noexcept { return violations.empty(); }
};

// Active j: |x_j' u / n - lambda pf_j sign(beta_j)| <= tol;
// inactive j: |x_j' u / n| <= lambda pf_j + tol.
KktReport kkt_check(const Dataset& data, Family family, const VectorXd& beta, double intercept,
                    double lambda, double tol);
KktReport kkt_check(const Dataset& data, const PathFit& fit, std::size_t l, double tol);

}  // namespace mfdr
