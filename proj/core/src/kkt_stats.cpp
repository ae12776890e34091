#include "mfdr/kkt_stats.hpp"

#include <cmath>

namespace mfdr {

namespace {

void check_index(const PathFit& fit, std::size_t l) {
    if (l >= fit.size()) throw Error(ErrorCode::InvalidArgument, "lambda index out of range", l);
}

}  // namespace

SigmaEstimate estimate_sigma(const Dataset& data, const PathFit& fit, std::size_t lambda_index) {
    if (fit.family != Family::Linear)
        throw Error(ErrorCode::FamilyMismatch, "sigma is only estimated for the linear family");
    check_index(fit, lambda_index);
    SigmaEstimate est;
    est.df = fit.df[lambda_index] + 1;
    if (data.n() <= est.df)
        throw Error(ErrorCode::SaturatedModel, "model degrees of freedom reach n", lambda_index);
    est.denominator = data.n() - est.df;
    est.rss = fit.residual_at(lambda_index).squaredNorm();
    if (est.rss < 1e-12 * static_cast<double>(data.n()))
        throw Error(ErrorCode::ZeroResidual, "model interpolates the response", lambda_index);
    est.sigma = std::sqrt(est.rss / static_cast<double>(est.denominator));
    return est;
}

std::vector<SelectionStat> selection_stats_linear(const Dataset& data, const PathFit& fit,
                                                  std::size_t lambda_index) {
    const SigmaEstimate sigma = estimate_sigma(data, fit, lambda_index);
    const double n = static_cast<double>(data.n());
    const VectorXd r = fit.residual_at(lambda_index);
    const VectorXd beta = fit.beta_at(lambda_index);
    const VectorXd inner = data.x().transpose() * r / n;
    const double scale = sigma.sigma / std::sqrt(n);

    std::vector<SelectionStat> out;
    out.reserve(data.p());
    for (std::size_t j = 0; j < data.p(); ++j) {
        if (!data.design().is_penalized(j)) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        // x_j' x_j = n, so x_j' r_j / n = x_j' r / n + beta_j.
        SelectionStat stat;
        stat.feature = j;
        stat.c = inner[jj] + beta[jj];
        stat.s = sigma.sigma;
        stat.z = stat.c / scale;
        stat.active = beta[jj] != 0.0;
        stat.lambda = fit.grid[lambda_index];
        out.push_back(stat);
    }
    return out;
}

std::vector<SelectionStat> selection_stats_weighted(const Dataset& data, const PathFit& fit,
                                                    std::size_t lambda_index) {
    if (fit.family == Family::Linear)
        throw Error(ErrorCode::FamilyMismatch, "weighted statistics need a logistic or Cox fit");
    check_index(fit, lambda_index);
    const double n = static_cast<double>(data.n());
    const VectorXd w = fit.weights_at(lambda_index);
    const VectorXd wr = w.cwiseProduct(fit.residual_at(lambda_index));
    const VectorXd beta = fit.beta_at(lambda_index);
    const MatrixXd& x = data.x();

    std::vector<SelectionStat> out;
    out.reserve(data.p());
    for (std::size_t j = 0; j < data.p(); ++j) {
        if (!data.design().is_penalized(j)) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        const double s2 = x.col(jj).cwiseAbs2().dot(w) / n;
        const double s = std::sqrt(s2);
        if (!(s >= 1e-10))
            throw Error(ErrorCode::DegenerateWeight, "feature has vanishing weighted variance", j);
        SelectionStat stat;
        stat.feature = j;
        stat.c = x.col(jj).dot(wr) / n + s2 * beta[jj];
        stat.s = s;
        stat.z = stat.c / (s / std::sqrt(n));
        stat.active = beta[jj] != 0.0;
        stat.lambda = fit.grid[lambda_index];
        out.push_back(stat);
    }
    return out;
}

std::vector<SelectionStat> selection_stats(const Dataset& data, const PathFit& fit,
                                           std::size_t lambda_index) {
    return fit.family == Family::Linear ? selection_stats_linear(data, fit, lambda_index)
                                        : selection_stats_weighted(data, fit, lambda_index);
}

SelectionPath zstats_along_path(const Dataset& data, const PathFit& fit) {
    SelectionPath path;
    for (std::size_t j = 0; j < data.p(); ++j)
        if (data.design().is_penalized(j)) path.features.push_back(j);
    path.lambdas = fit.grid.values;
    path.columns.reserve(fit.size());
    for (std::size_t l = 0; l < fit.size(); ++l) path.columns.push_back(selection_stats(data, fit, l));
    return path;
}

}  // namespace mfdr
