#pragma once

#include <cstddef>
#include <vector>

#include "mfdr/data.hpp"
#include "mfdr/path_solver.hpp"

namespace mfdr {

// Selection statistic of one penalized feature at one penalty value.
//   c = x_j' W r_j / n   (r_j the partial (pseudo-)residual without feature j)
//   s = sigma-hat (linear) or sqrt(x_j' W x_j / n) (logistic, Cox)
//   z = c / (s / sqrt(n))
struct SelectionStat {
    std::size_t feature = 0;
    double c = 0.0;
    double s = 0.0;
    double z = 0.0;
    bool active = false;
    double lambda = 0.0;
};

struct SigmaEstimate {
    double sigma = 0.0;
    double rss = 0.0;
    std::size_t df = 0;           // nonzero penalized + unpenalized + intercept
    std::size_t denominator = 0;  // n - df
};

// sigma^2 = RSS / (n - df). Throws SaturatedModel when n - df <= 0 and
// ZeroResidual when RSS < 1e-12 * n.
SigmaEstimate estimate_sigma(const Dataset& data, const PathFit& fit, std::size_t lambda_index);

// Unpenalized features are excluded; results are ordered by feature index.
std::vector<SelectionStat> selection_stats_linear(const Dataset& data, const PathFit& fit,
                                                  std::size_t lambda_index);

// Throws DegenerateWeight(j) when s_j < 1e-10.
std::vector<SelectionStat> selection_stats_weighted(const Dataset& data, const PathFit& fit,
                                                    std::size_t lambda_index);

// Dispatches on fit.family.
std::vector<SelectionStat> selection_stats(const Dataset& data, const PathFit& fit,
                                           std::size_t lambda_index);

// Column l holds the statistics at grid point l; features in index order.
struct SelectionPath {
    std::vector<std::size_t> features;
    std::vector<double> lambdas;
    std::vector<std::vector<SelectionStat>> columns;

    std::size_t size() const noexcept { return columns.size(); }
    const std::vector<SelectionStat>& at(std::size_t l) const { return columns.at(l); }
};

SelectionPath zstats_along_path(const Dataset& data, const PathFit& fit);

}  // namespace mfdr
