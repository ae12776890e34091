#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "mfdr/data.hpp"
#include "mfdr/path_solver.hpp"

namespace mfdr {

struct CvOptions {
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    SolverOptions solver;
};

struct CvResult {
    std::vector<double> lambda;
    std::vector<double> cve;   // mean held-out deviance
    std::vector<double> cvse;
    std::size_t index_cv = 0;
    std::size_t index_1se = 0;
    double lambda_cv = 0.0;
    double lambda_1se = 0.0;
    std::vector<std::size_t> fold_assignments;  // fold id per observation
};

// Seeded fold assignment; stratified on y (logistic) or on status (Cox).
std::vector<std::size_t> assign_folds(const Dataset& data, Family family, std::size_t folds,
                                      std::uint64_t seed);

// Held-out deviance per lambda: squared error (linear) and binomial deviance
// (logistic) per observation; for Cox the per-fold difference of partial
// log-likelihoods (full data minus training data) at the training fit,
// scaled by the fold's event count.
CvResult cross_validate(const Dataset& data, Family family, const LambdaGrid& grid,
                        const CvOptions& options = {});

enum class LambdaRule { CV, OneSE };

// (lambda, grid index). Ties in min(cve) go to the larger lambda.
std::pair<double, std::size_t> select_lambda(const CvResult& cv, LambdaRule rule);

// Fills index_cv/index_1se and the matching lambdas from cve/cvse.
void locate_minimum(CvResult& cv);

}  // namespace mfdr
