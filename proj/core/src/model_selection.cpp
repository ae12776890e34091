#include "mfdr/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "family_ops.hpp"

namespace mfdr {

namespace {

// Fisher-Yates with plain modular reduction so the permutation only depends
// on the engine's output sequence.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t k = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[k]);
    }
}

double binomial_deviance(double y, double eta) {
    const double mu = std::clamp(1.0 / (1.0 + std::exp(-eta)), 1e-15, 1.0 - 1e-15);
    return -2.0 * (y * std::log(mu) + (1.0 - y) * std::log(1.0 - mu));
}

}  // namespace

std::vector<std::size_t> assign_folds(const Dataset& data, Family family, std::size_t folds,
                                      std::uint64_t seed) {
    if (folds < 2) throw Error(ErrorCode::InvalidArgument, "cross-validation needs at least 2 folds");
    const std::size_t n = data.n();
    if (n < 2 * folds) throw Error(ErrorCode::FoldTooSmall, "fewer than two observations per fold");

    VectorXd strata = VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (family == Family::Logistic) strata = response_values(data);
    if (family == Family::Cox) strata = survival_response(data).status;

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> assignment(n, 0);
    std::size_t next = 0;
    for (double level : {0.0, 1.0}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (strata[static_cast<Eigen::Index>(i)] == level) members.push_back(i);
        shuffle(members, rng);
        for (std::size_t i : members) assignment[i] = next++ % folds;
    }
    if (family == Family::Cox) {
        std::vector<double> events(folds, 0.0);
        for (std::size_t i = 0; i < n; ++i) events[assignment[i]] += strata[static_cast<Eigen::Index>(i)];
        for (std::size_t k = 0; k < folds; ++k)
            if (events[k] < 1.0) throw Error(ErrorCode::EmptyEventFold, "fold without events", k);
    }
    return assignment;
}

void locate_minimum(CvResult& cv) {
    const std::size_t L = cv.cve.size();
    if (L == 0) throw Error(ErrorCode::InvalidArgument, "empty cross-validation curve");
    std::size_t best = 0;
    for (std::size_t l = 1; l < L; ++l)
        if (cv.cve[l] < cv.cve[best]) best = l;
    const double bound = cv.cve[best] + cv.cvse[best];
    std::size_t one_se = best;
    for (std::size_t l = 0; l <= best; ++l) {
        if (cv.cve[l] <= bound) {
            one_se = l;
            break;
        }
    }
    cv.index_cv = best;
    cv.index_1se = one_se;
    cv.lambda_cv = cv.lambda[best];
    cv.lambda_1se = cv.lambda[one_se];
}

std::pair<double, std::size_t> select_lambda(const CvResult& cv, LambdaRule rule) {
    return rule == LambdaRule::CV ? std::pair{cv.lambda_cv, cv.index_cv}
                                  : std::pair{cv.lambda_1se, cv.index_1se};
}

CvResult cross_validate(const Dataset& data, Family family, const LambdaGrid& grid,
                        const CvOptions& options) {
    require_family(data, family);
    const std::size_t n = data.n();
    const std::size_t L = grid.size();
    const std::size_t K = options.folds;

    CvResult cv;
    cv.lambda = grid.values;
    cv.fold_assignments = assign_folds(data, family, K, options.seed);

    // Linear / logistic: per-observation losses. Cox: per-fold deviances.
    MatrixXd loss(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(L));
    MatrixXd fold_dev(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(L));
    std::vector<double> fold_events(K, 0.0);

    std::optional<detail::RiskSets> full_risk;
    if (family == Family::Cox) full_risk.emplace(survival_response(data));

    for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::size_t> train_rows;
        std::vector<std::size_t> test_rows;
        for (std::size_t i = 0; i < n; ++i) (cv.fold_assignments[i] == k ? test_rows : train_rows).push_back(i);
        if (test_rows.empty() || train_rows.size() < 2)
            throw Error(ErrorCode::FoldTooSmall, "fold leaves too few observations", k);

        const Dataset train = data.subset(train_rows);
        const PathFit fit = fit_path(train, family, grid, options.solver);

        std::optional<detail::RiskSets> train_risk;
        if (family == Family::Cox) {
            train_risk.emplace(survival_response(train));
            for (std::size_t i : test_rows)
                fold_events[k] += survival_response(data).status[static_cast<Eigen::Index>(i)];
        }

        for (std::size_t l = 0; l < L; ++l) {
            const RawCoefficients coef =
                destandardize(fit.beta_at(l), fit.intercepts[static_cast<Eigen::Index>(l)], train.design());
            if (family == Family::Cox) {
                const VectorXd eta_full = data.x() * coef.beta;
                const VectorXd eta_train = train.x() * fit.beta_at(l);
                const double ll_full =
                    -detail::cox_neg_loglik(survival_response(data), *full_risk, eta_full) * static_cast<double>(n);
                const double ll_train = -detail::cox_neg_loglik(survival_response(train), *train_risk, eta_train) *
                                        static_cast<double>(train.n());
                fold_dev(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) =
                    -2.0 * (ll_full - ll_train) / fold_events[k];
                continue;
            }
            const VectorXd& y = response_values(data);
            for (std::size_t i : test_rows) {
                const auto ii = static_cast<Eigen::Index>(i);
                const double eta = coef.intercept + data.x().row(ii).dot(coef.beta);
                loss(ii, static_cast<Eigen::Index>(l)) =
                    family == Family::Linear ? (y[ii] - eta) * (y[ii] - eta) : binomial_deviance(y[ii], eta);
            }
        }
    }

    cv.cve.resize(L);
    cv.cvse.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        const auto ll = static_cast<Eigen::Index>(l);
        if (family == Family::Cox) {
            double total = 0.0;
            double mean = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                total += fold_events[k];
                mean += fold_events[k] * fold_dev(static_cast<Eigen::Index>(k), ll);
            }
            mean /= total;
            double var = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double d = fold_dev(static_cast<Eigen::Index>(k), ll) - mean;
                var += fold_events[k] * d * d;
            }
            cv.cve[l] = mean;
            cv.cvse[l] = std::sqrt(var / total / static_cast<double>(K - 1));
        } else {
            const auto col = loss.col(ll);
            const double mean = col.mean();
            const double var = (col.array() - mean).square().sum() / static_cast<double>(n - 1);
            cv.cve[l] = mean;
            cv.cvse[l] = std::sqrt(var / static_cast<double>(n));
        }
    }
    locate_minimum(cv);
    return cv;
}

}  // namespace mfdr
