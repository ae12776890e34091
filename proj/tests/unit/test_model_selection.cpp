#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "mfdr/model_selection.hpp"
#include "test_support.hpp"

namespace {

using namespace mfdr;

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::IoError;
}

TEST(Folds, PartitionAndBalance) {
    auto data = fixtures::random_linear(53, 3, 1);
    auto f = assign_folds(data, Family::Linear, 10, 7);
    ASSERT_EQ(f.size(), 53u);
    std::vector<int> size(10, 0);
    for (auto k : f) {
        ASSERT_LT(k, 10u);
        ++size[k];
    }
    EXPECT_LE(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()), 1);
}

TEST(Folds, StratifiedOnOutcome) {
    auto data = fixtures::random_logistic(97, 3, 2);
    const VectorXd& y = response_values(data);
    auto f = assign_folds(data, Family::Logistic, 5, 3);
    std::vector<int> ones(5, 0), zeros(5, 0);
    for (std::size_t i = 0; i < f.size(); ++i) (y[static_cast<Eigen::Index>(i)] == 1.0 ? ones : zeros)[f[i]]++;
    EXPECT_LE(*std::max_element(ones.begin(), ones.end()) - *std::min_element(ones.begin(), ones.end()), 1);
    EXPECT_LE(*std::max_element(zeros.begin(), zeros.end()) - *std::min_element(zeros.begin(), zeros.end()), 1);
}

TEST(Folds, DeterministicGivenSeed) {
    auto data = fixtures::random_cox(60, 3, 4);
    EXPECT_EQ(assign_folds(data, Family::Cox, 10, 11), assign_folds(data, Family::Cox, 10, 11));
    EXPECT_NE(assign_folds(data, Family::Cox, 10, 11), assign_folds(data, Family::Cox, 10, 12));
}

TEST(Folds, Errors) {
    auto small = fixtures::random_linear(5, 2, 5);
    EXPECT_EQ(code_of([&] { assign_folds(small, Family::Linear, 3, 1); }), ErrorCode::FoldTooSmall);
    EXPECT_EQ(code_of([&] { assign_folds(small, Family::Linear, 1, 1); }), ErrorCode::InvalidArgument);

    std::mt19937_64 rng(6);
    auto design = fixtures::std_design(fixtures::gaussian_matrix(10, 2, rng));
    VectorXd time = VectorXd::LinSpaced(10, 1.0, 10.0), status = VectorXd::Zero(10);
    status[4] = 1.0;
    Dataset one_event(std::move(design), Survival{time, status});
    EXPECT_EQ(code_of([&] { assign_folds(one_event, Family::Cox, 2, 1); }), ErrorCode::EmptyEventFold);
}

CvResult curve(std::vector<double> cve, std::vector<double> cvse) {
    CvResult cv;
    cv.cve = std::move(cve);
    cv.cvse = std::move(cvse);
    for (std::size_t l = 0; l < cv.cve.size(); ++l) cv.lambda.push_back(std::pow(0.8, double(l)));
    locate_minimum(cv);
    return cv;
}

TEST(SelectLambda, MonotoneDecreasing) {
    auto cv = curve({5, 4, 3, 2, 1}, {0.1, 0.1, 0.1, 0.1, 0.1});
    EXPECT_EQ(select_lambda(cv, LambdaRule::CV).second, 4u);
    EXPECT_EQ(select_lambda(cv, LambdaRule::OneSE).second, 4u);
}

TEST(SelectLambda, FlatPicksLambdaMax) {
    auto cv = curve({2, 2, 2, 2}, {0.5, 0.5, 0.5, 0.5});
    EXPECT_EQ(cv.index_cv, 0u);
    EXPECT_EQ(cv.index_1se, 0u);
    EXPECT_DOUBLE_EQ(select_lambda(cv, LambdaRule::CV).first, 1.0);
}

TEST(SelectLambda, TiesGoToLargerLambda) {
    auto cv = curve({3, 1, 2, 1, 4}, {0.01, 0.01, 0.01, 0.01, 0.01});
    EXPECT_EQ(cv.index_cv, 1u);
}

TEST(SelectLambda, FixtureScanOracle) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> cve(30), cvse(30);
        for (std::size_t l = 0; l < 30; ++l) {
            cve[l] = std::pow(l / 30.0 - 0.6, 2) + 0.05 * u(rng);
            cvse[l] = 0.05 * u(rng);
        }
        auto cv = curve(cve, cvse);
        // linear scan
        std::size_t best = 0;
        for (std::size_t l = 0; l < 30; ++l)
            if (cve[l] < cve[best]) best = l;
        std::size_t one = best;
        for (std::size_t l = 0; l < 30; ++l)
            if (cve[l] <= cve[best] + cvse[best]) {
                one = l;
                break;
            }
        EXPECT_EQ(cv.index_cv, best);
        EXPECT_EQ(cv.index_1se, one);
        EXPECT_GE(cv.lambda_1se, cv.lambda_cv);
        EXPECT_EQ(cv.cve[cv.index_cv], *std::min_element(cve.begin(), cve.end()));
    }
}

TEST(CrossValidate, LinearMatchesIndependentRecomputation) {
    auto data = fixtures::random_linear(24, 3, 8, 2, 0.8);
    auto grid = lambda_grid(data, Family::Linear, 4);
    CvOptions opts;
    opts.folds = 4;
    opts.seed = 5;
    auto cv = cross_validate(data, Family::Linear, grid, opts);
    const VectorXd& y = response_values(data);

    MatrixXd sq(24, 4);
    for (std::size_t k = 0; k < 4; ++k) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < 24; ++i) (cv.fold_assignments[i] == k ? te : tr).push_back(i);
        MatrixXd xr(tr.size(), 3);
        VectorXd yr(tr.size());
        for (std::size_t a = 0; a < tr.size(); ++a) {
            xr.row(a) = data.x().row(tr[a]);
            yr[a] = y[tr[a]];
        }
        // training-fold standardization by hand
        VectorXd mean = xr.colwise().mean().transpose(), scale(3);
        for (Eigen::Index j = 0; j < 3; ++j)
            scale[j] = std::sqrt((xr.col(j).array() - mean[j]).square().sum() / double(tr.size()));
        Dataset train(fixtures::std_design(xr), Continuous{yr});
        for (std::size_t l = 0; l < 4; ++l) {
            VectorXd b = fixtures::ista_linear(train, grid[l]);
            for (auto i : te) {
                double pred = yr.mean();
                for (Eigen::Index j = 0; j < 3; ++j) pred += (data.x()(i, j) - mean[j]) / scale[j] * b[j];
                sq(i, l) = (y[i] - pred) * (y[i] - pred);
            }
        }
    }
    for (std::size_t l = 0; l < 4; ++l) {
        const auto col = sq.col(static_cast<Eigen::Index>(l));
        const double m = col.mean();
        const double se = std::sqrt((col.array() - m).square().sum() / 23.0 / 24.0);
        EXPECT_NEAR(cv.cve[l], m, 1e-7);
        EXPECT_NEAR(cv.cvse[l], se, 1e-7);
    }
}

TEST(CrossValidate, DeterministicRepeat) {
    auto data = fixtures::random_logistic(80, 10, 9);
    auto grid = lambda_grid(data, Family::Logistic, 15);
    CvOptions opts;
    opts.folds = 5;
    auto a = cross_validate(data, Family::Logistic, grid, opts);
    auto b = cross_validate(data, Family::Logistic, grid, opts);
    EXPECT_EQ(a.cve, b.cve);
    EXPECT_EQ(a.cvse, b.cvse);
    EXPECT_EQ(a.fold_assignments, b.fold_assignments);
    EXPECT_EQ(a.index_cv, b.index_cv);
}

TEST(CrossValidate, PureNoisePrefersNullModel) {
    int near_top = 0;
    for (std::uint64_t seed = 1; seed <= 9; ++seed) {
        std::mt19937_64 rng(seed);
        auto design = fixtures::std_design(fixtures::gaussian_matrix(100, 20, rng));
        VectorXd y = fixtures::gaussian_matrix(100, 1, rng).col(0);
        Dataset data(std::move(design), Continuous{y});
        auto grid = lambda_grid(data, Family::Linear, 30);
        CvOptions opts;
        opts.seed = seed;
        auto cv = cross_validate(data, Family::Linear, grid, opts);
        EXPECT_GE(cv.lambda_1se, cv.lambda_cv);
        near_top += cv.index_cv <= 5;
    }
    EXPECT_GE(near_top, 5);
}

TEST(CrossValidate, CoxSignalBeatsNull) {
    auto data = fixtures::random_cox(150, 10, 10, 3, 0.8);
    auto grid = lambda_grid(data, Family::Cox, 20);
    CvOptions opts;
    opts.folds = 5;
    auto cv = cross_validate(data, Family::Cox, grid, opts);
    for (double v : cv.cve) EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(cv.index_cv, 0u);
    EXPECT_LT(cv.cve[cv.index_cv], cv.cve[0]);
    EXPECT_GE(cv.lambda_1se, cv.lambda_cv);
}

}  // namespace
