#include <cmath>

#include "family_ops.hpp"
#include "mfdr/distributions.hpp"
#include "mfdr/fdr.hpp"

namespace mfdr {

namespace {

// Unpenalized columns plus, for linear/logistic, an intercept column.
MatrixXd adjuster_matrix(const Dataset& data, bool intercept) {
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < data.p(); ++j)
        if (!data.design().is_penalized(j)) cols.push_back(static_cast<Eigen::Index>(j));
    const Eigen::Index extra = intercept ? 1 : 0;
    MatrixXd a(data.x().rows(), static_cast<Eigen::Index>(cols.size()) + extra);
    if (intercept) a.col(0).setOnes();
    for (std::size_t k = 0; k < cols.size(); ++k)
        a.col(static_cast<Eigen::Index>(k) + extra) = data.x().col(cols[k]);
    return a;
}

UnivariateResult univariate_linear(const Dataset& data) {
    const MatrixXd a = adjuster_matrix(data, true);
    const Eigen::HouseholderQR<MatrixXd> qr(a);
    const MatrixXd q = qr.householderQ() * MatrixXd::Identity(a.rows(), a.cols());
    const VectorXd& y = response_values(data);
    const VectorXd y_res = y - q * (q.transpose() * y);
    const double yy = y_res.squaredNorm();
    const double df = static_cast<double>(data.n()) - static_cast<double>(a.cols()) - 1.0;

    UnivariateResult out;
    for (std::size_t j = 0; j < data.p(); ++j) {
        if (!data.design().is_penalized(j)) continue;
        const VectorXd xj = data.x().col(static_cast<Eigen::Index>(j));
        const VectorXd x_res = xj - q * (q.transpose() * xj);
        const double sxx = x_res.squaredNorm();
        out.features.push_back(j);
        if (df <= 0.0 || sxx < 1e-10 * static_cast<double>(data.n())) {
            out.z.push_back(0.0);
            out.singular.push_back(true);
            continue;
        }
        const double sxy = x_res.dot(y_res);
        const double slope = sxy / sxx;
        const double rss = std::max(0.0, yy - slope * sxy);
        double t;
        if (rss <= 1e-14 * std::max(yy, 1e-300)) {
            t = slope == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), slope);
        } else {
            t = slope / std::sqrt(rss / df / sxx);
        }
        out.z.push_back(t_to_z(t, df));
        out.singular.push_back(false);
    }
    return out;
}

struct NewtonState {
    double loglik;
    VectorXd gradient;
    MatrixXd information;  // negative Hessian
};

NewtonState logistic_terms(const MatrixXd& x, const VectorXd& y, const VectorXd& beta) {
    const VectorXd eta = x * beta;
    NewtonState s{0.0, VectorXd::Zero(x.cols()), MatrixXd::Zero(x.cols(), x.cols())};
    VectorXd w(eta.size());
    VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double e = eta[i];
        const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        s.loglik += y[i] * e - log1pexp;
        const double mu = 1.0 / (1.0 + std::exp(-e));
        resid[i] = y[i] - mu;
        w[i] = mu * (1.0 - mu);
    }
    s.gradient = x.transpose() * resid;
    s.information = x.transpose() * w.asDiagonal() * x;
    return s;
}

NewtonState cox_terms(const MatrixXd& x, const Survival& surv, const detail::RiskSets& risk,
                      const VectorXd& beta) {
    const Eigen::Index d = x.cols();
    const VectorXd eta = x * beta;
    const double shift = eta.maxCoeff();
    NewtonState s{0.0, VectorXd::Zero(d), MatrixXd::Zero(d, d)};
    double s0 = 0.0;
    VectorXd s1 = VectorXd::Zero(d);
    MatrixXd s2 = MatrixXd::Zero(d, d);
    std::size_t g = risk.group_start.size();
    for (std::size_t pos = risk.order.size(); pos-- > 0;) {
        const Eigen::Index i = risk.order[pos];
        const double e = std::exp(eta[i] - shift);
        const VectorXd xi = x.row(i).transpose();
        s0 += e;
        s1 += e * xi;
        s2.noalias() += e * xi * xi.transpose();
        if (surv.status[i] > 0) {
            s.loglik += eta[i];
            s.gradient += xi;
        }
        if (static_cast<Eigen::Index>(pos) == risk.group_start[g - 1]) {
            const double dk = risk.events[g - 1];
            if (dk > 0) {
                s.loglik -= dk * (std::log(s0) + shift);
                const VectorXd mean = s1 / s0;
                s.gradient -= dk * mean;
                s.information += dk * (s2 / s0 - mean * mean.transpose());
            }
            --g;
        }
    }
    return s;
}

// Newton-Raphson with step halving; returns the Wald z of the last
// coefficient or nullopt when the fit is singular or diverges.
template <typename Terms>
std::optional<double> newton_wald(const MatrixXd& x, Terms terms) {
    VectorXd beta = VectorXd::Zero(x.cols());
    NewtonState s = terms(beta);
    for (int iter = 0; iter < 50; ++iter) {
        const Eigen::LDLT<MatrixXd> ldlt(s.information);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
        const VectorXd step = ldlt.solve(s.gradient);
        if (!step.allFinite()) return std::nullopt;
        double scale = 1.0;
        NewtonState next = terms(beta + step);
        for (int h = 0; h < 30 && !(next.loglik >= s.loglik - 1e-12 * std::abs(s.loglik)); ++h) {
            scale *= 0.5;
            next = terms(beta + scale * step);
        }
        beta += scale * step;
        s = std::move(next);
        if ((scale * step).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, beta.cwiseAbs().maxCoeff())) {
            const Eigen::LDLT<MatrixXd> final_ldlt(s.information);
            if (final_ldlt.info() != Eigen::Success || !final_ldlt.isPositive()) return std::nullopt;
            const MatrixXd cov = final_ldlt.solve(MatrixXd::Identity(x.cols(), x.cols()));
            const double var = cov(x.cols() - 1, x.cols() - 1);
            if (!(var > 0.0) || !std::isfinite(var)) return std::nullopt;
            const double z = beta[x.cols() - 1] / std::sqrt(var);
            return std::clamp(z, -kZCap, kZCap);
        }
    }
    return std::nullopt;
}

UnivariateResult univariate_glm(const Dataset& data, Family family) {
    const bool intercept = family == Family::Logistic;
    const MatrixXd a = adjuster_matrix(data, intercept);
    MatrixXd design(a.rows(), a.cols() + 1);
    design.leftCols(a.cols()) = a;

    std::optional<detail::RiskSets> risk;
    if (family == Family::Cox) risk.emplace(survival_response(data));

    UnivariateResult out;
    for (std::size_t j = 0; j < data.p(); ++j) {
        if (!data.design().is_penalized(j)) continue;
        design.col(a.cols()) = data.x().col(static_cast<Eigen::Index>(j));
        std::optional<double> z;
        if (family == Family::Logistic) {
            const VectorXd& y = response_values(data);
            z = newton_wald(design, [&](const VectorXd& b) { return logistic_terms(design, y, b); });
        } else {
            const Survival& surv = survival_response(data);
            z = newton_wald(design, [&](const VectorXd& b) { return cox_terms(design, surv, *risk, b); });
        }
        out.features.push_back(j);
        out.z.push_back(z.value_or(0.0));
        out.singular.push_back(!z.has_value());
    }
    return out;
}

}  // namespace

UnivariateResult univariate_z(const Dataset& data, Family family) {
    require_family(data, family);
    return family == Family::Linear ? univariate_linear(data) : univariate_glm(data, family);
}

}  // namespace mfdr
