#include "family_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mfdr::detail {

RiskSets::RiskSets(const Survival& response) {
    const Eigen::Index n = response.time.size();
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return response.time[a] < response.time[b]; });
    group_of.resize(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        if (pos == 0 || response.time[order[pos]] != response.time[order[pos - 1]]) {
            group_start.push_back(static_cast<Eigen::Index>(pos));
            events.push_back(0.0);
        }
        group_of[pos] = group_start.size() - 1;
        events.back() += response.status[order[pos]];
    }
}

namespace {

// Accumulated hazard terms per group: a_g = sum_{h<=g} d_h / R_h,
// b_g = sum_{h<=g} d_h / R_h^2, with R evaluated on exp(eta - shift).
struct CoxSums {
    VectorXd expeta;
    std::vector<double> risk;
    std::vector<double> a;
    std::vector<double> b;
    double shift = 0.0;
};

CoxSums cox_sums(const RiskSets& risk, const VectorXd& eta) {
    CoxSums s;
    s.shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;
    s.expeta = (eta.array() - s.shift).exp();
    const std::size_t groups = risk.group_start.size();
    s.risk.assign(groups, 0.0);
    double suffix = 0.0;
    std::size_t g = groups;
    for (std::size_t pos = risk.order.size(); pos-- > 0;) {
        suffix += s.expeta[risk.order[pos]];
        if (static_cast<Eigen::Index>(pos) == risk.group_start[g - 1]) {
            s.risk[g - 1] = suffix;
            --g;
        }
    }
    s.a.assign(groups, 0.0);
    s.b.assign(groups, 0.0);
    double a = 0.0;
    double b = 0.0;
    for (std::size_t k = 0; k < groups; ++k) {
        if (risk.events[k] > 0) {
            a += risk.events[k] / s.risk[k];
            b += risk.events[k] / (s.risk[k] * s.risk[k]);
        }
        s.a[k] = a;
        s.b[k] = b;
    }
    return s;
}

}  // namespace

double cox_neg_loglik(const Survival& response, const RiskSets& risk, const VectorXd& eta) {
    const CoxSums s = cox_sums(risk, eta);
    double ll = response.status.dot(eta);
    for (std::size_t k = 0; k < risk.events.size(); ++k)
        if (risk.events[k] > 0) ll -= risk.events[k] * (std::log(s.risk[k]) + s.shift);
    return -ll / static_cast<double>(eta.size());
}

FamilyModel::FamilyModel(const Dataset& data, Family family) : family_(family) {
    require_family(data, family);
    if (family == Family::Cox) {
        surv_ = &survival_response(data);
        risk_ = RiskSets(*surv_);
    } else {
        y_ = &response_values(data);
    }
}

double FamilyModel::loss(const VectorXd& eta) const {
    const double n = static_cast<double>(eta.size());
    switch (family_) {
        case Family::Linear:
            return 0.5 * (*y_ - eta).squaredNorm() / n;
        case Family::Logistic: {
            double ll = 0.0;
            for (Eigen::Index i = 0; i < eta.size(); ++i) {
                const double e = eta[i];
                // log(1 + exp(e)) without overflow
                const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
                ll += (*y_)[i] * e - log1pexp;
            }
            return -ll / n;
        }
        case Family::Cox:
            return cox_neg_loglik(*surv_, risk_, eta);
    }
    return 0.0;
}

VectorXd FamilyModel::score(const VectorXd& eta) const {
    WorkingState state;
    working(eta, state);
    return state.score;
}

void FamilyModel::working(const VectorXd& eta, WorkingState& state) const {
    const Eigen::Index n = eta.size();
    state.saturated = false;
    switch (family_) {
        case Family::Linear:
            state.score = *y_ - eta;
            state.weights = VectorXd::Ones(n);
            state.residual = state.score;
            break;
        case Family::Logistic: {
            state.score.resize(n);
            state.weights.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double e = eta[i];
                if (std::abs(e) > kSeparationCap) state.saturated = true;
                const double mu = 1.0 / (1.0 + std::exp(-e));
                state.score[i] = (*y_)[i] - mu;
                state.weights[i] = std::max(mu * (1.0 - mu), kWeightFloor);
            }
            state.residual = state.score.cwiseQuotient(state.weights);
            break;
        }
        case Family::Cox: {
            const CoxSums s = cox_sums(risk_, eta);
            state.score.resize(n);
            state.weights.resize(n);
            for (std::size_t pos = 0; pos < risk_.order.size(); ++pos) {
                const Eigen::Index i = risk_.order[pos];
                const std::size_t g = risk_.group_of[pos];
                const double e = s.expeta[i];
                state.score[i] = surv_->status[i] - e * s.a[g];
                state.weights[i] = std::max(e * s.a[g] - e * e * s.b[g], kWeightFloor);
            }
            state.residual = state.score.cwiseQuotient(state.weights);
            break;
        }
    }
    state.loss = loss(eta);
}

}  // namespace mfdr::detail
