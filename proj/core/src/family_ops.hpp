#pragma once

#include <vector>

#include "mfdr/data.hpp"

namespace mfdr::detail {

// Breslow risk-set bookkeeping for a survival response. Observations are
// visited in ascending time; tied times share one group.
struct RiskSets {
    std::vector<Eigen::Index> order;   // ascending time
    std::vector<std::size_t> group_of;  // group index per sorted position
    std::vector<Eigen::Index> group_start;  // first sorted position of each group
    std::vector<double> events;         // event count per group

    explicit RiskSets(const Survival& response);
    RiskSets() = default;
};

// Quantities of the quadratic approximation at a linear predictor:
// score u = d loglik / d eta, weights w = -d^2 loglik / d eta^2 (diagonal,
// floored), residual = u / w, loss = -loglik / n.
struct WorkingState {
    VectorXd score;
    VectorXd weights;
    VectorXd residual;
    double loss = 0.0;
    bool saturated = false;
};

inline constexpr double kWeightFloor = 1e-8;
inline constexpr double kSeparationCap = 25.0;

class FamilyModel {
public:
    FamilyModel(const Dataset& data, Family family);

    Family family() const noexcept { return family_; }
    bool has_intercept() const noexcept { return family_ != Family::Cox; }

    double loss(const VectorXd& eta) const;
    VectorXd score(const VectorXd& eta) const;
    void working(const VectorXd& eta, WorkingState& state) const;

private:
    Family family_;
    const VectorXd* y_ = nullptr;
    const Survival* surv_ = nullptr;
    RiskSets risk_;
};

double cox_neg_loglik(const Survival& response, const RiskSets& risk, const VectorXd& eta);

}  // namespace mfdr::detail
