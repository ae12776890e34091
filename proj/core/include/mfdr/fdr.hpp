#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfdr/data.hpp"
#include "mfdr/kkt_stats.hpp"

namespace mfdr {

// ---------------------------------------------------------------------------
// Two-group mixture with zero-mean normal alternatives
//
//   f(z) = pi0 phi(z) + sum_k w_k phi(z; 0, 1 + tau_k^2)
//
// Weights are fit by EM on a fixed tau grid. Every alternative has its mode at
// zero, so the resulting fdr(z) = pi0 phi(z) / f(z) is non-increasing in |z|.
// ---------------------------------------------------------------------------

struct MixtureOptions {
    // Explicit prior standard deviations tau_k. An empty vector gives the
    // null-only model (pi0 = 1). When unset, tau runs geometrically with ratio
    // `grid_ratio` from max|z| * `min_fraction` up to max|z|.
    std::optional<std::vector<double>> taus;
    double grid_ratio = 1.4142135623730951;
    double min_fraction = 0.01;
    // Dirichlet prior weight on pi0 (1 = plain maximum likelihood). Values
    // above 1 bias the fit towards the null, as in adaptive shrinkage.
    double null_weight = 20.0;
    double init_pi0 = 0.9;
    double tol = 1e-8;
    std::size_t max_iter = 5000;
};

struct MixtureModel {
    double pi0 = 1.0;
    std::vector<double> component_sds;  // sqrt(1 + tau_k^2)
    std::vector<double> weights;
    double loglik = 0.0;      // sum_i log f(z_i)
    double objective = 0.0;   // loglik + (null_weight - 1) log pi0
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;  // per EM iteration, starting at the initial weights

    double density(double z) const;
    double log_density(double z) const;
};

MixtureModel fit_mixture_em(std::span<const double> z, const MixtureOptions& options = {});

// pi0 phi(z) / f(z), clamped to [0, 1].
double mfdr_mixture(const MixtureModel& model, double z);

// Gaussian kernel density estimate.
class DensityEstimate {
public:
    // Silverman's rule unless a bandwidth is given. Throws TooFewStatistics
    // for fewer than 10 values.
    static DensityEstimate fit(std::span<const double> sample,
                               std::optional<double> bandwidth = std::nullopt);

    double bandwidth() const noexcept { return bandwidth_; }
    const std::vector<double>& sample() const noexcept { return sample_; }
    double evaluate(double z) const;
    double log_evaluate(double z) const;

private:
    double bandwidth_ = 1.0;
    std::vector<double> sample_;
};

// 0.9 * min(sd, IQR / 1.34) * m^(-1/5), falling back to sd when the IQR is 0.
double silverman_bandwidth(std::span<const double> sample);

// min(1, phi(z) / f_hat(z)).
double mfdr_density(const DensityEstimate& density, double z);
double mfdr_density(std::span<const double> z_all, double z);

enum class Estimator { Mixture, Density };
enum class EstimatorTag { Mixture, Density, Univariate };

const char* to_string(Estimator estimator) noexcept;
const char* to_string(EstimatorTag tag) noexcept;
Estimator parse_estimator(const std::string& name);

struct FdrEstimate {
    std::vector<double> fdr;
    double pi0 = 1.0;
    Estimator used = Estimator::Mixture;
    std::optional<MixtureModel> mixture;
    std::optional<DensityEstimate> density;
};

// Local fdr for every z. The mixture estimator falls back to the density
// estimator when the EM fit fails.
FdrEstimate estimate_fdr(std::span<const double> z, Estimator estimator = Estimator::Mixture,
                         const MixtureOptions& options = {});

// ---------------------------------------------------------------------------
// Univariate baseline: one regression per penalized feature, adjusted for the
// unpenalized columns.
// ---------------------------------------------------------------------------

struct UnivariateResult {
    std::vector<std::size_t> features;
    std::vector<double> z;
    std::vector<bool> singular;  // fit failed; z recorded as 0
};

UnivariateResult univariate_z(const Dataset& data, Family family);

// ---------------------------------------------------------------------------
// Per-feature table
// ---------------------------------------------------------------------------

struct FdrRecord {
    std::string name;
    std::size_t feature = 0;
    double z = 0.0;
    double mfdr = 1.0;
    bool active = false;
    EstimatorTag estimator = EstimatorTag::Mixture;
};

struct FdrTable {
    std::vector<FdrRecord> records;
    double pi0_hat = 1.0;
    std::optional<double> lambda;

    const FdrRecord* find(std::size_t feature) const;
    // Ascending mfdr, ties by feature index.
    FdrTable sorted() const;
    std::vector<std::size_t> active_features() const;
};

FdrTable mfdr_table(const Dataset& data, const std::vector<SelectionStat>& stats,
                    Estimator estimator = Estimator::Mixture, const MixtureOptions& options = {});

FdrTable univariate_table(const Dataset& data, const UnivariateResult& result,
                          Estimator estimator = Estimator::Mixture,
                          const MixtureOptions& options = {});

// Mean mfdr over the selected features: the model-level mFdr estimate.
// Throws EmptySelection, and InvalidArgument for features not in the table.
double aggregate_Fdr(const FdrTable& table, const std::vector<std::size_t>& selected);

}  // namespace mfdr
