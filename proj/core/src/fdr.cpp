#include "mfdr/fdr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mfdr/distributions.hpp"

namespace mfdr {

namespace {

const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_normal_pdf(double x, double sd) {
    const double u = x / sd;
    return -0.5 * u * u - std::log(sd) - kLogSqrt2Pi;
}

void check_sample(std::span<const double> z) {
    if (z.size() < 10)
        throw Error(ErrorCode::TooFewStatistics, "need at least 10 statistics, got " + std::to_string(z.size()));
    for (std::size_t i = 0; i < z.size(); ++i)
        if (!std::isfinite(z[i])) throw Error(ErrorCode::NonFinite, "non-finite statistic", i);
}

std::vector<double> default_taus(std::span<const double> z, const MixtureOptions& options) {
    double zmax = 0.0;
    for (double v : z) zmax = std::max(zmax, std::abs(v));
    std::vector<double> taus;
    if (zmax <= 0.0) return taus;
    const double lo = zmax * options.min_fraction;
    for (double tau = lo; tau <= zmax * (1.0 + 1e-12); tau *= options.grid_ratio) taus.push_back(tau);
    return taus;
}

}  // namespace

double MixtureModel::log_density(double z) const {
    double top = log_normal_pdf(z, 1.0) + std::log(pi0);
    std::vector<double> terms;
    terms.reserve(weights.size() + 1);
    terms.push_back(top);
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] <= 0.0) continue;
        const double t = std::log(weights[k]) + log_normal_pdf(z, component_sds[k]);
        terms.push_back(t);
        top = std::max(top, t);
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - top);
    return top + std::log(sum);
}

double MixtureModel::density(double z) const { return std::exp(log_density(z)); }

MixtureModel fit_mixture_em(std::span<const double> z, const MixtureOptions& options) {
    check_sample(z);
    if (!(options.null_weight >= 1.0))
        throw Error(ErrorCode::InvalidArgument, "null_weight must be at least 1");
    const std::vector<double> taus = options.taus ? *options.taus : default_taus(z, options);

    MixtureModel model;
    const std::size_t K = taus.size();
    model.component_sds.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        if (!(taus[k] > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau grid must be positive", k);
        model.component_sds[k] = std::sqrt(1.0 + taus[k] * taus[k]);
    }

    const std::size_t m = z.size();
    const double extra = options.null_weight - 1.0;

    // Log component densities, row-shifted by the row maximum so that
    // likelihood ratios stay finite far in the tails.
    std::vector<double> dens(m * (K + 1));
    std::vector<double> shift(m);
    for (std::size_t i = 0; i < m; ++i) {
        double* row = &dens[i * (K + 1)];
        row[0] = log_normal_pdf(z[i], 1.0);
        for (std::size_t k = 0; k < K; ++k) row[k + 1] = log_normal_pdf(z[i], model.component_sds[k]);
        shift[i] = *std::max_element(row, row + K + 1);
        for (std::size_t k = 0; k <= K; ++k) row[k] = std::exp(row[k] - shift[i]);
    }
    const double shift_total = std::accumulate(shift.begin(), shift.end(), 0.0);

    std::vector<double> pi(K + 1);
    if (K == 0) {
        pi[0] = 1.0;
    } else {
        pi[0] = options.init_pi0;
        for (std::size_t k = 1; k <= K; ++k) pi[k] = (1.0 - options.init_pi0) / static_cast<double>(K);
    }

    std::vector<double> resp_sum(K + 1);
    auto evaluate = [&](bool accumulate) {
        double ll = shift_total;
        std::fill(resp_sum.begin(), resp_sum.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = &dens[i * (K + 1)];
            double f = 0.0;
            for (std::size_t k = 0; k <= K; ++k) f += pi[k] * row[k];
            ll += std::log(f);
            if (accumulate)
                for (std::size_t k = 0; k <= K; ++k) resp_sum[k] += pi[k] * row[k] / f;
        }
        return ll;
    };
    auto penalized = [&](double ll) { return ll + (pi[0] > 0.0 ? extra * std::log(pi[0]) : 0.0); };

    double ll = evaluate(true);
    double obj = penalized(ll);
    model.objective_trace.push_back(obj);
    if (K == 0) {
        model.converged = true;
    } else {
        const double denom = static_cast<double>(m) + extra;
        while (model.iterations < options.max_iter) {
            pi[0] = (resp_sum[0] + extra) / denom;
            for (std::size_t k = 1; k <= K; ++k) pi[k] = resp_sum[k] / denom;
            ++model.iterations;
            const double ll_new = evaluate(true);
            const double obj_new = penalized(ll_new);
            model.objective_trace.push_back(obj_new);
            const double gain = obj_new - obj;
            ll = ll_new;
            obj = obj_new;
            if (gain < options.tol) {
                model.converged = true;
                break;
            }
        }
    }

    model.pi0 = pi[0];
    model.weights.assign(pi.begin() + 1, pi.end());
    model.loglik = ll;
    model.objective = obj;
    return model;
}

double mfdr_mixture(const MixtureModel& model, double z) {
    if (model.pi0 <= 0.0) return 0.0;
    const double log_fdr = std::log(model.pi0) + log_normal_pdf(z, 1.0) - model.log_density(z);
    return std::clamp(std::exp(log_fdr), 0.0, 1.0);
}

double silverman_bandwidth(std::span<const double> sample) {
    const std::size_t m = sample.size();
    if (m < 2) throw Error(ErrorCode::TooFewStatistics, "bandwidth needs at least 2 values");
    const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / static_cast<double>(m);
    double ss = 0.0;
    for (double v : sample) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(m - 1));

    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double prob) {
        const double h = (static_cast<double>(m) - 1.0) * prob;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, m - 1);
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = sd;
    if (!(spread > 0.0)) spread = std::abs(sorted.front()) > 0.0 ? std::abs(sorted.front()) : 1.0;
    return 0.9 * spread * std::pow(static_cast<double>(m), -0.2);
}

DensityEstimate DensityEstimate::fit(std::span<const double> sample, std::optional<double> bandwidth) {
    check_sample(sample);
    DensityEstimate out;
    out.sample_.assign(sample.begin(), sample.end());
    out.bandwidth_ = bandwidth.value_or(silverman_bandwidth(sample));
    if (!(out.bandwidth_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
    return out;
}

double DensityEstimate::log_evaluate(double z) const {
    double top = -std::numeric_limits<double>::infinity();
    for (double zi : sample_) {
        const double u = (z - zi) / bandwidth_;
        top = std::max(top, -0.5 * u * u);
    }
    double sum = 0.0;
    for (double zi : sample_) {
        const double u = (z - zi) / bandwidth_;
        sum += std::exp(-0.5 * u * u - top);
    }
    return top + std::log(sum) - std::log(static_cast<double>(sample_.size()) * bandwidth_) - kLogSqrt2Pi;
}

double DensityEstimate::evaluate(double z) const { return std::exp(log_evaluate(z)); }

double mfdr_density(const DensityEstimate& density, double z) {
    const double log_ratio = log_normal_pdf(z, 1.0) - density.log_evaluate(z);
    return std::min(1.0, std::exp(log_ratio));
}

double mfdr_density(std::span<const double> z_all, double z) {
    return mfdr_density(DensityEstimate::fit(z_all), z);
}

const char* to_string(Estimator estimator) noexcept {
    return estimator == Estimator::Mixture ? "mixture" : "density";
}

const char* to_string(EstimatorTag tag) noexcept {
    switch (tag) {
        case EstimatorTag::Mixture: return "mixture";
        case EstimatorTag::Density: return "density";
        case EstimatorTag::Univariate: return "univariate";
    }
    return "unknown";
}

Estimator parse_estimator(const std::string& name) {
    if (name == "mixture" || name == "ashr") return Estimator::Mixture;
    if (name == "density") return Estimator::Density;
    throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + name + "'");
}

FdrEstimate estimate_fdr(std::span<const double> z, Estimator estimator, const MixtureOptions& options) {
    FdrEstimate out;
    if (estimator == Estimator::Mixture) {
        try {
            MixtureModel model = fit_mixture_em(z, options);
            out.fdr.reserve(z.size());
            for (double v : z) out.fdr.push_back(mfdr_mixture(model, v));
            out.pi0 = model.pi0;
            out.used = Estimator::Mixture;
            out.mixture = std::move(model);
            return out;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::TooFewStatistics || e.code() == ErrorCode::NonFinite) throw;
        }
    }
    DensityEstimate density = DensityEstimate::fit(z);
    out.fdr.reserve(z.size());
    for (double v : z) out.fdr.push_back(mfdr_density(density, v));
    out.pi0 = 1.0;
    out.used = Estimator::Density;
    out.density = std::move(density);
    return out;
}

const FdrRecord* FdrTable::find(std::size_t feature) const {
    for (const auto& r : records)
        if (r.feature == feature) return &r;
    return nullptr;
}

FdrTable FdrTable::sorted() const {
    FdrTable out = *this;
    std::stable_sort(out.records.begin(), out.records.end(), [](const FdrRecord& a, const FdrRecord& b) {
        if (a.mfdr != b.mfdr) return a.mfdr < b.mfdr;
        return a.feature < b.feature;
    });
    return out;
}

std::vector<std::size_t> FdrTable::active_features() const {
    std::vector<std::size_t> out;
    for (const auto& r : records)
        if (r.active) out.push_back(r.feature);
    return out;
}

FdrTable mfdr_table(const Dataset& data, const std::vector<SelectionStat>& stats, Estimator estimator,
                    const MixtureOptions& options) {
    std::vector<double> z;
    z.reserve(stats.size());
    for (const auto& s : stats) z.push_back(s.z);
    const FdrEstimate est = estimate_fdr(z, estimator, options);
    FdrTable table;
    table.pi0_hat = est.pi0;
    if (!stats.empty()) table.lambda = stats.front().lambda;
    const EstimatorTag tag = est.used == Estimator::Mixture ? EstimatorTag::Mixture : EstimatorTag::Density;
    for (std::size_t k = 0; k < stats.size(); ++k)
        table.records.push_back({data.design().names()[stats[k].feature], stats[k].feature, stats[k].z,
                                 est.fdr[k], stats[k].active, tag});
    return table;
}

FdrTable univariate_table(const Dataset& data, const UnivariateResult& result, Estimator estimator,
                          const MixtureOptions& options) {
    const FdrEstimate est = estimate_fdr(result.z, estimator, options);
    FdrTable table;
    table.pi0_hat = est.pi0;
    for (std::size_t k = 0; k < result.features.size(); ++k)
        table.records.push_back({data.design().names()[result.features[k]], result.features[k], result.z[k],
                                 est.fdr[k], false, EstimatorTag::Univariate});
    return table;
}

double aggregate_Fdr(const FdrTable& table, const std::vector<std::size_t>& selected) {
    if (selected.empty()) throw Error(ErrorCode::EmptySelection, "no selected features");
    double sum = 0.0;
    for (std::size_t j : selected) {
        const FdrRecord* r = table.find(j);
        if (!r) throw Error(ErrorCode::InvalidArgument, "feature not present in table", j);
        sum += r->mfdr;
    }
    return sum / static_cast<double>(selected.size());
}

}  // namespace mfdr
