#include "mfdr/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "mfdr/distributions.hpp"
#include "mfdr/kkt_stats.hpp"
#include "mfdr/model_selection.hpp"
#include "mfdr/path_solver.hpp"

namespace mfdr::sim {

namespace {

using Rng = std::mt19937_64;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

MatrixXd draw_design(const ScenarioSpec& spec, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto p = static_cast<Eigen::Index>(spec.p);
    std::normal_distribution<double> norm(0.0, 1.0);
    MatrixXd x(n, p);
    auto fill = [&](Eigen::Index j) {
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = norm(rng);
    };

    if (std::holds_alternative<Independent>(spec.correlation)) {
        for (Eigen::Index j = 0; j < p; ++j) fill(j);
        return x;
    }

    const auto& s = std::get<Structured>(spec.correlation);
    const auto nc = static_cast<Eigen::Index>(s.n_causal);
    const auto per = static_cast<Eigen::Index>(s.per_causal_correlated);
    for (Eigen::Index j = 0; j < nc; ++j) fill(j);
    const double mix = std::sqrt(1.0 - s.rho * s.rho);
    for (Eigen::Index k = 0; k < nc; ++k) {
        for (Eigen::Index m = 0; m < per; ++m) {
            const Eigen::Index j = nc + k * per + m;
            for (Eigen::Index i = 0; i < n; ++i) x(i, j) = s.rho * x(i, k) + mix * norm(rng);
        }
    }
    const Eigen::Index first_noise = nc + nc * per;
    const double innov = std::sqrt(1.0 - s.noise_ar * s.noise_ar);
    for (Eigen::Index j = first_noise; j < p; ++j) {
        if (j == first_noise) {
            fill(j);
            continue;
        }
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = s.noise_ar * x(i, j - 1) + innov * norm(rng);
    }
    return x;
}

// Censoring rate c with mean_i c / (c + h_i) = target, by bisection in log c.
double censoring_hazard(const VectorXd& hazard, double target) {
    auto fraction = [&](double c) { return (c / (c + hazard.array())).mean(); };
    double lo = std::log(hazard.minCoeff()) - 40.0;
    double hi = std::log(hazard.maxCoeff()) + 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (fraction(std::exp(mid)) < target ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

ResponseKind draw_response(const ScenarioSpec& spec, const VectorXd& eta, Rng& rng) {
    const Eigen::Index n = eta.size();
    switch (spec.family) {
        case Family::Linear: {
            std::normal_distribution<double> norm(0.0, spec.sigma);
            VectorXd y(n);
            for (Eigen::Index i = 0; i < n; ++i) y[i] = eta[i] + norm(rng);
            return Continuous{std::move(y)};
        }
        case Family::Logistic: {
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            VectorXd y(n);
            for (Eigen::Index i = 0; i < n; ++i) y[i] = unif(rng) < 1.0 / (1.0 + std::exp(-eta[i])) ? 1.0 : 0.0;
            return Binary{std::move(y)};
        }
        case Family::Cox: {
            const VectorXd hazard = eta.array().exp();
            const double c = spec.censoring_rate > 0.0 ? censoring_hazard(hazard, spec.censoring_rate) : 0.0;
            std::exponential_distribution<double> unit(1.0);
            Survival s{VectorXd(n), VectorXd(n)};
            for (Eigen::Index i = 0; i < n; ++i) {
                const double t = unit(rng) / hazard[i];
                const double cens = c > 0.0 ? unit(rng) / c : std::numeric_limits<double>::infinity();
                s.time[i] = std::max(std::min(t, cens), std::numeric_limits<double>::min());
                s.status[i] = t <= cens ? 1.0 : 0.0;
            }
            return s;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown family");
}

std::vector<double> estimate(const std::vector<double>& z, const StudyOptions& options) {
    return estimate_fdr(z, options.estimator, options.mixture).fdr;
}

std::vector<double> stat_z(const std::vector<SelectionStat>& stats) {
    std::vector<double> z;
    z.reserve(stats.size());
    for (const auto& s : stats) z.push_back(s.z);
    return z;
}

std::size_t class_index(FeatureClass c) {
    return c == FeatureClass::A ? 0 : c == FeatureClass::B ? 1 : 2;
}

void require_replicates(const std::vector<ReplicateResult>& results) {
    if (results.empty()) throw Error(ErrorCode::RequiresReplicates, "study needs at least one replicate");
}

}  // namespace

const char* to_string(Scenario scenario) noexcept {
    return scenario == Scenario::AssumptionsMet ? "met" : "violated";
}

Scenario parse_scenario(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "met" || s == "assumptionsmet" || s == "assumptions_met") return Scenario::AssumptionsMet;
    if (s == "violated" || s == "assumptionsviolated" || s == "assumptions_violated")
        return Scenario::AssumptionsViolated;
    throw Error(ErrorCode::InvalidArgument, "unknown scenario: " + name);
}

const char* to_string(Method method) noexcept {
    switch (method) {
        case Method::Univariate: return "univariate";
        case Method::MfdrOneSE: return "mfdr_1se";
        case Method::MfdrCV: return "mfdr_cv";
    }
    return "?";
}

ScenarioSpec ScenarioSpec::assumptions_met(Family family, std::uint64_t seed) {
    ScenarioSpec s;
    s.name = Scenario::AssumptionsMet;
    s.family = family;
    s.n = 1000;
    s.p = 600;
    s.beta.assign(s.p, 0.0);
    const double b = family == Family::Linear ? 4.0 : 0.15;
    std::fill(s.beta.begin(), s.beta.begin() + 60, b);
    s.correlation = Independent{};
    s.sigma = std::sqrt(static_cast<double>(s.n));
    s.seed = seed;
    return s;
}

ScenarioSpec ScenarioSpec::assumptions_violated(Family family, std::uint64_t seed) {
    ScenarioSpec s;
    s.name = Scenario::AssumptionsViolated;
    s.family = family;
    s.n = 200;
    s.p = 600;
    s.beta.assign(s.p, 0.0);
    std::array<double, 6> causal{};
    switch (family) {
        case Family::Linear: causal = {6, -6, 5, -5, 4, -4}; break;
        case Family::Logistic: causal = {1.1, -1.1, 1.0, -1.0, 0.9, -0.9}; break;
        case Family::Cox: causal = {0.6, -0.6, 0.5, -0.5, 0.4, -0.4}; break;
    }
    std::copy(causal.begin(), causal.end(), s.beta.begin());
    s.correlation = Structured{};
    s.sigma = std::sqrt(static_cast<double>(s.n));
    s.seed = seed;
    return s;
}

void ScenarioSpec::validate() const {
    if (n < 2 || p < 1) throw Error(ErrorCode::InvalidArgument, "scenario needs n >= 2 and p >= 1");
    if (beta.size() != p) throw Error(ErrorCode::DimensionMismatch, "beta length differs from p");
    if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
    if (!(censoring_rate >= 0.0 && censoring_rate < 1.0))
        throw Error(ErrorCode::InvalidArgument, "censoring rate must be in [0, 1)");
    if (const auto* s = std::get_if<Structured>(&correlation)) {
        if (s->n_causal * (1 + s->per_causal_correlated) > p)
            throw Error(ErrorCode::InvalidArgument, "structured blocks exceed p");
        if (!(std::abs(s->rho) <= 1.0) || !(std::abs(s->noise_ar) < 1.0))
            throw Error(ErrorCode::InvalidArgument, "correlation parameters out of range");
    }
}

std::size_t FeatureTruth::count(FeatureClass c) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
}

SimData generate(const ScenarioSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const MatrixXd x = draw_design(spec, rng);
    const VectorXd beta = Eigen::Map<const VectorXd>(spec.beta.data(), static_cast<Eigen::Index>(spec.p));
    const VectorXd eta = x * beta;
    ResponseKind response = draw_response(spec, eta, rng);

    FeatureTruth truth;
    truth.labels.resize(spec.p, FeatureClass::C);
    if (const auto* s = std::get_if<Structured>(&spec.correlation)) {
        for (std::size_t j = 0; j < s->n_causal; ++j) truth.labels[j] = FeatureClass::A;
        for (std::size_t j = s->n_causal; j < s->n_causal * (1 + s->per_causal_correlated); ++j)
            truth.labels[j] = FeatureClass::B;
    } else {
        for (std::size_t j = 0; j < spec.p; ++j)
            if (spec.beta[j] != 0.0) truth.labels[j] = FeatureClass::A;
    }

    StandardizedDesign design = standardize(x, VectorXd::Ones(static_cast<Eigen::Index>(spec.p)));
    return SimData{Dataset(std::move(design), std::move(response)), std::move(truth)};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

ReplicateResult analyze_replicate(const ScenarioSpec& spec, const StudyOptions& options) {
    SimData sim = generate(spec);
    const Dataset& data = sim.data;
    const LambdaGrid grid = lambda_grid(data, spec.family, options.grid_length);
    const PathFit fit = fit_path(data, spec.family, grid);
    CvOptions cv_options;
    cv_options.folds = options.folds;
    cv_options.seed = derive_seed(spec.seed, 1);
    const CvResult cv = cross_validate(data, spec.family, grid, cv_options);

    // CV may pick a point past the saturated end of the full-data path.
    const std::size_t index_cv = std::min(cv.index_cv, fit.fitted - 1);
    const std::size_t index_1se = std::min(cv.index_1se, fit.fitted - 1);

    ReplicateResult out;
    out.truth = std::move(sim.truth);
    out.lambda_cv = grid[index_cv];
    out.lambda_1se = grid[index_1se];
    out.df_cv = fit.df[index_cv];

    const UnivariateResult uni = univariate_z(data, spec.family);
    out.fdr[static_cast<std::size_t>(Method::Univariate)] = estimate(uni.z, options);
    out.fdr[static_cast<std::size_t>(Method::MfdrOneSE)] =
        estimate(stat_z(selection_stats(data, fit, index_1se)), options);
    out.fdr[static_cast<std::size_t>(Method::MfdrCV)] =
        estimate(stat_z(selection_stats(data, fit, index_cv)), options);
    return out;
}

std::vector<ReplicateResult> run_replicates(const ScenarioSpec& spec, const StudyOptions& options) {
    if (options.replicates == 0) throw Error(ErrorCode::RequiresReplicates, "study needs at least one replicate");
    spec.validate();
    std::vector<ReplicateResult> results(options.replicates);

    unsigned threads = options.threads != 0 ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, options.replicates));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= options.replicates) return;
            try {
                ScenarioSpec rep = spec;
                rep.seed = derive_seed(options.seed, r);
                results[r] = analyze_replicate(rep, options);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = options.replicates;
                return;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

std::size_t calibration_bin(double fdr) noexcept {
    if (!(fdr > 0.2)) return 0;
    if (fdr <= 0.4) return 1;
    if (fdr <= 0.6) return 2;
    if (fdr <= 0.8) return 3;
    return 4;
}

CalibrationSection summarize_calibration(const std::vector<ReplicateResult>& results, std::size_t curve_bins) {
    require_replicates(results);
    CalibrationSection out;
    for (std::size_t m = 0; m < kMethodCount; ++m) {
        std::array<std::size_t, kCalibrationBins> noise{};
        std::vector<std::pair<double, bool>> pooled;
        for (const auto& rep : results) {
            const auto& fdr = rep.fdr[m];
            for (std::size_t j = 0; j < fdr.size(); ++j) {
                const bool is_noise = rep.truth.labels[j] == FeatureClass::C;
                const std::size_t b = calibration_bin(fdr[j]);
                ++out.counts[m][b];
                if (is_noise) ++noise[b];
                pooled.emplace_back(fdr[j], is_noise);
            }
        }
        for (std::size_t b = 0; b < kCalibrationBins; ++b)
            if (out.counts[m][b] > 0)
                out.proportion[m][b] = static_cast<double>(noise[b]) / static_cast<double>(out.counts[m][b]);

        if (curve_bins == 0 || pooled.empty()) continue;
        std::stable_sort(pooled.begin(), pooled.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        const std::size_t bins = std::min(curve_bins, pooled.size());
        for (std::size_t k = 0; k < bins; ++k) {
            const std::size_t lo = k * pooled.size() / bins;
            const std::size_t hi = (k + 1) * pooled.size() / bins;
            double sum = 0.0;
            double noise_count = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                sum += pooled[i].first;
                noise_count += pooled[i].second ? 1.0 : 0.0;
            }
            const double len = static_cast<double>(hi - lo);
            out.curve[m].push_back({sum / len, noise_count / len});
        }
    }
    return out;
}

PowerSection summarize_power(const std::vector<ReplicateResult>& results, double threshold) {
    require_replicates(results);
    PowerSection out;
    out.threshold = threshold;
    for (std::size_t m = 0; m < kMethodCount; ++m) {
        std::array<double, 3> totals{};
        for (const auto& rep : results) {
            const auto& fdr = rep.fdr[m];
            for (std::size_t j = 0; j < fdr.size(); ++j)
                if (fdr[j] < threshold) totals[class_index(rep.truth.labels[j])] += 1.0;
        }
        for (std::size_t c = 0; c < 3; ++c) out.mean_selected[m][c] = totals[c] / static_cast<double>(results.size());
    }
    return out;
}

double auc_low_is_positive(const std::vector<double>& positives, const std::vector<double>& negatives) {
    if (positives.empty() || negatives.empty())
        throw Error(ErrorCode::InvalidArgument, "AUC needs positive and negative cases");
    double wins = 0.0;
    for (double a : positives)
        for (double c : negatives) wins += a < c ? 1.0 : a == c ? 0.5 : 0.0;
    return wins / (static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

AucSection summarize_auc(const std::vector<ReplicateResult>& results) {
    require_replicates(results);
    AucSection out;
    for (std::size_t m = 0; m < kMethodCount; ++m) {
        double total = 0.0;
        std::size_t used = 0;
        for (const auto& rep : results) {
            std::vector<double> pos;
            std::vector<double> neg;
            for (std::size_t j = 0; j < rep.fdr[m].size(); ++j) {
                if (rep.truth.labels[j] == FeatureClass::A) pos.push_back(rep.fdr[m][j]);
                if (rep.truth.labels[j] == FeatureClass::C) neg.push_back(rep.fdr[m][j]);
            }
            if (pos.empty() || neg.empty()) continue;
            total += auc_low_is_positive(pos, neg);
            ++used;
        }
        out.auc[m] = used > 0 ? total / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

ComparisonRow summarize_comparison(const std::vector<ReplicateResult>& results, double threshold) {
    const PowerSection power = summarize_power(results, threshold);
    const auto& row = power.mean_selected[static_cast<std::size_t>(Method::MfdrCV)];
    ComparisonRow out{row[0], row[1], row[2], 0.0};
    const double total = row[0] + row[1] + row[2];
    out.noise_rate = total > 0.0 ? row[2] / total : 0.0;
    return out;
}

CalibrationSection run_calibration(const ScenarioSpec& spec, const StudyOptions& options) {
    return summarize_calibration(run_replicates(spec, options));
}

PowerSection run_power(const ScenarioSpec& spec, const StudyOptions& options) {
    return summarize_power(run_replicates(spec, options), options.threshold);
}

AucSection run_auc(const ScenarioSpec& spec, const StudyOptions& options) {
    return summarize_auc(run_replicates(spec, options));
}

ComparisonRow run_comparison_row(const ScenarioSpec& spec, const StudyOptions& options) {
    return summarize_comparison(run_replicates(spec, options), options.threshold);
}

Theorem1Result verify_theorem1(const Theorem1Spec& spec) {
    if (spec.replicates == 0) throw Error(ErrorCode::RequiresReplicates, "study needs at least one replicate");
    if (spec.p == 0 || spec.n < spec.p)
        throw Error(ErrorCode::InvalidArgument, "orthonormal design needs n >= p >= 1");
    if (!(spec.pi0 >= 0.0 && spec.pi0 <= 1.0) || !(spec.sigma > 0.0) || !(spec.effect_sd >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "invalid oracle parameters");

    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto p = static_cast<Eigen::Index>(spec.p);
    const double rn = std::sqrt(static_cast<double>(spec.n));

    Rng rng(spec.seed);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    MatrixXd g(n, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < n; ++i) g(i, j) = norm(rng);
    const Eigen::HouseholderQR<MatrixXd> qr(g);
    const MatrixXd x = (qr.householderQ() * MatrixXd::Identity(n, p)) * rn;

    // z = sqrt(n) c / sigma: N(0, 1) under the null, N(0, 1 + n effect_sd^2 / sigma^2) otherwise.
    const double alt_sd = std::sqrt(1.0 + static_cast<double>(spec.n) * spec.effect_sd * spec.effect_sd /
                                              (spec.sigma * spec.sigma));
    auto oracle = [&](double z) {
        const double null_part = spec.pi0 * normal_pdf(z);
        const double total = null_part + (1.0 - spec.pi0) * normal_pdf(z, alt_sd);
        return total > 0.0 ? null_part / total : 1.0;
    };

    Theorem1Result out;
    double mfdr_sum = 0.0;
    VectorXd beta(p);
    VectorXd y(n);
    std::vector<bool> is_null(spec.p);
    for (std::size_t r = 0; r < spec.replicates; ++r) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const bool null = unif(rng) < spec.pi0;
            is_null[static_cast<std::size_t>(j)] = null;
            beta[j] = null ? 0.0 : spec.effect_sd * norm(rng);
        }
        for (Eigen::Index i = 0; i < n; ++i) y[i] = spec.sigma * norm(rng);
        y += x * beta;
        const VectorXd c = x.transpose() * y / static_cast<double>(spec.n);
        for (Eigen::Index j = 0; j < p; ++j) {
            if (!(std::abs(c[j]) > spec.lambda)) continue;
            ++out.selections;
            if (is_null[static_cast<std::size_t>(j)]) ++out.null_selections;
            mfdr_sum += oracle(c[j] * rn / spec.sigma);
        }
    }
    if (out.selections == 0) throw Error(ErrorCode::NoSelections, "lambda exceeds every |c_j|");
    out.avg_mfdr_selected = mfdr_sum / static_cast<double>(out.selections);
    out.empirical_mFdr = static_cast<double>(out.null_selections) / static_cast<double>(out.selections);
    return out;
}

SimReport run_study(const ScenarioSpec& spec, const StudyOptions& options, const std::string& study) {
    const bool all = study == "all";
    if (!all && study != "calibration" && study != "power" && study != "auc" && study != "comparison")
        throw Error(ErrorCode::InvalidArgument, "unknown study: " + study);
    SimReport report;
    report.study = study;
    report.scenario = spec.name;
    report.family = spec.family;
    report.replicates = options.replicates;
    report.seed = options.seed;
    const auto results = run_replicates(spec, options);
    if (all || study == "calibration") report.calibration = summarize_calibration(results);
    if (all || study == "power") report.power = summarize_power(results, options.threshold);
    if (all || study == "auc") report.auc = summarize_auc(results);
    if (all || study == "comparison") report.comparison = summarize_comparison(results, options.threshold);
    return report;
}

std::map<std::string, std::string> read_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ParseError, "expected key=value in " + path, row, 0);
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

}  // namespace mfdr::sim
