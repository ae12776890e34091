// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fail.
// Criterion numbers on the command line restrict the run (e.g. `acceptance 7 8`).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mfdr/mfdr.hpp"
#include "test_support.hpp"

namespace {

using namespace mfdr;
using mfdr::sim::Method;

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

std::size_t mi(Method m) { return static_cast<std::size_t>(m); }

void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    sim::Theorem1Spec spec;  // n 400, p 100, pi0 0.8, sigma 1, 2000 replicates
    const auto r = sim::verify_theorem1(spec);
    const double gap = std::fabs(r.avg_mfdr_selected - r.empirical_mFdr);
    const double secs = seconds_since(t0);
    report(1, gap < 0.02 && secs < 60.0,
           "avg oracle mfdr " + fmt(r.avg_mfdr_selected) + " vs empirical mFdr " + fmt(r.empirical_mFdr) +
               " (gap " + fmt(gap, 3) + ", " + std::to_string(r.selections) + " selections, " + fmt(secs, 3) + " s)");
}

void criterion2() {
    const auto t0 = std::chrono::steady_clock::now();
    int passed = 0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        std::mt19937_64 rng(sim::derive_seed(2024, rep));
        auto design = fixtures::std_design(fixtures::gaussian_matrix(400, 100, rng));
        std::normal_distribution<double> g;
        VectorXd y(400);
        for (auto& v : y) v = g(rng);
        Dataset data(std::move(design), Continuous{y});
        const auto grid = lambda_grid(data, Family::Linear);
        const auto fit = fit_path(data, Family::Linear, grid);
        CvOptions cvo;
        cvo.seed = rep + 1;
        const auto cv = cross_validate(data, Family::Linear, grid, cvo);
        std::vector<double> z;
        for (const auto& s : selection_stats(data, fit, std::min(cv.index_cv, fit.fitted - 1))) z.push_back(s.z);
        if (fixtures::ks_pvalue_normal(z) >= 0.01) ++passed;
    }
    const double secs = seconds_since(t0);
    report(2, passed >= 95 && secs < 120.0,
           std::to_string(passed) + "/100 replicates pass KS at alpha 0.01 (" + fmt(secs, 3) + " s)");
}

void criterion3(const std::vector<sim::ReplicateResult>& results, double secs) {
    const double reference[sim::kCalibrationBins] = {0.03, 0.25, 0.32, 0.49, 0.91};
    const double upper[sim::kCalibrationBins] = {0.2, 0.4, 0.6, 0.8, 1.0};
    const auto cal = sim::summarize_calibration(results);
    bool ok = secs < 1800.0;
    std::string detail = "observed";
    for (std::size_t b = 0; b < sim::kCalibrationBins; ++b) {
        const auto& prop = cal.proportion[mi(Method::MfdrCV)][b];
        if (!prop) {
            ok = false;
            detail += " NA";
            continue;
        }
        ok = ok && std::fabs(*prop - reference[b]) <= 0.10 && *prop <= upper[b] + 0.10;
        detail += " " + fmt(*prop, 3) + "(n=" + std::to_string(cal.counts[mi(Method::MfdrCV)][b]) + ")";
    }
    detail += " vs reference 0.03 0.25 0.32 0.49 0.91 (" + fmt(secs, 4) + " s)";
    report(3, ok, detail);
}

void criterion4(const std::vector<sim::ReplicateResult>& results) {
    const auto power = sim::summarize_power(results, 0.1);
    const auto& cv = power.mean_selected[mi(Method::MfdrCV)];
    const auto& uni = power.mean_selected[mi(Method::Univariate)];
    const bool a_ok = std::fabs(cv[0] - 3.84) <= 0.5 && cv[0] >= uni[0] - 0.3;
    const bool b_ok = uni[1] >= 10.0 * cv[1];
    report(4, a_ok && b_ok,
           "mfdr_cv A " + fmt(cv[0]) + " B " + fmt(cv[1]) + ", univariate A " + fmt(uni[0]) + " B " + fmt(uni[1]));
}

bool auc_line(const sim::AucSection& auc, double target_cv, double tol_cv, double target_uni,
              std::string& detail) {
    const double a_cv = auc.auc[mi(Method::MfdrCV)];
    const double a_uni = auc.auc[mi(Method::Univariate)];
    detail = "mfdr_cv " + fmt(a_cv) + " (target " + fmt(target_cv) + "), univariate " + fmt(a_uni) + " (target " +
             fmt(target_uni) + ")";
    return std::fabs(a_cv - target_cv) <= tol_cv && a_cv > a_uni && std::fabs(a_uni - target_uni) <= 0.02;
}

void criterion5(const std::vector<sim::ReplicateResult>& met, const std::vector<sim::ReplicateResult>& violated) {
    std::string met_detail, vio_detail;
    const bool met_ok = auc_line(sim::summarize_auc(met), 0.936, 0.02, 0.908, met_detail);
    const bool vio_ok = auc_line(sim::summarize_auc(violated), 0.990, 0.01, 0.966, vio_detail);
    report(5, met_ok && vio_ok, "met: " + met_detail + "; violated: " + vio_detail);
}

void criterion6(const std::vector<sim::ReplicateResult>& results) {
    const auto row = sim::summarize_comparison(results, 0.1);
    report(6, row.noise_rate <= 0.10 && std::fabs(row.causal - 3.84) <= 0.5,
           "noise rate " + fmt(row.noise_rate, 3) + ", causal " + fmt(row.causal) + ", correlated " +
               fmt(row.correlated) + ", noise " + fmt(row.noise));
}

void criterion7() {
    std::size_t points = 0, violations = 0;
    for (Family family : {Family::Linear, Family::Logistic, Family::Cox}) {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            // alternate p < n and p > n
            const std::size_t p = seed % 2 == 0 ? 40 : 150;
            const auto data = fixtures::random_dataset(family, 100, p, 700 + seed);
            const auto grid = lambda_grid(data, family);
            const auto fit = fit_path(data, family, grid);
            for (std::size_t l = 0; l < fit.size(); ++l) {
                if (!fit.converged[l]) continue;
                ++points;
                violations += kkt_check(data, fit, l, 1e-6).violations.size();
            }
        }
    }
    report(7, violations == 0 && points > 0,
           std::to_string(violations) + " violations over " + std::to_string(points) + " converged grid points");
}

void criterion8() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto data = fixtures::random_linear(10, 5, 900 + seed, 2, 1.0, 0.7);
        const auto grid = lambda_grid(data, Family::Linear, 5);
        SolverOptions opts;
        opts.stop_at_saturation = false;
        const auto fit = fit_path(data, Family::Linear, grid, opts);
        for (std::size_t l = 0; l < grid.size(); ++l) {
            const VectorXd oracle = fixtures::ista_linear(data, grid[l]);
            const double ybar = response_values(data).mean();
            const double q_fit = objective(data, Family::Linear, fit.beta_at(l), fit.intercepts[l], grid[l]);
            const double q_ref = objective(data, Family::Linear, oracle, ybar, grid[l]);
            worst = std::max(worst, std::fabs(q_fit - q_ref));
        }
    }
    report(8, worst <= 1e-8, "max |objective - oracle objective| = " + fmt(worst, 3) + " over 10 instances x 5 lambdas");
}

void criterion9() {
    std::size_t trace_breaks = 0, monotone_breaks = 0, checked_models = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u;
        std::normal_distribution<double> g;
        const std::size_t m = 100 + static_cast<std::size_t>(900 * u(rng));
        const double frac = 0.5 * u(rng);
        const double alt_sd = 1.5 + 5.0 * u(rng);
        std::vector<double> z(m);
        for (auto& v : z) v = u(rng) < frac ? alt_sd * g(rng) : g(rng);
        // plain maximum likelihood and the default null-biased fit
        for (double weight : {1.0, MixtureOptions{}.null_weight}) {
            MixtureOptions opt;
            opt.null_weight = weight;
            const auto model = fit_mixture_em(z, opt);
            ++checked_models;
            for (std::size_t k = 1; k < model.objective_trace.size(); ++k)
                if (model.objective_trace[k] < model.objective_trace[k - 1] - 1e-9 * std::fabs(model.objective_trace[k - 1]))
                    ++trace_breaks;
            double prev = mfdr_mixture(model, 0.0);
            for (int s = 1; s <= 400; ++s) {
                const double cur = mfdr_mixture(model, 0.025 * s);
                if (cur > prev + 1e-12) ++monotone_breaks;
                prev = cur;
            }
        }
    }
    double min_pi0 = 1.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(5000 + seed);
        std::normal_distribution<double> g;
        std::vector<double> z(1000);
        for (auto& v : z) v = g(rng);
        min_pi0 = std::min(min_pi0, fit_mixture_em(z).pi0);
    }
    report(9, trace_breaks == 0 && monotone_breaks == 0 && min_pi0 >= 0.95,
           std::to_string(trace_breaks) + " EM decreases, " + std::to_string(monotone_breaks) +
               " fdr monotonicity breaks over " + std::to_string(checked_models) + " models; min pure-null pi0 " +
               fmt(min_pi0));
}

void criterion10() {
    double worst = 0.0;
    std::size_t compared = 0;
    for (Family family : {Family::Linear, Family::Logistic, Family::Cox}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto data = fixtures::random_dataset(family, 80, 20, 300 + seed);
            const auto grid = lambda_grid(data, family, 20);
            const auto fit = fit_path(data, family, grid);
            for (std::size_t l = 0; l < fit.fitted; l += 3) {
                const auto stats = selection_stats(data, fit, l);
                const auto oracle = fixtures::partial_residual_c(data, family, fit.beta_at(l), fit.intercepts[l]);
                for (const auto& s : stats) {
                    worst = std::max(worst, std::fabs(s.c - oracle[s.feature]));
                    ++compared;
                }
            }
        }
    }
    report(10, worst <= 1e-8, "max |c - partial residual c| = " + fmt(worst, 3) + " over " +
                                  std::to_string(compared) + " statistics, three families");
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<bool> want(11, argc == 1);
    for (int a = 1; a < argc; ++a) {
        const int id = std::atoi(argv[a]);
        if (id >= 1 && id <= 10) want[id] = true;
    }

    if (want[1]) criterion1();
    if (want[2]) criterion2();

    std::vector<sim::ReplicateResult> violated, met;
    double violated_secs = 0.0;
    sim::StudyOptions opts;
    opts.replicates = 100;
    opts.seed = 1;
    if (want[3] || want[4] || want[5] || want[6]) {
        const auto t0 = std::chrono::steady_clock::now();
        violated = sim::run_replicates(sim::ScenarioSpec::assumptions_violated(Family::Linear), opts);
        violated_secs = seconds_since(t0);
    }
    if (want[3]) criterion3(violated, violated_secs);
    if (want[4]) criterion4(violated);
    if (want[5]) {
        met = sim::run_replicates(sim::ScenarioSpec::assumptions_met(Family::Linear), opts);
        criterion5(met, violated);
    }
    if (want[6]) criterion6(violated);

    if (want[7]) criterion7();
    if (want[8]) criterion8();
    if (want[9]) criterion9();
    if (want[10]) criterion10();

    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
