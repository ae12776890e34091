#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mfdr/data.hpp"
#include "mfdr/fdr.hpp"

namespace mfdr::sim {

enum class Scenario { AssumptionsMet, AssumptionsViolated };

const char* to_string(Scenario scenario) noexcept;
Scenario parse_scenario(const std::string& name);

struct Independent {};

// Causal block A, correlated block B (bj = rho a + sqrt(1 - rho^2) e, attached
// to causal columns in order), AR(1) noise block C.
struct Structured {
    std::size_t n_causal = 6;
    std::size_t per_causal_correlated = 9;
    double rho = 0.5;
    double noise_ar = 0.8;
};

using Correlation = std::variant<Independent, Structured>;

struct ScenarioSpec {
    Scenario name = Scenario::AssumptionsMet;
    Family family = Family::Linear;
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<double> beta;
    Correlation correlation = Independent{};
    double censoring_rate = 0.1;  // Cox
    double sigma = 1.0;           // linear noise sd
    std::uint64_t seed = 1;

    // n = 1000, p = 600, 60 nonzero coefficients, independent features.
    static ScenarioSpec assumptions_met(Family family, std::uint64_t seed = 1);
    // n = 200, p = 600: 6 causal, 54 correlated, 540 AR(1) noise features.
    static ScenarioSpec assumptions_violated(Family family, std::uint64_t seed = 1);

    void validate() const;
};

enum class FeatureClass : char { A = 'A', B = 'B', C = 'C' };

struct FeatureTruth {
    std::vector<FeatureClass> labels;

    std::size_t count(FeatureClass c) const;
};

struct SimData {
    Dataset data;
    FeatureTruth truth;
};

SimData generate(const ScenarioSpec& spec);

// Per-replicate seeds are derived from the study seed with splitmix64.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class Method { Univariate = 0, MfdrOneSE = 1, MfdrCV = 2 };
inline constexpr std::size_t kMethodCount = 3;
inline constexpr std::array<Method, kMethodCount> kMethods{Method::Univariate, Method::MfdrOneSE,
                                                           Method::MfdrCV};
const char* to_string(Method method) noexcept;

struct ReplicateResult {
    FeatureTruth truth;
    std::array<std::vector<double>, kMethodCount> fdr;  // indexed by Method
    double lambda_cv = 0.0;
    double lambda_1se = 0.0;
    std::size_t df_cv = 0;
};

struct StudyOptions {
    std::size_t replicates = 100;
    std::uint64_t seed = 1;
    double threshold = 0.1;
    std::size_t folds = 10;
    std::size_t grid_length = 100;
    Estimator estimator = Estimator::Mixture;
    MixtureOptions mixture;
    unsigned threads = 0;  // 0 = hardware concurrency
};

// One replicate: generate, fit the path, cross-validate, and estimate fdr
// with the univariate baseline and with mfdr at lambda_1SE and lambda_CV.
ReplicateResult analyze_replicate(const ScenarioSpec& spec, const StudyOptions& options);

// Throws RequiresReplicates for zero replicates. Results are ordered by
// replicate index regardless of threading.
std::vector<ReplicateResult> run_replicates(const ScenarioSpec& spec, const StudyOptions& options);

// Calibration bins (0,0.2], (0.2,0.4], (0.4,0.6], (0.6,0.8], (0.8,1]; an
// estimate of exactly 0 falls in the first bin.
inline constexpr std::size_t kCalibrationBins = 5;
std::size_t calibration_bin(double fdr) noexcept;

struct CurvePoint {
    double mean_fdr = 0.0;
    double noise_proportion = 0.0;
};

struct CalibrationSection {
    // Observed proportion of C features per method and bin; empty bins unset.
    std::array<std::array<std::optional<double>, kCalibrationBins>, kMethodCount> proportion{};
    std::array<std::array<std::size_t, kCalibrationBins>, kMethodCount> counts{};
    // Equal-count quantile bins of the estimated fdr (plot data).
    std::array<std::vector<CurvePoint>, kMethodCount> curve;
};

struct PowerSection {
    double threshold = 0.1;
    // Mean number of A, B, C features with fdr < threshold, per method.
    std::array<std::array<double, 3>, kMethodCount> mean_selected{};
};

struct AucSection {
    std::array<double, kMethodCount> auc{};
};

struct ComparisonRow {
    double causal = 0.0;
    double correlated = 0.0;
    double noise = 0.0;
    double noise_rate = 0.0;  // mean noise selections / mean total selections
};

CalibrationSection summarize_calibration(const std::vector<ReplicateResult>& results,
                                         std::size_t curve_bins = 50);
PowerSection summarize_power(const std::vector<ReplicateResult>& results, double threshold);
AucSection summarize_auc(const std::vector<ReplicateResult>& results);
ComparisonRow summarize_comparison(const std::vector<ReplicateResult>& results, double threshold);

// Area under the ROC curve with low fdr scoring as positive; ties count 1/2.
double auc_low_is_positive(const std::vector<double>& positives, const std::vector<double>& negatives);

CalibrationSection run_calibration(const ScenarioSpec& spec, const StudyOptions& options);
PowerSection run_power(const ScenarioSpec& spec, const StudyOptions& options);
AucSection run_auc(const ScenarioSpec& spec, const StudyOptions& options);
ComparisonRow run_comparison_row(const ScenarioSpec& spec, const StudyOptions& options);

// Orthonormal-design Monte Carlo with known pi0, sigma and a N(0, effect_sd^2)
// alternative. Selected features are those with |c_j| > lambda.
struct Theorem1Spec {
    std::size_t n = 400;
    std::size_t p = 100;
    double pi0 = 0.8;
    double sigma = 1.0;
    double effect_sd = 0.5;
    double lambda = 0.1;
    std::size_t replicates = 2000;
    std::uint64_t seed = 1;
};

struct Theorem1Result {
    double avg_mfdr_selected = 0.0;
    double empirical_mFdr = 0.0;
    std::size_t selections = 0;
    std::size_t null_selections = 0;
};

Theorem1Result verify_theorem1(const Theorem1Spec& spec);

struct SimReport {
    std::string study;
    Scenario scenario = Scenario::AssumptionsMet;
    Family family = Family::Linear;
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
    std::optional<CalibrationSection> calibration;
    std::optional<PowerSection> power;
    std::optional<AucSection> auc;
    std::optional<ComparisonRow> comparison;
    std::optional<Theorem1Spec> theorem1_spec;
    std::optional<Theorem1Result> theorem1;
};

// Runs the replicates once and fills the requested sections.
// study: calibration | power | auc | comparison | all.
SimReport run_study(const ScenarioSpec& spec, const StudyOptions& options, const std::string& study);

// key=value configuration; '#' starts a comment.
std::map<std::string, std::string> read_key_value_file(const std::string& path);

}  // namespace mfdr::sim
