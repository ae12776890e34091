#include "mfdr_cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "mfdr/mfdr.hpp"

namespace mfdr::cli {

namespace {

struct DataArgs {
    std::string input;
    std::string family;
    std::string response;
    std::string time;
    std::string status;
    std::vector<std::string> unpenalized;
    std::vector<std::string> exclude;
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
    cmd->add_option("input", d.input, "CSV file with a header row")->required();
    cmd->add_option("--family", d.family, "linear | logistic | cox")->required();
    cmd->add_option("--response", d.response, "response column (linear, logistic)");
    cmd->add_option("--time", d.time, "survival time column (cox)");
    cmd->add_option("--status", d.status, "event indicator column (cox)");
    cmd->add_option("--unpenalized", d.unpenalized, "columns kept unpenalized")->delimiter(',');
    cmd->add_option("--exclude", d.exclude, "columns to ignore")->delimiter(',');
}

struct Loaded {
    Family family;
    Dataset data;
};

Loaded load(const DataArgs& d) {
    const Family family = parse_family(d.family);
    CsvResponseSpec spec;
    spec.response = d.response;
    spec.time = d.time;
    spec.status = d.status;
    spec.unpenalized = d.unpenalized;
    spec.exclude = d.exclude;
    if (family == Family::Cox) {
        if (d.time.empty() || d.status.empty())
            throw Error(ErrorCode::InvalidArgument, "cox needs --time and --status");
    } else if (d.response.empty()) {
        throw Error(ErrorCode::InvalidArgument, "--response is required for " + d.family);
    }
    return {family, load_csv(d.input, spec, family)};
}

// Where a table goes: the --out file, or `out`.
class Sink {
public:
    Sink(io::OutputBatch& batch, const std::string& path, std::ostream& fallback)
        : stream_(path.empty() ? &fallback : &batch.open(path)) {}
    std::ostream& operator*() const { return *stream_; }

private:
    std::ostream* stream_;
};

struct Selection {
    std::optional<double> threshold;
    std::optional<std::size_t> top;
    bool all = false;
};

void add_selection_options(CLI::App* cmd, Selection& s) {
    cmd->add_option("--threshold", s.threshold, "list features with mfdr below this value");
    cmd->add_option("--top", s.top, "list the k features with the lowest mfdr");
    cmd->add_flag("--all", s.all, "list every feature");
}

// Sorted table restricted per the listing options; by default the features
// active in the model (or all, when nothing can be active).
FdrTable listing(const FdrTable& table, const Selection& s, bool default_active) {
    FdrTable sorted = table.sorted();
    FdrTable out = sorted;
    out.records.clear();
    for (const auto& r : sorted.records) {
        if (s.all || (!s.threshold && !s.top && !default_active)) {
            out.records.push_back(r);
            continue;
        }
        if (s.threshold) {
            if (r.mfdr < *s.threshold) out.records.push_back(r);
            continue;
        }
        if (s.top || r.active) out.records.push_back(r);
    }
    if (s.top && !s.all && out.records.size() > *s.top) out.records.resize(*s.top);
    return out;
}

struct LambdaChoice {
    PathFit fit;
    std::size_t index = 0;
    std::optional<CvResult> cv;
};

std::size_t clamp_to_fitted(const PathFit& fit, std::size_t index, std::ostream& err) {
    if (index < fit.fitted) return index;
    err << "warning: selected lambda lies beyond the saturated end of the path; using lambda = "
        << io::format_number(fit.grid[fit.fitted - 1]) << "\n";
    return fit.fitted - 1;
}

LambdaChoice choose_lambda(const Dataset& data, Family family, const std::string& rule, std::size_t folds,
                           std::uint64_t seed, std::size_t length, std::ostream& err) {
    LambdaChoice out;
    if (rule == "cv" || rule == "1se") {
        const LambdaGrid grid = lambda_grid(data, family, length);
        out.fit = fit_path(data, family, grid);
        CvOptions options;
        options.folds = folds;
        options.seed = seed;
        out.cv = cross_validate(data, family, grid, options);
        const auto picked = select_lambda(*out.cv, rule == "cv" ? LambdaRule::CV : LambdaRule::OneSE);
        out.index = clamp_to_fitted(out.fit, picked.second, err);
        return out;
    }
    double value = 0.0;
    try {
        std::size_t used = 0;
        value = std::stod(rule, &used);
        if (used != rule.size()) throw std::invalid_argument(rule);
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "--lambda must be cv, 1se or a positive number");
    }
    if (!(value > 0.0) || !std::isfinite(value))
        throw Error(ErrorCode::InvalidArgument, "--lambda must be positive");
    // Warm-start down the default grid to the requested value.
    const LambdaGrid base = lambda_grid(data, family, length);
    std::vector<double> values;
    for (double v : base.values)
        if (v > value) values.push_back(v);
    values.push_back(value);
    out.fit = fit_path(data, family, explicit_grid(values));
    out.index = values.size() - 1;
    if (out.index >= out.fit.fitted) {
        err << "warning: lambda " << io::format_number(value)
            << " lies beyond the saturated end of the path; the fit there is not converged\n";
    } else if (!out.fit.converged[out.index]) {
        err << "warning: solver did not converge at lambda " << io::format_number(value) << "\n";
    }
    return out;
}

void write_density_export(std::ostream& out, const std::vector<double>& z, const FdrEstimate& est) {
    const DensityEstimate kde = DensityEstimate::fit(z);
    const auto [lo_it, hi_it] = std::minmax_element(z.begin(), z.end());
    const double pad = 3.0 * kde.bandwidth();
    const double lo = std::min(*lo_it - pad, -4.0);
    const double hi = std::max(*hi_it + pad, 4.0);
    constexpr int kPoints = 512;
    std::vector<std::string> header{"z", "density", "null"};
    if (est.mixture) header.insert(header.begin() + 2, "mixture");
    io::write_csv_row(out, header);
    for (int k = 0; k < kPoints; ++k) {
        const double x = lo + (hi - lo) * k / (kPoints - 1);
        std::vector<std::string> row{io::format_number(x), io::format_number(kde.evaluate(x))};
        if (est.mixture) row.push_back(io::format_number(est.mixture->density(x)));
        row.push_back(io::format_number(normal_pdf(x)));
        io::write_csv_row(out, row);
    }
}

std::vector<double> z_values(const std::vector<SelectionStat>& stats) {
    std::vector<double> z;
    for (const auto& s : stats) z.push_back(s.z);
    return z;
}

std::vector<char*> to_argv(std::vector<std::string>& storage) {
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    return argv;
}

}  // namespace

std::string model_fdr_footer(double average) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "model mFdr: %.2f", average);
    return buf;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Lasso paths with feature-level local false discovery rates"};
    app.name("mfdr");
    app.require_subcommand(1);

    DataArgs data_args;
    std::string out_path;
    std::string json_path;
    std::string estimator_name = "mixture";
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    std::size_t length = 100;
    Selection selection;

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit the lasso path");
    add_data_options(fit_cmd, data_args);
    std::string coef_path;
    fit_cmd->add_option("--lambda-length", length, "grid length")->check(CLI::Range(2, 100000));
    fit_cmd->add_option("--out", out_path, "path summary CSV");
    fit_cmd->add_option("--coef-out", coef_path, "coefficients on the raw scale (long CSV)");

    // cv
    auto* cv_cmd = app.add_subcommand("cv", "cross-validate the lasso path");
    add_data_options(cv_cmd, data_args);
    cv_cmd->add_option("--folds", folds, "number of folds")->check(CLI::Range(2, 1000000));
    cv_cmd->add_option("--seed", seed, "fold assignment seed");
    cv_cmd->add_option("--lambda-length", length, "grid length")->check(CLI::Range(2, 100000));
    cv_cmd->add_option("--out", out_path, "CV curve CSV");

    // mfdr
    auto* mfdr_cmd = app.add_subcommand("mfdr", "local mfdr for every feature at one lambda");
    add_data_options(mfdr_cmd, data_args);
    std::string lambda_rule = "cv";
    std::string density_path;
    mfdr_cmd->add_option("--lambda", lambda_rule, "cv | 1se | <value>");
    mfdr_cmd->add_option("--estimator", estimator_name, "mixture | density");
    add_selection_options(mfdr_cmd, selection);
    mfdr_cmd->add_option("--folds", folds, "number of folds")->check(CLI::Range(2, 1000000));
    mfdr_cmd->add_option("--seed", seed, "fold assignment seed");
    mfdr_cmd->add_option("--lambda-length", length, "grid length")->check(CLI::Range(2, 100000));
    mfdr_cmd->add_option("--out", out_path, "table CSV");
    mfdr_cmd->add_option("--json", json_path, "table JSON");
    mfdr_cmd->add_option("--density-export", density_path, "z, density, null curves on a 512-point grid");

    // univariate
    auto* uni_cmd = app.add_subcommand("univariate", "univariate fdr baseline");
    add_data_options(uni_cmd, data_args);
    uni_cmd->add_option("--estimator", estimator_name, "mixture | density");
    add_selection_options(uni_cmd, selection);
    uni_cmd->add_option("--out", out_path, "table CSV");
    uni_cmd->add_option("--json", json_path, "table JSON");

    // path-export
    auto* path_cmd = app.add_subcommand("path-export", "mfdr along the lasso path (long CSV)");
    add_data_options(path_cmd, data_args);
    std::string anchor_path;
    path_cmd->add_option("--estimator", estimator_name, "mixture | density");
    path_cmd->add_option("--lambda-length", length, "grid length")->check(CLI::Range(2, 100000));
    path_cmd->add_option("--out", out_path, "path CSV");
    path_cmd->add_option("--anchor-out", anchor_path, "univariate fdr at the start of the path");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "simulation studies");
    std::string study;
    std::string scenario_name = "violated";
    std::string sim_family = "linear";
    std::string config_path;
    std::string prefix = "sim";
    sim::StudyOptions study_options;
    sim::Theorem1Spec t1;
    sim_cmd->add_option("--study", study, "calibration | power | auc | comparison | all | theorem1")->required();
    auto* scenario_opt = sim_cmd->add_option("--scenario", scenario_name, "met | violated");
    auto* family_opt = sim_cmd->add_option("--family", sim_family, "linear | logistic | cox");
    std::optional<std::size_t> replicates;
    auto* reps_opt = sim_cmd->add_option("--replicates", replicates, "replicates (default 100; 2000 for theorem1)");
    auto* seed_opt = sim_cmd->add_option("--seed", study_options.seed, "study seed");
    auto* thr_opt = sim_cmd->add_option("--threshold", study_options.threshold, "selection threshold");
    auto* folds_opt = sim_cmd->add_option("--folds", study_options.folds, "CV folds");
    auto* threads_opt = sim_cmd->add_option("--threads", study_options.threads, "worker threads (0 = all cores)");
    auto* est_opt = sim_cmd->add_option("--estimator", estimator_name, "mixture | density");
    auto* n_opt = sim_cmd->add_option("--n", t1.n, "theorem1: observations");
    auto* p_opt = sim_cmd->add_option("--p", t1.p, "theorem1: features");
    auto* pi0_opt = sim_cmd->add_option("--pi0", t1.pi0, "theorem1: null proportion");
    auto* sigma_opt = sim_cmd->add_option("--sigma", t1.sigma, "theorem1: noise sd");
    auto* esd_opt = sim_cmd->add_option("--effect-sd", t1.effect_sd, "theorem1: sd of non-null effects");
    auto* lam_opt = sim_cmd->add_option("--lambda", t1.lambda, "theorem1: selection threshold on |c|");
    sim_cmd->add_option("--config", config_path, "key=value file; command-line flags take precedence");
    sim_cmd->add_option("--out", prefix, "output prefix (writes <prefix>.json and <prefix>_*.csv)");

    std::vector<std::string> storage{"mfdr"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv = to_argv(storage);
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        io::OutputBatch batch;

        if (app.got_subcommand(fit_cmd)) {
            const Loaded d = load(data_args);
            const LambdaGrid grid = lambda_grid(d.data, d.family, length);
            const PathFit fit = fit_path(d.data, d.family, grid);
            Sink sink(batch, out_path, out);
            io::write_csv_row(*sink, {"index", "lambda", "df", "loss", "converged"});
            for (std::size_t l = 0; l < fit.size(); ++l)
                io::write_csv_row(*sink, {std::to_string(l), io::format_number(grid[l]), std::to_string(fit.df[l]),
                                          io::format_number(fit.loss[static_cast<Eigen::Index>(l)]),
                                          fit.converged[l] ? "1" : "0"});
            if (!coef_path.empty()) {
                std::ostream& coef = batch.open(coef_path);
                io::write_csv_row(coef, {"lambda", "term", "estimate"});
                for (std::size_t l = 0; l < fit.fitted; ++l) {
                    const RawCoefficients raw = destandardize(
                        fit.beta_at(l), fit.intercepts[static_cast<Eigen::Index>(l)], d.data.design());
                    if (d.family != Family::Cox)
                        io::write_csv_row(coef, {io::format_number(grid[l]), "(Intercept)", io::format_number(raw.intercept)});
                    for (std::size_t j = 0; j < d.data.p(); ++j)
                        io::write_csv_row(coef, {io::format_number(grid[l]), d.data.design().names()[j],
                                                 io::format_number(raw.beta[static_cast<Eigen::Index>(j)])});
                }
            }
            if (fit.fitted < fit.size())
                err << "note: path stopped at saturation after " << fit.fitted << " of " << fit.size()
                    << " grid points\n";
            batch.commit();
            return kExitOk;
        }

        if (app.got_subcommand(cv_cmd)) {
            const Loaded d = load(data_args);
            const LambdaGrid grid = lambda_grid(d.data, d.family, length);
            CvOptions options;
            options.folds = folds;
            options.seed = seed;
            const CvResult cv = cross_validate(d.data, d.family, grid, options);
            Sink sink(batch, out_path, out);
            io::write_cv_csv(*sink, cv);
            batch.commit();
            err << "lambda_cv: " << io::format_number(cv.lambda_cv) << " (index " << cv.index_cv << ")\n"
                << "lambda_1se: " << io::format_number(cv.lambda_1se) << " (index " << cv.index_1se << ")\n";
            return kExitOk;
        }

        if (app.got_subcommand(mfdr_cmd)) {
            const Estimator estimator = parse_estimator(estimator_name);
            const Loaded d = load(data_args);
            const LambdaChoice choice = choose_lambda(d.data, d.family, lambda_rule, folds, seed, length, err);
            const auto stats = selection_stats(d.data, choice.fit, choice.index);
            const std::vector<double> z = z_values(stats);
            const FdrEstimate est = estimate_fdr(z, estimator);
            FdrTable table = mfdr_table(d.data, stats, estimator);
            const FdrTable listed = listing(table, selection, true);

            Sink sink(batch, out_path, out);
            io::write_fdr_csv(*sink, listed);
            if (!json_path.empty()) batch.open(json_path) << io::fdr_json(listed);
            if (!density_path.empty()) write_density_export(batch.open(density_path), z, est);
            batch.commit();

            const auto active = table.active_features();
            std::ostream& summary = out_path.empty() ? err : out;
            summary << "lambda: " << io::format_number(choice.fit.grid[choice.index]) << "\n"
                    << "selected: " << active.size() << "\n";
            if (!active.empty()) out << model_fdr_footer(aggregate_Fdr(table, active)) << "\n";
            return kExitOk;
        }

        if (app.got_subcommand(uni_cmd)) {
            const Estimator estimator = parse_estimator(estimator_name);
            const Loaded d = load(data_args);
            const UnivariateResult uni = univariate_z(d.data, d.family);
            std::size_t singular = 0;
            for (bool s : uni.singular) singular += s ? 1 : 0;
            if (singular > 0) err << "warning: " << singular << " univariate fits failed; z recorded as 0\n";
            const FdrTable listed = listing(univariate_table(d.data, uni, estimator), selection, false);
            Sink sink(batch, out_path, out);
            io::write_fdr_csv(*sink, listed);
            if (!json_path.empty()) batch.open(json_path) << io::fdr_json(listed);
            batch.commit();
            return kExitOk;
        }

        if (app.got_subcommand(path_cmd)) {
            const Estimator estimator = parse_estimator(estimator_name);
            const Loaded d = load(data_args);
            const LambdaGrid grid = lambda_grid(d.data, d.family, length);
            const PathFit fit = fit_path(d.data, d.family, grid);
            Sink sink(batch, out_path, out);
            io::write_csv_row(*sink, {"feature", "lambda", "z", "mfdr", "active"});
            std::size_t written = 0;
            for (std::size_t l = 0; l < fit.fitted; ++l) {
                std::vector<SelectionStat> stats;
                try {
                    stats = selection_stats(d.data, fit, l);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::SaturatedModel && e.code() != ErrorCode::ZeroResidual) throw;
                    break;
                }
                const FdrEstimate est = estimate_fdr(z_values(stats), estimator);
                for (std::size_t k = 0; k < stats.size(); ++k)
                    io::write_csv_row(*sink, {d.data.design().names()[stats[k].feature], io::format_number(grid[l]),
                                              io::format_number(stats[k].z), io::format_number(est.fdr[k]),
                                              stats[k].active ? "1" : "0"});
                ++written;
            }
            if (written < fit.size())
                err << "warning: path export stops at grid point " << written << " of " << fit.size()
                    << " (saturated model)\n";
            if (!anchor_path.empty()) {
                const UnivariateResult uni = univariate_z(d.data, d.family);
                const FdrTable anchor = univariate_table(d.data, uni, estimator);
                std::ostream& a = batch.open(anchor_path);
                io::write_csv_row(a, {"feature", "z", "fdr"});
                for (const auto& r : anchor.records)
                    io::write_csv_row(a, {r.name, io::format_number(r.z), io::format_number(r.mfdr)});
            }
            batch.commit();
            return kExitOk;
        }

        if (app.got_subcommand(sim_cmd)) {
            if (!config_path.empty()) {
                const auto config = sim::read_key_value_file(config_path);
                const std::map<std::string, std::pair<CLI::Option*, std::function<void(const std::string&)>>> keys{
                    {"scenario", {scenario_opt, [&](const std::string& v) { scenario_name = v; }}},
                    {"family", {family_opt, [&](const std::string& v) { sim_family = v; }}},
                    {"replicates", {reps_opt, [&](const std::string& v) { replicates = std::stoull(v); }}},
                    {"seed", {seed_opt, [&](const std::string& v) { study_options.seed = std::stoull(v); }}},
                    {"threshold", {thr_opt, [&](const std::string& v) { study_options.threshold = std::stod(v); }}},
                    {"folds", {folds_opt, [&](const std::string& v) { study_options.folds = std::stoull(v); }}},
                    {"threads", {threads_opt, [&](const std::string& v) { study_options.threads = static_cast<unsigned>(std::stoul(v)); }}},
                    {"estimator", {est_opt, [&](const std::string& v) { estimator_name = v; }}},
                    {"n", {n_opt, [&](const std::string& v) { t1.n = std::stoull(v); }}},
                    {"p", {p_opt, [&](const std::string& v) { t1.p = std::stoull(v); }}},
                    {"pi0", {pi0_opt, [&](const std::string& v) { t1.pi0 = std::stod(v); }}},
                    {"sigma", {sigma_opt, [&](const std::string& v) { t1.sigma = std::stod(v); }}},
                    {"effect_sd", {esd_opt, [&](const std::string& v) { t1.effect_sd = std::stod(v); }}},
                    {"lambda", {lam_opt, [&](const std::string& v) { t1.lambda = std::stod(v); }}},
                };
                for (const auto& [key, value] : config) {
                    const auto it = keys.find(key);
                    if (it == keys.end()) throw Error(ErrorCode::InvalidArgument, "unknown config key: " + key);
                    if (it->second.first->count() > 0) continue;
                    try {
                        it->second.second(value);
                    } catch (const std::logic_error&) {
                        throw Error(ErrorCode::InvalidArgument, "bad value for config key " + key + ": " + value);
                    }
                }
            }

            sim::SimReport report;
            if (study == "theorem1") {
                t1.replicates = replicates.value_or(t1.replicates);
                t1.seed = study_options.seed;
                report.study = study;
                report.replicates = t1.replicates;
                report.seed = t1.seed;
                report.theorem1_spec = t1;
                report.theorem1 = sim::verify_theorem1(t1);
            } else {
                const sim::Scenario scenario = sim::parse_scenario(scenario_name);
                const Family family = parse_family(sim_family);
                study_options.estimator = parse_estimator(estimator_name);
                study_options.replicates = replicates.value_or(study_options.replicates);
                const sim::ScenarioSpec spec = scenario == sim::Scenario::AssumptionsMet
                                                   ? sim::ScenarioSpec::assumptions_met(family)
                                                   : sim::ScenarioSpec::assumptions_violated(family);
                report = sim::run_study(spec, study_options, study);
            }

            batch.open(prefix + ".json") << io::report_json(report);
            if (report.calibration) {
                io::write_calibration_csv(batch.open(prefix + "_calibration.csv"), *report.calibration);
                io::write_calibration_curve_csv(batch.open(prefix + "_calibration_curve.csv"), *report.calibration);
            }
            if (report.power) io::write_power_csv(batch.open(prefix + "_power.csv"), *report.power);
            if (report.auc) io::write_auc_csv(batch.open(prefix + "_auc.csv"), *report.auc);
            if (report.comparison) io::write_comparison_csv(batch.open(prefix + "_comparison.csv"), *report.comparison);
            if (report.theorem1) io::write_theorem1_csv(batch.open(prefix + "_theorem1.csv"), *report.theorem1);
            batch.commit();

            if (report.theorem1)
                out << "avg mfdr of selections: " << io::format_number(report.theorem1->avg_mfdr_selected) << "\n"
                    << "empirical mFdr: " << io::format_number(report.theorem1->empirical_mFdr) << "\n";
            out << "wrote " << prefix << ".json\n";
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.is_input_error() ? kExitUsage : kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}

}  // namespace mfdr::cli
