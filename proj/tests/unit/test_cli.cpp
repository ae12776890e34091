#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "mfdr_cli.hpp"
#include "test_support.hpp"

namespace {

using namespace mfdr;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string data_file(const std::string& name) { return std::string(MFDR_TEST_DATA_DIR) + "/" + name; }

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(fixtures::read_file(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream f(path);
    f.precision(17);
    f << "y";
    for (const auto& name : data.design().names()) f << "," << name;
    f << "\n";
    const VectorXd& y = response_values(data);
    for (Eigen::Index i = 0; i < data.x().rows(); ++i) {
        f << y[i];
        for (Eigen::Index j = 0; j < data.x().cols(); ++j) f << "," << data.x()(i, j);
        f << "\n";
    }
}

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t k = i;
        while (k + 1 < idx.size() && v[idx[k + 1]] == v[idx[i]]) ++k;
        for (std::size_t m = i; m <= k; ++m) r[idx[m]] = 0.5 * (i + k) + 1.0;
        i = k + 1;
    }
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

TEST(CliExit, HelpIsSuccess) {
    auto r = run_cli({"--help"});
    EXPECT_EQ(r.code, cli::kExitOk);
    EXPECT_NE(r.out.find("mfdr"), std::string::npos);
}

TEST(CliExit, UsageErrors) {
    const std::string csv = data_file("golden.csv");
    EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"mfdr", csv, "--response", "y"}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"mfdr", csv, "--family", "linear", "--response", "y", "--bogus"}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"mfdr", csv, "--family", "poisson", "--response", "y"}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"mfdr", csv, "--family", "linear", "--response", "y", "--lambda", "-1"}).code,
              cli::kExitUsage);
    EXPECT_EQ(run_cli({"mfdr", csv, "--family", "linear", "--response", "nope"}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"mfdr", data_file("missing.csv"), "--family", "linear", "--response", "y"}).code,
              cli::kExitUsage);
    auto r = run_cli({"simulate", "--study", "power", "--scenario", "sideways"});
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(CliExit, NumericalFailure) {
    // two statistics cannot support an fdr estimate
    auto r = run_cli({"mfdr", data_file("golden_small.csv"), "--family", "linear", "--response", "y", "--lambda",
                      "10", "--estimator", "density"});
    EXPECT_EQ(r.code, cli::kExitNumerical);
    EXPECT_NE(r.err.find("TooFewStatistics"), std::string::npos);
}

TEST(CliMfdr, Footer) {
    EXPECT_EQ(cli::model_fdr_footer(0.20), "model mFdr: 0.20");
    FdrTable t;
    t.records = {{"a", 0, 3.0, 0.01, true, EstimatorTag::Mixture}, {"b", 1, 2.0, 0.39, true, EstimatorTag::Mixture}};
    EXPECT_EQ(cli::model_fdr_footer(aggregate_Fdr(t, t.active_features())), "model mFdr: 0.20");
}

TEST(CliMfdr, GoldenTable) {
    fixtures::TempDir dir("cli");
    auto r = run_cli({"mfdr", data_file("golden.csv"), "--family", "linear", "--response", "y", "--lambda", "cv",
                      "--folds", "5", "--seed", "7", "--all", "--out", dir.file("t.csv").string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(fixtures::read_file(dir.file("t.csv")), fixtures::read_file(data_file("golden_mfdr_expected.csv")));
    EXPECT_NE(r.out.find("model mFdr: "), std::string::npos);
}

TEST(CliMfdr, TwoFeatureZByHand) {
    CsvResponseSpec spec;
    spec.response = "y";
    Dataset data = load_csv(data_file("golden_small.csv"), spec, Family::Linear);
    auto fit = fit_path(data, Family::Linear, lambda_grid(data, Family::Linear, 5));
    auto stats = selection_stats(data, fit, 0);
    ASSERT_EQ(stats.size(), 2u);
    EXPECT_NEAR(stats[0].z, 3.190220342397765, 1e-10);
    EXPECT_NEAR(stats[1].z, 1.8879829985031293, 1e-10);
}

TEST(CliMfdr, PureNoiseOneSeSelectsNothing) {
    fixtures::TempDir dir("cli");
    write_dataset_csv(dir.file("noise.csv"), fixtures::random_linear(100, 30, 3, 0));
    auto r = run_cli({"mfdr", dir.file("noise.csv").string(), "--family", "linear", "--response", "y", "--lambda",
                      "1se", "--seed", "2", "--out", dir.file("t.csv").string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(fixtures::read_file(dir.file("t.csv")), "name,z,mfdr,active,estimator\n");
    EXPECT_NE(r.out.find("selected: 0"), std::string::npos);
    EXPECT_EQ(r.out.find("model mFdr"), std::string::npos);
}

TEST(CliMfdr, ListingOptions) {
    const std::vector<std::string> base{"mfdr", data_file("golden.csv"), "--family", "linear", "--response", "y",
                                        "--lambda", "cv", "--folds", "5", "--seed", "7"};
    auto with = [&](std::vector<std::string> extra) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        auto r = run_cli(args);
        EXPECT_EQ(r.code, cli::kExitOk);
        return r.out.substr(0, r.out.find("model mFdr"));
    };
    auto count_rows = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n') - 1; };
    EXPECT_EQ(count_rows(with({"--top", "2"})), 2);
    EXPECT_EQ(count_rows(with({"--threshold", "0.5"})), 3);
    EXPECT_EQ(count_rows(with({})), 7);
    EXPECT_EQ(count_rows(with({"--all"})), 12);
}

TEST(CliPathExport, ShapeAndMarginalAnchor) {
    fixtures::TempDir dir("cli");
    const std::size_t length = 10;
    auto r = run_cli({"path-export", data_file("golden.csv"), "--family", "linear", "--response", "y",
                      "--lambda-length", std::to_string(length), "--out", dir.file("p.csv").string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_TRUE(r.err.empty()) << r.err;
    auto rows = read_rows(dir.file("p.csv"));
    ASSERT_EQ(rows.size(), 12 * length + 1);

    CsvResponseSpec spec;
    spec.response = "y";
    Dataset data = load_csv(data_file("golden.csv"), spec, Family::Linear);
    const VectorXd& y = response_values(data);
    const double n = static_cast<double>(y.size());
    VectorXd centered = y.array() - y.mean();
    const double sigma = std::sqrt(centered.squaredNorm() / (n - 1.0));
    std::map<std::string, double> marginal;
    for (Eigen::Index j = 0; j < data.x().cols(); ++j)
        marginal[data.design().names()[j]] = data.x().col(j).dot(centered) / n / (sigma / std::sqrt(n));
    const std::string first_lambda = rows[1][1];
    std::size_t seen = 0;
    for (std::size_t i = 1; i < rows.size() && rows[i][1] == first_lambda; ++i, ++seen) {
        EXPECT_NEAR(std::stod(rows[i][2]), marginal.at(rows[i][0]), 1e-8);
        EXPECT_EQ(rows[i][4], "0");
    }
    EXPECT_EQ(seen, 12u);
}

TEST(CliPathExport, AgreesWithUnivariateAtStart) {
    fixtures::TempDir dir("cli");
    auto sim = sim::generate(sim::ScenarioSpec::assumptions_met(Family::Linear, 5));
    write_dataset_csv(dir.file("met.csv"), sim.data);
    auto r = run_cli({"path-export", dir.file("met.csv").string(), "--family", "linear", "--response", "y",
                      "--lambda-length", "2", "--out", dir.file("p.csv").string(), "--anchor-out",
                      dir.file("a.csv").string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    auto path = read_rows(dir.file("p.csv"));
    auto anchor = read_rows(dir.file("a.csv"));
    std::map<std::string, double> at_start;
    for (std::size_t i = 1; i < path.size() && path[i][1] == path[1][1]; ++i) at_start[path[i][0]] = std::stod(path[i][3]);
    std::vector<double> a, b;
    for (std::size_t i = 1; i < anchor.size(); ++i) {
        a.push_back(at_start.at(anchor[i][0]));
        b.push_back(std::stod(anchor[i][2]));
    }
    ASSERT_EQ(a.size(), 600u);
    EXPECT_GE(spearman(a, b), 0.99);
}

TEST(CliSimulate, TheoremAllNull) {
    fixtures::TempDir dir("cli");
    auto r = run_cli({"simulate", "--study", "theorem1", "--pi0", "1", "--replicates", "20", "--out",
                      (dir.path() / "t1").string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_NE(r.out.find("avg mfdr of selections: 1\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("empirical mFdr: 1\n"), std::string::npos) << r.out;
    EXPECT_TRUE(std::filesystem::exists(dir.file("t1.json")));
    EXPECT_TRUE(std::filesystem::exists(dir.file("t1_theorem1.csv")));
}

TEST(CliSimulate, RepeatIsIdentical) {
    fixtures::TempDir dir("cli");
    dir.write("sim.cfg", "pi0 = 0.8\nreplicates = 30\nseed = 9\n");
    for (const char* tag : {"a", "b"})
        ASSERT_EQ(run_cli({"simulate", "--study", "theorem1", "--config", dir.file("sim.cfg").string(), "--out",
                           (dir.path() / tag).string()})
                      .code,
                  cli::kExitOk);
    EXPECT_EQ(fixtures::read_file(dir.file("a.json")), fixtures::read_file(dir.file("b.json")));
    EXPECT_EQ(fixtures::read_file(dir.file("a_theorem1.csv")), fixtures::read_file(dir.file("b_theorem1.csv")));

    for (const char* tag : {"c.csv", "d.csv"})
        ASSERT_EQ(run_cli({"mfdr", data_file("golden.csv"), "--family", "linear", "--response", "y", "--folds", "5",
                           "--all", "--out", dir.file(tag).string()})
                      .code,
                  cli::kExitOk);
    EXPECT_EQ(fixtures::read_file(dir.file("c.csv")), fixtures::read_file(dir.file("d.csv")));
}

TEST(CliSimulate, FlagsOverrideConfig) {
    fixtures::TempDir dir("cli");
    dir.write("sim.cfg", "pi0 = 0.5\nreplicates = 10\n");
    auto r = run_cli({"simulate", "--study", "theorem1", "--config", dir.file("sim.cfg").string(), "--pi0", "1",
                      "--out", (dir.path() / "o").string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_NE(r.out.find("empirical mFdr: 1\n"), std::string::npos);
    dir.write("bad.cfg", "colour = blue\n");
    EXPECT_EQ(run_cli({"simulate", "--study", "theorem1", "--config", dir.file("bad.cfg").string()}).code,
              cli::kExitUsage);
}

TEST(CliOutputs, NothingLeftBehindOnFailure) {
    fixtures::TempDir dir("cli");
    // the JSON target directory does not exist, so the batch cannot complete
    auto r = run_cli({"mfdr", data_file("golden.csv"), "--family", "linear", "--response", "y", "--folds", "5",
                      "--out", dir.file("t.csv").string(), "--json", (dir.path() / "no" / "t.json").string()});
    EXPECT_NE(r.code, cli::kExitOk);
    EXPECT_TRUE(std::filesystem::is_empty(dir.path()));

    // a directory sitting where the second output should go makes the commit fail
    std::filesystem::create_directories(dir.file("s_theorem1.csv") / "x");
    r = run_cli({"simulate", "--study", "theorem1", "--replicates", "5", "--out", (dir.path() / "s").string()});
    EXPECT_NE(r.code, cli::kExitOk);
    EXPECT_FALSE(std::filesystem::exists(dir.file("s.json")));
    EXPECT_FALSE(std::filesystem::exists(dir.file("s.json.tmp")));
}

TEST(CliFit, PathSummaryAndCoefficients) {
    fixtures::TempDir dir("cli");
    auto r = run_cli({"fit", data_file("golden.csv"), "--family", "linear", "--response", "y", "--lambda-length", "5",
                      "--coef-out", dir.file("coef.csv").string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    auto summary = r.out;
    EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 6);
    auto coef = read_rows(dir.file("coef.csv"));
    EXPECT_EQ(coef.size(), 1 + 5 * 13u);
    // empty model: intercept is the mean response, slopes zero
    CsvResponseSpec spec;
    spec.response = "y";
    Dataset data = load_csv(data_file("golden.csv"), spec, Family::Linear);
    EXPECT_EQ(coef[1][1], "(Intercept)");
    EXPECT_NEAR(std::stod(coef[1][2]), response_values(data).mean(), 1e-8);
    EXPECT_EQ(coef[2][2], "0");
}

TEST(CliCv, CurveAndSummary) {
    auto r = run_cli({"cv", data_file("golden.csv"), "--family", "linear", "--response", "y", "--folds", "4",
                      "--lambda-length", "8"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 9);
    EXPECT_NE(r.err.find("lambda_cv: "), std::string::npos);
    EXPECT_NE(r.err.find("lambda_1se: "), std::string::npos);
}

}  // namespace
