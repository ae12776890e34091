#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "mfdr/io.hpp"
#include "test_support.hpp"

namespace {

using namespace mfdr;

TEST(Csv, Escaping) {
    EXPECT_EQ(io::csv_escape("plain"), "plain");
    EXPECT_EQ(io::csv_escape("a,b"), "\"a,b\"");
    EXPECT_EQ(io::csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(io::csv_escape("line\nbreak"), "\"line\nbreak\"");
    EXPECT_EQ(io::csv_escape(""), "");
    std::ostringstream os;
    io::write_csv_row(os, {"x", "y,z", "1"});
    EXPECT_EQ(os.str(), "x,\"y,z\",1\n");
}

TEST(Csv, Numbers) {
    EXPECT_EQ(io::format_number(0.1), "0.1");
    EXPECT_EQ(io::format_number(1.0 / 3.0), "0.3333333333");
    EXPECT_EQ(io::format_number(std::nan("")), "NA");
    EXPECT_EQ(io::format_number(-INFINITY), "-Inf");
}

FdrTable two_row_table() {
    FdrTable t;
    t.records = {{"g,1", 0, 2.5, 0.01, true, EstimatorTag::Mixture},
                 {"g2", 1, -0.5, 0.39, false, EstimatorTag::Density}};
    t.pi0_hat = 0.9;
    t.lambda = 0.25;
    return t;
}

TEST(FdrOutput, CsvLayout) {
    std::ostringstream os;
    io::write_fdr_csv(os, two_row_table());
    EXPECT_EQ(os.str(), "name,z,mfdr,active,estimator\n\"g,1\",2.5,0.01,1,mixture\ng2,-0.5,0.39,0,density\n");
}

TEST(FdrOutput, JsonKeys) {
    auto j = nlohmann::json::parse(io::fdr_json(two_row_table()));
    EXPECT_DOUBLE_EQ(j["pi0_hat"].get<double>(), 0.9);
    EXPECT_DOUBLE_EQ(j["lambda"].get<double>(), 0.25);
    ASSERT_EQ(j["records"].size(), 2u);
    EXPECT_EQ(j["records"][0]["name"], "g,1");
    EXPECT_EQ(j["records"][1]["active"], false);
    FdrTable none = two_row_table();
    none.lambda.reset();
    EXPECT_TRUE(nlohmann::json::parse(io::fdr_json(none))["lambda"].is_null());
}

TEST(CvOutput, Csv) {
    CvResult cv;
    cv.lambda = {0.5, 0.25};
    cv.cve = {1.0, 0.75};
    cv.cvse = {0.1, 0.125};
    std::ostringstream os;
    io::write_cv_csv(os, cv);
    EXPECT_EQ(os.str(), "lambda,cve,cvse\n0.5,1,0.1\n0.25,0.75,0.125\n");
}

TEST(Report, JsonAndSectionCsv) {
    sim::SimReport r;
    r.study = "power";
    r.scenario = sim::Scenario::AssumptionsViolated;
    r.replicates = 2;
    r.seed = 4;
    sim::PowerSection p;
    p.mean_selected[static_cast<std::size_t>(sim::Method::MfdrCV)] = {3.5, 0.5, 0.25};
    r.power = p;
    sim::CalibrationSection cal;
    cal.proportion[0][4] = 0.9;
    cal.counts[0][4] = 10;
    r.calibration = cal;
    auto j = nlohmann::json::parse(io::report_json(r));
    EXPECT_EQ(j["scenario"], "violated");
    EXPECT_DOUBLE_EQ(j["power"]["mfdr_cv"]["causal"].get<double>(), 3.5);
    EXPECT_TRUE(j["calibration"]["univariate"]["bins"][0]["noise_proportion"].is_null());
    EXPECT_DOUBLE_EQ(j["calibration"]["univariate"]["bins"][4]["noise_proportion"].get<double>(), 0.9);

    std::ostringstream os;
    io::write_power_csv(os, p);
    EXPECT_EQ(os.str(), "method,causal,correlated,noise\nunivariate,0,0,0\nmfdr_1se,0,0,0\nmfdr_cv,3.5,0.5,0.25\n");
    std::ostringstream cs;
    io::write_calibration_csv(cs, cal);
    std::string first_lines = cs.str().substr(0, cs.str().find("univariate,2"));
    EXPECT_EQ(first_lines, "method,bin,lower,upper,count,noise_proportion\nunivariate,1,0,0.2,0,NA\n");
}

TEST(OutputBatch, CommitMovesFilesIntoPlace) {
    fixtures::TempDir dir("io");
    {
        io::OutputBatch batch;
        batch.open(dir.file("a.csv")) << "a\n";
        batch.open(dir.file("b.json")) << "{}\n";
        EXPECT_TRUE(std::filesystem::exists(dir.file("a.csv.tmp")));
        EXPECT_FALSE(std::filesystem::exists(dir.file("a.csv")));
        batch.commit();
    }
    EXPECT_EQ(fixtures::read_file(dir.file("a.csv")), "a\n");
    EXPECT_EQ(fixtures::read_file(dir.file("b.json")), "{}\n");
    EXPECT_FALSE(std::filesystem::exists(dir.file("a.csv.tmp")));
}

TEST(OutputBatch, AbandonedBatchLeavesNothing) {
    fixtures::TempDir dir("io");
    {
        io::OutputBatch batch;
        batch.open(dir.file("a.csv")) << "partial";
    }
    EXPECT_TRUE(std::filesystem::is_empty(dir.path()));
}

TEST(OutputBatch, FailedCommitRemovesEverything) {
    fixtures::TempDir dir("io");
    // a directory in the way of the second rename
    std::filesystem::create_directories(dir.file("b.csv") / "occupied");
    io::OutputBatch batch;
    batch.open(dir.file("a.csv")) << "a\n";
    batch.open(dir.file("b.csv")) << "b\n";
    EXPECT_THROW(batch.commit(), Error);
    EXPECT_FALSE(std::filesystem::exists(dir.file("a.csv")));
    EXPECT_FALSE(std::filesystem::exists(dir.file("a.csv.tmp")));
    EXPECT_FALSE(std::filesystem::exists(dir.file("b.csv.tmp")));
}

TEST(OutputBatch, UnwritableTarget) {
    fixtures::TempDir dir("io");
    io::OutputBatch batch;
    EXPECT_THROW(batch.open(dir.file("missing_dir") / "x.csv"), Error);
}

}  // namespace
