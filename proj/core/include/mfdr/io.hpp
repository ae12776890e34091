#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "mfdr/fdr.hpp"
#include "mfdr/model_selection.hpp"
#include "mfdr/sim.hpp"

namespace mfdr::io {

// "%.10g"; non-finite values print as NA / Inf / -Inf.
std::string format_number(double value);

// RFC-4180: fields containing a comma, quote, CR or LF are quoted, with
// embedded quotes doubled. Rows end in "\n".
std::string csv_escape(const std::string& field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

// name,z,mfdr,active,estimator
void write_fdr_csv(std::ostream& out, const FdrTable& table);
std::string fdr_json(const FdrTable& table);

// lambda,cve,cvse
void write_cv_csv(std::ostream& out, const CvResult& cv);

std::string report_json(const sim::SimReport& report);
// method,bin,lower,upper,count,noise_proportion
void write_calibration_csv(std::ostream& out, const sim::CalibrationSection& section);
// method,point,mean_fdr,noise_proportion
void write_calibration_curve_csv(std::ostream& out, const sim::CalibrationSection& section);
// method,causal,correlated,noise
void write_power_csv(std::ostream& out, const sim::PowerSection& section);
// method,auc
void write_auc_csv(std::ostream& out, const sim::AucSection& section);
// method,causal,correlated,noise,noise_rate
void write_comparison_csv(std::ostream& out, const sim::ComparisonRow& row);
// avg_mfdr_selected,empirical_mFdr,selections,null_selections
void write_theorem1_csv(std::ostream& out, const sim::Theorem1Result& result);

// Collects output files in temporaries next to their targets. commit()
// renames them all into place; if anything fails, or the batch is destroyed
// uncommitted, every temporary and already renamed target is removed.
class OutputBatch {
public:
    OutputBatch() = default;
    OutputBatch(const OutputBatch&) = delete;
    OutputBatch& operator=(const OutputBatch&) = delete;
    ~OutputBatch();

    std::ostream& open(const std::filesystem::path& target);
    void commit();

private:
    struct Entry {
        std::filesystem::path target;
        std::filesystem::path temp;
        std::unique_ptr<std::ofstream> stream;
    };
    void discard() noexcept;

    std::vector<Entry> entries_;
    std::vector<std::filesystem::path> committed_;
    bool done_ = false;
};

}  // namespace mfdr::io
