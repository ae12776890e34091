#include "mfdr/io.hpp"

#include <cmath>
#include <cstdio>
#include <system_error>

#include <json.hpp>

namespace mfdr::io {

namespace {

using nlohmann::json;

constexpr std::array<double, sim::kCalibrationBins + 1> kEdges{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

json number(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

json calibration_json(const sim::CalibrationSection& s) {
    json out = json::object();
    for (sim::Method m : sim::kMethods) {
        const auto mi = static_cast<std::size_t>(m);
        json bins = json::array();
        for (std::size_t b = 0; b < sim::kCalibrationBins; ++b) {
            const auto& prop = s.proportion[mi][b];
            bins.push_back({{"lower", kEdges[b]},
                            {"upper", kEdges[b + 1]},
                            {"count", s.counts[mi][b]},
                            {"noise_proportion", prop ? json(*prop) : json(nullptr)}});
        }
        json curve = json::array();
        for (const auto& pt : s.curve[mi])
            curve.push_back({{"mean_fdr", pt.mean_fdr}, {"noise_proportion", pt.noise_proportion}});
        out[sim::to_string(m)] = {{"bins", bins}, {"curve", curve}};
    }
    return out;
}

}  // namespace

std::string format_number(double value) {
    if (std::isnan(value)) return "NA";
    if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out << ',';
        out << csv_escape(fields[i]);
    }
    out << '\n';
}

void write_fdr_csv(std::ostream& out, const FdrTable& table) {
    write_csv_row(out, {"name", "z", "mfdr", "active", "estimator"});
    for (const auto& r : table.records)
        write_csv_row(out, {r.name, format_number(r.z), format_number(r.mfdr), r.active ? "1" : "0",
                            to_string(r.estimator)});
}

std::string fdr_json(const FdrTable& table) {
    json records = json::array();
    for (const auto& r : table.records)
        records.push_back({{"name", r.name},
                           {"feature", r.feature},
                           {"z", number(r.z)},
                           {"mfdr", number(r.mfdr)},
                           {"active", r.active},
                           {"estimator", to_string(r.estimator)}});
    json out = {{"pi0_hat", table.pi0_hat}, {"records", records}};
    out["lambda"] = table.lambda ? json(*table.lambda) : json(nullptr);
    return out.dump(2) + "\n";
}

void write_cv_csv(std::ostream& out, const CvResult& cv) {
    write_csv_row(out, {"lambda", "cve", "cvse"});
    for (std::size_t l = 0; l < cv.lambda.size(); ++l)
        write_csv_row(out, {format_number(cv.lambda[l]), format_number(cv.cve[l]), format_number(cv.cvse[l])});
}

std::string report_json(const sim::SimReport& report) {
    json out = {{"study", report.study},
                {"scenario", sim::to_string(report.scenario)},
                {"family", to_string(report.family)},
                {"replicates", report.replicates},
                {"seed", report.seed}};
    if (report.calibration) out["calibration"] = calibration_json(*report.calibration);
    if (report.power) {
        json p = {{"threshold", report.power->threshold}};
        for (sim::Method m : sim::kMethods) {
            const auto& row = report.power->mean_selected[static_cast<std::size_t>(m)];
            p[sim::to_string(m)] = {{"causal", row[0]}, {"correlated", row[1]}, {"noise", row[2]}};
        }
        out["power"] = p;
    }
    if (report.auc) {
        json a = json::object();
        for (sim::Method m : sim::kMethods) a[sim::to_string(m)] = number(report.auc->auc[static_cast<std::size_t>(m)]);
        out["auc"] = a;
    }
    if (report.comparison) {
        const auto& c = *report.comparison;
        out["comparison"] = {{"method", "mfdr_cv"},
                             {"causal", c.causal},
                             {"correlated", c.correlated},
                             {"noise", c.noise},
                             {"noise_rate", c.noise_rate}};
    }
    if (report.theorem1_spec) {
        const auto& s = *report.theorem1_spec;
        out["theorem1_spec"] = {{"n", s.n},         {"p", s.p},           {"pi0", s.pi0},
                                {"sigma", s.sigma}, {"effect_sd", s.effect_sd}, {"lambda", s.lambda},
                                {"replicates", s.replicates}, {"seed", s.seed}};
    }
    if (report.theorem1) {
        const auto& t = *report.theorem1;
        out["theorem1"] = {{"avg_mfdr_selected", t.avg_mfdr_selected},
                           {"empirical_mFdr", t.empirical_mFdr},
                           {"selections", t.selections},
                           {"null_selections", t.null_selections}};
    }
    return out.dump(2) + "\n";
}

void write_calibration_csv(std::ostream& out, const sim::CalibrationSection& section) {
    write_csv_row(out, {"method", "bin", "lower", "upper", "count", "noise_proportion"});
    for (sim::Method m : sim::kMethods) {
        const auto mi = static_cast<std::size_t>(m);
        for (std::size_t b = 0; b < sim::kCalibrationBins; ++b) {
            const auto& prop = section.proportion[mi][b];
            write_csv_row(out, {sim::to_string(m), std::to_string(b + 1), format_number(kEdges[b]),
                                format_number(kEdges[b + 1]), std::to_string(section.counts[mi][b]),
                                prop ? format_number(*prop) : "NA"});
        }
    }
}

void write_calibration_curve_csv(std::ostream& out, const sim::CalibrationSection& section) {
    write_csv_row(out, {"method", "point", "mean_fdr", "noise_proportion"});
    for (sim::Method m : sim::kMethods) {
        const auto& curve = section.curve[static_cast<std::size_t>(m)];
        for (std::size_t k = 0; k < curve.size(); ++k)
            write_csv_row(out, {sim::to_string(m), std::to_string(k + 1), format_number(curve[k].mean_fdr),
                                format_number(curve[k].noise_proportion)});
    }
}

void write_power_csv(std::ostream& out, const sim::PowerSection& section) {
    write_csv_row(out, {"method", "causal", "correlated", "noise"});
    for (sim::Method m : sim::kMethods) {
        const auto& row = section.mean_selected[static_cast<std::size_t>(m)];
        write_csv_row(out, {sim::to_string(m), format_number(row[0]), format_number(row[1]), format_number(row[2])});
    }
}

void write_auc_csv(std::ostream& out, const sim::AucSection& section) {
    write_csv_row(out, {"method", "auc"});
    for (sim::Method m : sim::kMethods)
        write_csv_row(out, {sim::to_string(m), format_number(section.auc[static_cast<std::size_t>(m)])});
}

void write_comparison_csv(std::ostream& out, const sim::ComparisonRow& row) {
    write_csv_row(out, {"method", "causal", "correlated", "noise", "noise_rate"});
    write_csv_row(out, {"mfdr_cv", format_number(row.causal), format_number(row.correlated),
                        format_number(row.noise), format_number(row.noise_rate)});
}

void write_theorem1_csv(std::ostream& out, const sim::Theorem1Result& result) {
    write_csv_row(out, {"avg_mfdr_selected", "empirical_mFdr", "selections", "null_selections"});
    write_csv_row(out, {format_number(result.avg_mfdr_selected), format_number(result.empirical_mFdr),
                        std::to_string(result.selections), std::to_string(result.null_selections)});
}

OutputBatch::~OutputBatch() {
    if (!done_) discard();
}

std::ostream& OutputBatch::open(const std::filesystem::path& target) {
    Entry e;
    e.target = target;
    e.temp = target;
    e.temp += ".tmp";
    e.stream = std::make_unique<std::ofstream>(e.temp, std::ios::binary | std::ios::trunc);
    if (!*e.stream) throw Error(ErrorCode::IoError, "cannot write " + target.string());
    entries_.push_back(std::move(e));
    return *entries_.back().stream;
}

void OutputBatch::commit() {
    try {
        for (auto& e : entries_) {
            e.stream->flush();
            if (!*e.stream) throw Error(ErrorCode::IoError, "write failed for " + e.target.string());
            e.stream->close();
        }
        for (auto& e : entries_) {
            std::error_code ec;
            std::filesystem::rename(e.temp, e.target, ec);
            if (ec) throw Error(ErrorCode::IoError, "cannot move output into place: " + e.target.string());
            committed_.push_back(e.target);
        }
    } catch (...) {
        discard();
        done_ = true;
        throw;
    }
    done_ = true;
}

void OutputBatch::discard() noexcept {
    std::error_code ec;
    for (auto& e : entries_) {
        if (e.stream && e.stream->is_open()) e.stream->close();
        std::filesystem::remove(e.temp, ec);
    }
    for (const auto& path : committed_) std::filesystem::remove(path, ec);
}

}  // namespace mfdr::io
