#include "mfdr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "csv_reader.hpp"

namespace mfdr {

const char* to_string(Family family) noexcept {
    switch (family) {
        case Family::Linear: return "linear";
        case Family::Logistic: return "logistic";
        case Family::Cox: return "cox";
    }
    return "unknown";
}

Family parse_family(const std::string& name) {
    if (name == "linear" || name == "gaussian") return Family::Linear;
    if (name == "logistic" || name == "binomial") return Family::Logistic;
    if (name == "cox") return Family::Cox;
    throw Error(ErrorCode::InvalidArgument, "unknown family '" + name + "'");
}

namespace {

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

void validate_response(const ResponseKind& response) {
    std::visit(
        [](const auto& r) {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, Continuous>) {
                if (!r.values.allFinite())
                    throw Error(ErrorCode::InvalidResponse, "non-finite response value");
            } else if constexpr (std::is_same_v<T, Binary>) {
                for (Eigen::Index i = 0; i < r.values.size(); ++i)
                    if (!is_binary(r.values[i]))
                        throw Error(ErrorCode::InvalidResponse, "binary response must be 0 or 1",
                                    static_cast<std::size_t>(i));
            } else {
                if (r.time.size() != r.status.size())
                    throw Error(ErrorCode::DimensionMismatch, "time and status lengths differ");
                for (Eigen::Index i = 0; i < r.time.size(); ++i) {
                    if (!(r.time[i] > 0.0) || !std::isfinite(r.time[i]))
                        throw Error(ErrorCode::InvalidResponse, "survival time must be positive",
                                    static_cast<std::size_t>(i));
                    if (!is_binary(r.status[i]))
                        throw Error(ErrorCode::InvalidResponse, "status must be 0 or 1",
                                    static_cast<std::size_t>(i));
                }
            }
        },
        response);
}

std::size_t response_length(const ResponseKind& response) {
    return std::visit(
        [](const auto& r) -> std::size_t {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, Survival>)
                return static_cast<std::size_t>(r.time.size());
            else
                return static_cast<std::size_t>(r.values.size());
        },
        response);
}

Family natural_family(const ResponseKind& response) {
    switch (response.index()) {
        case 0: return Family::Linear;
        case 1: return Family::Logistic;
        default: return Family::Cox;
    }
}

std::size_t StandardizedDesign::unpenalized_count() const noexcept {
    return static_cast<std::size_t>((penalty_factor_.array() == 0.0).count());
}

MatrixXd StandardizedDesign::reconstruct() const {
    MatrixXd raw = x_ * col_scales_.asDiagonal();
    raw.rowwise() += col_means_.transpose();
    return raw;
}

StandardizedDesign standardize(const MatrixXd& raw, const VectorXd& penalty_factor,
                               std::vector<std::string> names) {
    const Eigen::Index n = raw.rows();
    const Eigen::Index p = raw.cols();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "standardize requires n >= 2");
    if (penalty_factor.size() != p)
        throw Error(ErrorCode::DimensionMismatch, "penalty factor length does not match columns");
    if (!names.empty() && static_cast<Eigen::Index>(names.size()) != p)
        throw Error(ErrorCode::DimensionMismatch, "feature names do not match columns");
    if (!raw.allFinite()) throw Error(ErrorCode::NonFinite, "design contains non-finite values");
    for (Eigen::Index j = 0; j < p; ++j)
        if (penalty_factor[j] != 0.0 && penalty_factor[j] != 1.0)
            throw Error(ErrorCode::InvalidArgument, "penalty factor entries must be 0 or 1",
                        static_cast<std::size_t>(j));

    StandardizedDesign out;
    out.x_.resize(n, p);
    out.col_means_.resize(p);
    out.col_scales_.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mean = raw.col(j).mean();
        const double ss = (raw.col(j).array() - mean).square().sum();
        const double scale = std::sqrt(ss / static_cast<double>(n));
        if (!(scale > 1e-12 * std::max(1.0, std::abs(mean))))
            throw Error(ErrorCode::ConstantColumn, "column " + std::to_string(j) + " is constant",
                        static_cast<std::size_t>(j));
        out.col_means_[j] = mean;
        out.col_scales_[j] = scale;
        out.x_.col(j) = (raw.col(j).array() - mean) / scale;
    }
    if (names.empty()) {
        names.reserve(static_cast<std::size_t>(p));
        for (Eigen::Index j = 0; j < p; ++j) names.push_back("V" + std::to_string(j + 1));
    }
    out.names_ = std::move(names);
    out.penalty_factor_ = penalty_factor;
    return out;
}

RawCoefficients destandardize(const VectorXd& beta_std, double intercept_std,
                              const StandardizedDesign& design) {
    if (static_cast<std::size_t>(beta_std.size()) != design.cols())
        throw Error(ErrorCode::DimensionMismatch, "coefficient length does not match design");
    RawCoefficients out;
    out.beta = beta_std.cwiseQuotient(design.col_scales());
    out.intercept = intercept_std - design.col_means().dot(out.beta);
    return out;
}

Dataset::Dataset(StandardizedDesign design, ResponseKind response)
    : design_(std::move(design)), response_(std::move(response)) {
    validate_response(response_);
    if (response_length(response_) != design_.rows())
        throw Error(ErrorCode::DimensionMismatch, "response length does not match design rows");
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    MatrixXd sub(static_cast<Eigen::Index>(rows.size()), x().cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= n()) throw Error(ErrorCode::InvalidArgument, "row index out of range");
        sub.row(static_cast<Eigen::Index>(i)) = x().row(static_cast<Eigen::Index>(rows[i]));
    }
    auto pick = [&](const VectorXd& v) {
        VectorXd out(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
        return out;
    };
    ResponseKind response = std::visit(
        [&](const auto& r) -> ResponseKind {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, Survival>)
                return Survival{pick(r.time), pick(r.status)};
            else
                return T{pick(r.values)};
        },
        response_);
    return Dataset(standardize(sub, design_.penalty_factor(), design_.names()), std::move(response));
}

void require_family(const Dataset& data, Family family) {
    if (natural_family(data.response()) != family)
        throw Error(ErrorCode::FamilyMismatch,
                    std::string("response kind does not support family ") + to_string(family));
}

const VectorXd& response_values(const Dataset& data) {
    if (const auto* c = std::get_if<Continuous>(&data.response())) return c->values;
    if (const auto* b = std::get_if<Binary>(&data.response())) return b->values;
    throw Error(ErrorCode::FamilyMismatch, "survival response has no single value column");
}

const Survival& survival_response(const Dataset& data) {
    if (const auto* s = std::get_if<Survival>(&data.response())) return *s;
    throw Error(ErrorCode::FamilyMismatch, "response is not a survival outcome");
}

namespace {

double parse_cell(const std::string& text, std::size_t row, std::size_t col) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    double value = 0.0;
    const char* first = text.data() + begin;
    const char* last = text.data() + end;
    if (begin < end && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (begin == end || ec != std::errc() || ptr != last || !std::isfinite(value))
        throw Error(ErrorCode::NonNumericCell,
                    "non-numeric cell '" + text + "' at row " + std::to_string(row) + ", column " +
                        std::to_string(col),
                    row, col);
    return value;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvResponseSpec& spec, Family family) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

    std::vector<std::string> header;
    if (!detail::read_csv_record(in, header))
        throw Error(ErrorCode::ParseError, "empty file " + path.string(), 0, 0);
    if (header.size() >= 1 && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

    std::unordered_map<std::string, std::size_t> column_of;
    for (std::size_t c = 0; c < header.size(); ++c) column_of.emplace(header[c], c);
    auto find = [&](const std::string& name) {
        auto it = column_of.find(name);
        if (it == column_of.end())
            throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found");
        return it->second;
    };

    std::vector<std::size_t> response_cols;
    if (family == Family::Cox) {
        if (spec.time.empty() || spec.status.empty())
            throw Error(ErrorCode::InvalidArgument, "cox family requires time and status columns");
        response_cols = {find(spec.time), find(spec.status)};
    } else {
        if (spec.response.empty())
            throw Error(ErrorCode::InvalidArgument, "response column required");
        response_cols = {find(spec.response)};
    }
    std::vector<bool> skip(header.size(), false);
    for (std::size_t c : response_cols) skip[c] = true;
    for (const auto& name : spec.exclude) skip[find(name)] = true;
    std::vector<bool> unpenalized(header.size(), false);
    for (const auto& name : spec.unpenalized) {
        const std::size_t c = find(name);
        if (skip[c]) throw Error(ErrorCode::InvalidArgument, "column '" + name + "' is not a feature");
        unpenalized[c] = true;
    }

    std::vector<std::size_t> feature_cols;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (skip[c]) continue;
        feature_cols.push_back(c);
        names.push_back(header[c]);
    }
    if (feature_cols.empty()) throw Error(ErrorCode::InvalidArgument, "no feature columns");

    std::vector<std::vector<double>> rows;
    std::vector<std::string> fields;
    std::size_t row = 0;
    while (detail::read_csv_record(in, fields)) {
        ++row;
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != header.size())
            throw Error(ErrorCode::ParseError,
                        "row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(header.size()),
                        row, fields.size());
        std::vector<double> values(header.size());
        for (std::size_t c = 0; c < header.size(); ++c) values[c] = parse_cell(fields[c], row, c);
        rows.push_back(std::move(values));
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (n == 0) throw Error(ErrorCode::ParseError, "no data rows", 1, 0);

    MatrixXd raw(n, static_cast<Eigen::Index>(feature_cols.size()));
    VectorXd penalty(static_cast<Eigen::Index>(feature_cols.size()));
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
        penalty[static_cast<Eigen::Index>(k)] = unpenalized[feature_cols[k]] ? 0.0 : 1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            raw(i, static_cast<Eigen::Index>(k)) = rows[static_cast<std::size_t>(i)][feature_cols[k]];
    }
    auto column = [&](std::size_t c) {
        VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = rows[static_cast<std::size_t>(i)][c];
        return v;
    };

    ResponseKind response;
    switch (family) {
        case Family::Linear: response = Continuous{column(response_cols[0])}; break;
        case Family::Logistic: response = Binary{column(response_cols[0])}; break;
        case Family::Cox: response = Survival{column(response_cols[0]), column(response_cols[1])}; break;
    }
    return Dataset(standardize(raw, penalty, std::move(names)), std::move(response));
}

}  // namespace mfdr
