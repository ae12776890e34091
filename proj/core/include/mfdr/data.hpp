#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mfdr/error.hpp"

namespace mfdr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Family { Linear, Logistic, Cox };

const char* to_string(Family family) noexcept;
Family parse_family(const std::string& name);

struct Continuous {
    VectorXd values;
};

struct Binary {
    VectorXd values;  // exactly 0 or 1
};

struct Survival {
    VectorXd time;    // strictly positive
    VectorXd status;  // 1 = event, 0 = censored
};

using ResponseKind = std::variant<Continuous, Binary, Survival>;

// Validates the invariants of each response kind; throws InvalidResponse.
void validate_response(const ResponseKind& response);
std::size_t response_length(const ResponseKind& response);
Family natural_family(const ResponseKind& response);

// Column-standardized design: every column has mean 0 and sum of squares n.
// `col_means`/`col_scales` map back to the raw scale via
// raw = standardized * scale + mean.
class StandardizedDesign {
public:
    StandardizedDesign() = default;

    const MatrixXd& x() const noexcept { return x_; }
    const VectorXd& col_means() const noexcept { return col_means_; }
    const VectorXd& col_scales() const noexcept { return col_scales_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const VectorXd& penalty_factor() const noexcept { return penalty_factor_; }

    std::size_t rows() const noexcept { return static_cast<std::size_t>(x_.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(x_.cols()); }
    bool is_penalized(std::size_t j) const { return penalty_factor_[static_cast<Eigen::Index>(j)] != 0.0; }
    std::size_t unpenalized_count() const noexcept;

    // Raw-scale matrix reconstructed from the stored transform.
    MatrixXd reconstruct() const;

private:
    friend StandardizedDesign standardize(const MatrixXd&, const VectorXd&, std::vector<std::string>);

    MatrixXd x_;
    VectorXd col_means_;
    VectorXd col_scales_;
    std::vector<std::string> names_;
    VectorXd penalty_factor_;
};

// Centers each column and divides by sqrt(sum((x - mean)^2) / n).
// Throws ConstantColumn(j) for a zero-variance column and DimensionMismatch
// when the penalty factor / names do not match the column count.
StandardizedDesign standardize(const MatrixXd& raw, const VectorXd& penalty_factor,
                               std::vector<std::string> names = {});

struct RawCoefficients {
    VectorXd beta;
    double intercept = 0.0;
};

// Maps coefficients fitted on the standardized design back to raw scale.
RawCoefficients destandardize(const VectorXd& beta_std, double intercept_std,
                              const StandardizedDesign& design);

class Dataset {
public:
    Dataset(StandardizedDesign design, ResponseKind response);

    const StandardizedDesign& design() const noexcept { return design_; }
    const ResponseKind& response() const noexcept { return response_; }
    const MatrixXd& x() const noexcept { return design_.x(); }
    std::size_t n() const noexcept { return design_.rows(); }
    std::size_t p() const noexcept { return design_.cols(); }

    // Rows `rows` of this dataset, re-standardized as a new problem. The
    // returned design's means/scales are relative to this dataset's
    // standardized columns.
    Dataset subset(const std::vector<std::size_t>& rows) const;

private:
    StandardizedDesign design_;
    ResponseKind response_;
};

// Throws FamilyMismatch when the response kind cannot be fit by `family`.
void require_family(const Dataset& data, Family family);

// Linear: response values; Logistic: 0/1 values. Throws for survival.
const VectorXd& response_values(const Dataset& data);
const Survival& survival_response(const Dataset& data);

struct CsvResponseSpec {
    std::string response;  // linear / logistic
    std::string time;      // cox
    std::string status;    // cox
    std::vector<std::string> unpenalized;
    std::vector<std::string> exclude;
};

Dataset load_csv(const std::filesystem::path& path, const CsvResponseSpec& spec, Family family);

}  // namespace mfdr
