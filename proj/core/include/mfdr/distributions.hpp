#pragma once

#include <cmath>
#include <numbers>

namespace mfdr {

inline double normal_pdf(double z) noexcept {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Density of N(0, sd^2) at x.
inline double normal_pdf(double x, double sd) noexcept { return normal_pdf(x / sd) / sd; }

inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double prob);

// Largest |z| reported for p-value to z conversions; Phi^-1 loses all
// precision past this point in double arithmetic.
inline constexpr double kZCap = 8.2;

// z = Phi^-1(F_t(t; df)), evaluated on the tail that keeps precision and
// clamped to [-kZCap, kZCap].
double t_to_z(double t, double df);

}  // namespace mfdr
