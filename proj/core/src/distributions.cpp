#include "mfdr/distributions.hpp"

#include <algorithm>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "mfdr/error.hpp"

namespace mfdr {

double normal_quantile(double prob) {
    if (!(prob > 0.0 && prob < 1.0)) {
        if (prob == 0.0) return -std::numeric_limits<double>::infinity();
        if (prob == 1.0) return std::numeric_limits<double>::infinity();
        throw Error(ErrorCode::InvalidArgument, "probability outside [0, 1]");
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

double t_to_z(double t, double df) {
    if (std::isnan(t)) return 0.0;
    if (std::isinf(t)) return t > 0 ? kZCap : -kZCap;
    if (!(df > 0.0)) throw Error(ErrorCode::InvalidArgument, "t distribution needs df > 0");
    const boost::math::students_t_distribution<double> dist(df);
    // Work with the lower tail of -|t| so large statistics keep precision.
    const double lower = boost::math::cdf(dist, -std::abs(t));
    double z = lower > 0.0 ? -normal_quantile(lower) : kZCap;
    z = std::min(z, kZCap);
    return t >= 0 ? z : -z;
}

}  // namespace mfdr
