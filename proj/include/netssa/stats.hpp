#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "netssa/errors.hpp"

namespace netssa::stats {

// z with P(N(0,1) > z) = p.
inline double normal_upper_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("normal quantile needs p in (0,1)");
    return boost::math::quantile(boost::math::complement(boost::math::normal(), p));
}

// z with P(|N(0,1)| > z) = p.
inline double normal_two_sided_quantile(double p) { return normal_upper_quantile(p / 2.0); }

inline double chi2_upper_quantile(double dof, double p) {
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("chi-squared quantile needs p in (0,1)");
    return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), p));
}

}  // namespace netssa::stats
