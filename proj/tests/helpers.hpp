#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace testutil {

inline std::string data_path(const std::string& name) {
    return std::string(PYD_DATA_DIR) + "/" + name;
}

/// Asymptotic Kolmogorov distribution tail Q(x) = 2 sum (-1)^{j-1} exp(-2 j^2 x^2).
inline double kolmogorov_pvalue(double d, std::size_t n) {
    const double x = d * (std::sqrt(static_cast<double>(n)) + 0.12 + 0.11 / std::sqrt(static_cast<double>(n)));
    double q = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = 2.0 * std::exp(-2.0 * j * j * x * x);
        q += (j % 2 == 1) ? term : -term;
    }
    return std::min(1.0, std::max(0.0, q));
}

/// One-sample KS p-value against a CDF.
inline double ks_test(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const auto n = xs.size();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = cdf(xs[i]);
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    return kolmogorov_pvalue(d, n);
}

/// Two-sample KS p-value.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / a.size() -
                                  static_cast<double>(j) / b.size()));
    }
    const double ne = static_cast<double>(a.size()) * b.size() / (a.size() + b.size());
    return kolmogorov_pvalue(d, static_cast<std::size_t>(ne));
}

/// Pearson chi-square p-value; observed and expected counts, same length.
inline double chi_square_pvalue(const std::vector<double>& obs, const std::vector<double>& exp) {
    double stat = 0.0;
    int df = -1;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (exp[i] <= 0.0) continue;
        stat += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
        ++df;
    }
    if (df < 1) return 1.0;
    boost::math::chi_squared chi(df);
    return boost::math::cdf(boost::math::complement(chi, stat));
}

}  // namespace testutil
