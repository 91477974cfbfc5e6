#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "pyd/errors.hpp"

namespace pyd {

/// Signed log-domain scalar: value = sign * exp(log_abs), sign == 0 iff zero.
struct LogNumber {
    double log_abs = -std::numeric_limits<double>::infinity();
    int sign = 0;

    static LogNumber zero() { return {}; }
    static LogNumber from_log(double la, int s = 1) {
        return s == 0 ? zero() : LogNumber{la, s > 0 ? 1 : -1};
    }
    static LogNumber from_value(double v) {
        if (v == 0.0) return zero();
        return {std::log(std::fabs(v)), v > 0 ? 1 : -1};
    }

    double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }

    LogNumber operator*(const LogNumber& o) const {
        if (sign == 0 || o.sign == 0) return zero();
        return {log_abs + o.log_abs, sign * o.sign};
    }

    LogNumber operator+(const LogNumber& o) const {
        if (sign == 0) return o;
        if (o.sign == 0) return *this;
        const double hi = std::max(log_abs, o.log_abs);
        const double lo = std::min(log_abs, o.log_abs);
        if (sign == o.sign) return {hi + std::log1p(std::exp(lo - hi)), sign};
        const double d = std::exp(lo - hi);
        if (d == 1.0) return zero();
        const int s = (log_abs >= o.log_abs) ? sign : o.sign;
        return {hi + std::log1p(-d), s};
    }
};

inline double log_sum_exp(const std::vector<double>& xs) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : xs) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

/// log((a)_n) for a rising factorial with all factors positive.
/// Integer fallback covers small n when lgamma would cross a pole.
inline double log_pochhammer(double a, double n) {
    if (n == 0.0) return 0.0;
    if (a > 0.0) return std::lgamma(a + n) - std::lgamma(a);
    // a <= 0: only meaningful for integer n with every factor positive
    if (n != std::floor(n)) throw DomainError("log_pochhammer: a <= 0 with non-integer n");
    double acc = 0.0;
    for (long i = 0; i < static_cast<long>(n); ++i) {
        const double f = a + static_cast<double>(i);
        if (f <= 0.0) throw DomainError("log_pochhammer: nonpositive factor");
        acc += std::log(f);
    }
    return acc;
}

/// Signed log of (a)_m for arbitrary real a, integer m >= 0.
inline LogNumber signed_log_pochhammer(double a, long m) {
    LogNumber r = LogNumber::from_log(0.0);
    for (long i = 0; i < m; ++i) {
        const double f = a + static_cast<double>(i);
        if (f == 0.0) return LogNumber::zero();
        r = r * LogNumber::from_value(f);
        if (r.sign == 0) return r;
    }
    return r;
}

inline double log_binomial(double m, double j) {
    if (j < 0 || j > m) return -std::numeric_limits<double>::infinity();
    return std::lgamma(m + 1.0) - std::lgamma(j + 1.0) - std::lgamma(m - j + 1.0);
}

namespace detail {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;
using BigFloat = boost::multiprecision::cpp_bin_float_100;

/// Exact rational equal to the double (doubles are dyadic rationals).
inline BigRat rational_from_double(double x) {
    if (x == 0.0) return BigRat(0);
    int e = 0;
    const double fr = std::frexp(x, &e);  // x = fr * 2^e, |fr| in [0.5, 1)
    const std::int64_t mant = static_cast<std::int64_t>(std::ldexp(fr, 53));
    const int shift = e - 53;
    BigRat r(mant);
    if (shift >= 0)
        r *= BigRat(BigInt(1) << shift);
    else
        r /= BigRat(BigInt(1) << (-shift));
    return r;
}

inline LogNumber log_of_rational(const BigRat& r) {
    if (r == 0) return LogNumber::zero();
    const BigFloat num(boost::multiprecision::numerator(r));
    const BigFloat den(boost::multiprecision::denominator(r));
    const BigFloat la = log(abs(num)) - log(den);
    return LogNumber::from_log(la.convert_to<double>(), r < 0 ? -1 : 1);
}

}  // namespace detail

/// Noncentral generalized factorial coefficient
///   C(m, x; sigma, gamma) = (x!)^{-1} sum_{i=0}^{x} (-1)^i binom(x,i) (-i*sigma - gamma)_m
/// by the defining alternating sum. Terms are accumulated in 50-digit floats so
/// the 40-decimal-digit cancellation budget is actually observable; doubles
/// alone would return garbage long before the budget trips.
/// Throws PrecisionLoss when the result magnitude drops more than 40 decimal
/// digits below the largest term.
inline LogNumber gen_factorial_coeff(long m, long x, double sigma, double gamma) {
    if (m < 1 || x < 0 || x > m) throw OutOfRange("gen_factorial_coeff: need 1 <= x <= m or x=0");
    if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("gen_factorial_coeff: sigma not in (0,1)");
    using Wide = boost::multiprecision::cpp_bin_float_50;
    constexpr double kBudgetDigits = 40.0;
    Wide acc = 0;
    Wide max_term = 0;
    detail::BigInt binom = 1;  // binom(x, i), updated incrementally
    for (long i = 0; i <= x; ++i) {
        Wide poch = 1;
        const Wide base = -Wide(i) * sigma - gamma;
        for (long j = 0; j < m; ++j) poch *= base + j;
        Wide term = Wide(binom) * poch;
        if (abs(term) > max_term) max_term = abs(term);
        acc += (i % 2 == 1) ? -term : term;
        binom = binom * (x - i) / (i + 1);
    }
    if (acc == 0 && max_term == 0) return LogNumber::zero();
    if (acc == 0 || log10(max_term / abs(acc)) > kBudgetDigits)
        throw PrecisionLoss("gen_factorial_coeff: alternating-sum cancellation");
    const double lfact = std::lgamma(static_cast<double>(x) + 1.0);
    const double la = log(abs(acc)).convert_to<double>() - lfact;
    return LogNumber::from_log(la, acc < 0 ? -1 : 1);
}

/// Exact big-rational evaluation of the same sum. Slow; used as the fallback
/// path and as the oracle in tests. sigma and gamma are taken exactly as the
/// rationals their double representations denote.
inline LogNumber gen_factorial_coeff_exact(long m, long x, double sigma, double gamma) {
    using detail::BigRat;
    const BigRat sig = detail::rational_from_double(sigma);
    const BigRat gam = detail::rational_from_double(gamma);
    BigRat acc = 0;
    detail::BigInt binom = 1;  // binom(x, i), updated incrementally
    for (long i = 0; i <= x; ++i) {
        BigRat poch = 1;
        const BigRat base = -BigRat(i) * sig - gam;
        for (long j = 0; j < m; ++j) poch *= base + j;
        BigRat term = BigRat(binom) * poch;
        acc += (i % 2 == 1) ? -term : term;
        binom = binom * (x - i) / (i + 1);
    }
    detail::BigInt xfact = 1;
    for (long j = 2; j <= x; ++j) xfact *= j;
    return detail::log_of_rational(acc / BigRat(xfact));
}

/// Fast path with automatic exact-rational fallback on PrecisionLoss.
inline LogNumber gen_factorial_coeff_auto(long m, long x, double sigma, double gamma) {
    try {
        return gen_factorial_coeff(m, x, sigma, gamma);
    } catch (const PrecisionLoss&) {
        return gen_factorial_coeff_exact(m, x, sigma, gamma);
    }
}

}  // namespace pyd
