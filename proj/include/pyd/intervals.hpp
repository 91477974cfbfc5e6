#pragma once

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "pyd/errors.hpp"
#include "pyd/estimators.hpp"
#include "pyd/pyp.hpp"
#include "pyd/rng.hpp"
#include "pyd/sample.hpp"
#include "pyd/stable.hpp"

namespace pyd {

/// Sampler for the posterior limit variable
///   Z^{(n)}_{sigma,theta,k} = Beta(k + theta/sigma, n/sigma - k) * Z_{sigma,(theta+n)/sigma}.
struct ZPosteriorSampler {
    PdParams params;
    long n;
    long k;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    ZPosteriorSampler(PdParams p, long n_, long k_, std::uint64_t seed_ = 0, std::uint64_t stream_ = 0)
        : params(p), n(n_), k(k_), seed(seed_), stream(stream_) {
        if (k > n) throw InvalidState("k must not exceed n");
        if (!(k + params.theta / params.sigma > 0.0) || !(n / params.sigma - k > 0.0))
            throw InvalidState("invalid Beta parameters for Z posterior");
    }

    double draw_one(Rng& rng) const {
        const double a = k + params.theta / params.sigma;
        const double b = n / params.sigma - k;
        const double q = (params.theta + n) / params.sigma;
        return rng.beta(a, b) * sample_Z(params.sigma, q, rng);
    }

    /// `count` independent draws fanned out over `threads` streams; the result
    /// is a deterministic function of (seed, stream plan).
    std::vector<double> draw(long count, unsigned threads = 0) const {
        if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
        threads = static_cast<unsigned>(std::min<long>(threads, std::max<long>(1, count)));
        std::vector<std::vector<double>> parts(threads);
        const long per = count / threads, extra = count % threads;
        std::vector<std::thread> workers;
        for (unsigned t = 0; t < threads; ++t) {
            const long quota = per + (t < extra ? 1 : 0);
            workers.emplace_back([this, t, quota, &parts] {
                Rng rng(seed, stream * 1000003ULL + t);
                auto& out = parts[t];
                out.reserve(quota);
                for (long i = 0; i < quota; ++i) out.push_back(draw_one(rng));
            });
        }
        for (auto& w : workers) w.join();
        std::vector<double> all;
        all.reserve(count);
        for (auto& pt : parts) all.insert(all.end(), pt.begin(), pt.end());
        return all;
    }
};

/// E[Z^{(n)}_{sigma,theta,k}] = (k + theta/sigma) Gamma(theta+n)/Gamma(theta+n+sigma).
inline double mean_Z(const PdParams& p, long n, long k) {
    return (k + p.theta / p.sigma) *
           std::exp(std::lgamma(p.theta + n) - std::lgamma(p.theta + n + p.sigma));
}

/// Scaling factor r*(m,l), defined so that
///   D-hat_{n,m}(l) = r*(m,l) * sigma(1-sigma)_l / l! * E[Z^{(n)}].
inline double r_star(const PdParams& p, const SampleSummary& s, long m, long l) {
    const double d = bnp_discovery_value(p, s, m, l);
    return d / (discovery_coeff(p.sigma, l) * mean_Z(p, s.n(), s.k()));
}

/// Cumulative scaling factor r*(m, l_1..l_tau).
inline double r_star_cum(const PdParams& p, const SampleSummary& s, long m, const std::vector<long>& ls) {
    double num = 0.0, coeff = 0.0;
    for (long l : ls) {
        num += bnp_discovery_value(p, s, m, l);
        coeff += discovery_coeff(p.sigma, l);
    }
    return num / (coeff * mean_Z(p, s.n(), s.k()));
}

enum class Scaling { naive, r_star };

/// Asymptotic point estimator: D' (naive m^{sigma-1} rate) or D* (r* rate; by
/// construction equal to the exact estimator).
inline DiscoveryEstimate asymptotic_estimate(const PdParams& p, const SampleSummary& s, long m,
                                             const std::vector<long>& target, Scaling scaling) {
    for (long l : target)
        if (l < 0 || l > s.n() + m) throw OutOfRange("asymptotic_estimate: bad target");
    double coeff = 0.0;
    for (long l : target) coeff += discovery_coeff(p.sigma, l);
    const double rate = scaling == Scaling::naive
                            ? std::pow(static_cast<double>(m), p.sigma - 1.0)
                            : (target.size() == 1 ? r_star(p, s, m, target[0]) : r_star_cum(p, s, m, target));
    const char* tag = scaling == Scaling::naive ? "bnp-asymptotic-naive" : "bnp-asymptotic-rstar";
    return {tag, m, target, rate * coeff * mean_Z(p, s.n(), s.k())};
}

/// Equal-tailed empirical quantile with linear interpolation; xs must be sorted.
inline double sorted_quantile(const std::vector<double>& xs, double q) {
    if (xs.empty()) throw Error("quantile of empty sample");
    const double pos = q * (xs.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= xs.size()) return xs.back();
    const double frac = pos - i;
    return xs[i] * (1.0 - frac) + xs[i + 1] * frac;
}

/// Interval from pre-sorted Z draws (lets several targets share one batch).
inline CredibleInterval credible_interval_from_draws(const PdParams& p, const SampleSummary& s, long m,
                                                     const std::vector<long>& target, double level,
                                                     const std::vector<double>& sorted_z,
                                                     Scaling scaling) {
    double coeff = 0.0;
    for (long l : target) coeff += discovery_coeff(p.sigma, l);
    const double rate = scaling == Scaling::naive
                            ? std::pow(static_cast<double>(m), p.sigma - 1.0)
                            : (target.size() == 1 ? r_star(p, s, m, target[0]) : r_star_cum(p, s, m, target));
    const double alpha = 1.0 - level;
    const double s1 = sorted_quantile(sorted_z, alpha / 2);
    const double s2 = sorted_quantile(sorted_z, 1.0 - alpha / 2);
    CredibleInterval ci;
    ci.lo = rate * coeff * s1;
    ci.hi = rate * coeff * s2;
    ci.level = level;
    ci.method = scaling == Scaling::naive ? "asymptotic-m^{sigma-1}" : "asymptotic-r*";
    ci.draws = static_cast<long>(sorted_z.size());
    return ci;
}

/// Asymptotic credible interval: equal-tailed quantiles of Z-posterior draws,
/// scaled by the target coefficient and the chosen rate.
inline CredibleInterval credible_interval(const PdParams& p, const SampleSummary& s, long m,
                                          const std::vector<long>& target, double level, long draws,
                                          Scaling scaling, std::uint64_t seed, unsigned threads = 0) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("level in (0,1)");
    if (draws < 1000) throw DomainError("draws >= 1000");
    ZPosteriorSampler zs(p, s.n(), s.k(), seed);
    auto xs = zs.draw(draws, threads);
    std::sort(xs.begin(), xs.end());
    return credible_interval_from_draws(p, s, m, target, level, xs, scaling);
}

// ---- exact posterior law of the new-species count ---------------------------

/// Full pmf of K_m^{(n)} | X_n over x = 0..m:
///   P[x] = (theta/sigma + k)_x / (theta+n)_m * C(m, x; sigma, -n + sigma*k).
/// Uses the log-sum-exp kernel with automatic exact-rational fallback.
inline std::vector<double> exact_pmf_new_species(const PdParams& p, const SampleSummary& s, long m) {
    if (m < 0) throw OutOfRange("exact_pmf_new_species: m >= 0");
    if (m == 0) return {1.0};
    const double gamma = -static_cast<double>(s.n()) + p.sigma * s.k();
    const double denom = log_pochhammer(p.theta + s.n(), static_cast<double>(m));
    std::vector<double> pmf(m + 1, 0.0);
    for (long x = 0; x <= m; ++x) {
        LogNumber c;
        try {
            c = gen_factorial_coeff_auto(m, x, p.sigma, gamma);
        } catch (const std::exception&) {
            throw Infeasible("generalized factorial coefficient infeasible at m=" + std::to_string(m));
        }
        if (c.sign <= 0) continue;  // pmf terms are nonnegative; tiny negatives are pure roundoff
        const double lp = log_pochhammer(p.theta / p.sigma + s.k(), static_cast<double>(x)) +
                          c.log_abs - denom;
        pmf[x] = std::exp(lp);
    }
    return pmf;
}

/// Exact equal-tailed interval for the (m;0)-discovery through the pmf of the
/// new-species count; l >= 1 would need the (out-of-scope) M pmf.
inline CredibleInterval exact_interval_new_species_based(const PdParams& p, const SampleSummary& s,
                                                         long m, long l, double level) {
    if (l != 0) throw Unsupported("exact interval available for l = 0 only");
    const auto pmf = exact_pmf_new_species(p, s, m);
    auto value_at = [&](long x) {
        return (p.theta + p.sigma * s.k() + p.sigma * x) / (p.theta + s.n() + m);
    };
    const double alpha = 1.0 - level;
    double cum = 0.0;
    long xlo = 0, xhi = m;
    bool lo_set = false;
    for (long x = 0; x <= m; ++x) {
        cum += pmf[x];
        if (!lo_set && cum >= alpha / 2) {
            xlo = x;
            lo_set = true;
        }
        if (cum >= 1.0 - alpha / 2) {
            xhi = x;
            break;
        }
    }
    CredibleInterval ci;
    ci.lo = value_at(xlo);
    ci.hi = value_at(xhi);
    ci.level = level;
    ci.method = "exact-pmf";
    ci.draws = 0;
    return ci;
}

}  // namespace pyd
