#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "pyd/errors.hpp"
#include "pyd/kernels.hpp"
#include "pyd/pyp.hpp"
#include "pyd/rng.hpp"
#include "pyd/sample.hpp"

namespace pyd {

struct CredibleInterval {
    double lo = 0.0, hi = 0.0;
    double level = 0.0;
    std::string method;  // "exact-pmf" | "asymptotic-m^{sigma-1}" | "asymptotic-r*"
    long draws = 0;
};

/// A point estimate of the (m;l)-discovery (or a cumulative l-set target).
struct DiscoveryEstimate {
    std::string estimator;
    long m = 0;
    std::vector<long> target;  // one entry for a single l, several for a cumulative set
    double value = 0.0;
    bool unstable = false;  // Good-Toulmin outside [0,1]
    std::optional<CredibleInterval> interval;
};

/// c'_l = sigma * (1-sigma)_l / l!, the fluctuation-limit coefficient for the
/// l-discovery (index l, not l-1; the shift absorbs the (l - sigma) factor).
inline double discovery_coeff(double sigma, long l) {
    return std::exp(std::log(sigma) + log_pochhammer(1.0 - sigma, static_cast<double>(l)) -
                    std::lgamma(static_cast<double>(l) + 1.0));
}

/// Frequency-count proportion c_{sigma,l} = sigma * (1-sigma)_{l-1} / l!.
inline double spectrum_coeff(double sigma, long l) {
    return std::exp(std::log(sigma) + log_pochhammer(1.0 - sigma, static_cast<double>(l - 1)) -
                    std::lgamma(static_cast<double>(l) + 1.0));
}

// ---- exact BNP estimators ---------------------------------------------------

/// Posterior-mean estimator of the (m;l)-discovery under PD(sigma,theta):
/// l=0 closed form, l>=1 the two-part sum, both in log space.
inline double bnp_discovery_value(const PdParams& p, const SampleSummary& s, long m, long l) {
    if (l < 0 || l > s.n() + m || m < 0) throw OutOfRange("bnp_discovery: need 0 <= l <= n+m");
    const double th = p.theta, sig = p.sigma;
    const double n = static_cast<double>(s.n());
    const double md = static_cast<double>(m);
    if (m == 0) {
        // closed forms: one-step predictive probabilities, no log-space noise
        if (l == 0) return (th + sig * s.k()) / (th + n);
        return (static_cast<double>(l) - sig) * s.count_at(l) / (th + n);
    }
    if (l == 0) {
        return std::exp(std::log(th + sig * s.k()) - std::log(th + n) +
                        log_pochhammer(th + n + sig, md) - log_pochhammer(th + n + 1.0, md));
    }
    std::vector<double> terms;
    const double denom = log_pochhammer(th + n, md + 1.0);
    for (long i = 1; i <= l; ++i) {
        if (l - i > m) continue;
        const double mi = s.count_at(i);
        if (mi <= 0.0) continue;
        terms.push_back(log_binomial(md, static_cast<double>(l - i)) + std::log(mi) +
                        log_pochhammer(static_cast<double>(i) - sig, static_cast<double>(l + 1 - i)) +
                        log_pochhammer(th + n - i + sig, md - l + i) - denom);
    }
    if (l <= m) {
        terms.push_back(log_pochhammer(1.0 - sig, static_cast<double>(l)) +
                        log_binomial(md, static_cast<double>(l)) + std::log(th + sig * s.k()) +
                        log_pochhammer(th + n + sig, md - static_cast<double>(l)) - denom);
    }
    if (terms.empty()) return 0.0;
    return std::exp(log_sum_exp(terms));
}

inline DiscoveryEstimate bnp_discovery(const PdParams& p, const SampleSummary& s, long m, long l) {
    return {"bnp", m, {l}, bnp_discovery_value(p, s, m, l)};
}

/// K-hat_{n,m}: posterior expected number of new species in the additional sample.
inline double expected_new_species(const PdParams& p, const SampleSummary& s, long m) {
    if (m == 0) return 0.0;
    const double n = static_cast<double>(s.n()), md = static_cast<double>(m);
    const double d = log_pochhammer(p.theta + n + p.sigma, md) - log_pochhammer(p.theta + n, md);
    return (p.theta / p.sigma + s.k()) * std::expm1(d);
}

/// M-hat_{n,m}(l): posterior expected number of species with frequency l in the
/// enlarged sample.
inline double expected_freq_count(const PdParams& p, const SampleSummary& s, long m, long l) {
    if (l < 1 || l > s.n() + m) throw OutOfRange("expected_freq_count: need 1 <= l <= n+m");
    const double th = p.theta, sig = p.sigma;
    const double n = static_cast<double>(s.n()), md = static_cast<double>(m);
    std::vector<double> terms;
    const double denom = log_pochhammer(th + n, md);
    for (long i = 1; i <= l; ++i) {
        if (l - i > m) continue;
        const double mi = s.count_at(i);
        if (mi <= 0.0) continue;
        terms.push_back(log_binomial(md, static_cast<double>(l - i)) + std::log(mi) +
                        log_pochhammer(static_cast<double>(i) - sig, static_cast<double>(l - i)) +
                        log_pochhammer(th + n - i + sig, md - l + i) - denom);
    }
    if (l <= m) {
        terms.push_back(log_pochhammer(1.0 - sig, static_cast<double>(l - 1)) +
                        log_binomial(md, static_cast<double>(l)) + std::log(th + sig * s.k()) +
                        log_pochhammer(th + n + sig, md - static_cast<double>(l)) - denom);
    }
    if (terms.empty()) return 0.0;
    return std::exp(log_sum_exp(terms));
}

/// Same estimator through the randomized-identity route:
/// l=0 -> (theta + sigma*k + sigma*K-hat)/(theta+n+m), l>=1 -> (l-sigma)*M-hat/(theta+n+m).
inline DiscoveryEstimate bnp_discovery_via_identity(const PdParams& p, const SampleSummary& s, long m,
                                                    long l) {
    if (l < 0 || l > s.n() + m) throw OutOfRange("bnp_discovery_via_identity: bad l");
    const double denom = p.theta + s.n() + m;
    double v;
    if (l == 0)
        v = (p.theta + p.sigma * s.k() + p.sigma * expected_new_species(p, s, m)) / denom;
    else
        v = (l - p.sigma) * expected_freq_count(p, s, m, l) / denom;
    return {"bnp-identity", m, {l}, v};
}

inline DiscoveryEstimate bnp_cumulative(const PdParams& p, const SampleSummary& s, long m,
                                        const std::vector<long>& ls) {
    std::set<long> seen(ls.begin(), ls.end());
    if (seen.size() != ls.size()) throw InvalidTarget("duplicate indices in cumulative target");
    double v = 0.0;
    for (long l : ls) v += bnp_discovery_value(p, s, m, l);
    return {"bnp", m, ls, v};
}

// ---- Good-Turing family -----------------------------------------------------

inline DiscoveryEstimate good_turing(const SampleSummary& s, long l) {
    if (l < 0 || l > s.n()) throw OutOfRange("good_turing: need 0 <= l <= n");
    const double v = (l + 1) * s.count_at(l + 1) / s.n();
    return {"gt", 0, {l}, v};
}

/// Good-Toulmin alternating-series extrapolation of the (m;0)-discovery.
/// Never clamped by default; values outside [0,1] carry the unstable flag.
inline DiscoveryEstimate good_toulmin(const SampleSummary& s, long m, bool clamp = false) {
    if (m < 0) throw OutOfRange("good_toulmin: m >= 0");
    const double gamma = static_cast<double>(m) / s.n();
    double v = 0.0;
    for (const auto& [i, mi] : s.spectrum()) {
        // (-gamma)^{i-1} with the 0^0 = 1 convention so m=0 reduces to Good-Turing at l=0
        const double pw = (i == 1) ? 1.0 : std::pow(-gamma, static_cast<double>(i - 1));
        v += pw * i * mi;
    }
    v /= s.n();
    DiscoveryEstimate e{"gtoulmin", m, {0}, v};
    e.unstable = gamma > 1.0 || v < 0.0 || v > 1.0;
    if (clamp) e.value = std::min(1.0, std::max(0.0, v));
    return e;
}

// ---- smoothing rules --------------------------------------------------------

struct SmoothingRule {
    enum class Kind { PD, Poisson, SGT } kind;
    double sigma = 0.5;  // PD
    long tau = 1;        // Poisson
    double lambda = 0.0;  // Poisson; <= 0 means the n/k default

    static SmoothingRule pd(double sigma) { return {Kind::PD, sigma, 0, 0.0}; }
    static SmoothingRule poisson(long tau = 1, double lambda = 0.0) {
        return {Kind::Poisson, 0.0, tau, lambda};
    }
    static SmoothingRule sgt() { return {Kind::SGT, 0.0, 0, 0.0}; }
};

namespace detail {

/// Simple Good-Turing (Gale-Sampson): Z-transform, log-log line of best fit,
/// Turing-vs-LGT switch, and renormalization of the seen mass to 1 - m_1/n.
/// Returns the smoothed spectrum m'_j with m'_{l+1} = n*D(l)/(l+1), so the
/// generic (l+1) m'_{l+1} / n formula recovers the SGT discovery estimates.
inline FrequencySpectrum sgt_smooth(const SampleSummary& s) {
    std::vector<long> rs;
    for (const auto& [l, ml] : s.spectrum()) rs.push_back(l);
    const std::size_t J = rs.size();
    if (J < 2) throw InsufficientSpectrum("SGT needs at least two populated frequencies");
    // Z-transformed counts and the log10-log10 least-squares line
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t j = 0; j < J; ++j) {
        const long lo = (j == 0) ? 0 : rs[j - 1];
        const long hi = (j + 1 < J) ? rs[j + 1] : 2 * rs[j] - lo;
        const double z = s.count_at(rs[j]) / (0.5 * (hi - lo));
        const double x = std::log10(static_cast<double>(rs[j]));
        const double y = std::log10(z);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double b = (J * sxy - sx * sy) / (J * sxx - sx * sx);
    const double a = (sy - b * sx) / J;
    auto smoothed = [&](long r) { return std::pow(10.0, a + b * std::log10(static_cast<double>(r))); };
    // adjusted frequencies r* per populated r
    std::unordered_map<long, double> rstar;
    bool use_lgt = false;
    for (long r : rs) {
        const double lgt = (r + 1) * smoothed(r + 1) / smoothed(r);
        const double nr = s.count_at(r), nr1 = s.count_at(r + 1);
        if (!use_lgt && nr1 > 0.0) {
            const double turing = (r + 1) * nr1 / nr;
            const double sd = std::sqrt((r + 1.0) * (r + 1.0) * (nr1 / (nr * nr)) * (1.0 + nr1 / nr));
            if (std::fabs(turing - lgt) > 1.96 * sd) {
                rstar[r] = turing;
                continue;
            }
            use_lgt = true;  // once switched, LGT thereafter
        } else if (!use_lgt) {
            use_lgt = true;  // Turing undefined (m_{r+1} = 0)
        }
        rstar[r] = lgt;
    }
    // renormalize: seen mass totals 1 - m_1/n
    const double p0 = s.count_at(1) / s.n();
    double nprime = 0.0;
    for (long r : rs) nprime += s.count_at(r) * rstar[r];
    FrequencySpectrum out;
    out[1] = s.count_at(1);  // unseen-mass proxy: m'_1 = m_1 exactly
    for (long r : rs) {
        const double dl = (1.0 - p0) * s.count_at(r) * rstar[r] / nprime;  // total prob of freq-r species
        out[r + 1] = s.n() * dl / (r + 1);
    }
    return out;
}

}  // namespace detail

/// Smoothed (real-valued) frequency counts m'_l under the given rule.
/// PD and Poisson rules are evaluated on demand up to max_l; SGT produces
/// entries only where the sample supports them.
inline FrequencySpectrum smooth_spectrum(const SmoothingRule& rule, const SampleSummary& s,
                                         long max_l = 0) {
    if (max_l <= 0) max_l = std::max<long>(s.spectrum().rbegin()->first + 1, 50);
    FrequencySpectrum out;
    switch (rule.kind) {
        case SmoothingRule::Kind::PD: {
            if (!(rule.sigma > 0 && rule.sigma < 1)) throw DomainError("PD smoothing: sigma in (0,1)");
            // c_{sigma,l} built iteratively: c_{l+1} = c_l * (l - sigma)/(l + 1)
            double c = rule.sigma;
            for (long l = 1; l <= max_l; ++l) {
                out[l] = c * s.k();
                c *= (l - rule.sigma) / (l + 1);
            }
            break;
        }
        case SmoothingRule::Kind::Poisson: {
            const double lam = rule.lambda > 0 ? rule.lambda : static_cast<double>(s.n()) / s.k();
            for (long l = 1; l <= max_l; ++l) {
                const double j = static_cast<double>(rule.tau + l - 1);
                out[l] = s.k() * std::exp(-lam + j * std::log(lam) - std::lgamma(j + 1.0));
            }
            break;
        }
        case SmoothingRule::Kind::SGT:
            out = detail::sgt_smooth(s);
            break;
    }
    return out;
}

/// Smoothed Good-Turing estimate (l+1) m'_{l+1} / n.
inline DiscoveryEstimate smoothed_good_turing(const SmoothingRule& rule, const SampleSummary& s, long l) {
    const auto sp = smooth_spectrum(rule, s, l + 2);
    auto it = sp.find(l + 1);
    const double ml1 = it == sp.end() ? 0.0 : it->second;
    const char* name = rule.kind == SmoothingRule::Kind::PD       ? "pd-smooth"
                       : rule.kind == SmoothingRule::Kind::Poisson ? "poisson-smooth"
                                                                   : "sgt";
    return {name, 0, {l}, (l + 1) * ml1 / s.n()};
}

// ---- ground truth and the SSE metric ----------------------------------------

/// Known-population (0;l)-discovery. The sample must carry labeled counts:
/// label -> sample frequency; probs: label -> population probability.
inline double true_discovery(const std::map<std::string, double>& probs,
                             const std::map<std::string, long>& sample_counts, long l) {
    double v = 0.0;
    if (l == 0) {
        v = 1.0;
        for (const auto& [lab, c] : sample_counts) {
            auto it = probs.find(lab);
            if (it == probs.end()) throw UnknownSpecies("unknown label " + lab);
            v -= it->second;
        }
        return std::max(0.0, v);
    }
    for (const auto& [lab, c] : sample_counts) {
        if (c != l) continue;
        auto it = probs.find(lab);
        if (it == probs.end()) throw UnknownSpecies("unknown label " + lab);
        v += it->second;
    }
    return v;
}

/// Sum of squared errors over l; absent entries count as 0.
inline double sse(const std::map<long, double>& est, const std::map<long, double>& truth) {
    double v = 0.0;
    std::set<long> keys;
    for (const auto& [l, x] : est) keys.insert(l);
    for (const auto& [l, x] : truth) keys.insert(l);
    for (long l : keys) {
        auto a = est.count(l) ? est.at(l) : 0.0;
        auto b = truth.count(l) ? truth.at(l) : 0.0;
        v += (a - b) * (a - b);
    }
    return v;
}

// ---- Zeta populations -------------------------------------------------------

struct ZetaSample {
    SampleSummary summary;                 // with species_freqs
    std::map<std::string, long> counts;    // label ("z") -> sample frequency
    std::map<std::string, double> probs;   // observed labels -> population probability
    double s_param;
};

/// One Zeta(s) draw over unbounded support (Devroye's rejection-inversion).
inline long zeta_draw(double s, Rng& rng) {
    const double b = std::pow(2.0, s - 1.0);
    for (;;) {
        const double u = rng.uniform(), v = rng.uniform();
        const double x = std::floor(std::pow(u, -1.0 / (s - 1.0)));
        if (x < 1.0 || x > 9.0e18) continue;  // guard the cast
        const double t = std::pow(1.0 + 1.0 / x, s - 1.0);
        if (v * x * (t - 1.0) / (b - 1.0) <= t / b) return static_cast<long>(x);
    }
}

/// n iid Zeta(s) draws with the population accessor for true_discovery.
inline ZetaSample zeta_sample(double s, long n, Rng& rng) {
    if (!(s > 1.0)) throw DomainError("zeta_sample: s > 1");
    ZetaSample out;
    out.s_param = s;
    const double zeta_s = std::riemann_zeta(s);
    std::vector<std::string> tokens;
    tokens.reserve(n);
    for (long i = 0; i < n; ++i) {
        const long z = zeta_draw(s, rng);
        tokens.push_back(std::to_string(z));
    }
    for (const auto& t : tokens) ++out.counts[t];
    for (const auto& [lab, c] : out.counts)
        out.probs[lab] = std::pow(static_cast<double>(std::stol(lab)), -s) / zeta_s;
    out.summary = SampleSummary::from_raw_tokens(tokens);
    return out;
}

}  // namespace pyd
