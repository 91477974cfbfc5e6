#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "pyd/errors.hpp"
#include "pyd/kernels.hpp"
#include "pyd/rng.hpp"
#include "pyd/sample.hpp"

namespace pyd {

/// PD(sigma, theta) parameter pair; sigma in (0,1), theta > -sigma.
struct PdParams {
    double sigma;
    double theta;

    PdParams(double s, double t) : sigma(s), theta(t) {
        if (!(s > 0.0 && s < 1.0)) throw DomainError("sigma must lie in (0,1)");
        if (!(t > -s)) throw DomainError("theta must exceed -sigma");
    }
};

/// EPPF log-likelihood of the observed partition:
///   log [ prod_{i=0}^{k-1}(theta + i*sigma) / (theta)_n * prod_i (1-sigma)_{n_i - 1} ]
/// Grouping species by frequency makes the cost O(k + |spectrum|).
inline double eppf_loglik(const PdParams& p, const SampleSummary& s) {
    if (!s.has_species_freqs()) throw NeedsFrequencies();
    double ll = 0.0;
    for (long i = 0; i < s.k(); ++i) ll += std::log(p.theta + i * p.sigma);
    ll -= log_pochhammer(p.theta, static_cast<double>(s.n()));
    for (const auto& [l, ml] : s.spectrum())
        ll += ml * log_pochhammer(1.0 - p.sigma, static_cast<double>(l - 1));
    return ll;
}

struct FitResult {
    PdParams params;
    double loglik;
    bool boundary_warning;  // optimizer ended within tolerance of sigma -> 0 or 1
};

struct FitConfig {
    double sigma_lo = 0.01, sigma_hi = 0.99, sigma_step = 0.02;
    double theta_lo = 1e-2, theta_hi = 1e4;
    int theta_grid = 40;
    double tol = 1e-8;      // Nelder-Mead convergence on log-likelihood
    int max_iter = 2000;
};

namespace detail {

/// Minimal Nelder-Mead in R^2.
inline std::array<double, 2> nelder_mead_2d(const std::function<double(const std::array<double, 2>&)>& f,
                                            std::array<double, 2> x0, double scale, double tol,
                                            int max_iter) {
    struct Vertex {
        std::array<double, 2> x;
        double fx;
    };
    std::array<Vertex, 3> v;
    v[0] = {x0, f(x0)};
    for (int i = 0; i < 2; ++i) {
        auto x = x0;
        x[i] += scale;
        v[i + 1] = {x, f(x)};
    }
    auto order = [&] { std::sort(v.begin(), v.end(), [](const Vertex& a, const Vertex& b) { return a.fx < b.fx; }); };
    for (int it = 0; it < max_iter; ++it) {
        order();
        if (std::fabs(v[2].fx - v[0].fx) < tol) break;
        const std::array<double, 2> c = {(v[0].x[0] + v[1].x[0]) / 2, (v[0].x[1] + v[1].x[1]) / 2};
        auto at = [&](double t) {
            return std::array<double, 2>{c[0] + t * (c[0] - v[2].x[0]), c[1] + t * (c[1] - v[2].x[1])};
        };
        auto xr = at(1.0);
        double fr = f(xr);
        if (fr < v[0].fx) {
            auto xe = at(2.0);
            double fe = f(xe);
            v[2] = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
        } else if (fr < v[1].fx) {
            v[2] = {xr, fr};
        } else {
            auto xc = at(fr < v[2].fx ? 0.5 : -0.5);
            double fc = f(xc);
            if (fc < std::min(fr, v[2].fx)) {
                v[2] = {xc, fc};
            } else {
                for (int i = 1; i < 3; ++i) {
                    for (int d = 0; d < 2; ++d) v[i].x[d] = (v[i].x[d] + v[0].x[d]) / 2;
                    v[i].fx = f(v[i].x);
                }
            }
        }
    }
    order();
    return v[0].x;
}

}  // namespace detail

/// Empirical Bayes argmax of the EPPF over the admissible region: coarse grid
/// scan, then Nelder-Mead in (logit sigma, log(theta + sigma + eps)).
/// Deterministic for a fixed config.
inline FitResult fit_empirical_bayes(const SampleSummary& s, const FitConfig& cfg = {}) {
    if (!s.has_species_freqs()) throw NeedsFrequencies();
    if (s.n() < 2) {
        // Degenerate: a single observation carries no information on (sigma, theta).
        return {PdParams(0.5, 1.0), 0.0, true};
    }
    constexpr double kEps = 1e-6;
    auto obj = [&](const std::array<double, 2>& x) {
        const double sig = 1.0 / (1.0 + std::exp(-x[0]));
        const double th = std::exp(x[1]) - sig + kEps;
        if (!(sig > 0 && sig < 1) || !(th > -sig)) return 1e300;
        return -eppf_loglik(PdParams(sig, th), s);
    };
    std::array<double, 2> best{};
    double best_f = 1e300;
    const double lr = std::log(cfg.theta_hi / cfg.theta_lo);
    for (double sig = cfg.sigma_lo; sig <= cfg.sigma_hi + 1e-12; sig += cfg.sigma_step) {
        for (int j = 0; j < cfg.theta_grid; ++j) {
            const double th = cfg.theta_lo * std::exp(lr * j / (cfg.theta_grid - 1.0));
            std::array<double, 2> x = {std::log(sig / (1.0 - sig)), std::log(th + sig - kEps)};
            const double fx = obj(x);
            if (fx < best_f) {
                best_f = fx;
                best = x;
            }
        }
    }
    auto xopt = detail::nelder_mead_2d(obj, best, 0.1, cfg.tol, cfg.max_iter);
    const double sig = 1.0 / (1.0 + std::exp(-xopt[0]));
    const double th = std::exp(xopt[1]) - sig + kEps;
    const bool boundary = sig < 2e-3 || sig > 1.0 - 2e-3;
    PdParams p(sig, th);
    return {p, eppf_loglik(p, s), boundary};
}

// ---- predictive simulation --------------------------------------------------

namespace detail {

/// Mutable chain state for the species-sampling predictive rule. The next
/// observation is new with probability (theta + sigma*k)/(theta + n); otherwise
/// species i is chosen with probability (n_i - sigma)/(theta + n), realized by
/// the split n_i - sigma = (n_i - 1)*1 + (1 - sigma) so every step is O(1).
struct PredictiveState {
    std::vector<long> counts;   // n_i per species
    std::vector<long> dup_bag;  // species index repeated (n_i - 1) times
    long n = 0;

    long k() const { return static_cast<long>(counts.size()); }

    void seed_from(const std::vector<long>& freqs) {
        counts = freqs;
        for (long i = 0; i < static_cast<long>(freqs.size()); ++i) {
            n += freqs[i];
            for (long j = 1; j < freqs[i]; ++j) dup_bag.push_back(i);
        }
    }

    /// Advances one step; returns true when a new species was created.
    bool step(const PdParams& p, Rng& rng) {
        const double total = p.theta + static_cast<double>(n);
        const double v = rng.uniform() * total;
        const double new_mass = p.theta + p.sigma * k();
        long who;
        bool is_new = false;
        if (v < new_mass || counts.empty()) {
            counts.push_back(0);
            who = k() - 1;
            is_new = true;
        } else {
            const double w = v - new_mass;  // in [0, n - sigma*k)
            const double dup_mass = static_cast<double>(n - k());
            if (w < dup_mass && !dup_bag.empty()) {
                who = dup_bag[std::min<std::size_t>(static_cast<std::size_t>(w), dup_bag.size() - 1)];
            } else {
                auto idx = static_cast<std::size_t>((w - dup_mass) / (1.0 - p.sigma));
                who = static_cast<long>(std::min<std::size_t>(idx, counts.size() - 1));
            }
        }
        if (counts[who] >= 1) dup_bag.push_back(who);
        ++counts[who];
        ++n;
        return is_new;
    }

    FrequencySpectrum spectrum() const {
        FrequencySpectrum sp;
        for (long c : counts)
            if (c > 0) sp[c] += 1.0;
        return sp;
    }
};

}  // namespace detail

/// Draws a sample of size n from the PD(sigma,theta) predictive chain.
inline SampleSummary simulate_sample(const PdParams& p, long n, Rng& rng) {
    if (n < 1) throw DomainError("simulate_sample: n >= 1");
    detail::PredictiveState st;
    for (long i = 0; i < n; ++i) st.step(p, rng);
    std::vector<std::pair<long, long>> pairs;
    for (const auto& [l, ml] : st.spectrum()) pairs.emplace_back(l, static_cast<long>(ml));
    return SampleSummary::from_spectrum(pairs, /*with_freqs=*/true);
}

struct ContinuationResult {
    long k_new;
    FrequencySpectrum spectrum_after;
};

/// Continues the predictive chain m steps from the observed state; returns the
/// number of new species and the enlarged-sample spectrum.
inline ContinuationResult simulate_continuation(const PdParams& p, const SampleSummary& s, long m,
                                                Rng& rng) {
    detail::PredictiveState st;
    st.seed_from(s.species_freqs());
    long k0 = st.k();
    for (long i = 0; i < m; ++i) st.step(p, rng);
    return {st.k() - k0, st.spectrum()};
}

// ---- grid posterior over (sigma, theta) -------------------------------------

struct PriorConfig {
    double gamma_shape = 1.0;
    double gamma_scale = 100.0;  // scale parameterization, prior mean shape*scale = 100
    bool scale_is_rate = false;
};

struct GridPosterior {
    std::vector<double> sigma_grid;
    std::vector<double> theta_grid;
    std::vector<std::vector<double>> log_density;  // [sigma][theta], normalized
    double mode_sigma = 0.0, mode_theta = 0.0;
};

/// Unnormalized log posterior = EPPF + log prior (uniform sigma, Gamma theta);
/// normalized over the grid by trapezoidal quadrature.
inline GridPosterior posterior_grid(const SampleSummary& s, const std::vector<double>& sigma_grid,
                                    const std::vector<double>& theta_grid, const PriorConfig& prior = {}) {
    if (sigma_grid.empty() || theta_grid.empty()) throw InvalidGrid("empty grid");
    for (double sg : sigma_grid)
        if (!(sg > 0.0 && sg < 1.0)) throw InvalidGrid("sigma grid outside (0,1)");
    for (double tg : theta_grid)
        if (!(tg > 0.0)) throw InvalidGrid("theta grid must be positive");
    const double rate = prior.scale_is_rate ? prior.gamma_scale : 1.0 / prior.gamma_scale;
    GridPosterior g;
    g.sigma_grid = sigma_grid;
    g.theta_grid = theta_grid;
    g.log_density.assign(sigma_grid.size(), std::vector<double>(theta_grid.size()));
    double best = -1e300;
    for (std::size_t i = 0; i < sigma_grid.size(); ++i) {
        for (std::size_t j = 0; j < theta_grid.size(); ++j) {
            const double lp = eppf_loglik(PdParams(sigma_grid[i], theta_grid[j]), s) +
                              (prior.gamma_shape - 1.0) * std::log(theta_grid[j]) -
                              rate * theta_grid[j];
            g.log_density[i][j] = lp;
            if (lp > best) {
                best = lp;
                g.mode_sigma = sigma_grid[i];
                g.mode_theta = theta_grid[j];
            }
        }
    }
    // trapezoidal weights
    auto weights = [](const std::vector<double>& grid) {
        std::vector<double> w(grid.size(), 0.0);
        if (grid.size() == 1) {
            w[0] = 1.0;
            return w;
        }
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            const double h = grid[i + 1] - grid[i];
            w[i] += h / 2;
            w[i + 1] += h / 2;
        }
        return w;
    };
    const auto ws = weights(sigma_grid);
    const auto wt = weights(theta_grid);
    std::vector<double> cells;
    cells.reserve(sigma_grid.size() * theta_grid.size());
    for (std::size_t i = 0; i < sigma_grid.size(); ++i)
        for (std::size_t j = 0; j < theta_grid.size(); ++j)
            cells.push_back(g.log_density[i][j] + std::log(ws[i]) + std::log(wt[j]));
    const double lz = log_sum_exp(cells);
    for (auto& row : g.log_density)
        for (auto& v : row) v -= lz;
    return g;
}

/// CSV export "sigma,theta,log_density" for external contour plotting.
inline void save_grid_csv(const GridPosterior& g, std::ostream& out) {
    out << "sigma,theta,log_density\n";
    out.precision(12);
    for (std::size_t i = 0; i < g.sigma_grid.size(); ++i)
        for (std::size_t j = 0; j < g.theta_grid.size(); ++j)
            out << g.sigma_grid[i] << ',' << g.theta_grid[j] << ',' << g.log_density[i][j] << '\n';
}

}  // namespace pyd
