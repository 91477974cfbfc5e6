#pragma once

#include <cmath>
#include <cstdint>

#include "pyd/errors.hpp"
#include "pyd/rng.hpp"

namespace pyd {

/// One exact draw of a positive sigma-stable variable with Laplace transform
/// exp(-t^sigma), via the Kanter integral representation:
///   S = (A(U)/E)^{(1-sigma)/sigma},  U ~ U(0,pi), E ~ Exp(1),
///   A(u) = [sin(sigma*u)^sigma * sin((1-sigma)*u)^{1-sigma} / sin(u)]^{1/(1-sigma)}.
/// No density evaluation is needed.
inline double sample_positive_stable(double sigma, Rng& rng) {
    if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("sigma must lie in (0,1)");
    const double u = rng.uniform() * 3.14159265358979323846;
    const double e = rng.exponential();
    const double log_a = (sigma * std::log(std::sin(sigma * u)) +
                          (1.0 - sigma) * std::log(std::sin((1.0 - sigma) * u)) -
                          std::log(std::sin(u))) /
                         (1.0 - sigma);
    return std::exp((1.0 - sigma) / sigma * (log_a - std::log(e)));
}

/// Hofert's fast rejection sampler for the exponentially tilted stable law
/// with density proportional to exp(-u*x) f_sigma(x):
///   r = max(1, round(u^sigma)); sum of r blocks, each block proposing a
///   stable draw scaled by r^{-1/sigma} and accepting with prob exp(-u*X).
/// Expected proposals per block are exp(u^sigma / r) ~ e at the chosen r.
inline double sample_tilted_stable(double sigma, double u, Rng& rng,
                                   std::uint64_t proposal_cap = 1000000000ULL,
                                   std::uint64_t* proposals_out = nullptr,
                                   long* blocks_out = nullptr) {
    if (u < 0.0) throw DomainError("tilt must be >= 0");
    if (u == 0.0) return sample_positive_stable(sigma, rng);
    const double us = std::pow(u, sigma);
    const long r = std::max<long>(1, std::lround(us));
    const double scale = std::pow(static_cast<double>(r), -1.0 / sigma);
    double total = 0.0;
    std::uint64_t proposals = 0;
    for (long b = 0; b < r; ++b) {
        for (;;) {
            if (++proposals > proposal_cap) throw SamplerStall();
            const double x = scale * sample_positive_stable(sigma, rng);
            if (rng.uniform() < std::exp(-u * x)) {
                total += x;
                break;
            }
        }
    }
    if (proposals_out) *proposals_out += proposals;
    if (blocks_out) *blocks_out += r;
    return total;
}

/// Z_{sigma,q}: draw U = G^{1/sigma} with G ~ Gamma(q,1), tilt a stable draw by
/// U, return L^{-sigma}.
inline double sample_Z(double sigma, double q, Rng& rng) {
    if (!(q > 0.0)) throw DomainError("sample_Z: q > 0");
    const double g = rng.gamma(q);
    const double u = std::pow(g, 1.0 / sigma);
    const double l = sample_tilted_stable(sigma, u, rng);
    return std::pow(l, -sigma);
}

}  // namespace pyd
