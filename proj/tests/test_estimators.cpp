#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "pyd/estimators.hpp"

using namespace pyd;

namespace {

SampleSummary aerobic() { return load_spectrum_csv(testutil::data_path("naegleria_aerobic.csv")); }
SampleSummary anaerobic() { return load_spectrum_csv(testutil::data_path("naegleria_anaerobic.csv")); }
const PdParams kAer(0.669, 46.241);
const PdParams kAna(0.656, 155.408);

SampleSummary random_summary(Rng& rng, long max_l = 12, long max_ml = 20) {
    std::vector<std::pair<long, long>> pairs;
    const long lmax = 1 + static_cast<long>(rng.next_u64() % max_l);
    for (long l = 1; l <= lmax; ++l)
        if (rng.uniform() < 0.7) pairs.emplace_back(l, 1 + static_cast<long>(rng.next_u64() % max_ml));
    if (pairs.empty()) pairs.emplace_back(1, 1);
    return SampleSummary::from_spectrum(pairs);
}

PdParams random_params(Rng& rng) {
    const double s = 0.05 + 0.9 * rng.uniform();
    const double t = -s + 0.01 + std::exp(3.0 * rng.normal());
    return PdParams(s, t);
}

}  // namespace

TEST_CASE("zero-step discovery reduces to the one-step predictive") {
    auto s = aerobic();
    // (theta + sigma k)/(theta + n), quoted as 0.36 for this library
    const double d0 = bnp_discovery_value(kAer, s, 0, 0);
    CHECK(d0 == Catch::Approx((kAer.theta + kAer.sigma * s.k()) / (kAer.theta + s.n())).epsilon(1e-14));
    CHECK(d0 == Catch::Approx(0.36).margin(0.005));
    CHECK(bnp_discovery_value(kAna, anaerobic(), 0, 0) == Catch::Approx(0.51).margin(0.005));
    // l >= 1 at m = 0: (l - sigma) m_l / (theta + n)
    const double d1 = bnp_discovery_value(kAer, s, 0, 1);
    CHECK(d1 == Catch::Approx((1 - kAer.sigma) * s.count_at(1) / (kAer.theta + s.n())).epsilon(1e-12));
}

TEST_CASE("discoveries over all frequencies sum to one at m = 0") {
    Rng rng(31);
    for (int rep = 0; rep < 200; ++rep) {
        auto s = random_summary(rng);
        auto p = random_params(rng);
        double tot = bnp_discovery_value(p, s, 0, 0);
        for (const auto& [l, ml] : s.spectrum()) tot += bnp_discovery_value(p, s, 0, l);
        CHECK(tot == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("published extrapolation values for the aerobic library") {
    auto s = aerobic();
    const long n = s.n();
    CHECK(bnp_discovery_value(kAer, s, n, 0) == Catch::Approx(0.289).margin(0.0005));
    CHECK(bnp_discovery_value(kAer, s, 10 * n, 0) == Catch::Approx(0.165).margin(0.0005));
    CHECK(bnp_discovery_value(kAer, s, 100 * n, 0) == Catch::Approx(0.080).margin(0.0005));
}

TEST_CASE("published single-l and cumulative values at m = n, 2n, 3n") {
    struct Row {
        bool aer;
        long l;
        double at_n, at_2n, at_3n;
    };
    const Row rows[] = {
        {true, 0, 0.289, 0.253, 0.231},  {false, 0, 0.409, 0.358, 0.326},
        {true, 1, 0.093, 0.083, 0.075},  {false, 1, 0.130, 0.117, 0.108},
        {true, 2, 0.061, 0.054, 0.050},  {false, 2, 0.080, 0.075, 0.070},
        {true, 3, 0.046, 0.041, 0.038},  {false, 3, 0.059, 0.055, 0.052},
        {true, 4, 0.036, 0.034, 0.031},  {false, 4, 0.045, 0.044, 0.042},
    };
    auto sa = aerobic();
    auto sb = anaerobic();
    for (const auto& r : rows) {
        const auto& s = r.aer ? sa : sb;
        const auto& p = r.aer ? kAer : kAna;
        CHECK(bnp_discovery_value(p, s, s.n(), r.l) == Catch::Approx(r.at_n).margin(0.001));
        CHECK(bnp_discovery_value(p, s, 2 * s.n(), r.l) == Catch::Approx(r.at_2n).margin(0.001));
        CHECK(bnp_discovery_value(p, s, 3 * s.n(), r.l) == Catch::Approx(r.at_3n).margin(0.001));
    }
    const Row cum[] = {
        {true, 3, 0.490, 0.432, 0.394},  {false, 3, 0.679, 0.606, 0.556},
        {true, 4, 0.526, 0.465, 0.425},  {false, 4, 0.724, 0.650, 0.599},
        {true, 5, 0.556, 0.494, 0.452},  {false, 5, 0.760, 0.686, 0.634},
    };
    for (const auto& r : cum) {
        const auto& s = r.aer ? sa : sb;
        const auto& p = r.aer ? kAer : kAna;
        std::vector<long> ls;
        for (long l = 0; l <= r.l; ++l) ls.push_back(l);
        CHECK(bnp_cumulative(p, s, s.n(), ls).value == Catch::Approx(r.at_n).margin(0.001));
        CHECK(bnp_cumulative(p, s, 2 * s.n(), ls).value == Catch::Approx(r.at_2n).margin(0.001));
        CHECK(bnp_cumulative(p, s, 3 * s.n(), ls).value == Catch::Approx(r.at_3n).margin(0.001));
    }
    CHECK_THROWS_AS(bnp_cumulative(kAer, sa, sa.n(), {0, 1, 1}), InvalidTarget);
}

TEST_CASE("the two computation routes agree to high precision") {
    Rng rng(47);
    for (int rep = 0; rep < 200; ++rep) {
        auto s = random_summary(rng);
        auto p = random_params(rng);
        const long m = static_cast<long>(rng.next_u64() % 500);
        for (long l : {0L, 1L, 2L, 5L}) {
            if (l > s.n() + m) continue;
            const double a = bnp_discovery_value(p, s, m, l);
            const double b = bnp_discovery_via_identity(p, s, m, l).value;
            CHECK(a == Catch::Approx(b).margin(1e-10));
        }
    }
}

TEST_CASE("expected counts behave at the boundaries") {
    auto s = aerobic();
    CHECK(expected_new_species(kAer, s, 0) == 0.0);
    CHECK(expected_freq_count(kAer, s, 0, 3) ==
          Catch::Approx(static_cast<double>(s.count_at(3))).margin(1e-9));
    CHECK(expected_freq_count(kAer, s, 0, 20) == Catch::Approx(0.0).margin(1e-9));
    CHECK_THROWS_AS(expected_freq_count(kAer, s, 5, 0), OutOfRange);
    CHECK_THROWS_AS(bnp_discovery_value(kAer, s, 5, -1), OutOfRange);
    CHECK_THROWS_AS(bnp_discovery_value(kAer, s, 5, s.n() + 6), OutOfRange);
    // K grows monotonically in m
    double prev = 0.0;
    for (long m : {1L, 10L, 100L, 1000L}) {
        const double k = expected_new_species(kAer, s, m);
        CHECK(k > prev);
        prev = k;
    }
}

TEST_CASE("expected new species matches predictive simulation") {
    PdParams p(0.5, 2.0);
    auto s = SampleSummary::from_spectrum({{1, 3}, {2, 2}, {4, 1}}, true);  // n=11, k=6
    const long m = 40;
    Rng rng(88);
    const int reps = 20000;
    double mean = 0.0, sq = 0.0;
    for (int r = 0; r < reps; ++r) {
        auto c = simulate_continuation(p, s, m, rng);
        mean += c.k_new;
        sq += static_cast<double>(c.k_new) * c.k_new;
    }
    mean /= reps;
    const double sd = std::sqrt(sq / reps - mean * mean);
    CHECK(std::fabs(mean - expected_new_species(p, s, m)) <
          4 * sd / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("frequency-count estimator matches predictive simulation") {
    PdParams p(0.4, 1.5);
    auto s = SampleSummary::from_spectrum({{1, 2}, {3, 1}}, true);  // n=5, k=3
    const long m = 25;
    const int reps = 20000;
    for (long l : {1L, 2L, 4L}) {
        double mean = 0.0, sq = 0.0;
        for (int r = 0; r < reps; ++r) {
            Rng local(1000 + r, l);
            auto c = simulate_continuation(p, s, m, local);
            auto it = c.spectrum_after.find(l);
            const double v = it == c.spectrum_after.end() ? 0.0 : it->second;
            mean += v;
            sq += v * v;
        }
        mean /= reps;
        const double sd = std::sqrt(std::max(1e-12, sq / reps - mean * mean));
        CHECK(std::fabs(mean - expected_freq_count(p, s, m, l)) <
              4 * sd / std::sqrt(static_cast<double>(reps)));
    }
}

TEST_CASE("classic frequency-of-frequencies estimator") {
    auto s = SampleSummary::from_spectrum({{1, 4}, {2, 3}, {5, 1}});  // n=15
    CHECK(good_turing(s, 0).value == Catch::Approx(4.0 / 15));
    CHECK(good_turing(s, 1).value == Catch::Approx(2.0 * 3 / 15));
    CHECK(good_turing(s, 2).value == 0.0);  // m_3 = 0: the absurd-zero case
    CHECK(good_turing(s, 4).value == Catch::Approx(5.0 / 15));
    CHECK_THROWS_AS(good_turing(s, -1), OutOfRange);
}

TEST_CASE("alternating-series extrapolation and its instability") {
    auto s = SampleSummary::from_spectrum({{1, 4}, {2, 3}, {5, 1}});
    auto e0 = good_toulmin(s, 0);
    CHECK(e0.value == Catch::Approx(4.0 / 15));  // m = 0 reduces to the l = 0 estimate
    CHECK_FALSE(e0.unstable);
    // hand evaluation at m = n: gamma = 1
    auto e1 = good_toulmin(s, 15);
    const double hand = (4.0 - 2.0 * 3.0 + 5.0) / 15.0;
    CHECK(e1.value == Catch::Approx(hand));
    auto big = good_toulmin(s, 150);
    CHECK(big.unstable);
    auto clamped = good_toulmin(s, 150, true);
    CHECK(clamped.value >= 0.0);
    CHECK(clamped.value <= 1.0);
}

TEST_CASE("power-law smoothing: closed forms and total mass") {
    auto s = SampleSummary::from_spectrum({{1, 10}, {2, 5}});  // k = 15
    auto sp = smooth_spectrum(SmoothingRule::pd(0.5), s, 4);
    CHECK(sp[1] == Catch::Approx(0.5 * 15));
    CHECK(sp[2] == Catch::Approx(0.5 * 0.5 / 2 * 15));
    CHECK(sp[3] == Catch::Approx(0.5 * 0.5 * 1.5 / 6 * 15));
    // the proportions sum to 1 over l >= 1; the tail decays like l^(-1-sigma),
    // so add the analytic tail estimate c_L * L / sigma past the truncation
    for (double sigma : {0.2, 0.5, 0.8}) {
        const long L = 2000000;
        double c = sigma, tot = 0.0;
        for (long l = 1; l <= L; ++l) {
            tot += c;
            c *= (l - sigma) / (l + 1);
        }
        CHECK(tot < 1.0);
        CHECK(tot + c * (L + 1) / sigma == Catch::Approx(1.0).margin(2e-3));
    }
}

TEST_CASE("power-law-smoothed estimator tracks the exact one on real data") {
    auto s = aerobic();
    for (long l : {1L, 2L, 5L}) {
        const double smoothed = smoothed_good_turing(SmoothingRule::pd(kAer.sigma), s, l).value;
        const double exact = bnp_discovery_value(kAer, s, 0, l);
        CHECK(smoothed == Catch::Approx(exact).epsilon(0.25));
    }
}

TEST_CASE("Poisson smoothing closed form") {
    auto s = SampleSummary::from_spectrum({{1, 6}, {2, 2}});  // n = 10, k = 8
    const double lam = 10.0 / 8.0;
    auto sp = smooth_spectrum(SmoothingRule::poisson(1), s, 6);
    CHECK(sp[1] == Catch::Approx(8 * std::exp(-lam) * lam));
    CHECK(sp[5] == Catch::Approx(8 * std::exp(-lam) * std::pow(lam, 5) / 120.0));
    auto sp0 = smooth_spectrum(SmoothingRule::poisson(0, 2.0), s, 3);
    CHECK(sp0[1] == Catch::Approx(8 * std::exp(-2.0)));
}

TEST_CASE("frequency-count regression smoother") {
    CHECK_THROWS_AS(smooth_spectrum(SmoothingRule::sgt(), SampleSummary::from_spectrum({{1, 5}})),
                    InsufficientSpectrum);
    auto s = SampleSummary::from_spectrum(
        {{1, 120}, {2, 40}, {3, 24}, {4, 13}, {5, 15}, {6, 5}, {7, 11}, {8, 2}, {12, 3}});
    auto sm = smooth_spectrum(SmoothingRule::sgt(), s);
    // unseen-mass proxy is preserved exactly
    CHECK(sm[1] == Catch::Approx(s.count_at(1)));
    // renormalization: seen discovery mass totals 1 - m_1/n
    double seen = 0.0;
    for (const auto& [j, mj] : sm) {
        if (j == 1) continue;
        seen += j * mj / s.n();
    }
    CHECK(seen == Catch::Approx(1.0 - s.count_at(1) / s.n()).margin(1e-9));
    // smoothed estimator agrees with the raw one where counts are dense
    const double raw = good_turing(s, 1).value;
    CHECK(smoothed_good_turing(SmoothingRule::sgt(), s, 1).value == Catch::Approx(raw).epsilon(0.35));
}

TEST_CASE("ground-truth discovery partitions the population mass") {
    std::map<std::string, double> probs{{"a", 0.5}, {"b", 0.3}, {"c", 0.2}};
    std::map<std::string, long> counts{{"a", 3}, {"b", 1}};
    CHECK(true_discovery(probs, counts, 0) == Catch::Approx(0.2));
    CHECK(true_discovery(probs, counts, 1) == Catch::Approx(0.3));
    CHECK(true_discovery(probs, counts, 3) == Catch::Approx(0.5));
    CHECK(true_discovery(probs, counts, 2) == 0.0);
    double tot = true_discovery(probs, counts, 0);
    for (long l = 1; l <= 3; ++l) tot += true_discovery(probs, counts, l);
    CHECK(tot == Catch::Approx(1.0));
    CHECK_THROWS_AS(true_discovery(probs, {{"zzz", 1}}, 0), UnknownSpecies);
}

TEST_CASE("squared-error metric") {
    CHECK(sse({{0, 0.1}, {1, 0.2}}, {{0, 0.1}, {1, 0.2}}) == 0.0);
    CHECK(sse({{0, 0.3}}, {{0, 0.1}, {2, 0.2}}) == Catch::Approx(0.04 + 0.04));
}

TEST_CASE("heavy-tail population sampler hits the right law") {
    Rng rng(2718);
    // very large s: essentially all mass at 1
    long ones = 0;
    for (int i = 0; i < 2000; ++i)
        if (zeta_draw(20.0, rng) == 1) ++ones;
    CHECK(ones >= 1999);
    // s = 1.5: check the first few atoms by chi-square
    const double s = 1.5;
    const double z = std::riemann_zeta(s);
    const int reps = 100000;
    std::vector<double> obs(8, 0.0), expd(8, 0.0);
    for (int i = 0; i < reps; ++i) {
        const long x = zeta_draw(s, rng);
        obs[std::min<long>(x - 1, 7)] += 1.0;
    }
    double head = 0.0;
    for (long v = 1; v <= 7; ++v) {
        expd[v - 1] = reps * std::pow(static_cast<double>(v), -s) / z;
        head += expd[v - 1];
    }
    expd[7] = reps - head;
    CHECK(testutil::chi_square_pvalue(obs, expd) > 0.001);
}

TEST_CASE("heavy-tail sample carries a consistent population accessor") {
    Rng rng(99);
    auto zs = zeta_sample(1.6, 1000, rng);
    CHECK(zs.summary.n() == 1000);
    CHECK(zs.summary.k() == static_cast<long>(zs.counts.size()));
    double tot = true_discovery(zs.probs, zs.counts, 0);
    std::set<long> freqs(zs.summary.species_freqs().begin(), zs.summary.species_freqs().end());
    for (long l : freqs) tot += true_discovery(zs.probs, zs.counts, l);
    CHECK(tot == Catch::Approx(1.0).margin(1e-12));
    CHECK_THROWS_AS(zeta_sample(1.0, 10, rng), DomainError);
}

TEST_CASE("discrete mixture representation of the smoothing proportions") {
    // L has P[L = l] = sigma (1-sigma)_{l-1} / l!; equivalently L = 1 + Poisson(W)
    // with W = E * G(1-sigma) / G(sigma) for an exponential and two gammas.
    const double sigma = 0.5;
    Rng rng(314);
    const int reps = 100000;
    const int L = 30;
    std::vector<double> obs(L + 1, 0.0), expd(L + 1, 0.0);
    auto poisson = [&](double lam) -> long {
        if (lam > 100.0) return 1000000;  // lands in the tail bucket with prob ~1
        long c = 0;
        double acc = 0.0;
        for (;;) {
            acc += rng.exponential();
            if (acc > lam) return c;
            ++c;
        }
    };
    for (int i = 0; i < reps; ++i) {
        const double w = rng.exponential() * rng.gamma(1.0 - sigma) / rng.gamma(sigma);
        const long l = 1 + poisson(w);
        obs[std::min<long>(l, L)] += 1.0;
    }
    double head = 0.0;
    for (long l = 1; l < L; ++l) {
        expd[l] = reps * spectrum_coeff(sigma, l);
        head += expd[l];
    }
    expd[L] = reps - head;
    obs.erase(obs.begin());
    expd.erase(expd.begin());
    CHECK(testutil::chi_square_pvalue(obs, expd) > 0.001);
}
