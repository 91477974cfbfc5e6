// Command-line front end for discovery-probability estimation.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pyd/estimators.hpp"
#include "pyd/intervals.hpp"
#include "pyd/pyp.hpp"
#include "pyd/sample.hpp"

using json = nlohmann::ordered_json;
using namespace pyd;

namespace {

struct CommonOpts {
    std::string spectrum_path, tokens_path;
    double sigma = -1.0, theta = 0.0;
    bool use_fit = false;
    std::vector<std::string> m_tokens;
    std::vector<long> ls;
    std::vector<long> cumulative;
    std::vector<std::string> estimators;
    std::string smoother;
    std::string scaling = "rstar";
    double level = 0.95;
    long draws = 100000;
    std::uint64_t seed = 0;
    std::string format = "json";
    std::string out_path;
    bool exact = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_input) {
    auto* sp = cmd->add_option("--spectrum", o.spectrum_path, "frequency spectrum CSV (l,count)");
    auto* tk = cmd->add_option("--tokens", o.tokens_path, "newline-delimited raw tokens");
    sp->excludes(tk);
    if (needs_input) {
        // one of the two is required; checked after parse so the error message is ours
    }
    cmd->add_option("--sigma", o.sigma, "discount parameter in (0,1)");
    cmd->add_option("--theta", o.theta, "concentration parameter, > -sigma");
    cmd->add_flag("--fit", o.use_fit, "use the empirical Bayes fit for (sigma, theta)");
    cmd->add_option("--m", o.m_tokens, "additional sample sizes; integers or n/10n/100n tokens")
        ->delimiter(',');
    cmd->add_option("--l", o.ls, "single frequency targets")->delimiter(',');
    cmd->add_option("--cumulative", o.cumulative, "one cumulative target, e.g. 0,1,2,3")
        ->delimiter(',');
    cmd->add_option("--estimator", o.estimators,
                    "subset of bnp,gt,gtoulmin,sgt,poisson-smooth,pd-smooth")
        ->delimiter(',');
    cmd->add_option("--smoother", o.smoother, "pd|poisson|sgt (adds the matching estimator)");
    cmd->add_option("--scaling", o.scaling, "naive|rstar")->check(CLI::IsMember({"naive", "rstar"}));
    cmd->add_option("--level", o.level, "credible level in (0,1)");
    cmd->add_option("--draws", o.draws, "Monte Carlo draws of the posterior limit variable");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--format", o.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--out", o.out_path, "output file (default stdout)");
    cmd->add_flag("--exact", o.exact, "exact pmf-based interval for l = 0 (small m only)");
}

SampleSummary load_input(const CommonOpts& o) {
    if (!o.spectrum_path.empty()) return load_spectrum_csv(o.spectrum_path, /*with_freqs=*/true);
    if (!o.tokens_path.empty()) return load_tokens(o.tokens_path);
    throw Error("an input is required: --spectrum or --tokens");
}

PdParams resolve_params(const CommonOpts& o, const SampleSummary& s) {
    const bool has_explicit = o.sigma >= 0.0;
    if (has_explicit == o.use_fit)
        throw Error("give exactly one of --sigma/--theta or --fit");
    if (has_explicit) return PdParams(o.sigma, o.theta);
    return fit_empirical_bayes(s).params;
}

long parse_m_token(const std::string& tok, const SampleSummary& s) {
    std::string t = tok;
    long mult = 1;
    if (!t.empty() && t.back() == 'n') {
        t.pop_back();
        mult = t.empty() ? 1 : std::stol(t);
        return mult * s.n();
    }
    return std::stol(t);
}

std::vector<long> resolve_m(const CommonOpts& o, const SampleSummary& s) {
    std::vector<long> ms;
    for (const auto& t : o.m_tokens) {
        long m = 0;
        try {
            m = parse_m_token(t, s);
        } catch (const std::exception&) {
            throw Error("bad --m token: " + t);
        }
        if (m < 0) throw Error("m must be >= 0");
        ms.push_back(m);
    }
    if (ms.empty()) ms.push_back(s.n());
    return ms;
}

std::string config_line(const std::string& cmd, const CommonOpts& o) {
    std::ostringstream ss;
    ss << "cmd=" << cmd;
    if (!o.spectrum_path.empty()) ss << " spectrum=" << o.spectrum_path;
    if (!o.tokens_path.empty()) ss << " tokens=" << o.tokens_path;
    if (o.sigma >= 0.0) ss << " sigma=" << o.sigma << " theta=" << o.theta;
    if (o.use_fit) ss << " fit=1";
    if (!o.m_tokens.empty()) {
        ss << " m=";
        for (std::size_t i = 0; i < o.m_tokens.size(); ++i) ss << (i ? "," : "") << o.m_tokens[i];
    }
    ss << " scaling=" << o.scaling << " level=" << o.level << " draws=" << o.draws
       << " seed=" << o.seed;
    return ss.str();
}

void emit(const CommonOpts& o, const json& doc, const std::string& csv) {
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!o.out_path.empty()) {
        file.open(o.out_path);
        if (!file) throw Error("cannot write " + o.out_path);
        out = &file;
    }
    if (o.format == "json")
        *out << doc.dump(2) << '\n';
    else
        *out << csv;
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::setprecision(10) << v;
    return ss.str();
}

std::string target_str(const std::vector<long>& t) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < t.size(); ++i) ss << (i ? "+" : "") << t[i];
    return ss.str();
}

// ---- fit --------------------------------------------------------------------

int cmd_fit(const CommonOpts& o) {
    auto s = load_input(o);
    auto f = fit_empirical_bayes(s);
    json doc;
    doc["config"] = config_line("fit", o);
    doc["n"] = s.n();
    doc["k"] = s.k();
    doc["sigma"] = f.params.sigma;
    doc["theta"] = f.params.theta;
    doc["loglik"] = f.loglik;
    doc["boundary_warning"] = f.boundary_warning;
    std::ostringstream csv;
    csv << "# " << config_line("fit", o) << "\n"
        << "n,k,sigma,theta,loglik,boundary_warning\n"
        << s.n() << ',' << s.k() << ',' << fmt(f.params.sigma) << ',' << fmt(f.params.theta) << ','
        << fmt(f.loglik) << ',' << (f.boundary_warning ? 1 : 0) << '\n';
    emit(o, doc, csv.str());
    if (f.boundary_warning) std::cerr << "warning: fit ended at the parameter boundary\n";
    return 0;
}

// ---- estimate ---------------------------------------------------------------

int cmd_estimate(const CommonOpts& o) {
    auto s = load_input(o);
    std::vector<std::string> est = o.estimators;
    if (o.smoother == "pd")
        est.push_back("pd-smooth");
    else if (o.smoother == "poisson")
        est.push_back("poisson-smooth");
    else if (o.smoother == "sgt")
        est.push_back("sgt");
    else if (!o.smoother.empty())
        throw Error("unknown --smoother: " + o.smoother);
    if (est.empty()) est = {"bnp"};
    const auto ms = resolve_m(o, s);
    std::vector<long> ls = o.ls;
    if (ls.empty() && o.cumulative.empty()) ls = {0};

    std::optional<PdParams> params;
    auto need_params = [&]() -> const PdParams& {
        if (!params) params = resolve_params(o, s);
        return *params;
    };

    std::vector<DiscoveryEstimate> rows;
    for (const auto& e : est) {
        if (e == "bnp") {
            for (long m : ms) {
                for (long l : ls) rows.push_back(bnp_discovery(need_params(), s, m, l));
                if (!o.cumulative.empty())
                    rows.push_back(bnp_cumulative(need_params(), s, m, o.cumulative));
            }
        } else if (e == "gt") {
            for (long l : ls) rows.push_back(good_turing(s, l));
        } else if (e == "gtoulmin") {
            for (long m : ms) rows.push_back(good_toulmin(s, m));
        } else if (e == "pd-smooth") {
            const double sg = o.sigma >= 0.0 || o.use_fit ? need_params().sigma : 0.5;
            for (long l : ls) rows.push_back(smoothed_good_turing(SmoothingRule::pd(sg), s, l));
        } else if (e == "poisson-smooth") {
            for (long l : ls) rows.push_back(smoothed_good_turing(SmoothingRule::poisson(), s, l));
        } else if (e == "sgt") {
            for (long l : ls) rows.push_back(smoothed_good_turing(SmoothingRule::sgt(), s, l));
        } else {
            throw Error("unknown estimator: " + e);
        }
    }

    json doc;
    doc["config"] = config_line("estimate", o);
    doc["rows"] = json::array();
    std::ostringstream csv;
    csv << "# " << config_line("estimate", o) << "\n"
        << "estimator,m,target,value,unstable\n";
    for (const auto& r : rows) {
        json jr;
        jr["estimator"] = r.estimator;
        jr["m"] = r.m;
        jr["target"] = r.target;
        jr["value"] = r.value;
        jr["unstable"] = r.unstable;
        doc["rows"].push_back(jr);
        csv << r.estimator << ',' << r.m << ',' << target_str(r.target) << ',' << fmt(r.value)
            << ',' << (r.unstable ? 1 : 0) << '\n';
    }
    emit(o, doc, csv.str());
    return 0;
}

// ---- interval ---------------------------------------------------------------

int cmd_interval(const CommonOpts& o) {
    auto s = load_input(o);
    const auto params = resolve_params(o, s);
    const auto ms = resolve_m(o, s);
    std::vector<std::vector<long>> targets;
    std::vector<long> ls = o.ls;
    if (ls.empty() && o.cumulative.empty()) ls = {0};
    for (long l : ls) targets.push_back({l});
    if (!o.cumulative.empty()) targets.push_back(o.cumulative);
    const Scaling sc = o.scaling == "naive" ? Scaling::naive : Scaling::r_star;

    // one shared batch of posterior draws serves every (m, target) pair
    std::vector<double> sorted_z;
    const bool need_mc = std::any_of(ms.begin(), ms.end(), [](long m) { return m > 0; });
    if (need_mc && !o.exact) {
        if (!(o.level > 0.0 && o.level < 1.0)) throw DomainError("level in (0,1)");
        if (o.draws < 1000) throw DomainError("draws >= 1000");
        ZPosteriorSampler zs(params, s.n(), s.k(), o.seed);
        sorted_z = zs.draw(o.draws, 0);
        std::sort(sorted_z.begin(), sorted_z.end());
    }

    json doc;
    doc["config"] = config_line("interval", o);
    doc["sigma"] = params.sigma;
    doc["theta"] = params.theta;
    doc["rows"] = json::array();
    std::ostringstream csv;
    csv << "# " << config_line("interval", o) << "\n"
        << "# sigma=" << fmt(params.sigma) << " theta=" << fmt(params.theta) << "\n"
        << "m,target,estimate,lo,hi,level,method\n";
    for (long m : ms) {
        for (const auto& t : targets) {
            double value;
            CredibleInterval ci;
            if (m == 0) {
                value = 0.0;
                for (long l : t) value += bnp_discovery_value(params, s, 0, l);
                ci = {value, value, o.level, "degenerate-m0", 0};
            } else if (o.exact) {
                if (t.size() != 1 || t[0] != 0)
                    throw Unsupported("--exact supports the single target l = 0 only");
                value = bnp_discovery_value(params, s, m, 0);
                ci = exact_interval_new_species_based(params, s, m, 0, o.level);
            } else {
                value = sc == Scaling::naive
                            ? asymptotic_estimate(params, s, m, t, sc).value
                            : (t.size() == 1 ? bnp_discovery_value(params, s, m, t[0])
                                             : bnp_cumulative(params, s, m, t).value);
                ci = credible_interval_from_draws(params, s, m, t, o.level, sorted_z, sc);
            }
            json jr;
            jr["m"] = m;
            jr["target"] = t;
            jr["estimate"] = value;
            jr["lo"] = ci.lo;
            jr["hi"] = ci.hi;
            jr["level"] = ci.level;
            jr["method"] = ci.method;
            doc["rows"].push_back(jr);
            csv << m << ',' << target_str(t) << ',' << fmt(value) << ',' << fmt(ci.lo) << ','
                << fmt(ci.hi) << ',' << fmt(ci.level) << ',' << ci.method << '\n';
        }
    }
    emit(o, doc, csv.str());
    return 0;
}

// ---- simulate ---------------------------------------------------------------

int cmd_simulate(const CommonOpts& o, double s_param, long n, long reps) {
    Rng rng(o.seed);
    std::vector<ZetaSample> samples;
    samples.reserve(reps);
    for (long r = 0; r < reps; ++r) samples.push_back(zeta_sample(s_param, n, rng));
    // rank by observed species count and keep one sample per quintile
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return samples[a].summary.k() < samples[b].summary.k();
    });
    std::vector<std::size_t> picks;
    const long groups = std::min<long>(5, reps);
    for (long g = 0; g < groups; ++g)
        picks.push_back(order[(2 * g + 1) * order.size() / (2 * groups)]);

    const std::vector<long> report_ls = {0, 1, 5, 10, 20, 30};
    json doc;
    doc["config"] = config_line("simulate", o) + " s=" + fmt(s_param) + " n=" + std::to_string(n) +
                    " reps=" + std::to_string(reps);
    doc["samples"] = json::array();
    std::ostringstream csv;
    csv << "# " << doc["config"].get<std::string>() << "\n"
        << "sample,k,sigma,theta,l,true,bnp,gt,poisson,pd,sgt\n";
    std::ostringstream sse_csv;
    sse_csv << "sample,sse_bnp,sse_gt,sse_poisson,sse_pd,sse_sgt\n";

    int idx = 0;
    for (std::size_t pi : picks) {
        const auto& zs = samples[pi];
        const auto& sum = zs.summary;
        auto f = fit_empirical_bayes(sum);
        const auto& p = f.params;
        ++idx;

        auto est_all = [&](long l) {
            json e;
            e["l"] = l;
            e["true"] = true_discovery(zs.probs, zs.counts, l);
            e["bnp"] = bnp_discovery_value(p, sum, 0, l);
            e["gt"] = l <= sum.n() ? good_turing(sum, l).value : 0.0;
            e["poisson"] = smoothed_good_turing(SmoothingRule::poisson(), sum, l).value;
            e["pd"] = smoothed_good_turing(SmoothingRule::pd(p.sigma), sum, l).value;
            e["sgt"] = smoothed_good_turing(SmoothingRule::sgt(), sum, l).value;
            return e;
        };

        json js;
        js["sample"] = idx;
        js["k"] = sum.k();
        js["sigma"] = p.sigma;
        js["theta"] = p.theta;
        js["rows"] = json::array();
        for (long l : report_ls) {
            auto e = est_all(l);
            js["rows"].push_back(e);
            csv << idx << ',' << sum.k() << ',' << fmt(p.sigma) << ',' << fmt(p.theta) << ',' << l
                << ',' << fmt(e["true"].get<double>()) << ',' << fmt(e["bnp"].get<double>()) << ','
                << fmt(e["gt"].get<double>()) << ',' << fmt(e["poisson"].get<double>()) << ','
                << fmt(e["pd"].get<double>()) << ',' << fmt(e["sgt"].get<double>()) << '\n';
        }

        // SSE over every frequency present in either the sample or the truth
        std::map<long, double> tr, ebnp, egt, epoi, epd, esgt;
        std::set<long> freqs(sum.species_freqs().begin(), sum.species_freqs().end());
        freqs.insert(0);
        for (long l : freqs) {
            tr[l] = true_discovery(zs.probs, zs.counts, l);
            ebnp[l] = bnp_discovery_value(p, sum, 0, l);
            egt[l] = good_turing(sum, l).value;
            epoi[l] = smoothed_good_turing(SmoothingRule::poisson(), sum, l).value;
            epd[l] = smoothed_good_turing(SmoothingRule::pd(p.sigma), sum, l).value;
            esgt[l] = smoothed_good_turing(SmoothingRule::sgt(), sum, l).value;
        }
        js["sse"] = {{"bnp", sse(ebnp, tr)}, {"gt", sse(egt, tr)},      {"poisson", sse(epoi, tr)},
                     {"pd", sse(epd, tr)},   {"sgt", sse(esgt, tr)}};
        sse_csv << idx << ',' << fmt(sse(ebnp, tr)) << ',' << fmt(sse(egt, tr)) << ','
                << fmt(sse(epoi, tr)) << ',' << fmt(sse(epd, tr)) << ',' << fmt(sse(esgt, tr))
                << '\n';
        doc["samples"].push_back(js);
    }
    emit(o, doc, csv.str() + sse_csv.str());
    return 0;
}

// ---- sensitivity ------------------------------------------------------------

int cmd_sensitivity(const CommonOpts& o) {
    auto s = load_input(o);
    const auto ms = resolve_m(o, s);
    const std::vector<double> sigmas = {0.2, 0.4, 0.6, 0.8};
    const std::vector<double> thetas = {0.1, 1.0, 10.0, 100.0, 1000.0};
    auto fitted = fit_empirical_bayes(s).params;

    json doc;
    doc["config"] = config_line("sensitivity", o);
    doc["rows"] = json::array();
    std::ostringstream csv;
    csv << "# " << config_line("sensitivity", o) << "\n"
        << "m,sigma,theta,estimate,lo,hi\n";
    auto cell = [&](long m, const PdParams& p, bool is_fit) {
        auto ci = credible_interval(p, s, m, {0}, o.level, o.draws, Scaling::r_star, o.seed, 0);
        const double v = bnp_discovery_value(p, s, m, 0);
        json jr;
        jr["m"] = m;
        jr["sigma"] = p.sigma;
        jr["theta"] = p.theta;
        jr["fitted"] = is_fit;
        jr["estimate"] = v;
        jr["lo"] = ci.lo;
        jr["hi"] = ci.hi;
        doc["rows"].push_back(jr);
        csv << m << ',' << fmt(p.sigma) << ',' << fmt(p.theta) << ',' << fmt(v) << ','
            << fmt(ci.lo) << ',' << fmt(ci.hi) << '\n';
    };
    for (long m : ms) {
        for (double sg : sigmas)
            for (double th : thetas) cell(m, PdParams(sg, th), false);
        cell(m, fitted, true);
    }
    emit(o, doc, csv.str());
    return 0;
}

// ---- posterior-grid ---------------------------------------------------------

std::vector<double> parse_grid(const std::string& spec) {
    // "lo:hi:step"
    std::istringstream ss(spec);
    std::string a, b, c;
    if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
        throw Error("grid spec must be lo:hi:step");
    const double lo = std::stod(a), hi = std::stod(b), step = std::stod(c);
    if (step <= 0 || hi < lo) throw Error("bad grid spec: " + spec);
    std::vector<double> g;
    for (double x = lo; x <= hi + 1e-12; x += step) g.push_back(x);
    return g;
}

int cmd_posterior_grid(const CommonOpts& o, const std::string& sigma_spec,
                       const std::string& theta_spec, double prior_shape, double prior_scale) {
    auto s = load_input(o);
    auto sg = parse_grid(sigma_spec);
    auto tg = parse_grid(theta_spec);
    PriorConfig prior;
    prior.gamma_shape = prior_shape;
    prior.gamma_scale = prior_scale;
    auto g = posterior_grid(s, sg, tg, prior);
    auto fitted = fit_empirical_bayes(s).params;

    json doc;
    doc["config"] = config_line("posterior-grid", o);
    doc["mode_sigma"] = g.mode_sigma;
    doc["mode_theta"] = g.mode_theta;
    doc["fit_sigma"] = fitted.sigma;
    doc["fit_theta"] = fitted.theta;
    doc["sigma_grid"] = g.sigma_grid;
    doc["theta_grid"] = g.theta_grid;
    doc["log_density"] = g.log_density;
    std::ostringstream csv;
    csv << "# " << config_line("posterior-grid", o) << "\n"
        << "# mode_sigma=" << fmt(g.mode_sigma) << " mode_theta=" << fmt(g.mode_theta) << "\n"
        << "# fit_sigma=" << fmt(fitted.sigma) << " fit_theta=" << fmt(fitted.theta) << "\n";
    std::ostringstream body;
    save_grid_csv(g, body);
    emit(o, doc, csv.str() + body.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"discovery probability estimation under a two-parameter power-law prior"};
    app.require_subcommand(1);

    CommonOpts fit_o, est_o, int_o, sim_o, sen_o, pg_o;
    double sim_s = 1.5;
    long sim_n = 1000, sim_reps = 500;
    std::string pg_sigma = "0.02:0.98:0.02", pg_theta = "5:500:5";
    double pg_shape = 1.0, pg_scale = 100.0;

    auto* c_fit = app.add_subcommand("fit", "empirical Bayes fit of (sigma, theta)");
    add_common(c_fit, fit_o, true);
    auto* c_est = app.add_subcommand("estimate", "point estimates of discovery probabilities");
    add_common(c_est, est_o, true);
    auto* c_int = app.add_subcommand("interval", "estimates with credible intervals");
    add_common(c_int, int_o, true);
    auto* c_sim = app.add_subcommand("simulate", "synthetic power-law population study");
    add_common(c_sim, sim_o, false);
    c_sim->add_option("--s", sim_s, "population tail parameter (> 1)");
    c_sim->add_option("--n", sim_n, "sample size per replicate");
    c_sim->add_option("--reps", sim_reps, "number of replicates");
    auto* c_sen = app.add_subcommand("sensitivity", "interval sensitivity over a parameter grid");
    add_common(c_sen, sen_o, true);
    auto* c_pg = app.add_subcommand("posterior-grid", "gridded posterior density of (sigma, theta)");
    add_common(c_pg, pg_o, true);
    c_pg->add_option("--sigma-grid", pg_sigma, "lo:hi:step");
    c_pg->add_option("--theta-grid", pg_theta, "lo:hi:step");
    c_pg->add_option("--prior-shape", pg_shape, "Gamma prior shape for theta");
    c_pg->add_option("--prior-scale", pg_scale, "Gamma prior scale for theta");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (c_fit->parsed()) return cmd_fit(fit_o);
        if (c_est->parsed()) return cmd_estimate(est_o);
        if (c_int->parsed()) return cmd_interval(int_o);
        if (c_sim->parsed()) return cmd_simulate(sim_o, sim_s, sim_n, sim_reps);
        if (c_sen->parsed()) return cmd_sensitivity(sen_o);
        if (c_pg->parsed()) return cmd_posterior_grid(pg_o, pg_sigma, pg_theta, pg_shape, pg_scale);
    } catch (const SamplerStall& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const Infeasible& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const PrecisionLoss& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
