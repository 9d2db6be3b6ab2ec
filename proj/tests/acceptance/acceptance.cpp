// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/multiprecision/gmp.hpp>

#include "lawe/lawe.hpp"
#include "support/oracles.hpp"

using namespace lawe;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int worker_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct PlainModel {
    MassDistribution dist;
    JacobiOperator op;
    ScalingParams params;
};

/// η = 0.5, γ = 2, ζ = 0, Λ* = 1 with the plain Γ profile (summable tails).
PlainModel plain_model(int N)
{
    auto dist = build_mass_distribution(0.5, 2.0, 1.0, 1.0, N + 1);
    const double c = 4.0 / amplitude_constant(0.5, 2.0);
    auto pd = build_pd_distribution(dist, gamma_profile(GammaKind::plain, c, 0.0, 0.5, N + 1));
    auto op = assemble_jacobi(dist, pd, N);
    auto params = scaling_params(dist, 0.0);
    return {std::move(dist), std::move(op), params};
}

Outcome similarity_exactness()
{
    using Q = boost::multiprecision::mpq_rational;
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> len(1, 64), num(-50, 50), den(1, 40);
    auto draw = [&](bool nonzero) {
        int p = num(rng);
        while (nonzero && p == 0) p = num(rng);
        return Q(p, den(rng));
    };
    int nonzero = 0, max_n = 0;
    for (int k = 0; k < 200; ++k) {
        const int n = len(rng);
        max_n = std::max(max_n, n);
        std::vector<Q> a(n), b(n - 1), c(n - 1);
        for (auto& v : a) v = draw(false);
        for (auto& v : b) v = draw(false);
        for (auto& v : c) v = draw(false);
        if (similarity_check<Q>(a, b, c, draw(true), draw(true)).max_residual != 0) ++nonzero;
    }
    return {nonzero == 0, "200 instances, n <= " + std::to_string(max_n) + ", nonzero residuals: " +
                              std::to_string(nonzero)};
}

Outcome truncation_fill()
{
    const int N = 4000;
    const auto m = plain_model(N);
    const auto r = truncation_eigenvalues(m.op, N, 1e-12, {false, worker_threads()});
    const auto f = spectrum_fill_report(r, -3.2, 3.2);
    std::string outside;
    for (double e : r.eigenvalues)
        if (e < -3.25 || e > 3.25) outside += " " + fmt("%.4g", e);
    const bool pass = f.max_outside_excursion <= 0.05 && f.max_interior_gap < 0.05;
    return {pass, "max interior gap " + fmt("%.4g", f.max_interior_gap) + ", max excursion " +
                      fmt("%.4g", f.max_outside_excursion) + (outside.empty() ? "" : ", eigenvalues outside:" + outside)};
}

Outcome no_localized_interior_states()
{
    const int N = 4000;
    const auto m = plain_model(N);
    const auto r = truncation_eigenvalues(m.op, N, 1e-12, {true, worker_threads()});
    int interior = 0, localized = 0;
    for (int k = 0; k < N; ++k) {
        const double e = r.eigenvalues[k];
        if (!(e > -3.2 && e < 3.2)) continue;
        ++interior;
        double head = 0.0, total = 0.0;
        for (int i = 0; i < N; ++i) {
            const double w = r.vectors[k][i] * r.vectors[k][i];
            total += w;
            if (i < N / 4) head += w;
        }
        if (head >= 0.99 * total) ++localized;
    }
    return {localized == 0, std::to_string(interior) + " interior eigenpairs, " + std::to_string(localized) +
                                " with 99% of their mass in the first N/4 indices"};
}

Outcome jost_asymptotics()
{
    const auto m = plain_model(1002);
    double worst_phase = 0.0, worst_amp = 0.0;
    for (double lam : {-1.6, 0.0, 1.6}) {
        const auto j = jost_verify(m.op, lam, m.params, 500, 1000);
        worst_phase = std::max(worst_phase, j.phase_error);
        worst_amp = std::max(worst_amp, j.amplitude_error);
    }
    return {worst_phase < 1e-3 && worst_amp < 1e-3,
            "max phase error " + fmt("%.3g", worst_phase) + " rad, max envelope flatness " + fmt("%.3g", worst_amp)};
}

Outcome pp_accumulation()
{
    const int N = 20000;
    auto dsp = construct_dsp(0.8, 0.5, 5.0, 400);
    dsp.blocks.resize(blocks_fitting(dsp, N));
    const auto pm = build_pp_model(dsp, N + 1, true);
    const auto ev = detect_edge_eigenvalues(pm.op, N, -2.0, 1.0, dsp, 1e-13, worker_threads());

    // deepest eigenvalue per localizing block, in block order
    std::map<int, double> by_block;
    int localized = 0, bounded = 0;
    for (const auto& e : ev) {
        if (e.block_fraction >= 0.9) ++localized;
        if (delta_r_from_X(e.vector, pm.dist).bounded) ++bounded;
        if (e.block > 0 && !by_block.count(e.block)) by_block[e.block] = -2.0 - e.value;
    }
    std::vector<double> lm, ld;
    bool decreasing = true;
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& [m, dist] : by_block) {
        if (!(dist < prev)) decreasing = false;
        prev = dist;
        lm.push_back(std::log(m));
        ld.push_back(std::log(dist));
    }
    const double slope = lm.size() >= 2 ? detail::fit_line(lm, ld).slope : 0.0;
    std::vector<double> lk, lr;
    for (std::size_t k = 0; k < ev.size(); ++k) {
        lk.push_back(std::log(k + 1.0));
        lr.push_back(std::log(-2.0 - ev[k].value));
    }
    const double rank_slope = lk.size() >= 2 ? detail::fit_line(lk, lr).slope : 0.0;

    const auto literal = build_pp_model(dsp, N + 1, false);
    const auto literal_ev = detect_edge_eigenvalues(literal.op, N, -2.0, 1.0, dsp, 1e-13, worker_threads());

    const int n = static_cast<int>(ev.size());
    const bool pass = n >= 10 && decreasing && slope >= -1.5 && slope <= -0.9 && localized == n && bounded == n;
    std::ostringstream s;
    s << n << " eigenvalues below -2 (b = -1/(Lambda*K); literal sign gives " << literal_ev.size() << "), "
      << by_block.size() << " blocks, distances decreasing in m: " << (decreasing ? "yes" : "no")
      << ", slope vs m " << fmt("%.3f", slope) << " (vs rank " << fmt("%.3f", rank_slope) << "), "
      << localized << "/" << n << " localized >= 90%, " << bounded << "/" << n << " delta r bounded";
    return {pass, s.str()};
}

Outcome periodic_bands()
{
    const int N = 2000;
    const auto b = band_structure(2.0, 1.0, 0.5);
    const auto r = truncation_eigenvalues(periodic_operator(2.0, 1.0, 0.5, N), N, 1e-12, {false, worker_threads()});
    double excursion = 0.0;
    int stray = 0;
    for (double e : r.eigenvalues) {
        double d = 0.0;
        if (e < b.E_minus) d = b.E_minus - e;
        else if (e > b.E1 && e < b.E2) d = std::min(e - b.E1, b.E2 - e);
        else if (e > b.E_plus) d = e - b.E_plus;
        if (d > 0.05) ++stray;
        else excursion = std::max(excursion, d);
    }
    return {stray <= 4, "bands [" + fmt("%.6f", b.E_minus) + ", " + fmt("%g", b.E1) + "] U [" + fmt("%g", b.E2) +
                            ", " + fmt("%.6f", b.E_plus) + "], " + std::to_string(stray) +
                            " eigenvalues farther than 0.05 from the bands, max distance of the rest " +
                            fmt("%.3g", excursion)};
}

Outcome polytrope_divergences()
{
    const int N = 2000;
    const auto dist = build_mass_distribution(0.5, 2.0, 1.0, 1.0, N + 1);
    const auto pd = build_almost_polytrope(dist, N + 1);
    const auto sys = build_scaled_system(dist, pd, ScaledCase::almost_polytrope, N);
    const auto lf = local_frequencies(sys, 0.0, 2);
    const auto Y = solve_recurrence<double>(sys.T, 0.0, 1.0, 0.3, N);
    const auto g = delta_r_growth(Y, sys, dist);
    const double target = 0.5 * std::log(2.0);
    const bool omega_ok = lf.slope >= 0.95 * target;
    const bool dr_ok = std::abs(g.growth_exponent - target) <= 0.10 * target;
    return {omega_ok && dr_ok, "omega slope " + fmt("%.6f", lf.slope) + ", delta r exponent " +
                                   fmt("%.6f", g.growth_exponent) + ", target " + fmt("%.6f", target)};
}

Outcome potential_root()
{
    double worst = 0.0;
    for (double b : {1.5, 2.0, 3.0, 5.0}) worst = std::max(worst, std::abs(frakQ(1.0, 4.0 / (3.0 * b - 1.0), b)));
    return {worst < 1e-12, "max |Q(1)| " + fmt("%.3g", worst)};
}

Outcome q0_exponent()
{
    double worst = 0.0;
    std::string s;
    for (auto [a, b] : {std::pair{2.0, 3.0}, {2.0, 4.0}, {1.0, 5.0}}) {
        const auto form = liouville(EOSSpec::polytropic(1.0, b, a));
        std::vector<double> lx, ly;
        for (int i = 0; i <= 80; ++i) {
            const double d = 1e-6 * std::pow(1e4, i / 80.0);
            lx.push_back(std::log(d));
            ly.push_back(std::log(std::abs(form.q0_depth(d))));
        }
        const double slope = detail::fit_line(lx, ly).slope, want = a * b - a - 2.0;
        worst = std::max(worst, std::abs(slope - want) / std::abs(want));
        s += (s.empty() ? "" : ", ") + fmt("%.6f", slope) + " vs " + fmt("%g", want);
    }
    return {worst <= 0.01, "slopes " + s};
}

Outcome continuous_pipeline()
{
    bool pass = true;
    std::string s;
    for (const auto& e : {EOSSpec::polytropic(1.0, 4.0, 2.0), EOSSpec::linear_thermal(1.0, 1.0, 1.0, 4.0, 2.5)}) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto tr = integrate_canonical(liouville(e), 1.0, std::numeric_limits<double>::infinity(), 1e-10);
        const auto r = regularity_check(tr, e);
        const auto g = l2_growth(tr, total_mass(e));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool rate = std::abs(r.fitted_exponent - r.analytic_exponent) <= 0.05 * r.analytic_exponent;
        const bool ok = r.monotone_last_decade && rate && g.slope > 0.0 && g.r2 > 0.99 && g.growth_factor >= 10.0 &&
                        secs < 60.0;
        pass = pass && ok;
        s += std::string(s.empty() ? "" : "; ") + to_string(e.variant) + ": R decay " +
             fmt("%.4f", r.fitted_exponent) + " vs " + fmt("%.4f", r.analytic_exponent) + " (bound " +
             fmt("%g", r.bound_exponent) + ", " + (r.monotone_last_decade ? "monotone" : "not monotone") +
             "), F slope " + fmt("%.4g", g.slope) + " R2 " + fmt("%.6f", g.r2) + ", max delta r x" +
             fmt("%.3g", g.growth_factor) + ", " + fmt("%.1f", secs) + " s";
    }
    return {pass, s};
}

Outcome transform_consistency()
{
    oracle::SplitMix rng{11};
    double worst = 0.0;
    for (const auto& e : {EOSSpec::polytropic(1.0, 4.0, 2.0), EOSSpec::linear_thermal(1.0, 1.0, 1.0, 4.0, 2.5)})
        for (auto conv : {QConvention::standard, QConvention::printed}) {
            const auto form = liouville(e, conv);
            const double sign = conv == QConvention::standard ? 1.0 : -1.0;
            for (int i = 0; i < 20; ++i) {
                const double x = e.R_delta + (e.R_star - e.R_delta) * (1.0 - std::pow(10.0, -6.0 * rng.uniform()));
                const double closed = form.Q(form.X_of_x(x));
                worst = std::max(worst, std::abs(closed - oracle::nested_Q(e, x, sign)) / (1.0 + std::abs(closed)));
            }
        }
    return {worst < 1e-8, "max relative difference " + fmt("%.3g", worst) + " over 20 points, both variants and signs"};
}

Outcome free_eigenvalues()
{
    double worst = 0.0;
    for (int N : {3, 10, 100, 512}) {
        const auto r = truncation_eigenvalues(free_jacobi(N), N, 1e-13);
        const auto want = oracle::free_jacobi_eigenvalues(N);
        for (int k = 0; k < N; ++k) worst = std::max(worst, std::abs(r.eigenvalues[k] - want[k]));
    }
    return {worst < 1e-10, "max deviation " + fmt("%.3g", worst)};
}

}  // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        double seconds;  // wall-time budget
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all{
        {1, "similarity identity exact in rationals", 10.0, similarity_exactness},
        {2, "truncation fills the essential interval", 30.0, truncation_fill},
        {3, "no localized interior eigenvectors", std::numeric_limits<double>::infinity(), no_localized_interior_states},
        {4, "Jost asymptotics", 5.0, jost_asymptotics},
        {5, "point spectrum accumulates below -2", 120.0, pp_accumulation},
        {6, "two-periodic band spectrum", 30.0, periodic_bands},
        {7, "almost polytrope divergences", 30.0, polytrope_divergences},
        {8, "root of the potential quadratic", 1.0, potential_root},
        {9, "q0 power law", 5.0, q0_exponent},
        {10, "regularity and L2 growth pipeline", 120.0, continuous_pipeline},
        {11, "transform consistency", 5.0, transform_consistency},
        {12, "free Jacobi eigenvalues", 5.0, free_eigenvalues},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.seconds;
        const bool pass = o.pass && in_time;
        if (!pass) ++failed;
        std::printf("criterion %2d %s: %s (%s; %.2f s%s)\n", c.id, c.name, pass ? "PASS" : "FAIL", o.detail.c_str(),
                    secs, in_time ? "" : ", over time budget");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
