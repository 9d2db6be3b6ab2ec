#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "lawe/model.hpp"

using namespace lawe;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using Catch::Matchers::WithinULP;

TEST_CASE("mass distribution closed forms", "[model]")
{
    const auto d = build_mass_distribution(0.5, 2.0, 1.0, 1.0, 3);
    CHECK(d.M() == std::vector<double>{0.1875, 0.046875, 0.01171875});
    CHECK(d.r() == std::vector<double>{0.5, 0.75, 0.875});
    CHECK(d.enclosed_mass(1) == 0.9375);
}

TEST_CASE("mass distribution rejects bad parameters", "[model]")
{
    CHECK_THROWS_WITH(build_mass_distribution(1.5, 2, 1, 1, 3), ContainsSubstring("eta must lie in (0,1)"));
    CHECK_THROWS_WITH(build_mass_distribution(0.0, 2, 1, 1, 3), ContainsSubstring("eta must lie in (0,1)"));
    CHECK_THROWS_WITH(build_mass_distribution(0.5, 0, 1, 1, 3), ContainsSubstring("gamma must be positive"));
    CHECK_THROWS_AS(build_mass_distribution(0.5, 2, -1, 1, 3), validation_error);
    CHECK_THROWS_AS(build_mass_distribution(0.5, 2, 1, 1, 0), validation_error);
}

TEST_CASE("consecutive shell masses have ratio eta^gamma to one ulp", "[model]")
{
    for (double eta : {0.3, 0.5, 0.77}) {
        for (double gamma : {0.5, 1.0, 2.0, 3.3}) {
            const auto d = build_mass_distribution(eta, gamma, 2.5, 1.7, 400);
            const double q = std::pow(eta, gamma);
            for (int I = 1; I < d.size(); ++I) {
                if (d.mass(I + 1) < std::numeric_limits<double>::min()) break;
                CHECK_THAT(d.mass(I + 1) / d.mass(I), WithinULP(q, 1));
            }
        }
    }
}

TEST_CASE("enclosed mass increments equal shell masses", "[model]")
{
    for (double eta : {0.2, 0.5, 0.9}) {
        const auto d = build_mass_distribution(eta, 1.5, 1.0, 1.0, 300);
        for (int I = 1; I <= d.size(); ++I) {
            const double inc = d.enclosed_mass(I) - d.enclosed_mass(I - 1);
            const double ulp = std::nextafter(d.enclosed_mass(I), 2.0) - d.enclosed_mass(I);
            CHECK(std::abs(inc - d.mass(I)) <= 4.0 * ulp);
            // strict while the deficit is representable
            CHECK(d.radius(I) <= d.R_star());
            CHECK(d.enclosed_mass(I) <= d.M_star());
            if (std::pow(eta, I) > 1e-15) CHECK(d.radius(I) < d.R_star());
            if (std::pow(eta, 1.5 * (I + 1)) > 1e-15) CHECK(d.enclosed_mass(I) < d.M_star());
            if (I > 1) {
                CHECK(d.radius(I) >= d.radius(I - 1));
                CHECK(d.enclosed_mass(I) >= d.enclosed_mass(I - 1));
            }
        }
    }
}

TEST_CASE("enclosed mass plus the remaining shells is the total mass", "[model]")
{
    const auto d = build_mass_distribution(0.6, 1.3, 3.0, 1.0, 20);
    double tail = 0.0;
    for (int I = 400; I > d.size(); --I) tail += std::exp(d.log_mass(I));
    CHECK_THAT(d.enclosed_mass(d.size()) + tail, WithinRel(3.0, 1e-14));
}

TEST_CASE("log-space accessors agree with tables", "[model]")
{
    const auto d = build_mass_distribution(0.5, 2.0, 1.0, 2.0, 60);
    for (int I = 1; I <= 40; ++I) {
        CHECK_THAT(std::exp(d.log_mass(I)), WithinRel(d.mass(I), 1e-13));
        CHECK_THAT(std::exp(d.log_radius(I)), WithinRel(d.radius(I), 1e-14));
        CHECK_THAT(std::exp(d.log_shell_width(I)), WithinRel(d.radius(I) - (I > 1 ? d.radius(I - 1) : 0.0), 1e-9));
    }
    // far beyond where M underflows the closed forms stay finite
    CHECK(std::isfinite(d.log_mass(5000)));
    CHECK(d.log_shell_width(5000) < -3000.0);
}

TEST_CASE("scaling parameters", "[model]")
{
    const auto d = build_mass_distribution(0.5, 2.0, 1.0, 1.0, 4);
    const auto s = scaling_params(d, 0.0);
    CHECK(s.lambda_star == 1.0);
    CHECK_THAT(s.kappa, WithinRel(1.6, 1e-15));
    CHECK(s.interval().first == -3.2);

    const auto near1 = build_mass_distribution(1.0 - 1e-9, 2.0, 1.0, 1.0, 4);
    CHECK_THAT(scaling_params(near1, 0.0).kappa, WithinAbs(2.0, 1e-8));
    CHECK_THROWS_WITH(scaling_params(d, -4.0), ContainsSubstring("zeta must exceed -4"));

    const auto big = build_mass_distribution(0.5, 2.0, 8.0, 2.0, 4, 3.0);
    CHECK(scaling_params(big, 1.0).lambda_star == 3.0);
}

TEST_CASE("gamma profiles", "[model]")
{
    const auto g = gamma_profile(GammaKind::plain, 1.0, 0.0, 0.5, 3);
    CHECK(g.value(1) == 0.5);
    CHECK(g.value(2) == 0.25);
    CHECK(g.value(3) == 0.125);

    const std::vector<double> zero(10, 0.0);
    const auto p = gamma_profile(GammaKind::perturbed, 0.8, 0.3, 0.5, 10, zero);
    const auto q = gamma_profile(GammaKind::plain, 0.8, 0.0, 0.5, 10);
    CHECK(p.amplitude == q.amplitude);

    std::vector<double> bump(10, 0.0);
    bump[4] = 5.0;
    CHECK_THROWS_WITH(gamma_profile(GammaKind::perturbed, 0.8, 1.0, 0.5, 10, bump), ContainsSubstring("I=5"));
    CHECK_THROWS_AS(gamma_profile(GammaKind::perturbed, 0.8, 1.0, 0.5, 10), validation_error);
    CHECK_THROWS_AS(gamma_profile(GammaKind::plain, 0.0, 0.0, 0.5, 10), validation_error);

    // negative b is allowed as long as every entry stays positive
    const auto neg = gamma_profile(GammaKind::perturbed, 0.8, -0.2, 0.5, 10, bump);
    CHECK(neg.amplitude[4] == 0.8 + 0.2 * 5.0);
    CHECK(neg.amplitude[3] == 0.8);
    // far indices do not underflow in log form
    const auto far = gamma_profile(GammaKind::plain, 0.8, 0.0, 0.5, 4000);
    CHECK_THAT(far.log_value(4000), WithinRel(std::log(0.8) + 4000 * std::log(0.5), 1e-15));
}

TEST_CASE("pressure-density distribution from a plain profile", "[model]")
{
    const auto d = build_mass_distribution(0.5, 2.0, 1.0, 1.0, 200);
    CHECK(amplitude_constant(0.5, 2.0) == 5.0);
    const double c = 4.0 / 5.0;
    const auto pd = build_pd_distribution(d, gamma_profile(GammaKind::plain, c, 0, 0.5, 200), {.zeta = 0.0});
    REQUIRE(pd.induced_zeta);
    CHECK_THAT(*pd.induced_zeta, WithinAbs(0.0, 1e-14));
    for (int I = 1; I < 200; ++I) {
        CHECK_THAT(pd.log_rho[I] - pd.log_rho[I - 1], WithinAbs(std::log(0.5), 2.0 * std::pow(0.5, I) + 1e-12));
        CHECK_THAT(pd.log_D(I), WithinRel(pd.log_Gamma[I - 1] + pd.log_P[I - 1] + pd.log_rho[I - 1], 1e-15));
    }
    CHECK_THROWS_WITH(build_pd_distribution(d, gamma_profile(GammaKind::plain, c, 0, 0.5, 200), {.zeta = 1.0}),
                      ContainsSubstring("zeta inconsistent"));

    const double zeta = 2.0;
    const auto pd2 = build_pd_distribution(d, gamma_profile(GammaKind::plain, (4 + zeta) / 5.0, 0, 0.5, 200));
    CHECK_THAT(*pd2.induced_zeta, WithinAbs(zeta, 1e-13));
}

TEST_CASE("gamma*rho/M converges with a summable tail", "[model]")
{
    const double eta = 0.5, gamma = 2.0, zeta = 1.0;
    const auto d = build_mass_distribution(eta, gamma, 1.0, 1.0, 120);
    const auto pd = build_pd_distribution(
        d, gamma_profile(GammaKind::plain, (4 + zeta) / amplitude_constant(eta, gamma), 0, eta, 120));
    const double limit = (1 + zeta / 4) / (pi * (1 + std::pow(eta, -gamma)));
    std::vector<double> err;
    for (int I = 1; I <= 120; ++I)
        err.push_back(std::abs(std::exp(pd.log_Gamma[I - 1] + pd.log_rho[I - 1] - d.log_mass(I)) - limit));
    // tail sums shrink geometrically
    double prev = std::numeric_limits<double>::infinity();
    for (int s = 10; s <= 40; s += 10) {
        double tail = 0.0;
        for (int I = s; I <= 120; ++I) tail += err[I - 1];
        CHECK(tail < 0.01 * prev);
        prev = tail;
    }
}

TEST_CASE("density vanishing requires gamma above one", "[model]")
{
    const auto d = build_mass_distribution(0.5, 1.0, 1.0, 1.0, 80);
    const auto g = gamma_profile(GammaKind::plain, 1.0, 0, 0.5, 80);
    CHECK_THROWS_WITH(build_pd_distribution(d, g), ContainsSubstring("density to vanish"));
    const auto pd = build_pd_distribution(d, g, {.allow_nonvanishing_density = true, .zeta = {}});
    CHECK_FALSE(pd.density_vanishes);
    // constant density up to O(eta^I)
    for (int I = 2; I <= 80; ++I)
        CHECK(std::abs(std::exp(pd.log_rho[I - 1] - pd.log_rho[I - 2]) - 1.0) <= 4.0 * std::pow(0.5, I - 1) + 1e-12);
    const auto rep = check_admissibility(pd, d, 1e-6);
    CHECK_FALSE(rep.density_vanishes);
    CHECK_FALSE(rep.admissible);
}

TEST_CASE("hydrostatic residual limit of the prescribed pressure", "[model]")
{
    // 4πr²(P(I+1)−P(I))/M(I+1) → −Λ*R*η^{−γ}, so the residual tends to (G𝔐*/R*²)|2 − η^{−γ}|.
    for (double eta : {0.5, 0.6, 0.8}) {
        const double gamma = 2.0;
        const auto d = build_mass_distribution(eta, gamma, 1.0, 1.0, 200);
        const auto pd = build_pd_distribution(d, gamma_profile(GammaKind::plain, 0.8, 0, eta, 200));
        const auto rep = check_admissibility(pd, d, 1e-6);
        CHECK_THAT(rep.hse_residual.back(), WithinAbs(std::abs(2.0 - std::pow(eta, -gamma)), 1e-9));
        CHECK(*std::max_element(rep.mass_residual.begin(), rep.mass_residual.end()) < 1e-12);
        CHECK_FALSE(rep.admissible);
    }
    // the residual limit vanishes exactly when η^γ = 1/2
    const double eta = std::sqrt(0.5);
    const auto d = build_mass_distribution(eta, 2.0, 1.0, 1.0, 200);
    const auto pd = build_pd_distribution(d, gamma_profile(GammaKind::plain, 0.8, 0, eta, 200));
    const auto rep = check_admissibility(pd, d, 1e-6);
    CHECK(rep.hse_residual.back() < 1e-12);
    CHECK(rep.admissible);
}

TEST_CASE("admissibility detects broken balance laws", "[model]")
{
    const auto d = build_mass_distribution(0.5, 2.0, 1.0, 1.0, 100);
    const auto good = build_almost_polytrope(d, 100);

    std::vector<double> G(100), P(100, 0.7), rho(100);
    for (int I = 1; I <= 100; ++I) {
        G[I - 1] = good.Gamma(I);
        rho[I - 1] = good.rho(I);
    }
    const auto flat = check_admissibility(PressureDensityDistribution::from_values(G, P, rho), d);
    CHECK_THAT(flat.hse_residual.back(), WithinRel(1.0, 1e-12));
    CHECK_FALSE(flat.admissible);

    for (auto& v : rho) v *= 2.0;
    for (int I = 1; I <= 100; ++I) P[I - 1] = good.P(I);
    const auto doubled = check_admissibility(PressureDensityDistribution::from_values(G, P, rho), d);
    for (double m : doubled.mass_residual) CHECK_THAT(m, WithinAbs(1.0, 1e-12));
    CHECK_FALSE(doubled.admissible);

    const std::vector<double> two(2, 1.0);
    CHECK_THROWS_WITH(check_admissibility(PressureDensityDistribution::from_values(two, two, two), d),
                      ContainsSubstring("length >= 3"));
    const std::vector<double> bad{1.0, -1.0, 1.0};
    CHECK_THROWS_AS(PressureDensityDistribution::from_values(bad, bad, bad), validation_error);
}

TEST_CASE("almost polytrope and nu-case constructions", "[model]")
{
    const auto d = build_mass_distribution(0.5, 2.0, 1.0, 1.0, 60);
    const auto ap = build_almost_polytrope(d, 60);
    for (int I = 1; I <= 60; ++I) {
        CHECK_THAT(ap.Gamma(I), WithinRel(2.0, 1e-15));
        CHECK_THAT(std::exp(ap.log_P[I - 1] - d.log_mass(I)), WithinRel(1.0 / (4 * pi), 1e-14));
    }
    const double Gamma = 1.5, Cs = 0.01;
    const auto nu = build_nu_polytrope(d, Gamma, Cs, 60);
    const double s = (2.0 - 1.0) * (Gamma - 1.0);
    for (int I = 1; I <= 60; ++I) {
        const double v = nu.log_P[I - 1] + nu.log_rho[I - 1] - 2 * d.log_mass(I);
        CHECK_THAT(v, WithinAbs(std::log(Cs) + I * (s - 2) * std::log(0.5), 1e-12));
    }
    CHECK_THROWS_AS(build_almost_polytrope(build_mass_distribution(0.5, 1.0, 1, 1, 4), 4), validation_error);
}

TEST_CASE("scaling D scales Gamma only", "[model]")
{
    const auto d = build_mass_distribution(0.5, 2.0, 1.0, 1.0, 10);
    const auto pd = build_almost_polytrope(d, 10);
    const auto s = pd.scaled(3.0);
    for (int I = 1; I <= 10; ++I) CHECK_THAT(s.D(I), WithinRel(3.0 * pd.D(I), 1e-14));
    CHECK_THROWS_AS(pd.scaled(0.0), validation_error);
}
