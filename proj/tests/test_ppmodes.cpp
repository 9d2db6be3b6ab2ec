#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "lawe/ppmodes.hpp"

using namespace lawe;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("construction parameters are checked inequality by inequality", "[ppmodes]")
{
    CHECK(0.5 < 0.8 * 1.5 / 2.0);
    CHECK_NOTHROW(construct_dsp(0.8, 0.5, 5.0, 10));
    CHECK_THROWS_WITH(construct_dsp(0.4, 0.5, 5.0, 10), ContainsSubstring("1/2 < alpha < 1"));
    CHECK_THROWS_WITH(construct_dsp(0.8, 0.3, 5.0, 10), ContainsSubstring("p > 1/3"));
    CHECK_THROWS_WITH(construct_dsp(0.8, 0.7, 5.0, 10), ContainsSubstring("p < alpha*(p+1)/2"));
    CHECK_THROWS_WITH(construct_dsp(0.8, 0.5, -1.0, 10), ContainsSubstring("K_spacing > 0"));
    // several failures are all listed
    const auto msg = [] {
        try {
            construct_dsp(1.2, 0.2, 0.0, 0);
        } catch (const validation_error& e) {
            return std::string(e.what());
        }
        return std::string();
    }();
    CHECK_THAT(msg, ContainsSubstring("1/2 < alpha < 1") && ContainsSubstring("p > 1/3") &&
                        ContainsSubstring("K_spacing > 0") && ContainsSubstring("m_max >= 1"));
}

TEST_CASE("blocks are placed far out and well separated", "[ppmodes]")
{
    const auto d = construct_dsp(0.8, 0.5, 5.0, 60);
    REQUIRE(d.m_max() == 60);
    for (int m = 1; m <= 60; ++m) {
        const Block& B = d.blocks[m - 1];
        CHECK(B.start > 5.0 * std::pow(m, 1.5));
        CHECK(B.length % 2 == 0);
        CHECK(B.length >= 4);
        CHECK(B.length >= std::ceil(std::pow(m, 0.5)));
        if (m > 1) CHECK(B.start - d.blocks[m - 2].last() > 2);
    }
}

TEST_CASE("tent vectors", "[ppmodes]")
{
    const auto d = construct_dsp(0.8, 0.5, 5.0, 200);
    for (int m : {1, 4, 50, 200}) {
        const Block& B = d.blocks[m - 1];
        CHECK(d.tent(m, B.start) == 0.0);
        CHECK(d.tent(m, B.last()) == 0.0);
        CHECK(d.tent(m, B.start + B.length / 2) == 1.0);
        double mx = 0.0;
        for (int I = B.start - 3; I <= B.last() + 3; ++I) mx = std::max(mx, d.tent(m, I));
        CHECK(mx == 1.0);
        // L steps of size 2/L
        CHECK_THAT(tent_dirichlet(d, m), WithinRel(4.0 / B.length, 1e-12));
    }
    // explicit tent sum for m = 4 (L = 4): values 0, 1/2, 1, 1/2, 0
    CHECK_THAT(tent_norm_sq(d, 4), WithinAbs(1.5, 1e-15));
    const double r4 = tent_norm_sq(d, 4) / std::pow(4.0, 0.5);
    CHECK(r4 >= 0.25);
    CHECK(r4 <= 4.0);
    for (int m = 2; m <= 200; ++m) {
        const double r = tent_norm_sq(d, m) / std::pow(m, 0.5);
        CHECK(r >= 0.25);
        CHECK(r <= 4.0);
        const double D = tent_dirichlet(d, m);
        CHECK(D >= std::pow(m, -0.5));
        CHECK(D <= 8.0);
    }
}

TEST_CASE("tent supports are disjoint", "[ppmodes]")
{
    const auto d = construct_dsp(0.8, 0.5, 5.0, 40);
    for (int m = 1; m <= 40; ++m)
        for (int k = m + 1; k <= std::min(40, m + 2); ++k) {
            double dot = 0.0;
            for (int I = 1; I <= d.extent(); ++I) dot += d.tent(m, I) * d.tent(k, I);
            CHECK(dot == 0.0);
        }
}

TEST_CASE("bump diagonal lives on the blocks", "[ppmodes]")
{
    const auto d = construct_dsp(0.8, 0.5, 5.0, 20);
    const auto g = d.G_diag(d.extent() + 5);
    for (int I = 1; I <= d.extent() + 5; ++I) {
        const int m = d.block_of(I);
        if (m > 0) {
            CHECK(d.blocks[m - 1].contains(I));
            CHECK_THAT(g[I - 1], WithinRel(std::pow(I, -0.8), 1e-15));
        } else {
            CHECK(g[I - 1] == 0.0);
        }
    }
    CHECK(blocks_fitting(d, d.extent()) == 20);
    CHECK(blocks_fitting(d, d.extent() - 1) == 19);
    CHECK(blocks_fitting(d, 1) == 0);
}

TEST_CASE("Gamma of the bump model follows c - b G on the blocks", "[ppmodes]")
{
    const auto d = construct_dsp(0.8, 0.5, 5.0, 15);
    const int N = d.extent() + 10;
    const auto pm = build_pp_model(d, N, false);
    CHECK(pm.b > 0.0);
    CHECK_THAT(pm.c, WithinRel(4.0 / amplitude_constant(0.5, 2.0), 1e-15));
    const auto lower = build_pp_model(d, N, true);
    CHECK_THAT(lower.b, WithinRel(-pm.b, 1e-15));
    for (int I : {1, d.blocks[3].start + 1, d.blocks[9].start + 2, N}) {
        const double want = pm.c - pm.b * (d.block_of(I) ? std::pow(I, -0.8) : 0.0);
        CHECK_THAT(pm.pd.Gamma(I) / std::pow(0.5, I), WithinRel(want, 1e-12));
    }
}

TEST_CASE("Rayleigh quotients without the bump see only the free part", "[ppmodes]")
{
    const auto d = construct_dsp(0.8, 0.5, 5.0, 30);
    const int N = d.extent() + 10;
    const auto pm = build_pp_model(d, N, true, 0.5, 2.0, false);
    for (const auto& [m, q] : rayleigh_quotients(pm.op, d, -2.0)) {
        CHECK(q > 0.0);  // no bound-state witness
        const int L = d.blocks[m - 1].length;
        if (m > 5) CHECK(q < 20.0 / (L * L));
    }
}

TEST_CASE("Rayleigh quotients scale affinely with the operator", "[ppmodes]")
{
    const auto d = construct_dsp(0.8, 0.5, 5.0, 20);
    const auto pm = build_pp_model(d, d.extent() + 10);
    const double sigma = 3.7;
    auto scaled = pm.op;
    for (auto& v : scaled.diag) v *= sigma;
    for (auto& v : scaled.offdiag) v *= sigma;
    scaled.diag_limit = 0.0;
    const auto q = rayleigh_quotients(pm.op, d, -2.0);
    const auto qs = rayleigh_quotients(scaled, d, -2.0 * sigma);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK_THAT(qs[i].q, WithinRel(sigma * q[i].q, 1e-12));
}

TEST_CASE("tent witnesses are dominated by the kinetic term", "[ppmodes]")
{
    // the bump lowers each quotient but never below the edge for tents
    const auto d = construct_dsp(0.8, 0.5, 5.0, 60);
    const int N = d.extent() + 10;
    const auto bump = rayleigh_quotients(build_pp_model(d, N).op, d, -2.0);
    const auto free = rayleigh_quotients(build_pp_model(d, N, true, 0.5, 2.0, false).op, d, -2.0);
    for (std::size_t i = 0; i < bump.size(); ++i) {
        CHECK(bump[i].q < free[i].q);
        CHECK(bump[i].q > 0.0);
    }
}

TEST_CASE("Rayleigh quotient needs the block inside the operator", "[ppmodes]")
{
    const auto d = construct_dsp(0.8, 0.5, 5.0, 10);
    const auto pm = build_pp_model(d, d.blocks[4].last());
    CHECK_THROWS_WITH(rayleigh_quotients(pm.op, d, -2.0), ContainsSubstring("support of X_"));
}

TEST_CASE("bump model has eigenvalues accumulating below the lower edge", "[ppmodes]")
{
    const auto d = construct_dsp(0.8, 0.5, 5.0, 60);
    const int N = 2500;
    const auto pm = build_pp_model(d, N + 1);
    const auto ev = detect_edge_eigenvalues(pm.op, N, -2.0, 1.0, d, 1e-14, 2);
    REQUIRE(ev.size() >= 10);
    for (std::size_t k = 0; k < ev.size(); ++k) {
        CHECK(ev[k].value < -2.0);
        if (k > 0) CHECK(ev[k].value > ev[k - 1].value);
        CHECK(ev[k].vector.size() == static_cast<std::size_t>(N));
    }
    // the deepest state sits on the first block
    CHECK(ev.front().block == 1);
    CHECK(ev.front().block_fraction > 0.9);
}

TEST_CASE("without the bump nothing lies below the lower edge", "[ppmodes]")
{
    const auto d = construct_dsp(0.8, 0.5, 5.0, 60);
    const int N = 2500;
    const auto pm = build_pp_model(d, N + 1, true, 0.5, 2.0, false);
    CHECK(detect_edge_eigenvalues(pm.op, N, -2.0 - 1e-8, 1.0, d).empty());
}
