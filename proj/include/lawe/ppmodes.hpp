#ifndef LAWE_PPMODES_HPP
#define LAWE_PPMODES_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lawe/discrete.hpp"
#include "lawe/error.hpp"
#include "lawe/model.hpp"
#include "lawe/spectra.hpp"

namespace lawe {

/// Integer interval [start, start + length].
struct Block {
    int start = 0;
    int length = 0;
    int last() const { return start + length; }
    bool contains(int I) const { return I >= start && I <= last(); }
};

/// Bump construction: blocks B_m, tent vectors X_m supported on them and the
/// diagonal perturbation 𝔊(I) = I^{−α} on ∪B_m.
struct DSPConstruction {
    double alpha = 0.8, p = 0.5, K_spacing = 5.0;
    std::vector<Block> blocks;

    int m_max() const { return static_cast<int>(blocks.size()); }
    int extent() const { return blocks.empty() ? 0 : blocks.back().last(); }

    /// Tent value X_m(I): 0 at the block ends, 1 at the midpoint.
    double tent(int m, int I) const
    {
        const Block& B = blocks.at(m - 1);
        if (!B.contains(I)) return 0.0;
        const double h = 0.5 * B.length;
        return 1.0 - std::abs((I - B.start) - h) / h;
    }

    /// 𝔊(I) for I = 1..n.
    std::vector<double> G_diag(int n) const
    {
        std::vector<double> g(n, 0.0);
        for (const Block& B : blocks)
            for (int I = B.start; I <= B.last() && I <= n; ++I) g[I - 1] = std::pow(static_cast<double>(I), -alpha);
        return g;
    }

    /// Index of the block containing I (1-based), 0 when outside all blocks.
    int block_of(int I) const
    {
        auto it = std::upper_bound(blocks.begin(), blocks.end(), I, [](int v, const Block& B) { return v < B.start; });
        if (it == blocks.begin()) return 0;
        --it;
        return it->contains(I) ? static_cast<int>(it - blocks.begin()) + 1 : 0;
    }
};

inline DSPConstruction construct_dsp(double alpha, double p, double K_spacing, int m_max)
{
    std::string failed;
    if (!(alpha > 0.5 && alpha < 1.0)) failed += " 1/2 < alpha < 1;";
    if (!(p > 1.0 / 3.0)) failed += " p > 1/3;";
    if (!(p < alpha * (p + 1.0) / 2.0)) failed += " p < alpha*(p+1)/2;";
    if (!(K_spacing > 0.0)) failed += " K_spacing > 0;";
    if (!(m_max >= 1)) failed += " m_max >= 1;";
    if (!failed.empty()) {
        failed.pop_back();
        throw validation_error("construction constraints violated:" + failed);
    }
    DSPConstruction d;
    d.alpha = alpha;
    d.p = p;
    d.K_spacing = K_spacing;
    d.blocks.reserve(m_max);
    for (int m = 1; m <= m_max; ++m) {
        int L = static_cast<int>(std::ceil(std::pow(m, p)));
        if (L % 2) ++L;
        L = std::max(4, L);
        int s = static_cast<int>(std::floor(K_spacing * std::pow(m, p + 1.0))) + 1;
        if (m > 1) s = std::max(s, d.blocks.back().last() + 3);
        d.blocks.push_back(Block{s, L});
    }
    return d;
}

/// Number of blocks that fit inside indices 1..N.
inline int blocks_fitting(const DSPConstruction& d, int N)
{
    int m = 0;
    while (m < d.m_max() && d.blocks[m].last() <= N) ++m;
    return m;
}

inline double tent_norm_sq(const DSPConstruction& d, int m)
{
    const Block& B = d.blocks.at(m - 1);
    double s = 0.0;
    for (int I = B.start; I <= B.last(); ++I) s += d.tent(m, I) * d.tent(m, I);
    return s;
}

inline double tent_dirichlet(const DSPConstruction& d, int m)
{
    const Block& B = d.blocks.at(m - 1);
    double s = 0.0;
    for (int I = B.start; I < B.last(); ++I) {
        const double df = d.tent(m, I + 1) - d.tent(m, I);
        s += df * df;
    }
    return s;
}

/// Edge-accumulation model in normalized units (κΛ* = 1, ζ = 0): Γ(I) = (c − b𝔊(I))η^I, c = 4/K.
/// b = +1/(Λ*K) as literally printed raises the diagonal and accumulates at +2;
/// lower_edge selects b = −1/(Λ*K), which accumulates at −2.
struct PpModel {
    MassDistribution dist;
    PressureDensityDistribution pd;
    JacobiOperator op;
    ScalingParams params;
    double c = 0.0, b = 0.0;
};

inline PpModel build_pp_model(const DSPConstruction& dsp, int N, bool lower_edge = true, double eta = 0.5,
                              double gamma = 2.0, bool perturb = true)
{
    detail::require(N >= 2, "N must be at least 2");
    const double h = std::pow(eta, gamma / 2.0);
    const double kappa = 4.0 / (1.0 / h + h);
    const double M_star = 1.0 / kappa;  // Λ* = G𝔐*/R*³ = 1/κ
    auto dist = build_mass_distribution(eta, gamma, M_star, 1.0, N + 1);
    const double K = amplitude_constant(eta, gamma);
    const double lam = M_star;
    const double c = 4.0 / K;
    const double b = perturb ? (lower_edge ? -1.0 : 1.0) / (lam * K) : 0.0;
    const auto G = dsp.G_diag(N + 1);
    auto pd = build_pd_distribution(dist, gamma_profile(GammaKind::perturbed, c, b, eta, N + 1, G));
    auto op = assemble_jacobi(dist, pd, N);
    auto params = scaling_params(dist, 0.0);
    return PpModel{std::move(dist), std::move(pd), std::move(op), params, c, b};
}

struct RayleighEntry {
    int m = 0;
    double q = 0.0;
};

/// q_m = ⟨X_m,(A − edge)X_m⟩/⟨X_m,X_m⟩ from the tridiagonal quadratic form.
/// Below the centre of the essential interval the tents carry the sign (−1)^I.
inline std::vector<RayleighEntry> rayleigh_quotients(const JacobiOperator& op, const DSPConstruction& dsp,
                                                     double edge)
{
    const double center = op.diag_limit.value_or(0.0);
    const bool alternate = edge < center;
    std::vector<RayleighEntry> out;
    out.reserve(dsp.m_max());
    for (int m = 1; m <= dsp.m_max(); ++m) {
        const Block& B = dsp.blocks[m - 1];
        if (B.last() > op.size() || B.last() > static_cast<int>(op.offdiag.size()))
            throw validation_error("support of X_" + std::to_string(m) + " exceeds the operator length");
        auto X = [&](int I) { return (alternate && (I % 2)) ? -dsp.tent(m, I) : dsp.tent(m, I); };
        double num = 0.0, den = 0.0;
        for (int I = B.start; I <= B.last(); ++I) {
            const double x = X(I);
            den += x * x;
            num += (op.a(I) - edge) * x * x;
            if (I < B.last()) num += 2.0 * op.c(I) * x * X(I + 1);
        }
        out.push_back({m, num / den});
    }
    return out;
}

struct EdgeEigenpair {
    double value = 0.0;
    int block = 0;                // block holding the largest share of ℓ² mass, 0 if none
    double block_fraction = 0.0;  // mass within B_block ± 2
    std::vector<double> vector;
};

/// Eigenvalues of the N-truncation in [edge − window, edge), ordered by decreasing
/// distance to the edge, with a localization witness per eigenvector.
inline std::vector<EdgeEigenpair> detect_edge_eigenvalues(const JacobiOperator& op, int N, double edge, double window,
                                                          const DSPConstruction& dsp, double tol = 1e-13,
                                                          int threads = 1)
{
    detail::require(window > 0.0, "window must be positive");
    const Tridiagonal t(op, N);
    auto eigs = eigenvalues_in_window(t, edge - window, edge, tol, threads);
    if (!eigs.empty() && eigs.back() >= edge) eigs.pop_back();
    auto vecs = eigenvectors(t, eigs);
    std::vector<EdgeEigenpair> out(eigs.size());
    for (std::size_t k = 0; k < eigs.size(); ++k) {
        auto& e = out[k];
        e.value = eigs[k];
        std::vector<double> share(dsp.m_max() + 1, 0.0);
        double total = 0.0;
        for (int I = 1; I <= N; ++I) {
            const double w = vecs[k][I - 1] * vecs[k][I - 1];
            total += w;
            share[dsp.block_of(I)] += w;
        }
        double best = 0.0;
        for (int m = 1; m <= dsp.m_max(); ++m)
            if (share[m] > best) {
                best = share[m];
                e.block = m;
            }
        if (e.block > 0) {
            const Block& B = dsp.blocks[e.block - 1];
            double in = 0.0;
            for (int I = std::max(1, B.start - 2); I <= std::min(N, B.last() + 2); ++I)
                in += vecs[k][I - 1] * vecs[k][I - 1];
            e.block_fraction = in / total;
        }
        e.vector = std::move(vecs[k]);
    }
    return out;
}

}  // namespace lawe

#endif
