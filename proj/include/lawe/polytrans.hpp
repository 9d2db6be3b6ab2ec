#ifndef LAWE_POLYTRANS_HPP
#define LAWE_POLYTRANS_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lawe/discrete.hpp"
#include "lawe/error.hpp"
#include "lawe/model.hpp"

namespace lawe {

/// Diagonal transform d_j(x,y): d_1 = 1, d_{2m} = ∏ y^{2k−2}/x^{2k−1}, d_{2m+1} = ∏ y^{2k−1}/x^{2k}.
/// T is double or an exact rational type.
template <class T>
struct DiagTransform {
    int n = 0;
    T x, y;
    std::vector<T> d;  // d[j−1] = d_j
};

namespace detail {

template <class T>
T power(const T& base, int e)
{
    T r(1), b = base;
    while (e > 0) {
        if (e & 1) r *= b;
        b *= b;
        e >>= 1;
    }
    return r;
}

template <class T>
T magnitude(const T& v)
{
    return v < T(0) ? T(-v) : v;
}

}  // namespace detail

template <class T>
DiagTransform<T> diag_transform(int n, const T& x, const T& y)
{
    detail::require(n >= 1, "n must be at least 1");
    if (x == T(0) || y == T(0)) throw validation_error("diag_transform needs nonzero x and y");
    DiagTransform<T> t{n, x, y, std::vector<T>(n)};
    t.d[0] = T(1);
    // d_j = d_{j−2}·y^{j−2}/x^{j−1} for j ≥ 2 (d_0 := 1)
    for (int j = 2; j <= n; ++j) {
        const T prev = j >= 3 ? t.d[j - 3] : T(1);
        t.d[j - 1] = prev * detail::power(y, j - 2) / detail::power(x, j - 1);
    }
    return t;
}

/// Tridiagonal matrix by its three bands (sub[j−1] = [B]_{j+1,j}, sup[j−1] = [B]_{j,j+1}).
template <class T>
struct TriBands {
    std::vector<T> diag, sub, sup;
};

template <class T>
struct SimilarityResult {
    TriBands<T> B;
    T max_residual;
};

/// B = D(y,x)·A(x,y)·D(x,y) where A(x,y) has diagonal a_j, super-diagonal c_j·x^j and
/// sub-diagonal b_j·y^j. The residual is the largest deviation from
/// [B]_{j,j+1} = c_j, [B]_{j+1,j} = b_j, [B]_{j,j} = a_j/(xy)^{⌊j/2⌋}.
template <class T>
SimilarityResult<T> similarity_check(std::span<const T> a, std::span<const T> b, std::span<const T> c, const T& x,
                                     const T& y)
{
    const int n = static_cast<int>(a.size());
    detail::require(n >= 1, "n must be at least 1");
    if (static_cast<int>(b.size()) != n - 1 || static_cast<int>(c.size()) != n - 1)
        throw validation_error("dimension mismatch: b and c need n-1 entries");
    const auto Dl = diag_transform<T>(n, y, x);
    const auto Dr = diag_transform<T>(n, x, y);
    SimilarityResult<T> r{{std::vector<T>(n), std::vector<T>(n - 1), std::vector<T>(n - 1)}, T(0)};
    const auto worse = [&](const T& got, const T& want) {
        const T dev = detail::magnitude(T(got - want));
        if (r.max_residual < dev) r.max_residual = dev;
    };
    T xj(1), yj(1), xy_half(1);
    const T xy = x * y;
    for (int j = 1; j <= n; ++j) {
        if (j >= 2 && j % 2 == 0) xy_half *= xy;
        r.B.diag[j - 1] = Dl.d[j - 1] * a[j - 1] * Dr.d[j - 1];
        worse(r.B.diag[j - 1], T(a[j - 1] / xy_half));
        if (j < n) {
            xj *= x;
            yj *= y;
            r.B.sup[j - 1] = Dl.d[j - 1] * (c[j - 1] * xj) * Dr.d[j];
            r.B.sub[j - 1] = Dl.d[j] * (b[j - 1] * yj) * Dr.d[j - 1];
            worse(r.B.sup[j - 1], c[j - 1]);
            worse(r.B.sub[j - 1], b[j - 1]);
        }
    }
    return r;
}

enum class ScaledCase { almost_polytrope, nu_case };

inline const char* to_string(ScaledCase c) { return c == ScaledCase::almost_polytrope ? "almost_polytrope" : "nu_case"; }

/// H·A·H = 𝒯 − 𝒟 with H = diag(s^{⌊I/2⌋}), s = η (almost polytrope) or ν.
/// μ_I = s^I·G₃(I), β_I = s^I·(θ − G₂(I)); 𝒯 has diagonal θ·s^{2⌊I/2⌋} and couplings μ_I,
/// 𝒟 has entries β_I·s^{2⌊I/2⌋−I}.
struct ScaledSystem {
    ScaledCase kind = ScaledCase::almost_polytrope;
    double theta = 0.0;
    double s = 0.0;   // η or ν
    double nu = 0.0;  // ν (equals η for almost polytropes)
    double Gamma = 0.0;
    std::vector<double> mu_seq, beta_seq;
    double mu_limit = 0.0, beta_limit = 0.0;
    JacobiOperator T;
    std::vector<double> D_diag;

    int size() const { return static_cast<int>(mu_seq.size()); }
    static int alpha(int I) { return I / 2; }
    double log_H(int I) const { return alpha(I) * std::log(s); }
};

inline ScaledSystem build_scaled_system(const MassDistribution& dist, const PressureDensityDistribution& pd,
                                        ScaledCase kind, int N)
{
    detail::require(N >= 2, "N must be at least 2");
    detail::require(pd.size() >= N + 1, "pressure-density distribution must have length >= N+1");
    const double eta = dist.eta(), gam = dist.gamma();
    const double Gamma = pd.Gamma(1);
    for (int I = 2; I <= pd.size(); ++I)
        if (std::abs(pd.log_Gamma[I - 1] - pd.log_Gamma[0]) > 1e-12)
            throw validation_error("scaled system needs a constant Gamma");
    const double lam = dist.G() * dist.M_star() / std::pow(dist.R_star(), 3);
    ScaledSystem sys;
    sys.kind = kind;
    sys.Gamma = Gamma;
    if (kind == ScaledCase::almost_polytrope) {
        if (!(gam >= 2.0 - 1e-12)) throw validation_error("almost polytrope requires gamma >= 2");
        if (!(Gamma > 1.0 && Gamma <= 2.0 + 1e-12)) throw validation_error("almost polytrope requires 1 < Gamma <= 2");
        sys.s = sys.nu = eta;
        sys.theta = 4.0 * lam;
        sys.mu_limit = lam * Gamma * std::pow(eta, 1.0 - gam / 2.0) / (1.0 - eta);
        sys.beta_limit = lam * Gamma * (eta + std::pow(eta, 2.0 - gam)) / (1.0 - eta);
    } else {
        const double e = (gam - 1.0) * (Gamma - 1.0);
        if (!(gam > 1.0)) throw validation_error("nu case requires gamma > 1");
        if (!(gam <= Gamma / (Gamma - 1.0) + 1e-12)) throw validation_error("nu case requires gamma <= Gamma/(Gamma-1)");
        if (!(e > 0.0 && e <= 1.0 + 1e-12)) throw validation_error("nu case requires 0 < (gamma-1)(Gamma-1) <= 1");
        sys.nu = sys.s = std::pow(eta, 2.0 - e);
        sys.theta = 0.0;
        // C* from P·ρ/M² = C*·η^{I(e−2)} at I = 1
        const double C_star = std::exp(pd.log_P[0] + pd.log_rho[0] - 2.0 * dist.log_mass(1) - (e - 2.0) * dist.log_eta());
        const double base = 16.0 * pi * pi * std::pow(dist.R_star(), 4) * C_star * Gamma;
        sys.mu_limit = base * std::pow(eta, -gam / 2.0);
        sys.beta_limit = base * (1.0 + std::pow(eta, -gam) * sys.nu);
    }
    const GCoefficients g(dist, pd);
    const double ls = std::log(sys.s);
    sys.mu_seq.resize(N);
    sys.beta_seq.resize(N);
    sys.D_diag.resize(N);
    std::vector<double> tdiag(N);
    for (int I = 1; I <= N; ++I) {
        sys.mu_seq[I - 1] = std::exp(I * ls + g.log_G3(I));
        // s^I·θ − e^{I ln s}G₂ with G₂ scaled to avoid overflow
        sys.beta_seq[I - 1] = sys.theta * std::exp(I * ls) - g.G2_scaled(I, I * ls);
        const int a = ScaledSystem::alpha(I);
        sys.D_diag[I - 1] = sys.beta_seq[I - 1] * std::exp((2 * a - I) * ls);
        tdiag[I - 1] = sys.theta * std::exp(2 * a * ls);
    }
    sys.T = JacobiOperator(std::move(tdiag), sys.mu_seq, 0.0, sys.mu_limit);
    return sys;
}

struct LocalFrequencies {
    int I_first = 1;
    std::vector<double> lambda_I;   // λ_I = −λ + β_I·s^{2α(I)−I}
    std::vector<double> log_omega;  // log ω(I), ω(I) = √λ_I·s^{−α(I)}
    double slope = 0.0;             // fitted d log ω / dI
    double expected_slope = 0.0;    // ½·ln(1/s)
    double omega(int I) const { return std::exp(log_omega.at(I - I_first)); }
};

/// ω(I) on [I_first, I_last]; errors when λ_I ≤ 0 anywhere in the range.
inline LocalFrequencies local_frequencies(const ScaledSystem& sys, double lambda, int I_first = 1, int I_last = 0)
{
    if (I_last == 0) I_last = sys.size();
    detail::require(lambda <= 0.0, "lambda must be <= 0");
    detail::require(I_first >= 1 && I_last <= sys.size() && I_last >= I_first + 1, "invalid index range");
    LocalFrequencies f;
    f.I_first = I_first;
    const double ls = std::log(sys.s);
    std::vector<double> Is;
    for (int I = I_first; I <= I_last; ++I) {
        const double lI = -lambda + sys.D_diag[I - 1];
        if (!(lI > 0.0))
            throw numerical_error("local frequency undefined: lambda_I <= 0 at I=" + std::to_string(I));
        f.lambda_I.push_back(lI);
        f.log_omega.push_back(0.5 * std::log(lI) - ScaledSystem::alpha(I) * ls);
        Is.push_back(I);
    }
    f.slope = detail::fit_line(Is, f.log_omega).slope;
    f.expected_slope = -0.5 * ls;
    return f;
}

struct DeltaRGrowth {
    std::vector<double> log_abs;  // log|δr(I)|, δr(I) = H(I)·Y(I)/√M(I)
    std::vector<int> peaks;       // indices (1-based) of |Y| local maxima used in the fit
    double growth_exponent = 0.0;
    double expected_exponent = 0.0;  // (γ−1)/2·ln(1/η)
};

inline DeltaRGrowth delta_r_growth(std::span<const double> Y, const ScaledSystem& sys, const MassDistribution& dist)
{
    if (!(dist.gamma() > 1.0)) throw validation_error("delta_r_growth needs gamma > 1 (bounded delta r otherwise)");
    const int n = static_cast<int>(Y.size());
    detail::require(n >= 3, "Y must have at least 3 entries");
    detail::require(n <= sys.size() && n <= dist.size(), "Y is longer than the scaled system");
    DeltaRGrowth g;
    g.log_abs.resize(n);
    for (int I = 1; I <= n; ++I)
        g.log_abs[I - 1] = std::log(std::abs(Y[I - 1])) + sys.log_H(I) - 0.5 * dist.log_mass(I);
    std::vector<double> x, y;
    for (int I = 2; I < n; ++I) {
        const double v = std::abs(Y[I - 1]);
        if (v > 0.0 && v >= std::abs(Y[I - 2]) && v >= std::abs(Y[I])) {
            g.peaks.push_back(I);
            x.push_back(I);
            y.push_back(g.log_abs[I - 1]);
        }
    }
    if (x.size() < 2) throw numerical_error("too few envelope peaks to fit a growth exponent");
    g.growth_exponent = detail::fit_line(x, y).slope;
    g.expected_exponent = 0.5 * (dist.gamma() - 1.0) * -dist.log_eta();
    return g;
}

}  // namespace lawe

#endif
