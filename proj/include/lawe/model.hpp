#ifndef LAWE_MODEL_HPP
#define LAWE_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lawe/error.hpp"

namespace lawe {

inline constexpr double pi = std::numbers::pi;

/// Geometric shell partition: M(I), r(I), 𝔐(I) for shells I = 1, 2, ...
///
/// Tables cover 1 <= I <= size(); the closed-form accessors accept any I >= 1
/// and stay finite where the tabulated masses underflow.
class MassDistribution {
public:
    MassDistribution(double eta, double gamma, double M_star, double R_star, int N, double G = 1.0)
        : eta_(eta), gamma_(gamma), M_star_(M_star), R_star_(R_star), G_(G), N_(N)
    {
        detail::require(eta > 0.0 && eta < 1.0, "eta must lie in (0,1)");
        detail::require(gamma > 0.0, "gamma must be positive");
        detail::require(M_star > 0.0, "M_star must be positive");
        detail::require(R_star > 0.0, "R_star must be positive");
        detail::require(G > 0.0, "G must be positive");
        detail::require(N >= 1, "N must be at least 1");
        log_eta_ = std::log(eta);
        const double q = std::pow(eta, gamma);
        M_.resize(N);
        r_.resize(N);
        enclosed_.resize(N);
        M_[0] = M_star * (1.0 - q) * q;
        for (int I = 2; I <= N; ++I) M_[I - 1] = M_[I - 2] * q;
        for (int I = 1; I <= N; ++I) {
            r_[I - 1] = radius(I);
            enclosed_[I - 1] = enclosed_mass(I);
        }
    }

    double eta() const { return eta_; }
    double gamma() const { return gamma_; }
    double M_star() const { return M_star_; }
    double R_star() const { return R_star_; }
    double G() const { return G_; }
    int size() const { return N_; }
    double log_eta() const { return log_eta_; }

    const std::vector<double>& M() const { return M_; }
    const std::vector<double>& r() const { return r_; }
    const std::vector<double>& enclosed() const { return enclosed_; }

    double mass(int I) const { return I <= N_ ? M_[I - 1] : std::exp(log_mass(I)); }
    double log_mass(int I) const
    {
        return std::log(M_star_) + std::log1p(-std::exp(gamma_ * log_eta_)) + gamma_ * I * log_eta_;
    }
    double radius(int I) const { return -R_star_ * std::expm1(I * log_eta_); }
    double log_radius(int I) const { return std::log(R_star_) + std::log(-std::expm1(I * log_eta_)); }
    /// log(r(I) − r(I−1)), with r(0) = 0.
    double log_shell_width(int I) const
    {
        return std::log(R_star_) + (I - 1) * log_eta_ + std::log1p(-eta_);
    }
    /// 𝔐(I) = 𝔐*(1 − η^{γ(I+1)}); 𝔐(0) is the formal core value.
    double enclosed_mass(int I) const { return -M_star_ * std::expm1(gamma_ * (I + 1) * log_eta_); }

private:
    double eta_, gamma_, M_star_, R_star_, G_;
    int N_;
    double log_eta_ = 0.0;
    std::vector<double> M_, r_, enclosed_;
};

inline MassDistribution build_mass_distribution(double eta, double gamma, double M_star, double R_star, int N,
                                                double G = 1.0)
{
    return MassDistribution(eta, gamma, M_star, R_star, N, G);
}

struct ScalingParams {
    double lambda_star;
    double kappa;
    double zeta;

    /// ℐ = [(−ζ−2κ)Λ*, (−ζ+2κ)Λ*]
    std::pair<double, double> interval() const
    {
        return {(-zeta - 2.0 * kappa) * lambda_star, (-zeta + 2.0 * kappa) * lambda_star};
    }
};

inline ScalingParams scaling_params(const MassDistribution& dist, double zeta)
{
    detail::require(zeta > -4.0, "zeta must exceed -4");
    const double h = std::pow(dist.eta(), dist.gamma() / 2.0);
    ScalingParams s;
    s.lambda_star = dist.G() * dist.M_star() / std::pow(dist.R_star(), 3);
    s.kappa = (4.0 + zeta) / (1.0 / h + h);
    s.zeta = zeta;
    return s;
}

/// K = (1 + η^{−γ})/(η^{−1} − 1); links the Γ amplitude to ζ through 4 + ζ = c·K.
inline double amplitude_constant(double eta, double gamma)
{
    return (1.0 + std::pow(eta, -gamma)) / (1.0 / eta - 1.0);
}

/// Γ(I) = amplitude[I−1]·ratio^I, kept factored so that Γ never underflows.
struct GammaProfile {
    double ratio = 1.0;
    std::vector<double> amplitude;

    int size() const { return static_cast<int>(amplitude.size()); }
    double log_value(int I) const { return std::log(amplitude[I - 1]) + I * std::log(ratio); }
    double value(int I) const { return amplitude[I - 1] * std::pow(ratio, I); }
};

enum class GammaKind { plain, perturbed };

/// plain: Γ(I) = c·η^I; perturbed: Γ(I) = (c − b·𝔊(I))·η^I with 𝔊 indexed from I = 1.
inline GammaProfile gamma_profile(GammaKind kind, double c, double b, double eta, int N,
                                  std::span<const double> G_seq = {})
{
    detail::require(c > 0.0, "gamma profile amplitude c must be positive");
    detail::require(eta > 0.0 && eta < 1.0, "eta must lie in (0,1)");
    detail::require(N >= 1, "N must be at least 1");
    GammaProfile g;
    g.ratio = eta;
    g.amplitude.assign(N, c);
    if (kind == GammaKind::perturbed) {
        detail::require(static_cast<int>(G_seq.size()) >= N, "perturbed gamma profile needs G_seq of length >= N");
        for (int I = 1; I <= N; ++I) {
            const double a = c - b * G_seq[I - 1];
            if (!(a > 0.0))
                throw validation_error("gamma profile must stay positive: c - b*G(I) <= 0 at I=" + std::to_string(I));
            g.amplitude[I - 1] = a;
        }
    }
    return g;
}

inline GammaProfile constant_gamma(double Gamma, int N)
{
    detail::require(Gamma > 0.0, "Gamma must be positive");
    return GammaProfile{1.0, std::vector<double>(N, Gamma)};
}

/// Sequences Γ, P, ρ (stored as logarithms) and 𝔇 = ΓPρ.
struct PressureDensityDistribution {
    std::vector<double> log_Gamma, log_P, log_rho;
    std::optional<double> induced_zeta;
    bool density_vanishes = true;

    int size() const { return static_cast<int>(log_Gamma.size()); }
    double Gamma(int I) const { return std::exp(log_Gamma[I - 1]); }
    double P(int I) const { return std::exp(log_P[I - 1]); }
    double rho(int I) const { return std::exp(log_rho[I - 1]); }
    double log_D(int I) const { return log_Gamma[I - 1] + log_P[I - 1] + log_rho[I - 1]; }
    double D(int I) const { return std::exp(log_D(I)); }

    std::vector<double> D_values() const
    {
        std::vector<double> out(size());
        for (int I = 1; I <= size(); ++I) out[I - 1] = D(I);
        return out;
    }

    /// 𝔇 ↦ σ·𝔇, applied to Γ.
    PressureDensityDistribution scaled(double sigma) const
    {
        detail::require(sigma > 0.0, "scale factor must be positive");
        PressureDensityDistribution out = *this;
        for (double& v : out.log_Gamma) v += std::log(sigma);
        out.induced_zeta.reset();
        return out;
    }

    static PressureDensityDistribution from_values(std::span<const double> Gamma, std::span<const double> P,
                                                   std::span<const double> rho)
    {
        detail::require(Gamma.size() == P.size() && P.size() == rho.size(),
                        "Gamma, P and rho must have equal length");
        PressureDensityDistribution pd;
        auto take = [](std::span<const double> in, std::vector<double>& out, const char* name) {
            out.reserve(in.size());
            for (double v : in) {
                if (!(v > 0.0)) throw validation_error(std::string(name) + " entries must be strictly positive");
                out.push_back(std::log(v));
            }
        };
        take(Gamma, pd.log_Gamma, "Gamma");
        take(P, pd.log_P, "P");
        take(rho, pd.log_rho, "rho");
        return pd;
    }
};

namespace detail {

/// log ρ(I) from discrete mass conservation ρ = M/(4π r² Δr).
inline std::vector<double> mass_conserving_log_rho(const MassDistribution& dist, int N)
{
    std::vector<double> out(N);
    for (int I = 1; I <= N; ++I)
        out[I - 1] = dist.log_mass(I) - std::log(4.0 * pi) - 2.0 * dist.log_radius(I) - dist.log_shell_width(I);
    return out;
}

}  // namespace detail

struct PdOptions {
    bool allow_nonvanishing_density = false;
    std::optional<double> zeta;
};

/// ρ from mass conservation; P(I) = M(I)·Λ*/(4πR*)·(1 + η^I).
inline PressureDensityDistribution build_pd_distribution(const MassDistribution& dist, const GammaProfile& Gamma,
                                                         const PdOptions& opts = {})
{
    const int N = Gamma.size();
    detail::require(N >= 1, "gamma profile is empty");
    if (dist.gamma() <= 1.0 && !opts.allow_nonvanishing_density)
        throw validation_error("gamma must exceed 1 for the density to vanish at the surface");
    PressureDensityDistribution pd;
    pd.density_vanishes = dist.gamma() > 1.0;
    pd.log_rho = detail::mass_conserving_log_rho(dist, N);
    pd.log_Gamma.resize(N);
    pd.log_P.resize(N);
    const double lam = dist.G() * dist.M_star() / std::pow(dist.R_star(), 3);
    const double base = std::log(lam / (4.0 * pi * dist.R_star()));
    for (int I = 1; I <= N; ++I) {
        const double g = Gamma.log_value(I);
        if (!std::isfinite(g)) throw validation_error("Gamma must be strictly positive");
        pd.log_Gamma[I - 1] = g;
        pd.log_P[I - 1] = dist.log_mass(I) + base + std::log1p(std::exp(I * dist.log_eta()));
    }
    if (Gamma.ratio == dist.eta()) {
        const double zeta = Gamma.amplitude.back() * amplitude_constant(dist.eta(), dist.gamma()) - 4.0;
        if (opts.zeta && std::abs(*opts.zeta - zeta) > 1e-10 * (4.0 + std::abs(zeta)))
            throw validation_error("zeta inconsistent with the gamma amplitude: 4+zeta must equal c*K");
        pd.induced_zeta = zeta;
    }
    return pd;
}

/// Constant Γ = γ/(γ−1), P/M = Λ*/(4πR*) exactly, ρ from mass conservation.
inline PressureDensityDistribution build_almost_polytrope(const MassDistribution& dist, int N)
{
    detail::require(dist.gamma() > 1.0, "almost polytrope needs gamma > 1");
    detail::require(N >= 1, "N must be at least 1");
    PressureDensityDistribution pd;
    pd.log_rho = detail::mass_conserving_log_rho(dist, N);
    pd.log_Gamma.assign(N, std::log(dist.gamma() / (dist.gamma() - 1.0)));
    pd.log_P.resize(N);
    const double lam = dist.G() * dist.M_star() / std::pow(dist.R_star(), 3);
    const double base = std::log(lam / (4.0 * pi * dist.R_star()));
    for (int I = 1; I <= N; ++I) pd.log_P[I - 1] = dist.log_mass(I) + base;
    return pd;
}

/// Constant Γ, ρ from mass conservation, Pρ/M² = C*·η^{I(s−2)} with s = (γ−1)(Γ−1).
inline PressureDensityDistribution build_nu_polytrope(const MassDistribution& dist, double Gamma, double C_star,
                                                      int N)
{
    detail::require(Gamma > 1.0, "Gamma must exceed 1");
    detail::require(C_star > 0.0, "C_star must be positive");
    detail::require(N >= 1, "N must be at least 1");
    const double s = (dist.gamma() - 1.0) * (Gamma - 1.0);
    PressureDensityDistribution pd;
    pd.log_rho = detail::mass_conserving_log_rho(dist, N);
    pd.log_Gamma.assign(N, std::log(Gamma));
    pd.log_P.resize(N);
    for (int I = 1; I <= N; ++I)
        pd.log_P[I - 1] = std::log(C_star) + I * (s - 2.0) * dist.log_eta() + 2.0 * dist.log_mass(I) - pd.log_rho[I - 1];
    return pd;
}

struct AdmissibilityReport {
    std::vector<double> hse_residual;   // I = 1 .. n−1
    std::vector<double> mass_residual;  // I = 1 .. n
    bool density_vanishes = true;
    bool admissible = false;
};

inline AdmissibilityReport check_admissibility(const PressureDensityDistribution& pd, const MassDistribution& dist,
                                               double tol = 1e-8)
{
    const int n = pd.size();
    detail::require(n >= 3, "pressure-density sequences must have length >= 3");
    detail::require(static_cast<int>(pd.log_P.size()) == n && static_cast<int>(pd.log_rho.size()) == n,
                    "pressure-density sequences must have equal length");
    AdmissibilityReport rep;
    rep.density_vanishes = pd.density_vanishes;
    rep.hse_residual.resize(n - 1);
    for (int I = 1; I < n; ++I) {
        const double lm = dist.log_mass(I + 1);
        const double dP = std::exp(pd.log_P[I] - lm) - std::exp(pd.log_P[I - 1] - lm);
        const double r = dist.radius(I);
        rep.hse_residual[I - 1] = std::abs(4.0 * pi * r * r * dP + dist.G() * dist.enclosed_mass(I) / (r * r));
    }
    rep.mass_residual.resize(n);
    for (int I = 1; I <= n; ++I) {
        const double l = pd.log_rho[I - 1] + std::log(4.0 * pi) + 2.0 * dist.log_radius(I) +
                         dist.log_shell_width(I) - dist.log_mass(I);
        rep.mass_residual[I - 1] = std::abs(std::expm1(l));
    }
    const int m = static_cast<int>(rep.hse_residual.size());
    const int q = std::max(1, m / 4);
    const double tail = *std::max_element(rep.hse_residual.end() - q, rep.hse_residual.end());
    const double before = m >= 2 * q
                              ? *std::max_element(rep.hse_residual.end() - 2 * q, rep.hse_residual.end() - q)
                              : tail;
    const bool tail_ok = tail <= tol && (tail <= before || before <= tol);
    const bool mass_ok = *std::max_element(rep.mass_residual.begin(), rep.mass_residual.end()) <= tol;
    rep.admissible = tail_ok && mass_ok && rep.density_vanishes;
    return rep;
}

}  // namespace lawe

#endif
