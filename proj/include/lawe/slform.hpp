#ifndef LAWE_SLFORM_HPP
#define LAWE_SLFORM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "lawe/discrete.hpp"
#include "lawe/error.hpp"
#include "lawe/model.hpp"

namespace lawe {

/// Continuous equation of state on [R_δ, R*) with ρ = (R*−x)^a.
/// polytropic: P = K·ρ^b. linear_thermal: P = T(x)ρ + L(x), T = K(R*−x)^{ab−a}, L = L0·(R*−x)^c.
struct EOSSpec {
    enum class Variant { polytropic, linear_thermal };
    Variant variant = Variant::polytropic;
    double K = 1.0;  // K, or K₀ for linear_thermal
    double a = 2.0, b = 4.0;
    double L0 = 0.0, c = 0.0;
    double R_star = 1.0, R_delta = 0.5;

    static EOSSpec polytropic(double K, double b, double a, double R_star = 1.0, double R_delta = 0.5)
    {
        EOSSpec e{Variant::polytropic, K, a, b, 0.0, 0.0, R_star, R_delta};
        e.validate();
        return e;
    }
    static EOSSpec linear_thermal(double K0, double L0, double a, double b, double c, double R_star = 1.0,
                                  double R_delta = 0.5)
    {
        EOSSpec e{Variant::linear_thermal, K0, a, b, L0, c, R_star, R_delta};
        e.validate();
        return e;
    }

    bool is_polytropic() const { return variant == Variant::polytropic; }
    /// ΓP = A·(R*−x)^{ab}: A = bK (polytropic) or K₀.
    double A() const { return is_polytropic() ? b * K : K; }
    /// exponent of W = (R*−x)^s/√A
    double s() const { return 0.5 * (a - a * b); }

    void validate() const
    {
        detail::require(R_star > 0.0 && R_delta > 0.0 && R_delta < R_star, "need 0 < R_delta < R_star");
        if (is_polytropic()) {
            detail::require(K > 0.0, "polytropic K must be positive");
            detail::require(b > 1.0, "polytropic b must exceed 1");
            detail::require(a > 0.0, "polytropic a must be positive");
        } else {
            detail::require(K > 0.0, "K0 must be positive");
            detail::require(L0 > 0.0, "L0 must be positive");
            detail::require(a >= 1.0, "linear thermal a must be >= 1");
            detail::require(b >= 1.0, "linear thermal b must be >= 1");
            detail::require(c > 0.0, "linear thermal c must be positive");
        }
    }
};

inline const char* to_string(EOSSpec::Variant v)
{
    return v == EOSSpec::Variant::polytropic ? "polytropic" : "linear_thermal";
}

/// Σ coef·d^e·x^m with d = R − x.
struct PowerTerm {
    double coef = 0.0, e = 0.0, m = 0.0;
};

struct PowerSum {
    std::vector<PowerTerm> terms;
    double R = 1.0;

    double at_depth(double d) const
    {
        const double x = R - d;
        double v = 0.0;
        for (const auto& t : terms) v += t.coef * std::pow(d, t.e) * std::pow(x, t.m);
        return v;
    }

    /// d/dx (d/dx of d^e is −e·d^{e−1}).
    PowerSum derivative() const
    {
        PowerSum out{{}, R};
        for (const auto& t : terms) {
            if (t.e != 0.0) out.terms.push_back({-t.coef * t.e, t.e - 1.0, t.m});
            if (t.m != 0.0) out.terms.push_back({t.coef * t.m, t.e, t.m - 1.0});
        }
        return out;
    }

    /// Leading behaviour coef·d^exponent as d → 0, expanding x^m = (R−d)^m to a few orders
    /// so that cancellations between terms are resolved.
    std::pair<double, double> leading() const
    {
        std::vector<std::pair<double, double>> acc;  // (exponent, coef)
        std::vector<double> scale;
        for (const auto& t : terms) {
            double binom = 1.0;
            for (int k = 0; k <= 4; ++k) {
                if (k > 0) binom *= (t.m - (k - 1)) / k;
                const double c = t.coef * std::pow(R, t.m - k) * binom * ((k % 2) ? -1.0 : 1.0);
                const double e = t.e + k;
                auto it = std::find_if(acc.begin(), acc.end(), [&](auto& p) { return std::abs(p.first - e) < 1e-12; });
                if (it == acc.end()) {
                    acc.push_back({e, c});
                    scale.push_back(std::abs(c));
                } else {
                    it->second += c;
                    scale[it - acc.begin()] = std::max(scale[it - acc.begin()], std::abs(c));
                }
            }
        }
        std::pair<double, double> best{std::numeric_limits<double>::infinity(), 0.0};
        for (std::size_t i = 0; i < acc.size(); ++i)
            if (std::abs(acc[i].second) > 1e-11 * scale[i] && acc[i].first < best.first) best = acc[i];
        return best;
    }
};

/// SL coefficients p = ΓPx⁴, q = −x³(d/dx)[(3Γ−4)P], w = ρx⁴, W = √(w/p).
class SLProblem {
public:
    explicit SLProblem(EOSSpec eos) : eos_(eos) { eos_.validate(); }
    const EOSSpec& eos() const { return eos_; }

    double depth(double x) const
    {
        if (!(x < eos_.R_star)) throw validation_error("domain error: x must be < R_star");
        return eos_.R_star - x;
    }
    double rho(double x) const { return std::pow(depth(x), eos_.a); }
    double P(double x) const
    {
        const double d = depth(x);
        const double base = eos_.K * std::pow(d, eos_.a * eos_.b);
        return eos_.is_polytropic() ? base : base + eos_.L0 * std::pow(d, eos_.c);
    }
    double P_Gamma(double x) const { return eos_.A() * std::pow(depth(x), eos_.a * eos_.b); }
    double p(double x) const { return P_Gamma(x) * std::pow(x, 4); }
    double w(double x) const { return rho(x) * std::pow(x, 4); }
    double W(double x) const { return std::pow(depth(x), eos_.s()) / std::sqrt(eos_.A()); }
    double q(double x) const { return q1_sum().at_depth(depth(x)) * w(x); }

    /// q/w as a power sum.
    PowerSum q1_sum() const
    {
        const auto& e = eos_;
        PowerSum s{{}, e.R_star};
        if (e.is_polytropic()) {
            s.terms.push_back({e.K * e.a * e.b * (3.0 * e.b - 4.0), e.a * e.b - e.a - 1.0, -1.0});
        } else {
            s.terms.push_back({-e.a * e.b * e.K, e.a * e.b - e.a - 1.0, -1.0});
            s.terms.push_back({-4.0 * e.c * e.L0, e.c - e.a - 1.0, -1.0});
        }
        return s;
    }

private:
    EOSSpec eos_;
};

inline SLProblem sl_coefficients(const EOSSpec& eos) { return SLProblem(eos); }

/// 𝔔(u) = 32 − 32(2+ab)u + (32 + 4a(−1+7b) + a²(−1+2b+3b²))u².
inline std::array<double, 3> frakQ_coefficients(double a, double b)
{
    return {32.0, -32.0 * (2.0 + a * b), 32.0 + 4.0 * a * (-1.0 + 7.0 * b) + a * a * (-1.0 + 2.0 * b + 3.0 * b * b)};
}

inline double frakQ(double u, double a, double b)
{
    const auto c = frakQ_coefficients(a, b);
    return c[0] + u * (c[1] + u * c[2]);
}

/// Sign of the (pw)^{−1/4}·d²/dX²(pw)^{1/4} term in Q. standard yields the canonical equation
/// satisfied by Y = (pw)^{1/4}y; printed carries the opposite sign.
enum class QConvention { standard, printed };

inline const char* to_string(QConvention c) { return c == QConvention::standard ? "standard" : "printed"; }

/// Liouville normal form: X(x) = ∫_{R_δ}^x W, Y = (pw)^{1/4}y, −Y″ + QY = λY.
/// Constant-potential forms (no EOS) use x = X and unit weights.
class CanonicalForm {
public:
    CanonicalForm(const EOSSpec& eos, QConvention conv) : eos_(eos), conv_(conv)
    {
        eos.validate();
        const SLProblem sl(eos);
        q1_ = sl.q1_sum();
        const auto fq = frakQ_coefficients(eos.a, eos.b);
        const double R = eos.R_star, sign = conv == QConvention::standard ? 1.0 : -1.0;
        q2_ = PowerSum{{}, R};
        for (int j = 0; j < 3; ++j)
            q2_.terms.push_back({sign * eos.A() * R * R * fq[j] * std::pow(R, -j) / 16.0,
                                 eos.a * eos.b - eos.a - 2.0, j - 2.0});
        q0_ = q1_;
        q0_.terms.insert(q0_.terms.end(), q2_.terms.begin(), q2_.terms.end());
        q0x_ = q0_.derivative();
        q0xx_ = q0x_.derivative();
        d_delta_ = R - eos.R_delta;
    }

    static CanonicalForm constant_potential(double Q)
    {
        CanonicalForm f;
        f.constant_ = Q;
        return f;
    }

    bool has_eos() const { return eos_.has_value(); }
    const EOSSpec& eos() const
    {
        if (!eos_) throw validation_error("canonical form has no equation of state");
        return *eos_;
    }
    QConvention convention() const { return conv_; }
    /// W ∉ L¹ near R*, i.e. X(x) → ∞ (ab − a ≥ 2).
    bool unbounded_X() const { return !eos_ || eos_->s() <= -1.0; }

    const PowerSum& q0_sum() const { return q0_; }
    const PowerSum& q1_sum() const { return q1_; }
    const PowerSum& q2_sum() const { return q2_; }

    double X_of_depth(double d) const
    {
        const auto& e = eos();
        const double s1 = e.s() + 1.0, sa = std::sqrt(e.A());
        if (std::abs(s1) < 1e-14) return std::log(d_delta_ / d) / sa;
        return (std::pow(d_delta_, s1) - std::pow(d, s1)) / (sa * s1);
    }
    double depth_of_X(double X) const
    {
        const auto& e = eos();
        const double s1 = e.s() + 1.0, sa = std::sqrt(e.A());
        if (std::abs(s1) < 1e-14) return d_delta_ * std::exp(-X * sa);
        const double base = std::pow(d_delta_, s1) - X * sa * s1;
        if (!(base > 0.0)) throw validation_error("X beyond the finite range of X(x)");
        return std::pow(base, 1.0 / s1);
    }
    double X_of_x(double x) const
    {
        if (!eos_) return x;
        if (!(x < eos_->R_star)) throw validation_error("domain error: x must be < R_star");
        return X_of_depth(eos_->R_star - x);
    }
    double x_of_X(double X) const { return eos_ ? eos_->R_star - depth_of_X(X) : X; }
    /// Supremum of X (infinite when W ∉ L¹).
    double X_limit() const
    {
        if (unbounded_X()) return std::numeric_limits<double>::infinity();
        return X_of_depth(0.0);
    }
    double depth_delta() const { return d_delta_; }

    double W_depth(double d) const { return eos_ ? std::pow(d, eos_->s()) / std::sqrt(eos_->A()) : 1.0; }
    double q0_depth(double d) const { return eos_ ? q0_.at_depth(d) : constant_; }
    double q1_depth(double d) const { return eos_ ? q1_.at_depth(d) : constant_; }
    double q2_depth(double d) const { return eos_ ? q2_.at_depth(d) : 0.0; }
    double q0(double x) const { return eos_ ? q0_depth(eos_->R_star - x) : constant_; }
    double q1(double x) const { return eos_ ? q1_depth(eos_->R_star - x) : constant_; }
    double q2(double x) const { return eos_ ? q2_depth(eos_->R_star - x) : 0.0; }
    double Q(double X) const { return eos_ ? q0_depth(depth_of_X(X)) : constant_; }

    /// dQ/dX and d²Q/dX² at depth d.
    double Q_X_depth(double d) const { return eos_ ? q0x_.at_depth(d) / W_depth(d) : 0.0; }
    double Q_XX_depth(double d) const
    {
        if (!eos_) return 0.0;
        const double W = W_depth(d), Wx = -eos_->s() * W / d;
        return (q0xx_.at_depth(d) / W - q0x_.at_depth(d) * Wx / (W * W)) / W;
    }

    /// log (pw)^{1/4} and its x-derivative divided by (pw)^{1/4}.
    double log_m_depth(double d) const
    {
        if (!eos_) return 0.0;
        const auto& e = *eos_;
        return 0.25 * std::log(e.A()) + 0.25 * (e.a * e.b + e.a) * std::log(d) + 2.0 * std::log(e.R_star - d);
    }
    double m_x_over_m_depth(double d) const
    {
        if (!eos_) return 0.0;
        const auto& e = *eos_;
        return -0.25 * (e.a * e.b + e.a) / d + 2.0 / (e.R_star - d);
    }

private:
    CanonicalForm() = default;
    std::optional<EOSSpec> eos_;
    QConvention conv_ = QConvention::standard;
    double constant_ = 0.0;
    double d_delta_ = 0.0;
    PowerSum q0_, q1_, q2_, q0x_, q0xx_;
};

inline CanonicalForm liouville(const EOSSpec& eos, QConvention conv = QConvention::standard)
{
    return CanonicalForm(eos, conv);
}

namespace detail {

/// ∫ f(d) dd over [d_lo, d_hi] in the variable u = ln d.
template <class F>
double depth_integral(F&& f, double d_lo, double d_hi, double tol = 1e-12)
{
    if (!(d_hi > d_lo)) return 0.0;
    auto g = [&](double u) {
        const double d = std::exp(u);
        return f(d) * d;
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, std::log(d_lo), std::log(d_hi), 12, tol);
}

}  // namespace detail

struct IntegrabilityCheck {
    std::string name;
    double analytic_exponent = 0.0;  // integrand ≍ (R*−x)^exponent in dx
    bool analytic_integrable = false;
    std::vector<double> decade_integrals;  // ∫|f| over successive decades of R*−x, outermost first
    bool numeric_integrable = false;
    bool expected_integrable = false;  // what the case analysis requires
    bool consistent() const { return analytic_integrable == numeric_integrable; }
    bool passed() const { return consistent() && numeric_integrable == expected_integrable; }
};

namespace detail {

template <class F>
IntegrabilityCheck integrability(std::string name, double exponent, bool expected, F&& f, double d_top,
                                 int decades = 6)
{
    IntegrabilityCheck c;
    c.name = std::move(name);
    c.analytic_exponent = exponent;
    c.analytic_integrable = exponent > -1.0;
    c.expected_integrable = expected;
    for (int k = 0; k < decades; ++k) {
        const double hi = d_top * std::pow(10.0, -k), lo = hi / 10.0;
        c.decade_integrals.push_back(depth_integral([&](double d) { return std::abs(f(d)); }, lo, hi, 1e-10));
    }
    const auto& I = c.decade_integrals;
    const int n = static_cast<int>(I.size());
    c.numeric_integrable = I[n - 1] < 0.98 * I[n - 2] && I[n - 2] < 0.98 * I[n - 3];
    return c;
}

}  // namespace detail

enum class SlRoute { polytropic, thermal, thermal_remark, outside_scope };

inline const char* to_string(SlRoute r)
{
    switch (r) {
    case SlRoute::polytropic: return "polytropic";
    case SlRoute::thermal: return "thermal";
    case SlRoute::thermal_remark: return "thermal_remark";
    case SlRoute::outside_scope: return "outside_scope";
    }
    return "?";
}

struct CaseReport {
    SlRoute route = SlRoute::outside_scope;
    std::string verdict;
    bool unbounded_X = false;
    bool thermal_case_i = false, thermal_case_ii = false;
    std::vector<IntegrabilityCheck> checks;
    /// (dP/dx + G𝔐*ρ/x²)/ρ at depth 10⁻⁶R*, linear thermal only (𝔐* from ρ on [0,R*], G = 1).
    std::optional<double> hse_surface_residual;
    bool all_checks_passed() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed(); });
    }
};

/// 𝔐* = 4π∫₀^{R*}(R*−x)^a x² dx.
inline double total_mass(const EOSSpec& eos)
{
    const double a = eos.a, R = eos.R_star;
    return 4.0 * pi * std::pow(R, a + 3.0) * 2.0 / ((a + 1.0) * (a + 2.0) * (a + 3.0));
}

inline CaseReport classify_sl_case(const EOSSpec& eos, QConvention conv = QConvention::standard)
{
    eos.validate();
    const auto form = liouville(eos, conv);
    const double a = eos.a, b = eos.b, ab_a = a * b - a, s = eos.s();
    const double d_top = std::min(1e-2 * eos.R_star, form.depth_delta());
    CaseReport r;
    r.unbounded_X = form.unbounded_X();
    auto W = [&](double d) { return form.W_depth(d); };
    if (eos.is_polytropic()) {
        if (std::abs(ab_a - 1.0) < 1e-12) {
            r.verdict = "outside scope: excluded state a(b-1) = 1";
            return r;
        }
        if (ab_a < 1.0) {
            r.verdict = "outside scope: a(b-1) < 1";
            return r;
        }
        r.route = SlRoute::polytropic;
        const auto lead = form.q0_sum().leading();
        if (ab_a > 2.0) {
            r.checks.push_back(detail::integrability(
                "q0*W", lead.first + s, true, [&](double d) { return form.q0_depth(d) * W(d); }, d_top));
        } else {
            const double k = std::abs(ab_a - 2.0) < 1e-12 ? form.q0_depth(0.0) : 0.0;
            PowerSum shifted = form.q0_sum();
            shifted.terms.push_back({-k, 0.0, 0.0});
            r.checks.push_back(detail::integrability("(q0-k)*W", shifted.leading().first + s, true,
                                                     [&](double d) { return (form.q0_depth(d) - k) * W(d); }, d_top));
        }
        r.verdict = r.unbounded_X ? "ac spectrum (0,inf); unbounded X" : "finite X range";
        return r;
    }
    r.thermal_case_i = a * b >= a + 2.0 && eos.c > a + 1.0;
    r.thermal_case_ii = a * b >= a + 3.0 && eos.c > a;
    const auto q1 = form.q1_sum(), q1x = q1.derivative(), q1xx = q1x.derivative();
    const auto q2x = form.q2_sum().derivative();
    const double lam = 1.0;
    const double e1 = q1.leading().first;
    const double E = std::min(0.0, e1);  // exponent of λ − Q₁
    auto Q1 = [&](double d) { return q1.at_depth(d); };
    auto Q1X = [&](double d) { return q1x.at_depth(d) / W(d); };
    auto Q1XX = [&](double d) {
        const double Wd = W(d), Wx = -s * Wd / d;
        return (q1xx.at_depth(d) / Wd - q1x.at_depth(d) * Wx / (Wd * Wd)) / Wd;
    };
    auto Q2X = [&](double d) { return q2x.at_depth(d) / W(d); };
    const double eQ1X = q1x.leading().first - s;
    PowerSum q1x_over_W = q1x;  // Q₁′·W in x is q1x; Q₁″ = (d/dx Q₁′)/W
    for (auto& t : q1x_over_W.terms) t.e -= s;
    const double eQ1XX = q1x_over_W.derivative().leading().first - s;
    const double eQ2X = q2x.leading().first - s;
    r.checks.push_back(detail::integrability(
        "W/sqrt(lambda-Q1)", s - E / 2.0, false, [&](double d) { return W(d) / std::sqrt(lam - Q1(d)); }, d_top));
    r.checks.push_back(detail::integrability("Q2'*W/(lambda-Q1)", eQ2X + s - E, true,
                                             [&](double d) { return Q2X(d) * W(d) / (lam - Q1(d)); }, d_top));
    r.checks.push_back(detail::integrability("Q1''*W/(lambda-Q1)^(3/2)", eQ1XX + s - 1.5 * E, true,
                                             [&](double d) { return Q1XX(d) * W(d) / std::pow(lam - Q1(d), 1.5); },
                                             d_top));
    r.checks.push_back(detail::integrability(
        "(Q1')^2*W/(lambda-Q1)^(5/2)", 2.0 * eQ1X + s - 2.5 * E, true,
        [&](double d) { return Q1X(d) * Q1X(d) * W(d) / std::pow(lam - Q1(d), 2.5); }, d_top));
    if (r.thermal_case_i || r.thermal_case_ii) {
        r.route = SlRoute::thermal;
        r.verdict = "ac spectrum (0,inf); no L2 solutions near infinity";
    } else if (ab_a > 2.0 && eos.c > a && r.checks[0].analytic_exponent <= -1.0) {
        r.route = SlRoute::thermal_remark;
        r.verdict = "ac spectrum (0,inf) by the exponent condition";
    } else {
        r.verdict = "outside scope: neither thermal case holds";
    }
    const double d = 1e-6 * eos.R_star, x = eos.R_star - d;
    const double dPdx = -(a * b * eos.K * std::pow(d, a * b - 1.0) + eos.c * eos.L0 * std::pow(d, eos.c - 1.0));
    const double rho = std::pow(d, a);
    r.hse_surface_residual = (dPdx + total_mass(eos) * rho / (x * x)) / rho;
    return r;
}

struct CanonicalTrace {
    double lambda = 0.0;
    std::vector<double> X, d, x;
    std::vector<std::complex<double>> Y, Yp, xi, delta_r;
    std::vector<double> k;             // √(λ − Q)
    std::vector<double> amplitude;     // ρ with Y ≈ ρk^{−1/2}sinθ per real part, combined in quadrature
    std::vector<double> dr_envelope;   // envelope of |δr|
    std::vector<double> F;             // ∫₀^X |Y|²
    std::size_t lg_start = 0;          // first index continued in amplitude-phase form
    double X_switch = 0.0;
    double drift_bound = 0.0;
    std::size_t size() const { return X.size(); }
};

struct IntegrateOptions {
    std::complex<double> Y0 = 0.0, Yp0 = 1.0;  // alternate seed (1, 0)
    int points_per_decade = 200;                // depth grid density
    int uniform_points = 1001;                  // grid for constant-potential forms
    double max_dX = 0.0;                        // extra grid refinement in the directly integrated range
    double tail_tol = 1e-3;                     // bound on the amplitude-phase drift
    double direct_phase_limit = 2.0 * pi * 1e5; // beyond this phase the tail is continued analytically
    double depth_min = 1e-8;                    // relative to R*, used when X_max is infinite
};

namespace detail {

struct LGDerivs {
    double k, kX, f, fX;
};

inline LGDerivs lg_derivs(const CanonicalForm& form, double lambda, double d)
{
    LGDerivs r;
    const double Q = form.q0_depth(d), QX = form.Q_X_depth(d), QXX = form.Q_XX_depth(d);
    r.k = std::sqrt(lambda - Q);
    r.kX = -QX / (2.0 * r.k);
    const double kXX = (-QXX - 2.0 * r.kX * r.kX) / (2.0 * r.k);
    r.f = r.kX / (2.0 * r.k);
    r.fX = kXX / (2.0 * r.k) - r.kX * r.kX / (2.0 * r.k * r.k);
    return r;
}

/// Drift bound for the amplitude-phase continuation from depth d_c down to d_end.
inline double lg_drift_bound(const CanonicalForm& form, double lambda, double d_c, double d_end)
{
    const auto c = lg_derivs(form, lambda, d_c);
    const double tail = depth_integral(
        [&](double d) {
            const auto g = lg_derivs(form, lambda, d);
            const double v = std::abs(g.fX) / g.k + std::abs(g.f * g.kX) / (g.k * g.k) + 2.0 * g.f * g.f / g.k;
            return v * form.W_depth(d);
        },
        d_end, d_c, 1e-8);
    return tail + std::abs(c.f) / c.k;
}

inline double phase_integral(const CanonicalForm& form, double lambda, double d_lo, double d_hi)
{
    return depth_integral(
        [&](double d) { return std::sqrt(std::max(0.0, lambda - form.q0_depth(d))) * form.W_depth(d); }, d_lo, d_hi,
        1e-8);
}

}  // namespace detail

/// Adaptive dopri5 integration of −Y″ + QY = λY from X = 0. When the total phase is too large for
/// direct integration the tail is continued as ρk^{−1/2}sinθ from a switch point where the certified
/// drift bound is below tail_tol. X_max = ∞ integrates to depth depth_min·R*.
inline CanonicalTrace integrate_canonical(const CanonicalForm& form, double lambda, double X_max, double rtol,
                                          const IntegrateOptions& opt = {})
{
    namespace ode = boost::numeric::odeint;
    detail::require(lambda > 0.0, "lambda must be positive");
    detail::require(rtol > 0.0, "rtol must be positive");
    detail::require(X_max > 0.0, "X_max must be positive");
    CanonicalTrace tr;
    tr.lambda = lambda;
    std::vector<double> grid_d;
    double d_end = 0.0;
    if (form.has_eos()) {
        const double R = form.eos().R_star;
        if (!std::isfinite(X_max)) {
            detail::require(form.unbounded_X(), "X_max infinite requires the unbounded-X regime");
            d_end = opt.depth_min * R;
        } else {
            if (!(X_max < form.X_limit())) throw validation_error("X_max exceeds the finite range of X(x)");
            d_end = form.depth_of_X(X_max);
        }
        const double d0 = form.depth_delta();
        detail::require(d_end < d0, "X_max too small");
        const int n = std::max(2, static_cast<int>(std::ceil(std::log10(d0 / d_end) * opt.points_per_decade)));
        for (int i = 0; i <= n; ++i) grid_d.push_back(d0 * std::pow(d_end / d0, static_cast<double>(i) / n));
        grid_d.back() = d_end;
    } else {
        detail::require(std::isfinite(X_max), "constant-potential forms need a finite X_max");
        const int n = std::max(2, opt.uniform_points);
        for (int i = 0; i < n; ++i) tr.X.push_back(X_max * i / (n - 1));
    }

    // switch point for the amplitude-phase tail
    double X_c = std::numeric_limits<double>::infinity(), d_c = 0.0;
    if (form.has_eos()) {
        const double total = detail::phase_integral(form, lambda, d_end, form.depth_delta());
        if (total > opt.direct_phase_limit) {
            X_c = 200.0 * 2.0 * pi / std::sqrt(lambda);
            const double X_end = form.X_of_depth(d_end);
            for (;;) {
                if (X_c >= X_end) {
                    X_c = std::numeric_limits<double>::infinity();
                    break;
                }
                d_c = form.depth_of_X(X_c);
                bool positive = true;
                for (double d : grid_d)
                    if (d <= d_c && !(lambda - form.q0_depth(d) > 0.0)) positive = false;
                if (positive && detail::lg_drift_bound(form, lambda, d_c, d_end) <= opt.tail_tol) break;
                if (detail::phase_integral(form, lambda, d_c, form.depth_delta()) > opt.direct_phase_limit)
                    throw numerical_error("amplitude-phase drift bound exceeds tail_tol up to X=" + std::to_string(X_c));
                X_c *= 2.0;
            }
        }
        for (double d : grid_d) {
            const double X = form.X_of_depth(d);
            if (X > X_c) break;
            if (opt.max_dX > 0.0 && !tr.X.empty())
                for (double Xi = tr.X.back() + opt.max_dX; Xi < X; Xi += opt.max_dX) tr.X.push_back(Xi);
            tr.X.push_back(X);
        }
        if (std::isfinite(X_c) && tr.X.back() < X_c) tr.X.push_back(X_c);
        tr.X.front() = 0.0;
        if (std::isfinite(X_max) && !std::isfinite(X_c)) tr.X.back() = X_max;
    }

    using state = std::array<double, 5>;
    auto rhs = [&](const state& s, state& ds, double X) {
        const double g = form.Q(X) - lambda;
        ds[0] = s[1];
        ds[1] = g * s[0];
        ds[2] = s[3];
        ds[3] = g * s[2];
        ds[4] = s[0] * s[0] + s[2] * s[2];
    };
    state s0{opt.Y0.real(), opt.Yp0.real(), opt.Y0.imag(), opt.Yp0.imag(), 0.0};
    std::vector<state> states;
    states.reserve(tr.X.size());
    auto observer = [&](const state& s, double) { states.push_back(s); };
    const double scale = std::max({std::abs(opt.Y0), std::abs(opt.Yp0), 1e-300});
    try {
        auto stepper = ode::make_dense_output(rtol * 1e-2 * scale, rtol, ode::runge_kutta_dopri5<state>());
        ode::integrate_times(stepper, rhs, s0, tr.X.begin(), tr.X.end(), 1e-3, observer,
                             ode::max_step_checker(1000000));
    } catch (const std::exception& e) {
        const double where = states.empty() ? 0.0 : tr.X[states.size() - 1];
        throw numerical_error(std::string("canonical integration failed after X=") + std::to_string(where) + ": " +
                              e.what());
    }
    if (states.size() != tr.X.size()) throw numerical_error("canonical integration returned an incomplete trace");

    const std::size_t nd = tr.X.size();
    tr.lg_start = nd;
    for (std::size_t i = 0; i < nd; ++i) {
        tr.Y.emplace_back(states[i][0], states[i][2]);
        tr.Yp.emplace_back(states[i][1], states[i][3]);
        tr.F.push_back(states[i][4]);
    }
    if (form.has_eos()) {
        for (double X : tr.X) tr.d.push_back(form.depth_of_X(X));
        tr.d.front() = form.depth_delta();
    }

    if (std::isfinite(X_c)) {
        tr.X_switch = X_c;
        tr.drift_bound = detail::lg_drift_bound(form, lambda, d_c, d_end);
        const double kc = std::sqrt(lambda - form.q0_depth(d_c));
        auto polar = [&](double Y, double Yp) {
            return std::pair{std::sqrt(kc * Y * Y + Yp * Yp / kc), std::atan2(kc * Y, Yp)};
        };
        const auto [rr, thr] = polar(tr.Y.back().real(), tr.Yp.back().real());
        const auto [ri, thi] = polar(tr.Y.back().imag(), tr.Yp.back().imag());
        const double sl = std::sqrt(lambda);
        double phase = 0.0, F = tr.F.back(), d_prev = d_c, X_prev = X_c;
        tr.lg_start = nd;
        for (double d : grid_d) {
            if (!(d < d_c)) continue;
            const double X = form.X_of_depth(d);
            const double dX = X - X_prev;
            phase += sl * dX + detail::depth_integral(
                                   [&](double t) {
                                       const double q = form.q0_depth(t), k = std::sqrt(lambda - q);
                                       return -q / (k + sl) * form.W_depth(t);
                                   },
                                   d, d_prev, 1e-10);
            F += 0.5 * (rr * rr + ri * ri) *
                 (dX / sl + detail::depth_integral(
                                [&](double t) {
                                    const double q = form.q0_depth(t), k = std::sqrt(lambda - q);
                                    return q / (k * sl * (k + sl)) * form.W_depth(t);
                                },
                                d, d_prev, 1e-10));
            const double k = std::sqrt(lambda - form.q0_depth(d));
            const double ik = 1.0 / std::sqrt(k), sk = std::sqrt(k);
            tr.X.push_back(X);
            tr.d.push_back(d);
            tr.Y.emplace_back(rr * ik * std::sin(thr + phase), ri * ik * std::sin(thi + phase));
            tr.Yp.emplace_back(rr * sk * std::cos(thr + phase), ri * sk * std::cos(thi + phase));
            tr.F.push_back(F);
            d_prev = d;
            X_prev = X;
        }
    }

    const std::size_t n = tr.X.size();
    tr.x.resize(n);
    tr.k.resize(n);
    tr.amplitude.resize(n);
    tr.xi.resize(n);
    tr.delta_r.resize(n);
    tr.dr_envelope.resize(n);
    double lg_amp = 0.0;
    if (tr.lg_start < n) {
        const double kc = std::sqrt(lambda - form.q0_depth(d_c));
        const auto& Y = tr.Y[tr.lg_start - 1];
        const auto& Yp = tr.Yp[tr.lg_start - 1];
        lg_amp = std::sqrt(kc * std::norm(Y) + std::norm(Yp) / kc);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double d = form.has_eos() ? tr.d[i] : 0.0;
        tr.x[i] = form.has_eos() ? form.eos().R_star - d : tr.X[i];
        const double Q = form.has_eos() ? form.q0_depth(d) : form.Q(tr.X[i]);
        tr.k[i] = std::sqrt(std::abs(lambda - Q));
        const double k = std::max(tr.k[i], 1e-300);
        tr.amplitude[i] = i >= tr.lg_start ? lg_amp : std::sqrt(k * std::norm(tr.Y[i]) + std::norm(tr.Yp[i]) / k);
        const double inv_m = std::exp(-form.log_m_depth(d));
        tr.xi[i] = tr.Y[i] * inv_m;
        tr.delta_r[i] = tr.x[i] * tr.xi[i];
        tr.dr_envelope[i] = form.has_eos() ? tr.x[i] * tr.amplitude[i] / std::sqrt(k) * inv_m : std::abs(tr.delta_r[i]);
    }
    return tr;
}

enum class WkbSplit { free, q1, q1_unbounded };
enum class WkbConvention { lambda, lambda_squared };

struct FitReport {
    std::complex<double> alpha, beta;
    double residual = 0.0;
    double X_lo = 0.0, X_hi = 0.0;
    int points = 0;
    std::vector<double> hypothesis_integrals;  // ∫|V₁|, ∫|V₂′| over the last decades (outermost first)
};

/// Least-squares fit of (Y, Y′) to (αu₊ + βu₋, ik(αu₊ − βu₋)) over the last decade of the directly
/// integrated range, u± = exp(±i∫√(λ−V₂)) (or √(λ²−V₂)). q1_unbounded adds the k^{−1/2} amplitude.
inline FitReport wkb_fit(const CanonicalTrace& tr, const CanonicalForm& form, WkbSplit split,
                         WkbConvention conv = WkbConvention::lambda)
{
    const double lam = tr.lambda;
    const double E = conv == WkbConvention::lambda ? lam : lam * lam;
    if (split != WkbSplit::free && !form.has_eos()) throw validation_error("V2 = Q1 needs an equation of state");
    auto V2_depth = [&](double d) { return split == WkbSplit::free ? 0.0 : form.q1_depth(d); };
    FitReport rep;
    // hypotheses
    if (form.has_eos()) {
        const auto& e = form.eos();
        const double d_top = std::min(1e-2 * e.R_star, form.depth_delta());
        const auto q1x = form.q1_sum().derivative();
        const double sV1 = split == WkbSplit::free ? form.q0_sum().leading().first
                                                    : form.q2_sum().leading().first;
        auto v1 = detail::integrability(
            "V1", sV1 + e.s(), true, [&](double d) { return (form.q0_depth(d) - V2_depth(d)) * form.W_depth(d); },
            d_top);
        rep.hypothesis_integrals = v1.decade_integrals;
        if (!v1.numeric_integrable) throw validation_error("wkb_fit hypotheses fail: V1 not integrable, refusing fit");
        if (split == WkbSplit::q1) {
            auto v2p = detail::integrability("V2'", q1x.leading().first, true,
                                             [&](double d) { return q1x.at_depth(d); }, d_top);
            const double lead = form.q1_sum().leading().first;
            if (!v2p.numeric_integrable || !(lead > 0.0))
                throw validation_error("wkb_fit hypotheses fail: V2 must tend to 0 with V2' integrable, refusing fit");
        } else if (split == WkbSplit::q1_unbounded) {
            const auto cr = classify_sl_case(e, form.convention());
            for (std::size_t i = 1; i < cr.checks.size(); ++i)
                if (!cr.checks[i].numeric_integrable)
                    throw validation_error("wkb_fit hypotheses fail: " + cr.checks[i].name + " not integrable");
        }
    } else {
        for (std::size_t i = 0; i < tr.size(); ++i)
            if (std::abs(form.Q(tr.X[i])) > 1e-12) throw validation_error("wkb_fit hypotheses fail: V1 = Q is not integrable");
    }
    const std::size_t hi = tr.lg_start;  // exclusive
    detail::require(hi >= 2, "trace too short for a fit");
    rep.X_hi = tr.X[hi - 1];
    rep.X_lo = rep.X_hi / 10.0;
    std::size_t lo = 0;
    while (lo < hi && tr.X[lo] < rep.X_lo) ++lo;
    detail::require(hi - lo >= 8, "trace too short for a fit");
    rep.points = static_cast<int>(hi - lo);
    std::vector<std::complex<double>> up, um;
    std::vector<double> kk, amp;
    double phase = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        if (i > lo) {
            if (form.has_eos())
                phase += detail::depth_integral(
                    [&](double t) { return std::sqrt(std::max(0.0, E - V2_depth(t))) * form.W_depth(t); }, tr.d[i],
                    tr.d[i - 1], 1e-10);
            else
                phase += std::sqrt(E) * (tr.X[i] - tr.X[i - 1]);
        }
        const double k = std::sqrt(std::max(1e-300, E - (form.has_eos() ? V2_depth(tr.d[i]) : 0.0)));
        kk.push_back(k);
        amp.push_back(split == WkbSplit::q1_unbounded ? 1.0 / std::sqrt(k) : 1.0);
        up.push_back(std::polar(1.0, phase));
        um.push_back(std::polar(1.0, -phase));
    }
    // normal equations for (α, β) over rows Y = A(αu₊ + βu₋), Y′/(ik·A) = αu₊ − βu₋
    std::complex<double> a11 = 0, a12 = 0, a22 = 0, r1 = 0, r2 = 0;
    const std::complex<double> I(0.0, 1.0);
    auto add = [&](std::complex<double> c1, std::complex<double> c2, std::complex<double> rhs) {
        a11 += std::conj(c1) * c1;
        a12 += std::conj(c1) * c2;
        a22 += std::conj(c2) * c2;
        r1 += std::conj(c1) * rhs;
        r2 += std::conj(c2) * rhs;
    };
    double norm = 0.0;
    for (std::size_t j = 0; j < up.size(); ++j) {
        const std::size_t i = lo + j;
        const auto y = tr.Y[i] / amp[j];
        const auto yp = tr.Yp[i] / (I * kk[j] * amp[j]);
        add(up[j], um[j], y);
        add(up[j], -um[j], yp);
        norm += std::norm(y) + std::norm(yp);
    }
    const auto det = a11 * a22 - std::conj(a12) * a12;
    rep.alpha = (a22 * r1 - a12 * r2) / det;
    rep.beta = (a11 * r2 - std::conj(a12) * r1) / det;
    double res = 0.0;
    for (std::size_t j = 0; j < up.size(); ++j) {
        const std::size_t i = lo + j;
        const auto y = tr.Y[i] / amp[j];
        const auto yp = tr.Yp[i] / (I * kk[j] * amp[j]);
        res += std::norm(y - rep.alpha * up[j] - rep.beta * um[j]) + std::norm(yp - rep.alpha * up[j] + rep.beta * um[j]);
    }
    rep.residual = std::sqrt(res / std::max(norm, 1e-300));
    return rep;
}

struct DecayReport {
    std::vector<double> d, R_values, R_envelope;
    bool identically_zero = false;
    bool monotone_last_decade = false;
    double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    double analytic_exponent = 0.0;  // decay rate of the PΓ·x·y′ envelope
    double bound_exponent = 0.0;     // published upper-bound exponent
    bool bound_satisfied = false;    // fitted ≥ bound
};

/// Analytic decay exponent of PΓ(3ξ + xξ′): (ab + a)/4, plus (c−a−1)/4 when Q₁ → −∞ (c < a+1).
inline double regularity_exponent(const EOSSpec& e)
{
    double r = 0.25 * (e.a * e.b + e.a);
    if (!e.is_polytropic() && e.c < e.a + 1.0) r += 0.25 * (e.c - e.a - 1.0);
    return r;
}

inline DecayReport regularity_check(const CanonicalTrace& tr, const EOSSpec& eos)
{
    if (tr.d.empty() || tr.d.back() > 1e-6 * eos.R_star * (1.0 + 1e-9))
        throw validation_error("trace too short: must reach within 1e-6*R_star of the surface");
    const CanonicalForm form(eos, QConvention::standard);
    const SLProblem sl(eos);
    DecayReport r;
    r.analytic_exponent = regularity_exponent(eos);
    r.bound_exponent = (eos.is_polytropic() || eos.c > eos.a + 1.0) ? 0.5 * (eos.a + 1.0) : 0.75;
    const std::size_t n = tr.size();
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = tr.d[i], x = eos.R_star - d;
        const double PG = eos.A() * std::pow(d, eos.a * eos.b);
        const double inv_m = std::exp(-form.log_m_depth(d)), mx = form.m_x_over_m_depth(d);
        const double W = form.W_depth(d);
        const auto R = PG * inv_m * (tr.Y[i] * (3.0 - x * mx) + x * W * tr.Yp[i]);
        const double k = std::max(tr.k[i], 1e-300);
        const double env = PG * inv_m * tr.amplitude[i] * std::sqrt((3.0 - x * mx) * (3.0 - x * mx) / k + x * x * W * W * k);
        r.d.push_back(d);
        r.R_values.push_back(std::abs(R));
        r.R_envelope.push_back(env);
        peak = std::max(peak, env);
    }
    if (peak == 0.0) {
        r.identically_zero = true;
        r.monotone_last_decade = true;
        r.bound_satisfied = true;
        return r;
    }
    const double d_end = tr.d.back();
    bool mono = true;
    std::vector<double> lx, ly;
    for (std::size_t i = 1; i < n; ++i) {
        if (tr.d[i] <= 10.0 * d_end && r.R_envelope[i] > r.R_envelope[i - 1] * (1.0 + 1e-9)) mono = false;
        if (tr.d[i] <= 100.0 * d_end) {
            lx.push_back(std::log(tr.d[i]));
            ly.push_back(std::log(r.R_envelope[i]));
        }
    }
    r.monotone_last_decade = mono;
    if (lx.size() >= 2) r.fitted_exponent = detail::fit_line(lx, ly).slope;
    r.bound_satisfied = r.fitted_exponent >= r.bound_exponent;
    return r;
}

struct GrowthReport {
    std::vector<double> F;               // ∫₀^X |Y|²
    double slope = 0.0, r2 = 0.0;        // linear fit of F over the last half of the X range
    bool linear_growth = false;
    std::vector<double> running_max_dr;  // running max of the |δr| envelope
    double growth_factor = 0.0;          // running max at the end over its value two decades earlier
    double growth_exponent = std::numeric_limits<double>::quiet_NaN();  // d log max|δr| / d(−log(R*−x))
    double implied_sup_lower = 0.0;      // sup|δr| ≥ √(4πF/𝔐*)
    bool divergence = false;
};

inline GrowthReport l2_growth(const CanonicalTrace& tr, double M_star)
{
    detail::require(M_star > 0.0, "total mass must be positive");
    const std::size_t n = tr.size();
    detail::require(n >= 16, "trace too short for fit");
    GrowthReport g;
    g.F = tr.F;
    if (g.F.size() != n) {
        g.F.assign(n, 0.0);
        for (std::size_t i = 1; i < n; ++i)
            g.F[i] = g.F[i - 1] + 0.5 * (std::norm(tr.Y[i]) + std::norm(tr.Y[i - 1])) * (tr.X[i] - tr.X[i - 1]);
    }
    const double Xh = 0.5 * tr.X.back();
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i)
        if (tr.X[i] >= Xh) {
            xs.push_back(tr.X[i]);
            ys.push_back(g.F[i]);
        }
    if (xs.size() < 8) throw validation_error("trace too short for fit");
    const auto fit = detail::fit_line(xs, ys);
    g.slope = fit.slope;
    g.r2 = fit.r_squared;
    const double Fscale = std::max(std::abs(g.F.back()), 1e-300);
    g.linear_growth = g.slope * (xs.back() - xs.front()) > 1e-6 * Fscale && g.r2 > 0.99;
    g.implied_sup_lower = std::sqrt(4.0 * pi * g.F.back() / M_star);
    g.running_max_dr.resize(n);
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) g.running_max_dr[i] = m = std::max(m, tr.dr_envelope[i]);
    if (!tr.d.empty()) {
        const double d_end = tr.d.back();
        std::size_t j = 0;
        while (j < n && tr.d[j] > 100.0 * d_end) ++j;
        if (j < n && g.running_max_dr[j] > 0.0) g.growth_factor = g.running_max_dr.back() / g.running_max_dr[j];
        std::vector<double> lx, ly;
        for (std::size_t i = j; i < n; ++i)
            if (g.running_max_dr[i] > 0.0) {
                lx.push_back(-std::log(tr.d[i]));
                ly.push_back(std::log(g.running_max_dr[i]));
            }
        if (lx.size() >= 2) g.growth_exponent = detail::fit_line(lx, ly).slope;
    }
    g.divergence = g.linear_growth && g.growth_factor >= 10.0;
    return g;
}

}  // namespace lawe

#endif
