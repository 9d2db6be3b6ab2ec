#ifndef LAWE_DISCRETE_HPP
#define LAWE_DISCRETE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lawe/error.hpp"
#include "lawe/model.hpp"

namespace lawe {

/// G-coefficients evaluated on demand in log space.
///
/// G₁(I) = G₃(I−1) is implicit. G₂ is available in scaled form e^s·G₂(I) so that
/// callers multiplying by η^I (or similar) never form an overflowing intermediate.
class GCoefficients {
public:
    GCoefficients(MassDistribution dist, PressureDensityDistribution pd) : dist_(std::move(dist)), pd_(std::move(pd))
    {
        detail::require(pd_.size() >= 2, "pressure-density distribution must have length >= 2");
    }

    const MassDistribution& dist() const { return dist_; }
    const PressureDensityDistribution& pd() const { return pd_; }
    /// Largest I with G₃(I) defined (needs I+1).
    int max_index() const { return pd_.size() - 1; }

    double log_G3(int I) const
    {
        const double lr = dist_.log_radius(I), lr1 = dist_.log_radius(I + 1);
        const double lm = dist_.log_mass(I), lm1 = dist_.log_mass(I + 1);
        return std::log(16.0 * pi * pi) + pd_.log_D(I) + 4.0 * lr - 2.0 * lm + 2.0 * (lr1 - lr) + 0.5 * (lm - lm1);
    }
    double G3(int I) const { return std::exp(log_G3(I)); }

    /// 4G𝔐(I)/r³(I) scaled by e^s.
    double core_scaled(int I, double s) const
    {
        return std::exp(s + std::log(4.0 * dist_.G() * dist_.enclosed_mass(I)) - 3.0 * dist_.log_radius(I));
    }

    double G2_scaled(int I, double s) const
    {
        const double lr = dist_.log_radius(I), lm = dist_.log_mass(I);
        const double right = std::exp(s + log_G3(I) + 2.0 * lr - 2.0 * dist_.log_radius(I + 1) +
                                      0.5 * (dist_.log_mass(I + 1) - lm));
        double left = 0.0;
        if (I >= 2)
            left = std::exp(s + log_G3(I - 1) + 2.0 * lr - 2.0 * dist_.log_radius(I - 1) +
                            0.5 * (dist_.log_mass(I - 1) - lm));
        return core_scaled(I, s) - right - left;
    }
    double G2(int I) const { return G2_scaled(I, 0.0); }

    /// G₂ through 16π²r⁴(I)/M(I)·(𝔇(I)/M(I) + 𝔇(I−1)/M(I−1)), a different arithmetic route.
    double G2_alternative(int I, double s = 0.0) const
    {
        const double base = s + std::log(16.0 * pi * pi) + 4.0 * dist_.log_radius(I) - dist_.log_mass(I);
        double sum = std::exp(base + pd_.log_D(I) - dist_.log_mass(I));
        if (I >= 2) sum += std::exp(base + pd_.log_D(I - 1) - dist_.log_mass(I - 1));
        return core_scaled(I, s) - sum;
    }

private:
    MassDistribution dist_;
    PressureDensityDistribution pd_;
};

/// Tridiagonal operator with diagonal a_I and positive couplings c_I (I from 1).
///
/// offdiag may carry one extra entry c_n coupling to the first index outside the
/// truncation; it is used by recurrences and dropped by eigen-solvers.
struct JacobiOperator {
    std::vector<double> diag;
    std::vector<double> offdiag;
    std::optional<double> diag_limit;
    std::optional<double> offdiag_limit;

    JacobiOperator() = default;
    JacobiOperator(std::vector<double> d, std::vector<double> o, std::optional<double> dl = {},
                   std::optional<double> ol = {})
        : diag(std::move(d)), offdiag(std::move(o)), diag_limit(dl), offdiag_limit(ol)
    {
        validate();
    }

    int size() const { return static_cast<int>(diag.size()); }
    double a(int I) const { return diag[I - 1]; }
    double c(int I) const { return offdiag[I - 1]; }

    void validate() const
    {
        detail::require(!diag.empty(), "operator must have at least one diagonal entry");
        detail::require(offdiag.size() + 1 >= diag.size(), "offdiag must have at least size()-1 entries");
        for (double v : diag)
            if (std::isnan(v)) throw validation_error("operator diagonal contains NaN");
        for (double v : offdiag)
            if (!(v > 0.0)) throw validation_error("operator off-diagonal entries must be strictly positive");
    }
};

/// Free Jacobi operator J₀ (zero diagonal, unit couplings) with n rows.
inline JacobiOperator free_jacobi(int n)
{
    detail::require(n >= 1, "N must be at least 1");
    return JacobiOperator(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0), 0.0, 1.0);
}

inline JacobiOperator assemble_jacobi(const GCoefficients& g, int N)
{
    detail::require(N >= 1, "N must be at least 1");
    if (g.pd().size() < N + 1)
        throw validation_error("pressure-density distribution must have length >= N+1");
    std::vector<double> d(N), o(N);
    for (int I = 1; I <= N; ++I) {
        if (!(g.pd().log_D(I) > -std::numeric_limits<double>::infinity()))
            throw validation_error("D must be strictly positive at I=" + std::to_string(I));
        o[I - 1] = g.G3(I);
        d[I - 1] = g.G2(I);
        if (!std::isfinite(d[I - 1]) || !(o[I - 1] > 0.0) || !std::isfinite(o[I - 1]))
            throw numerical_error("G-coefficient evaluation failed at I=" + std::to_string(I));
    }
    JacobiOperator op(std::move(d), std::move(o));
    if (g.pd().induced_zeta && *g.pd().induced_zeta > -4.0) {
        const ScalingParams sp = scaling_params(g.dist(), *g.pd().induced_zeta);
        op.diag_limit = -sp.zeta * sp.lambda_star;
        op.offdiag_limit = sp.kappa * sp.lambda_star;
    }
    return op;
}

inline JacobiOperator assemble_jacobi(const MassDistribution& dist, const PressureDensityDistribution& pd, int N)
{
    return assemble_jacobi(GCoefficients(dist, pd), N);
}

enum class TailMode { divergent = 0, limit_only = 1, L2 = 2, L1 = 3, L1_weighted = 4 };

inline const char* to_string(TailMode m)
{
    switch (m) {
    case TailMode::divergent: return "divergent";
    case TailMode::limit_only: return "limit_only";
    case TailMode::L2: return "L2";
    case TailMode::L1: return "L1";
    case TailMode::L1_weighted: return "L1_weighted";
    }
    return "?";
}

struct TailNorms {
    double sum_abs = 0.0;       // Σ|s−z| over the last half
    double sum_sq = 0.0;        // Σ|s−z|²
    double sum_weighted = 0.0;  // Σ I·|s−z|
    double power_exponent = std::numeric_limits<double>::quiet_NaN();  // d ~ I^{−p}
    double geometric_rate = std::numeric_limits<double>::quiet_NaN();  // d ~ e^{g I}
    bool geometric = false;
    int resolved = 0;  // tail points above the rounding floor
};

struct ConvergenceMode {
    TailMode mode = TailMode::divergent;
    double limit = 0.0;
    TailNorms tail_norms;
};

namespace detail {

struct LineFit {
    double slope = 0.0, intercept = 0.0, r_squared = 0.0, sse = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y)
{
    const std::size_t n = x.size();
    LineFit f;
    if (n < 2) return f;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - f.intercept - f.slope * x[i];
        f.sse += e * e;
    }
    f.r_squared = syy > 0.0 ? 1.0 - f.sse / syy : 1.0;
    return f;
}

}  // namespace detail

/// Limit of a sequence by Richardson extrapolation through indices n/4, n/2, n.
inline double estimate_limit(std::span<const double> seq)
{
    const std::size_t n = seq.size();
    detail::require(n >= 4, "sequence too short for limit estimation");
    const double s1 = seq[n / 4 - 1], s2 = seq[n / 2 - 1], s3 = seq[n - 1];
    const double d1 = s1 - s2, d2 = s2 - s3;
    if (d2 == 0.0) return s3;
    const double r = d1 / d2;
    if (!(r > 1.0) || !std::isfinite(r)) {
        double acc = 0.0;
        for (std::size_t i = 3 * n / 4; i < n; ++i) acc += seq[i];
        return acc / static_cast<double>(n - 3 * n / 4);
    }
    return s3 - d2 / (r - 1.0);
}

/// Rounding floor for coefficients exponentiated from logs of size O(I): the absolute
/// error grows like eps·I, so the default floor is too tight for such sequences.
inline double log_space_noise_floor(std::span<const double> seq, std::optional<double> limit = {})
{
    double scale = std::abs(limit.value_or(0.0));
    for (double v : seq) scale = std::max(scale, std::abs(v));
    return 64.0 * std::numeric_limits<double>::epsilon() * scale * static_cast<double>(seq.size());
}

/// noise_floor overrides the default 64·eps·max|s| threshold below which tail
/// deviations count as rounding; log-space coefficients need a floor growing with I.
inline ConvergenceMode classify_tail(std::span<const double> seq, std::optional<double> limit_hint = {},
                                     std::optional<double> noise_floor = {})
{
    const std::size_t n = seq.size();
    detail::require(n >= 32, "classify_tail needs a sequence of length >= 32");
    for (double v : seq)
        if (!std::isfinite(v)) throw validation_error("classify_tail sequence contains non-finite entries");
    ConvergenceMode out;
    out.limit = limit_hint ? *limit_hint : estimate_limit(seq);
    const std::size_t h = n / 2;
    // entries are typically differences of O(max|s|) terms, so rounding noise scales with it
    double scale = std::abs(out.limit);
    for (double v : seq) scale = std::max(scale, std::abs(v));
    const double floor =
        noise_floor ? *noise_floor : 64.0 * std::numeric_limits<double>::epsilon() * std::max(scale, 1e-300);

    std::vector<double> I, logI, logd;
    double head_max = 0.0, end_max = 0.0;
    for (std::size_t i = h; i < n; ++i) {
        const double Ii = static_cast<double>(i + 1);
        const double d = std::abs(seq[i] - out.limit);
        out.tail_norms.sum_abs += d;
        out.tail_norms.sum_sq += d * d;
        out.tail_norms.sum_weighted += Ii * d;
        if (i < h + (n - h) / 4) head_max = std::max(head_max, d);
        if (i >= n - (n - h) / 8) end_max = std::max(end_max, d);
        if (d > floor) {
            I.push_back(Ii);
            logI.push_back(std::log(Ii));
            logd.push_back(std::log(d));
        }
    }
    out.tail_norms.resolved = static_cast<int>(I.size());
    if (I.size() < 8) {
        // tail sits at the rounding floor: converged faster than any fit can resolve
        const bool settled = end_max <= floor;
        out.mode = settled ? TailMode::L1_weighted : TailMode::divergent;
        out.tail_norms.geometric = settled;
        return out;
    }
    if (end_max > 0.0 && end_max >= head_max) {
        out.mode = TailMode::divergent;
        return out;
    }
    const auto geo = detail::fit_line(I, logd);
    const auto pow = detail::fit_line(logI, logd);
    out.tail_norms.geometric_rate = geo.slope;
    out.tail_norms.power_exponent = -pow.slope;
    constexpr double margin = 0.05;
    if (geo.sse < pow.sse && geo.slope < 0.0) {
        out.tail_norms.geometric = true;
        out.mode = TailMode::L1_weighted;
        return out;
    }
    const double p = -pow.slope;
    if (p > 2.0 + margin) out.mode = TailMode::L1_weighted;
    else if (p > 1.0 + margin) out.mode = TailMode::L1;
    else if (p > 0.5 + margin) out.mode = TailMode::L2;
    else if (p > margin) out.mode = TailMode::limit_only;
    else out.mode = TailMode::divergent;
    return out;
}

enum class PpStatement { none_inside, possible_outside_with_3_2_tail, unknown };
enum class AcStatement { full_interval, unknown };

inline const char* to_string(PpStatement s)
{
    switch (s) {
    case PpStatement::none_inside: return "none_inside";
    case PpStatement::possible_outside_with_3_2_tail: return "possible_outside_with_3/2_tail";
    case PpStatement::unknown: return "unknown";
    }
    return "?";
}

inline const char* to_string(AcStatement s) { return s == AcStatement::full_interval ? "full_interval" : "unknown"; }

struct SpectralPrediction {
    std::pair<double, double> essential_interval;
    std::pair<double, double> interval_I;
    PpStatement pp_statement = PpStatement::unknown;
    AcStatement ac_statement = AcStatement::unknown;
    /// Σ(||E_k − z| − 2c|)^{e} < ∞ exponent when known (3/2 in ℓ² mode).
    std::optional<double> pp_tail_exponent;
};

inline SpectralPrediction predict_spectrum(const JacobiOperator& op, const ScalingParams& params,
                                           const ConvergenceMode& mode)
{
    if (!op.diag_limit || !op.offdiag_limit) throw validation_error("operator has no declared limits");
    SpectralPrediction p;
    const double z = *op.diag_limit, c = *op.offdiag_limit;
    p.essential_interval = {z - 2.0 * c, z + 2.0 * c};
    p.interval_I = params.interval();
    if (mode.mode >= TailMode::L1) {
        p.ac_statement = AcStatement::full_interval;
        p.pp_statement = PpStatement::none_inside;
    } else if (mode.mode == TailMode::L2) {
        p.pp_statement = PpStatement::possible_outside_with_3_2_tail;
        p.pp_tail_exponent = 1.5;
    }
    return p;
}

struct DeltaR {
    std::vector<double> values;   // δr(I) = X(I)/√M(I); may overflow to ±inf
    std::vector<double> log_abs;  // log|δr(I)|, −inf where X(I) = 0
    int resolved_first = 0, resolved_last = 0;  // 1-based range where |X| is above the noise floor
    bool bounded = false;
};

/// δr(I) = X(I)/√M(I). Boundedness is judged on entries resolved above
/// floor·max|X|: the supremum must be attained before the last quartile.
inline DeltaR delta_r_from_X(std::span<const double> X, const MassDistribution& dist, double floor = 1e-13)
{
    detail::require(!X.empty(), "X must not be empty");
    detail::require(static_cast<int>(X.size()) <= dist.size(), "X is longer than the mass distribution");
    DeltaR out;
    const std::size_t n = X.size();
    out.values.resize(n);
    out.log_abs.resize(n);
    double xmax = 0.0;
    for (double v : X) xmax = std::max(xmax, std::abs(v));
    int first = 0, last = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int I = static_cast<int>(i) + 1;
        const double half = 0.5 * dist.log_mass(I);
        out.log_abs[i] = X[i] == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::abs(X[i])) - half;
        out.values[i] = X[i] == 0.0 ? 0.0 : std::copysign(std::exp(out.log_abs[i]), X[i]);
        if (xmax > 0.0 && std::abs(X[i]) > floor * xmax) {
            if (first == 0) first = I;
            last = I;
        }
    }
    out.resolved_first = first;
    out.resolved_last = last;
    if (first == 0) {
        out.bounded = true;
        return out;
    }
    const int cut = first + (3 * (last - first)) / 4;
    double early = -std::numeric_limits<double>::infinity(), late = early;
    for (int I = first; I <= last; ++I) {
        if (std::abs(X[I - 1]) <= floor * xmax) continue;
        double& slot = I <= cut ? early : late;
        slot = std::max(slot, out.log_abs[I - 1]);
    }
    out.bounded = late <= early + 1e-6;
    return out;
}

}  // namespace lawe

#endif
