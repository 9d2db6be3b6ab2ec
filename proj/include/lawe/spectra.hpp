#ifndef LAWE_SPECTRA_HPP
#define LAWE_SPECTRA_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lawe/discrete.hpp"
#include "lawe/error.hpp"
#include "lawe/model.hpp"

namespace lawe {

/// Leading N×N block of a Jacobi operator in the form the eigen-solvers use.
class Tridiagonal {
public:
    Tridiagonal(const JacobiOperator& op, int N)
    {
        detail::require(N >= 1, "N must be at least 1");
        detail::require(N <= op.size(), "truncation size exceeds operator length");
        d_.assign(op.diag.begin(), op.diag.begin() + N);
        e_.assign(op.offdiag.begin(), op.offdiag.begin() + (N - 1));
        for (double v : d_)
            if (std::isnan(v)) throw numerical_error("NaN on the diagonal");
        for (double v : e_)
            if (std::isnan(v)) throw numerical_error("NaN on the off-diagonal");
        e2_.resize(e_.size());
        double emax = 1.0;
        for (std::size_t i = 0; i < e_.size(); ++i) {
            e2_[i] = e_[i] * e_[i];
            emax = std::max(emax, e2_[i]);
        }
        pivmin_ = std::numeric_limits<double>::min() * emax;
    }

    int size() const { return static_cast<int>(d_.size()); }
    const std::vector<double>& diag() const { return d_; }
    const std::vector<double>& off() const { return e_; }

    /// Number of eigenvalues strictly below x (LDLᵀ pivot signs).
    int count_below(double x) const
    {
        double q = d_[0] - x;
        if (std::abs(q) < pivmin_) q = -pivmin_;
        int count = q < 0.0 ? 1 : 0;
        for (std::size_t i = 1; i < d_.size(); ++i) {
            q = (d_[i] - x) - e2_[i - 1] / q;
            if (std::abs(q) < pivmin_) q = -pivmin_;
            if (q < 0.0) ++count;
        }
        return count;
    }

    std::pair<double, double> gershgorin() const
    {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        const std::size_t n = d_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double r = (i > 0 ? e_[i - 1] : 0.0) + (i + 1 < n ? e_[i] : 0.0);
            lo = std::min(lo, d_[i] - r);
            hi = std::max(hi, d_[i] + r);
        }
        const double pad = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)) +
                           4.0 * pivmin_;
        return {lo - pad, hi + pad};
    }

    double norm1() const
    {
        const auto [lo, hi] = gershgorin();
        return std::max(std::abs(lo), std::abs(hi));
    }

    /// (T − λ)v, exact tridiagonal product.
    std::vector<double> apply_shifted(std::span<const double> v, double lambda) const
    {
        const std::size_t n = d_.size();
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = (d_[i] - lambda) * v[i];
            if (i > 0) s += e_[i - 1] * v[i - 1];
            if (i + 1 < n) s += e_[i] * v[i + 1];
            out[i] = s;
        }
        return out;
    }

private:
    std::vector<double> d_, e_, e2_;
    double pivmin_ = 0.0;
};

namespace detail {

struct Bracket {
    double lo, hi;
    int clo, chi;
};

inline bool bracket_done(double lo, double hi, double tol)
{
    const double mid = 0.5 * (lo + hi);
    const double width_tol = std::max(tol, 4.0 * std::numeric_limits<double>::epsilon() *
                                               std::max(std::abs(lo), std::abs(hi)));
    return hi - lo <= width_tol || mid <= lo || mid >= hi;
}

inline void bisect(const Tridiagonal& t, double lo, double hi, int clo, int chi, double tol, std::vector<double>& out)
{
    if (chi <= clo) return;
    const double mid = 0.5 * (lo + hi);
    if (bracket_done(lo, hi, tol)) {
        out.insert(out.end(), static_cast<std::size_t>(chi - clo), mid);
        return;
    }
    const int cm = t.count_below(mid);
    bisect(t, lo, mid, clo, cm, tol, out);
    bisect(t, mid, hi, cm, chi, tol, out);
}

/// The first levels of the bisection tree, done serially; leaves are nonempty brackets in order.
inline void split_brackets(const Tridiagonal& t, Bracket b, double tol, int depth, std::vector<Bracket>& out)
{
    if (b.chi <= b.clo) return;
    if (depth == 0 || bracket_done(b.lo, b.hi, tol)) {
        out.push_back(b);
        return;
    }
    const double mid = 0.5 * (b.lo + b.hi);
    const int cm = t.count_below(mid);
    split_brackets(t, {b.lo, mid, b.clo, cm}, tol, depth - 1, out);
    split_brackets(t, {mid, b.hi, cm, b.chi}, tol, depth - 1, out);
}

inline int resolve_threads(int threads) { return std::max(1, threads); }

}  // namespace detail

/// Eigenvalues of the truncation inside [lo, hi), each bracketed to width ≤ tol.
/// The bisection tree does not depend on the thread count, so results are bit-identical for any threads.
inline std::vector<double> eigenvalues_in_window(const Tridiagonal& t, double lo, double hi, double tol,
                                                 int threads = 1)
{
    detail::require(tol > 0.0, "tol must be positive");
    detail::require(lo < hi, "window must be nonempty");
    const int T = detail::resolve_threads(threads);
    std::vector<detail::Bracket> leaves;
    detail::split_brackets(t, {lo, hi, t.count_below(lo), t.count_below(hi)}, tol, 8, leaves);
    std::vector<std::vector<double>> parts(leaves.size());
    auto work = [&](int k) {
        for (std::size_t i = k; i < leaves.size(); i += T) {
            const auto& b = leaves[i];
            detail::bisect(t, b.lo, b.hi, b.clo, b.chi, tol, parts[i]);
        }
    };
    if (T == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < T; ++k) pool.emplace_back(work, k);
        for (auto& th : pool) th.join();
    }
    std::vector<double> out;
    for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

inline std::vector<double> eigenvalues_in_window(const JacobiOperator& op, int N, double lo, double hi, double tol,
                                                 int threads = 1)
{
    return eigenvalues_in_window(Tridiagonal(op, N), lo, hi, tol, threads);
}

namespace detail {

/// Partial-pivot LU of T − λ, reused across inverse-iteration solves.
class ShiftedLU {
public:
    ShiftedLU(const Tridiagonal& t, double lambda)
    {
        const int n = t.size();
        d_.resize(n);
        dl_.assign(std::max(0, n - 1), 0.0);
        du_.assign(std::max(0, n - 1), 0.0);
        du2_.assign(std::max(0, n - 2), 0.0);
        swap_.assign(std::max(0, n - 1), false);
        for (int i = 0; i < n; ++i) d_[i] = t.diag()[i] - lambda;
        for (int i = 0; i + 1 < n; ++i) dl_[i] = du_[i] = t.off()[i];
        for (int i = 0; i + 1 < n; ++i) {
            if (std::abs(d_[i]) >= std::abs(dl_[i])) {
                if (d_[i] != 0.0) {
                    const double f = dl_[i] / d_[i];
                    dl_[i] = f;
                    d_[i + 1] -= f * du_[i];
                }
            } else {
                const double f = d_[i] / dl_[i];
                d_[i] = dl_[i];
                dl_[i] = f;
                const double tmp = du_[i];
                du_[i] = d_[i + 1];
                d_[i + 1] = tmp - f * d_[i + 1];
                if (i + 2 < n) {
                    du2_[i] = du_[i + 1];
                    du_[i + 1] = -f * du_[i + 1];
                }
                swap_[i] = true;
            }
        }
        const double tiny = std::numeric_limits<double>::epsilon() * std::max(t.norm1(), 1e-300);
        for (double& v : d_)
            if (std::abs(v) < tiny) v = std::copysign(tiny, v == 0.0 ? 1.0 : v);
    }

    void solve(std::vector<double>& b) const
    {
        const int n = static_cast<int>(d_.size());
        for (int i = 0; i + 1 < n; ++i) {
            if (!swap_[i]) {
                b[i + 1] -= dl_[i] * b[i];
            } else {
                const double tmp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = tmp - dl_[i] * b[i];
            }
        }
        b[n - 1] /= d_[n - 1];
        if (n >= 2) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) / d_[n - 2];
        for (int i = n - 3; i >= 0; --i) b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
    }

private:
    std::vector<double> d_, dl_, du_, du2_;
    std::vector<bool> swap_;
};

inline double norm2(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace detail

/// Inverse-iteration eigenvectors (unit ℓ² norm) for ascending eigenvalues.
/// Vectors whose eigenvalues lie within 1e-7·‖T‖ of each other are kept orthogonal.
inline std::vector<std::vector<double>> eigenvectors(const Tridiagonal& t, std::span<const double> eigs)
{
    const int n = t.size();
    const double nrm = std::max(t.norm1(), std::numeric_limits<double>::min());
    const double ortol = 1e-7 * nrm;
    const double sep = 10.0 * std::numeric_limits<double>::epsilon() * nrm;
    std::vector<std::vector<double>> vecs(eigs.size());
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < eigs.size(); ++k) {
        double lam = eigs[k];
        if (k > 0 && lam - prev < sep) lam = prev + sep;
        prev = lam;
        const detail::ShiftedLU lu(t, lam);
        std::mt19937_64 rng(0x9e3779b97f4a7c15ULL + k);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> v(n);
        for (double& x : v) x = u(rng);
        std::size_t group = k;
        while (group > 0 && eigs[k] - eigs[group - 1] <= ortol) --group;
        for (int it = 0; it < 6; ++it) {
            const double s = detail::norm2(v);
            for (double& x : v) x /= s;
            lu.solve(v);
            for (std::size_t j = group; j < k; ++j) {
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += v[i] * vecs[j][i];
                for (int i = 0; i < n; ++i) v[i] -= dot * vecs[j][i];
            }
            const double g = detail::norm2(v);
            if (!std::isfinite(g) || g == 0.0) throw numerical_error("inverse iteration broke down at eigenvalue " +
                                                                     std::to_string(eigs[k]));
            for (double& x : v) x /= g;
            if (it >= 2) {
                const auto r = t.apply_shifted(v, eigs[k]);
                if (detail::norm2(r) <= 1e3 * std::numeric_limits<double>::epsilon() * nrm) break;
            }
        }
        std::size_t imax = 0;
        for (int i = 1; i < n; ++i)
            if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
        if (v[imax] < 0.0)
            for (double& x : v) x = -x;
        vecs[k] = std::move(v);
    }
    return vecs;
}

struct EigenResult {
    std::vector<double> eigenvalues;
    std::vector<double> residuals;              // ‖Av − λv‖_∞ when vectors are requested
    std::vector<std::vector<double>> vectors;  // unit ℓ² eigenvectors when requested
    int N = 0;
};

struct EigenOptions {
    bool vectors = false;
    int threads = 1;
};

inline EigenResult truncation_eigenvalues(const JacobiOperator& op, int N, double tol, const EigenOptions& opt = {})
{
    detail::require(N >= 1, "N must be at least 1");
    detail::require(tol > 0.0, "tol must be positive");
    const Tridiagonal t(op, N);
    auto [lo, hi] = t.gershgorin();
    if (lo == hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    EigenResult r;
    r.N = N;
    r.eigenvalues = eigenvalues_in_window(t, lo, hi, tol, opt.threads);
    if (static_cast<int>(r.eigenvalues.size()) != N)
        throw numerical_error("bisection recovered " + std::to_string(r.eigenvalues.size()) + " of " +
                              std::to_string(N) + " eigenvalues");
    if (opt.vectors) {
        r.vectors = eigenvectors(t, r.eigenvalues);
        r.residuals.resize(N);
        for (int k = 0; k < N; ++k) {
            const auto res = t.apply_shifted(r.vectors[k], r.eigenvalues[k]);
            double m = 0.0;
            for (double x : res) m = std::max(m, std::abs(x));
            r.residuals[k] = m;
        }
    }
    return r;
}

struct FillReport {
    double max_outside_excursion = 0.0;
    double max_interior_gap = 0.0;  // largest gap between consecutive points of σ ∩ [lo, hi] ∪ {lo, hi}
    double hausdorff = 0.0;         // Hausdorff distance between the eigenvalues and [lo, hi]
};

inline FillReport spectrum_fill_report(std::span<const double> eigs, double lo, double hi)
{
    detail::require(lo < hi, "interval must be nonempty");
    FillReport f;
    std::vector<double> inside;
    for (double e : eigs) {
        f.max_outside_excursion = std::max(f.max_outside_excursion, std::max(lo - e, e - hi));
        if (e >= lo && e <= hi) inside.push_back(e);
    }
    if (inside.empty()) {
        f.max_interior_gap = hi - lo;
    } else {
        std::sort(inside.begin(), inside.end());
        double gap = std::max(inside.front() - lo, hi - inside.back());
        for (std::size_t i = 1; i < inside.size(); ++i) gap = std::max(gap, inside[i] - inside[i - 1]);
        f.max_interior_gap = gap;
    }
    if (eigs.empty()) {
        f.hausdorff = hi - lo;
        return f;
    }
    // sup over t ∈ [lo, hi] of dist(t, σ) is attained at lo, hi or a midpoint of neighbours
    std::vector<double> all(eigs.begin(), eigs.end());
    std::sort(all.begin(), all.end());
    auto dist = [&](double t) {
        const auto it = std::lower_bound(all.begin(), all.end(), t);
        double d = std::numeric_limits<double>::infinity();
        if (it != all.end()) d = *it - t;
        if (it != all.begin()) d = std::min(d, t - *(it - 1));
        return d;
    };
    double cover = std::max(dist(lo), dist(hi));
    for (std::size_t i = 1; i < all.size(); ++i) {
        const double mid = 0.5 * (all[i - 1] + all[i]);
        if (mid > lo && mid < hi) cover = std::max(cover, dist(mid));
    }
    f.hausdorff = std::max(f.max_outside_excursion, cover);
    return f;
}

inline FillReport spectrum_fill_report(const EigenResult& r, double lo, double hi)
{
    return spectrum_fill_report(r.eigenvalues, lo, hi);
}

/// Forward solution of c_{I−1}X(I−1) + a_I X(I) + c_I X(I+1) = λX(I) for I = 1..n.
template <class T>
std::vector<T> solve_recurrence(const JacobiOperator& op, double lambda, T X1, T X2, int n)
{
    detail::require(n >= 2, "recurrence needs at least two terms");
    detail::require(static_cast<int>(op.offdiag.size()) >= n - 1 && op.size() >= n - 1,
                    "operator too short for the requested recurrence length");
    std::vector<T> X(n);
    X[0] = X1;
    X[1] = X2;
    for (int I = 2; I < n; ++I) X[I] = ((lambda - op.a(I)) * X[I - 1] - op.c(I - 1) * X[I - 2]) / op.c(I);
    return X;
}

struct JostFit {
    double theta = 0.0;      // analytic θ
    double theta_fit = 0.0;  // fitted phase per step
    double amplitude_error = 0.0;
    double phase_error = 0.0;
    double fit_residual = 0.0;  // relative ℓ² residual of the two-exponential fit
    std::complex<double> alpha, beta;
    std::vector<int> I;
    std::vector<std::complex<double>> X;
    std::vector<double> envelope;  // |X(I) − βe^{−iθI}|/|α|
};

namespace detail {

struct TwoExp {
    std::complex<double> alpha, beta;
    double residual2;
};

inline TwoExp fit_two_exponentials(std::span<const std::complex<double>> X, int I0, double th)
{
    using C = std::complex<double>;
    C s_uv = 0.0, b_u = 0.0, b_v = 0.0;
    const double n = static_cast<double>(X.size());
    for (std::size_t k = 0; k < X.size(); ++k) {
        const double ph = th * static_cast<double>(k);
        const C u = std::polar(1.0, ph), v = std::polar(1.0, -ph);
        s_uv += std::conj(u) * v;
        b_u += std::conj(u) * X[k];
        b_v += std::conj(v) * X[k];
    }
    const C det = n * n - s_uv * std::conj(s_uv);
    TwoExp f;
    const C a = (n * b_u - s_uv * b_v) / det;
    const C b = (n * b_v - std::conj(s_uv) * b_u) / det;
    double r2 = 0.0;
    for (std::size_t k = 0; k < X.size(); ++k) {
        const double ph = th * static_cast<double>(k);
        r2 += std::norm(X[k] - a * std::polar(1.0, ph) - b * std::polar(1.0, -ph));
    }
    // re-express relative to absolute index I
    f.alpha = a * std::polar(1.0, -th * I0);
    f.beta = b * std::polar(1.0, th * I0);
    f.residual2 = r2;
    return f;
}

}  // namespace detail

inline JostFit jost_verify(const JacobiOperator& op, double lambda, const ScalingParams& params, int I0, int I1)
{
    const double center = -params.zeta * params.lambda_star;
    const double half = 2.0 * params.kappa * params.lambda_star;
    if (!(std::abs(lambda - center) < half))
        throw validation_error("lambda must lie strictly inside the interval I (hyperbolic regime otherwise)");
    detail::require(I0 >= 2 && I1 > I0 + 8, "I_range must satisfy 2 <= I0 and I1 > I0 + 8");
    detail::require(static_cast<int>(op.offdiag.size()) >= I1 + 1 && op.size() >= I1 + 1,
                    "operator too short for the requested I_range");
    {
        const std::span<const double> off(op.offdiag.data(), I1 + 1), dia(op.diag.data(), I1 + 1);
        const auto mo = classify_tail(off, op.offdiag_limit, log_space_noise_floor(off, op.offdiag_limit));
        const auto md = classify_tail(dia, op.diag_limit, log_space_noise_floor(dia, op.diag_limit));
        if (mo.mode < TailMode::L1 || md.mode < TailMode::L1)
            throw validation_error("operator coefficients must converge in l1 mode");
    }
    JostFit f;
    f.theta = std::acos((lambda - center) / half);
    const auto X = solve_recurrence<std::complex<double>>(op, lambda, 1.0, std::polar(1.0, f.theta), I1 + 1);
    const std::span<const std::complex<double>> win(X.data() + (I0 - 1), static_cast<std::size_t>(I1 - I0 + 1));

    double num = 0.0, den = 0.0;
    for (std::size_t k = 1; k + 1 < win.size(); ++k) {
        num += std::real(std::conj(win[k]) * (win[k + 1] + win[k - 1]));
        den += 2.0 * std::norm(win[k]);
    }
    const double th0 = std::acos(std::clamp(num / den, -1.0, 1.0));
    auto resid = [&](double th) { return detail::fit_two_exponentials(win, I0, th).residual2; };
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::max(1e-9, th0 - 1e-2), b = std::min(pi - 1e-9, th0 + 1e-2);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = resid(x1), f2 = resid(x2);
    while (b - a > 1e-13) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = resid(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = resid(x2);
        }
    }
    f.theta_fit = 0.5 * (a + b);
    const auto fit = detail::fit_two_exponentials(win, I0, f.theta_fit);
    f.alpha = fit.alpha;
    f.beta = fit.beta;
    double norm2 = 0.0;
    for (const auto& x : win) norm2 += std::norm(x);
    f.fit_residual = std::sqrt(fit.residual2 / norm2);
    f.phase_error = std::abs(f.theta_fit - f.theta);
    const double aa = std::abs(f.alpha);
    if (!(aa > 0.0)) throw numerical_error("Jost fit has vanishing forward amplitude");
    for (int I = I0; I <= I1; ++I) {
        const auto x = X[I - 1];
        const double env = std::abs(x - f.beta * std::polar(1.0, -f.theta_fit * I)) / aa;
        f.I.push_back(I);
        f.X.push_back(x);
        f.envelope.push_back(env);
        f.amplitude_error = std::max(f.amplitude_error, std::abs(env - 1.0));
    }
    return f;
}

struct BandStructure {
    double E_minus, E1, E2, E_plus;
    std::pair<double, double> lower_band() const { return {E_minus, E1}; }
    std::pair<double, double> upper_band() const { return {E2, E_plus}; }
    std::pair<double, double> gap() const { return {E1, E2}; }
};

inline BandStructure band_structure(double beta, double mu, double eta)
{
    detail::require(mu > 0.0, "mu must be positive");
    detail::require(eta > 0.0 && eta < 1.0, "eta must lie in (0,1)");
    detail::require(beta >= 0.0, "beta must be nonnegative");
    const double root = std::sqrt(16.0 * eta * eta * mu * mu + beta * beta * (1.0 - eta) * (1.0 - eta));
    return BandStructure{(beta * (1.0 + eta) - root) / (2.0 * eta), beta, beta / eta,
                         (beta * (1.0 + eta) + root) / (2.0 * eta)};
}

/// Two-periodic operator: diagonal β/η on odd I, β on even I, couplings μ.
/// (The sign of the couplings is immaterial: (−1)^I conjugation flips it.)
inline JacobiOperator periodic_operator(double beta, double mu, double eta, int N)
{
    detail::require(N >= 1, "N must be at least 1");
    detail::require(mu > 0.0, "mu must be positive");
    detail::require(eta > 0.0 && eta < 1.0, "eta must lie in (0,1)");
    std::vector<double> d(N);
    for (int I = 1; I <= N; ++I) d[I - 1] = (I % 2 == 1) ? beta / eta : beta;
    return JacobiOperator(std::move(d), std::vector<double>(N, mu));
}

}  // namespace lawe

#endif
