#ifndef LAWE_CLI_HPP
#define LAWE_CLI_HPP

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/multiprecision/gmp.hpp>
#include <nlohmann/json.hpp>

#include "lawe/discrete.hpp"
#include "lawe/error.hpp"
#include "lawe/io.hpp"
#include "lawe/model.hpp"
#include "lawe/polytrans.hpp"
#include "lawe/ppmodes.hpp"
#include "lawe/slform.hpp"
#include "lawe/spectra.hpp"

namespace lawe::cli {

using json = nlohmann::ordered_json;

namespace detail {

/// Object view that rejects unknown keys and type-checks on access.
class Block {
public:
    Block(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path))
    {
        if (!j.is_object()) throw validation_error(path_ + " must be an object");
        for (const auto& [k, v] : j.items())
            if (!allowed.count(k)) throw validation_error("unknown key: " + key_path(k));
    }

    bool has(const std::string& k) const { return j_.contains(k); }
    std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    double number(const std::string& k, std::optional<double> def = {}) const
    {
        if (!has(k)) {
            if (def) return *def;
            throw validation_error("missing key: " + key_path(k));
        }
        if (!j_.at(k).is_number()) throw validation_error(key_path(k) + " must be a number");
        return j_.at(k).get<double>();
    }
    int integer(const std::string& k, std::optional<int> def = {}) const
    {
        if (!has(k)) {
            if (def) return *def;
            throw validation_error("missing key: " + key_path(k));
        }
        if (!j_.at(k).is_number_integer()) throw validation_error(key_path(k) + " must be an integer");
        return j_.at(k).get<int>();
    }
    bool boolean(const std::string& k, bool def) const
    {
        if (!has(k)) return def;
        if (!j_.at(k).is_boolean()) throw validation_error(key_path(k) + " must be a boolean");
        return j_.at(k).get<bool>();
    }
    std::string string(const std::string& k, std::optional<std::string> def = {}) const
    {
        if (!has(k)) {
            if (def) return *def;
            throw validation_error("missing key: " + key_path(k));
        }
        if (!j_.at(k).is_string()) throw validation_error(key_path(k) + " must be a string");
        return j_.at(k).get<std::string>();
    }
    std::vector<double> numbers(const std::string& k, std::vector<double> def) const
    {
        if (!has(k)) return def;
        const auto& a = j_.at(k);
        if (!a.is_array()) throw validation_error(key_path(k) + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& v : a) {
            if (!v.is_number()) throw validation_error(key_path(k) + " must be an array of numbers");
            out.push_back(v.get<double>());
        }
        return out;
    }
    Block child(const std::string& k, std::set<std::string> allowed) const
    {
        static const json empty = json::object();
        return Block(has(k) ? j_.at(k) : empty, key_path(k), std::move(allowed));
    }

private:
    const json& j_;
    std::string path_;
};

inline const std::set<std::string> analysis_keys{"N_trunc", "tol", "lambdas", "I_range", "dsp",
                                                 "bands",   "transform", "scaled", "sl"};
inline const std::map<std::string, std::set<std::string>> analysis_children{
    {"dsp", {"alpha", "p", "K_spacing", "m_max", "lower_edge", "window"}},
    {"bands", {"beta", "mu", "eta", "N"}},
    {"transform", {"n", "instances"}},
    {"scaled", {"lambda", "I_first", "seed_Y"}},
    {"sl", {"lambda", "X_max", "rtol", "seed", "convention", "wkb_split", "wkb_convention"}}};

inline void check(bool ok, const std::string& key, const std::string& what)
{
    if (!ok) throw validation_error(key + ": " + what);
}

}  // namespace detail

struct ModelConfig {
    double eta = 0.5, gamma = 2.0, M_star = 1.0, R_star = 1.0, G = 1.0, zeta = 0.0;
    int N = 4000;
    std::string profile = "plain";  // plain | almost_polytrope | nu_case
    double Gamma = 2.5, C_star = 0.01;
};

struct RunConfig {
    json raw;
    std::uint64_t seed = 0;
    ModelConfig model;
    std::optional<EOSSpec> eos;
    json analysis = json::object();
    std::string out_dir = "lawe_out";
    std::vector<std::string> formats{"csv", "json"};
};

inline ModelConfig parse_model(const detail::Block& b)
{
    ModelConfig m;
    m.eta = b.number("eta", m.eta);
    m.gamma = b.number("gamma", m.gamma);
    m.M_star = b.number("M_star", m.M_star);
    m.R_star = b.number("R_star", m.R_star);
    m.G = b.number("G", m.G);
    m.zeta = b.number("zeta", m.zeta);
    m.N = b.integer("N", m.N);
    m.profile = b.string("profile", m.profile);
    m.Gamma = b.number("Gamma", m.Gamma);
    m.C_star = b.number("C_star", m.C_star);
    detail::check(m.eta > 0.0 && m.eta < 1.0, b.key_path("eta"), "eta must lie in (0,1)");
    detail::check(m.gamma > 0.0, b.key_path("gamma"), "gamma must be positive");
    detail::check(m.M_star > 0.0, b.key_path("M_star"), "M_star must be positive");
    detail::check(m.R_star > 0.0, b.key_path("R_star"), "R_star must be positive");
    detail::check(m.G > 0.0, b.key_path("G"), "G must be positive");
    detail::check(m.zeta > -4.0, b.key_path("zeta"), "zeta must exceed -4");
    detail::check(m.N >= 2, b.key_path("N"), "N must be at least 2");
    detail::check(m.profile == "plain" || m.profile == "almost_polytrope" || m.profile == "nu_case",
                  b.key_path("profile"), "profile must be plain, almost_polytrope or nu_case");
    return m;
}

inline EOSSpec parse_eos(const detail::Block& b)
{
    const auto variant = b.string("variant");
    const double R = b.number("R_star", 1.0), Rd = b.number("R_delta", 0.5);
    if (variant == "polytropic")
        return EOSSpec::polytropic(b.number("K", 1.0), b.number("b"), b.number("a"), R, Rd);
    if (variant == "linear_thermal")
        return EOSSpec::linear_thermal(b.number("K0", 1.0), b.number("L0", 1.0), b.number("a"), b.number("b"),
                                       b.number("c"), R, Rd);
    throw validation_error(b.key_path("variant") + ": variant must be polytropic or linear_thermal");
}

inline RunConfig parse_config(const std::string& text)
{
    RunConfig c;
    try {
        c.raw = json::parse(text);
    } catch (const json::parse_error& e) {
        throw validation_error(std::string("config is not valid JSON: ") + e.what());
    }
    const detail::Block top(c.raw, "", {"schema", "seed", "model", "eos", "analysis", "output"});
    detail::check(top.has("schema") && top.integer("schema") == 1, "schema", "schema must be 1");
    if (top.has("seed")) {
        if (!c.raw.at("seed").is_number_unsigned() && !c.raw.at("seed").is_number_integer())
            throw validation_error("seed must be a non-negative integer");
        if (c.raw.at("seed").is_number_integer() && c.raw.at("seed").get<long long>() < 0)
            throw validation_error("seed must be a non-negative integer");
        c.seed = c.raw.at("seed").get<std::uint64_t>();
    }
    c.model = parse_model(top.child("model", {"eta", "gamma", "M_star", "R_star", "G", "zeta", "N", "profile",
                                              "Gamma", "C_star"}));
    if (top.has("eos"))
        c.eos = parse_eos(top.child("eos", {"variant", "K", "K0", "L0", "a", "b", "c", "R_star", "R_delta"}));
    if (top.has("analysis")) {
        c.analysis = c.raw.at("analysis");
        const detail::Block a(c.analysis, "analysis", detail::analysis_keys);
        for (const auto& [name, keys] : detail::analysis_children)
            if (a.has(name)) a.child(name, keys);
    }
    const auto out = top.child("output", {"dir", "formats"});
    c.out_dir = out.string("dir", c.out_dir);
    if (out.has("formats")) {
        c.formats.clear();
        for (const auto& f : c.raw.at("output").at("formats")) {
            if (!f.is_string() || (f != "csv" && f != "json"))
                throw validation_error("output.formats entries must be \"csv\" or \"json\"");
            c.formats.push_back(f.get<std::string>());
        }
    }
    return c;
}

/// Mass distribution, pressure-density sequences and operator from the model block.
struct BuiltModel {
    MassDistribution dist;
    PressureDensityDistribution pd;
    JacobiOperator op;
    ScalingParams params;
};

inline std::pair<MassDistribution, PressureDensityDistribution> build_distributions(const ModelConfig& m, int N)
{
    auto dist = build_mass_distribution(m.eta, m.gamma, m.M_star, m.R_star, N + 1, m.G);
    PressureDensityDistribution pd;
    if (m.profile == "plain") {
        const double c = (4.0 + m.zeta) / amplitude_constant(m.eta, m.gamma);
        pd = build_pd_distribution(dist, gamma_profile(GammaKind::plain, c, 0.0, m.eta, N + 1));
    } else if (m.profile == "almost_polytrope") {
        pd = build_almost_polytrope(dist, N + 1);
    } else {
        pd = build_nu_polytrope(dist, m.Gamma, m.C_star, N + 1);
    }
    return {std::move(dist), std::move(pd)};
}

inline BuiltModel build_model(const ModelConfig& m, int N)
{
    auto [dist, pd] = build_distributions(m, N);
    auto op = assemble_jacobi(dist, pd, N);
    auto params = scaling_params(dist, m.zeta);
    return BuiltModel{std::move(dist), std::move(pd), std::move(op), params};
}

class Runner {
public:
    Runner(RunConfig cfg, std::string command, std::filesystem::path out, int threads, std::ostream& log)
        : cfg_(std::move(cfg)), command_(std::move(command)), out_(std::move(out)), threads_(threads), log_(log)
    {
        json h = cfg_.raw;
        h["seed"] = cfg_.seed;
        hash_ = io::hex64(io::fnv1a64(command_ + "\n" + h.dump()));
    }

    const std::string& hash() const { return hash_; }

    void run(bool rational)
    {
        if (command_ == "spectrum") spectrum();
        else if (command_ == "jost") jost();
        else if (command_ == "ppmodes") ppmodes();
        else if (command_ == "transform-check") transform_check(rational);
        else if (command_ == "scaled") scaled();
        else if (command_ == "sl") sl();
        else if (command_ == "report") report();
        else throw validation_error("unknown subcommand: " + command_);
    }

private:
    bool wants(const char* f) const
    {
        return std::find(cfg_.formats.begin(), cfg_.formats.end(), f) != cfg_.formats.end();
    }
    void csv(const std::string& name, const io::Table& t)
    {
        if (wants("csv")) io::write_file(out_ / name, t.render(hash_));
    }
    void report_json(const std::string& name, json j)
    {
        json doc;
        doc["command"] = command_;
        doc["config_hash"] = hash_;
        doc["schema"] = 1;
        doc["result"] = std::move(j);
        if (wants("json")) io::write_file(out_ / name, doc.dump(2) + "\n");
    }
    detail::Block analysis() const { return detail::Block(cfg_.analysis, "analysis", detail::analysis_keys); }
    detail::Block analysis_child(const std::string& name) const
    {
        return analysis().child(name, detail::analysis_children.at(name));
    }
    int N_trunc() const
    {
        const int N = analysis().integer("N_trunc", cfg_.model.N);
        detail::check(N >= 2, "analysis.N_trunc", "N_trunc must be at least 2");
        return N;
    }
    double tol() const
    {
        const double t = analysis().number("tol", 1e-12);
        detail::check(t > 0.0, "analysis.tol", "tol must be positive");
        return t;
    }

    void spectrum()
    {
        const int N = N_trunc();
        const double tl = tol();
        const auto m = build_model(cfg_.model, N);
        const auto [lo, hi] = m.params.interval();
        const auto res = truncation_eigenvalues(m.op, N, tl, {false, threads_});
        const auto fill = spectrum_fill_report(res, lo, hi);
        io::Table t{{"k", "eigenvalue"}, {}};
        for (int k = 0; k < N; ++k) t.rows.push_back({double(k + 1), res.eigenvalues[k]});
        csv("spectrum_eigenvalues.csv", t);
        const auto sp = detail_spectrum_prediction(m);
        json j;
        j["N"] = N;
        j["interval"] = {lo, hi};
        j["max_outside_excursion"] = fill.max_outside_excursion;
        j["max_interior_gap"] = fill.max_interior_gap;
        j["hausdorff"] = fill.hausdorff;
        j["hausdorff_over_length"] = fill.hausdorff / (hi - lo);
        j["tail_mode"] = sp.first;
        j["pp_statement"] = sp.second;
        report_json("spectrum_report.json", j);
        log_ << "spectrum: N=" << N << " hausdorff=" << io::format_double(fill.hausdorff)
             << " max_gap=" << io::format_double(fill.max_interior_gap) << "\n";
    }

    static std::pair<std::string, std::string> detail_spectrum_prediction(const BuiltModel& m)
    {
        const std::span<const double> off(m.op.offdiag);
        const auto mode = classify_tail(off, m.op.offdiag_limit, log_space_noise_floor(off, m.op.offdiag_limit));
        if (!m.op.diag_limit) return {to_string(mode.mode), "unknown"};
        return {to_string(mode.mode), to_string(predict_spectrum(m.op, m.params, mode).pp_statement)};
    }

    void jost()
    {
        const auto a = analysis();
        const auto range = a.numbers("I_range", {500.0, 1000.0});
        detail::check(range.size() == 2, "analysis.I_range", "I_range must have two entries");
        const int I0 = static_cast<int>(range[0]), I1 = static_cast<int>(range[1]);
        const auto lambdas = a.numbers("lambdas", {-1.6, 0.0, 1.6});
        const auto m = build_model(cfg_.model, I1 + 2);
        io::Table t{{"lambda", "theta", "theta_fit", "phase_error", "amplitude_error", "fit_residual"}, {}};
        json arr = json::array();
        for (double lam : lambdas) {
            const auto f = jost_verify(m.op, lam, m.params, I0, I1);
            t.rows.push_back({lam, f.theta, f.theta_fit, f.phase_error, f.amplitude_error, f.fit_residual});
            arr.push_back({{"lambda", lam},
                           {"theta", f.theta},
                           {"theta_fit", f.theta_fit},
                           {"phase_error", f.phase_error},
                           {"amplitude_error", f.amplitude_error}});
            log_ << "jost: lambda=" << io::format_double(lam) << " phase_error=" << io::format_double(f.phase_error)
                 << " amplitude_error=" << io::format_double(f.amplitude_error) << "\n";
        }
        csv("jost.csv", t);
        report_json("jost_report.json", arr);
    }

    void ppmodes()
    {
        const auto a = analysis();
        const auto d = analysis_child("dsp");
        const int N = N_trunc();
        auto dsp = construct_dsp(d.number("alpha", 0.8), d.number("p", 0.5), d.number("K_spacing", 5.0),
                                 d.integer("m_max", 300));
        dsp.blocks.resize(blocks_fitting(dsp, N));
        detail::check(dsp.m_max() >= 1, "analysis.N_trunc", "no block fits inside the truncation");
        const bool lower = d.boolean("lower_edge", true);
        const double window = d.number("window", 1.0);
        const auto pm = build_pp_model(dsp, N, lower, cfg_.model.eta, cfg_.model.gamma);
        const double edge = lower ? -2.0 : 2.0;
        std::vector<EdgeEigenpair> ev;
        if (lower) {
            ev = detect_edge_eigenvalues(pm.op, N, edge, window, dsp, tol(), threads_);
        } else {
            // mirror: eigenvalues above +2 are those of −A below −2
            JacobiOperator neg = pm.op;
            for (double& v : neg.diag) v = -v;
            if (neg.diag_limit) neg.diag_limit = -*neg.diag_limit;
            ev = detect_edge_eigenvalues(neg, N, -edge, window, dsp, tol(), threads_);
            for (auto& e : ev) e.value = -e.value;
        }
        io::Table t{{"rank", "eigenvalue", "distance", "block", "block_fraction", "delta_r_bounded"}, {}};
        for (std::size_t k = 0; k < ev.size(); ++k) {
            const auto dr = delta_r_from_X(ev[k].vector, pm.dist);
            t.rows.push_back({double(k + 1), ev[k].value, std::abs(ev[k].value - edge), double(ev[k].block),
                              ev[k].block_fraction, dr.bounded ? 1.0 : 0.0});
        }
        csv("ppmodes_eigenvalues.csv", t);
        const auto rq = rayleigh_quotients(pm.op, dsp, edge);
        io::Table r{{"m", "q"}, {}};
        for (const auto& e : rq) r.rows.push_back({double(e.m), e.q});
        csv("ppmodes_rayleigh.csv", r);
        json j;
        j["N"] = N;
        j["edge"] = edge;
        j["blocks"] = dsp.m_max();
        j["count"] = ev.size();
        report_json("ppmodes_report.json", j);
        log_ << "ppmodes: " << ev.size() << " eigenvalues beyond edge " << io::format_double(edge) << "\n";
    }

    void transform_check(bool rational)
    {
        const auto tr = analysis_child("transform");
        const int n = tr.integer("n", 50), instances = tr.integer("instances", 10);
        detail::check(n >= 1, "analysis.transform.n", "n must be at least 1");
        detail::check(instances >= 1, "analysis.transform.instances", "instances must be at least 1");
        std::mt19937_64 rng(cfg_.seed);
        std::uniform_int_distribution<int> num(-9, 9), den(1, 9);
        json j;
        j["n"] = n;
        j["instances"] = instances;
        j["rational"] = rational;
        if (rational) {
            using Q = boost::multiprecision::mpq_rational;
            auto draw = [&](bool nonzero) {
                int p = num(rng);
                while (nonzero && p == 0) p = num(rng);
                return Q(p, den(rng));
            };
            Q worst(0);
            for (int k = 0; k < instances; ++k) {
                std::vector<Q> a(n), b(n - 1), c(n - 1);
                for (auto& v : a) v = draw(false);
                for (auto& v : b) v = draw(false);
                for (auto& v : c) v = draw(false);
                const Q x = draw(true), y = draw(true);
                const auto r = similarity_check<Q>(a, b, c, x, y);
                if (worst < r.max_residual) worst = r.max_residual;
            }
            const bool zero = worst == 0;
            j["max_residual"] = worst.str();
            j["exact_zero"] = zero;
            report_json("transform_check.json", j);
            if (zero) log_ << "residual: exact zero, n=" << n << "\n";
            else log_ << "residual: " << worst.str() << ", n=" << n << "\n";
            return;
        }
        std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.5, 2.0);
        double worst = 0.0;
        for (int k = 0; k < instances; ++k) {
            std::vector<double> a(n), b(n - 1), c(n - 1);
            for (auto& v : a) v = u(rng);
            for (auto& v : b) v = u(rng);
            for (auto& v : c) v = u(rng);
            const double x = pos(rng), y = pos(rng);
            double scale = 1.0, xy = 1.0;
            for (int i = 1; i <= n; ++i) {
                if (i >= 2 && i % 2 == 0) xy *= x * y;
                scale = std::max(scale, std::abs(a[i - 1]) / xy);
            }
            worst = std::max(worst, similarity_check<double>(a, b, c, x, y).max_residual / scale);
        }
        j["max_relative_residual"] = worst;
        report_json("transform_check.json", j);
        log_ << "relative residual: " << io::format_double(worst) << ", n=" << n << "\n";
    }

    void scaled()
    {
        const auto a = analysis();
        const auto s = analysis_child("scaled");
        const int N = N_trunc();
        const auto kind = cfg_.model.profile == "nu_case" ? ScaledCase::nu_case : ScaledCase::almost_polytrope;
        detail::check(cfg_.model.profile != "plain", "model.profile", "scaled needs almost_polytrope or nu_case");
        const auto [dist, pd] = build_distributions(cfg_.model, N);
        const auto sys = build_scaled_system(dist, pd, kind, N);
        const double lam = s.number("lambda", 0.0);
        const auto lf = local_frequencies(sys, lam, s.integer("I_first", 2));
        const auto seedY = s.numbers("seed_Y", {1.0, 0.3});
        detail::check(seedY.size() == 2, "analysis.scaled.seed_Y", "seed_Y must have two entries");
        const auto Y = solve_recurrence<double>(sys.T, lam, seedY[0], seedY[1], N);
        io::Table seq{{"I", "mu_I", "beta_I", "D_I"}, {}};
        for (int I = 1; I <= N; ++I) seq.rows.push_back({double(I), sys.mu_seq[I - 1], sys.beta_seq[I - 1], sys.D_diag[I - 1]});
        csv("scaled_sequences.csv", seq);
        io::Table om{{"I", "log_omega"}, {}};
        for (std::size_t k = 0; k < lf.log_omega.size(); ++k) om.rows.push_back({double(lf.I_first + k), lf.log_omega[k]});
        csv("scaled_omega.csv", om);
        json j;
        j["case"] = to_string(kind);
        j["mu_limit"] = sys.mu_limit;
        j["beta_limit"] = sys.beta_limit;
        j["omega_slope"] = lf.slope;
        j["omega_expected_slope"] = lf.expected_slope;
        if (dist.gamma() > 1.0) {
            const auto g = delta_r_growth(Y, sys, dist);
            io::Table dr{{"I", "log_abs_delta_r"}, {}};
            for (int I = 1; I <= N; ++I) dr.rows.push_back({double(I), g.log_abs[I - 1]});
            csv("scaled_delta_r.csv", dr);
            j["delta_r_growth"] = g.growth_exponent;
            j["delta_r_expected"] = g.expected_exponent;
        }
        const auto b = analysis_child("bands");
        if (a.has("bands")) {
            const auto bs = band_structure(b.number("beta", 2.0), b.number("mu", 1.0), b.number("eta", 0.5));
            const int nb = b.integer("N", 2000);
            const auto po = periodic_operator(b.number("beta", 2.0), b.number("mu", 1.0), b.number("eta", 0.5), nb);
            const auto ev = truncation_eigenvalues(po, nb, tol(), {false, threads_});
            io::Table bt{{"k", "eigenvalue"}, {}};
            for (int k = 0; k < nb; ++k) bt.rows.push_back({double(k + 1), ev.eigenvalues[k]});
            csv("scaled_bands.csv", bt);
            j["bands"] = {bs.E_minus, bs.E1, bs.E2, bs.E_plus};
        }
        report_json("scaled_report.json", j);
        log_ << "scaled: omega slope " << io::format_double(lf.slope) << " expected "
             << io::format_double(lf.expected_slope) << "\n";
    }

    void sl()
    {
        if (!cfg_.eos) throw validation_error("eos: sl needs an eos block");
        const auto& eos = *cfg_.eos;
        const auto s = analysis_child("sl");
        const double lam = s.number("lambda", 1.0);
        detail::check(lam > 0.0, "analysis.sl.lambda", "lambda must be positive");
        const double rtol = s.number("rtol", 1e-10);
        const auto conv_s = s.string("convention", "standard");
        detail::check(conv_s == "standard" || conv_s == "printed", "analysis.sl.convention",
                      "convention must be standard or printed");
        const auto conv = conv_s == "standard" ? QConvention::standard : QConvention::printed;
        const auto seed_s = s.string("seed", "sine");
        detail::check(seed_s == "sine" || seed_s == "cosine", "analysis.sl.seed", "seed must be sine or cosine");
        const auto split_s = s.string("wkb_split", "auto");
        detail::check(split_s == "auto" || split_s == "free" || split_s == "q1" || split_s == "q1_unbounded",
                      "analysis.sl.wkb_split", "wkb_split must be auto, free, q1 or q1_unbounded");
        const auto wconv_s = s.string("wkb_convention", "lambda");
        detail::check(wconv_s == "lambda" || wconv_s == "lambda_squared", "analysis.sl.wkb_convention",
                      "wkb_convention must be lambda or lambda_squared");
        const auto form = liouville(eos, conv);
        const double X_max = s.has("X_max") ? s.number("X_max") : std::numeric_limits<double>::infinity();
        const auto cr = classify_sl_case(eos, conv);
        json j;
        j["variant"] = to_string(eos.variant);
        j["route"] = to_string(cr.route);
        j["verdict"] = cr.verdict;
        j["unbounded_X"] = cr.unbounded_X;
        j["thermal_case_i"] = cr.thermal_case_i;
        j["thermal_case_ii"] = cr.thermal_case_ii;
        json checks = json::array();
        for (const auto& c : cr.checks)
            checks.push_back({{"name", c.name},
                              {"analytic_exponent", c.analytic_exponent},
                              {"analytic_integrable", c.analytic_integrable},
                              {"numeric_integrable", c.numeric_integrable},
                              {"expected_integrable", c.expected_integrable},
                              {"decade_integrals", c.decade_integrals}});
        j["checks"] = checks;
        if (cr.hse_surface_residual) j["hse_surface_residual"] = *cr.hse_surface_residual;
        IntegrateOptions opt;
        if (seed_s == "cosine") {
            opt.Y0 = 1.0;
            opt.Yp0 = 0.0;
        }
        const auto tr = integrate_canonical(form, lam, X_max, rtol, opt);
        io::Table t{{"X", "ReY", "ImY", "ReYp", "ImYp", "x", "xi", "delta_r"}, {}};
        for (std::size_t i = 0; i < tr.size(); ++i)
            t.rows.push_back({tr.X[i], tr.Y[i].real(), tr.Y[i].imag(), tr.Yp[i].real(), tr.Yp[i].imag(), tr.x[i],
                              tr.xi[i].real(), tr.delta_r[i].real()});
        csv("sl_trace.csv", t);
        j["trace_points"] = tr.size();
        j["switch_X"] = tr.X_switch;
        j["drift_bound"] = tr.drift_bound;
        if (tr.d.back() <= 1e-6 * eos.R_star * (1.0 + 1e-9)) {
            const auto rr = regularity_check(tr, eos);
            j["regularity"] = {{"monotone_last_decade", rr.monotone_last_decade},
                               {"fitted_exponent", rr.fitted_exponent},
                               {"analytic_exponent", rr.analytic_exponent},
                               {"bound_exponent", rr.bound_exponent}};
        }
        const auto g = l2_growth(tr, total_mass(eos));
        j["growth"] = {{"F_slope", g.slope},
                       {"F_r2", g.r2},
                       {"growth_factor", g.growth_factor},
                       {"growth_exponent", g.growth_exponent},
                       {"implied_sup_lower", g.implied_sup_lower},
                       {"divergence", g.divergence}};
        WkbSplit split = WkbSplit::free;
        if (split_s == "q1") split = WkbSplit::q1;
        else if (split_s == "q1_unbounded") split = WkbSplit::q1_unbounded;
        else if (split_s == "auto")
            split = eos.is_polytropic() ? WkbSplit::free
                    : form.q1_sum().leading().first > 0.0 ? WkbSplit::q1 : WkbSplit::q1_unbounded;
        try {
            const auto w = wkb_fit(tr, form, split,
                                   wconv_s == "lambda" ? WkbConvention::lambda : WkbConvention::lambda_squared);
            j["wkb"] = {{"residual", w.residual}, {"abs_alpha", std::abs(w.alpha)}, {"abs_beta", std::abs(w.beta)}};
        } catch (const validation_error& e) {
            j["wkb"] = {{"refused", e.what()}};
        }
        report_json("sl_report.json", j);
        log_ << "sl: route=" << to_string(cr.route) << " points=" << tr.size()
             << " divergence=" << (g.divergence ? "yes" : "no") << "\n";
    }

    void report()
    {
        std::vector<std::filesystem::path> files;
        if (std::filesystem::exists(out_))
            for (const auto& e : std::filesystem::recursive_directory_iterator(out_)) {
                const auto rel = e.path().lexically_relative(out_);
                if (e.is_regular_file() && e.path().extension() == ".json" && rel != "summary.json")
                    files.push_back(rel);
            }
        std::sort(files.begin(), files.end());
        json j = json::object();
        std::string md = "# lawe_spectra summary\n\n";
        for (const auto& f : files) {
            json doc;
            try {
                doc = json::parse(io::read_file(out_ / f));
            } catch (const json::parse_error&) {
                throw validation_error("report: cannot parse " + f.generic_string());
            }
            const auto name = (f.parent_path() / f.stem()).generic_string();
            md += "## " + name + "\n\n```json\n" + doc.value("result", json()).dump(2) + "\n```\n\n";
            j[name] = std::move(doc);
        }
        io::write_file(out_ / "summary.json", j.dump(2) + "\n");
        io::write_file(out_ / "summary.md", md);
        log_ << "report: aggregated " << files.size() << " reports\n";
    }

    RunConfig cfg_;
    std::string command_;
    std::filesystem::path out_;
    int threads_;
    std::ostream& log_;
    std::string hash_;
};

/// Exit codes: 0 success, 1 validation failure, 2 numerical failure.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"lawe_spectra: spectral analysis of discretized stellar oscillation operators"};
    app.require_subcommand(1);
    std::string config, out_dir;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    bool rational = false;
    const std::vector<std::pair<std::string, std::string>> subs{
        {"spectrum", "truncation eigenvalues and fill report"},
        {"jost", "Jost asymptotics at a list of lambda"},
        {"ppmodes", "point spectrum accumulating at an edge"},
        {"transform-check", "exact similarity identity check"},
        {"scaled", "scaled recurrence, local frequencies and bands"},
        {"sl", "continuous Sturm-Liouville pipeline"},
        {"report", "aggregate reports in the output directory"}};
    for (const auto& [name, desc] : subs) {
        auto* s = app.add_subcommand(name, desc);
        s->add_option("--config", config, "JSON configuration")->required();
        s->add_option("--out", out_dir, "output directory");
        s->add_option("--seed", seed, "PRNG seed");
        s->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        if (name == "transform-check") s->add_flag("--rational", rational, "exact rational arithmetic");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        auto cfg = parse_config(io::read_file(config));
        if (seed) cfg.seed = *seed;
        if (threads == 0) {
            if (const char* env = std::getenv("LAWE_SPECTRA_THREADS")) {
                try {
                    threads = std::stoi(env);
                } catch (const std::exception&) {
                    throw validation_error("LAWE_SPECTRA_THREADS must be a positive integer");
                }
                detail::check(threads >= 1, "LAWE_SPECTRA_THREADS", "must be a positive integer");
            } else {
                threads = 1;
            }
        }
        const std::filesystem::path dir = out_dir.empty() ? cfg.out_dir : out_dir;
        Runner r(std::move(cfg), command, dir, threads, out);
        r.run(rational);
        return 0;
    } catch (const validation_error& e) {
        err << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const numerical_error& e) {
        err << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace lawe::cli

#endif
