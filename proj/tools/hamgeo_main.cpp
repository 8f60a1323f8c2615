// hamgeo: run one job described by a JSON config and emit machine-readable
// results (JSON, or CSV for bulk grids).  Exit codes: 0 success, 1 compute or
// verification failure, 2 invalid config.  Output is a pure function of the
// config plus the seed: reruns produce byte-identical bytes.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hamgeo/boltzmann.hpp"
#include "hamgeo/dynamics.hpp"
#include "hamgeo/eikonal.hpp"
#include "hamgeo/errors.hpp"
#include "hamgeo/geometry.hpp"
#include "hamgeo/model.hpp"
#include "hamgeo/stability.hpp"
#include "hamgeo/verify.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace hamgeo;

// ---------------------------------------------------------------- config ---

const json& require_key(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw ConfigError("expected an object", path);
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("missing required field '" + key + "'", path);
    return *it;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError("expected a number", path);
    return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError("expected an integer", path);
    return v.get<int>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError("expected a string", path);
    return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError("expected a boolean", path);
    return v.get<bool>();
}

std::vector<double> as_number_array(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError("expected an array of numbers", path);
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::string> as_string_array(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError("expected an array of strings", path);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(as_string(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::vector<std::string>> as_string_matrix(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError("expected an array of expression rows", path);
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(as_string_array(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::map<std::string, double> as_params(const json& obj, const std::string& path) {
    std::map<std::string, double> params;
    if (!obj.contains("params")) return params;
    const json& p = obj["params"];
    if (!p.is_object()) throw ConfigError("expected an object of named numbers", path + ".params");
    for (auto it = p.begin(); it != p.end(); ++it)
        params[it.key()] = as_number(it.value(), path + ".params." + it.key());
    return params;
}

// ------------------------------------------------------------ model block --

HamiltonianModel build_model(const json& m, const std::string& path) {
    if (!m.is_object()) throw ConfigError("model must be an object", path);
    auto params = as_params(m, path);

    if (m.contains("expression")) {
        const std::string src = as_string(m["expression"], path + ".expression");
        const int n = as_int(require_key(m, "n", path), path + ".n");
        bool quad = m.contains("quadratic_in_p") &&
                    as_bool(m["quadratic_in_p"], path + ".quadratic_in_p");
        bool trs = m.contains("time_reversal_symmetric") &&
                   as_bool(m["time_reversal_symmetric"], path + ".time_reversal_symmetric");
        return make_expression_model(src, n, params, quad, trs);
    }

    const std::string family = as_string(require_key(m, "family", path), path + ".family");
    if (family == "free") return make_free(as_int(require_key(m, "n", path), path + ".n"));
    if (family == "sho" || family == "inverted_sho") {
        auto omega = as_number_array(require_key(m, "omega", path), path + ".omega");
        if (omega.empty()) throw ConfigError("omega must be nonempty", path + ".omega");
        if (family == "sho") return make_sho(static_cast<int>(omega.size()), omega);
        if (omega.size() != 1)
            throw ConfigError("inverted_sho has one degree of freedom", path + ".omega");
        return make_inverted_sho(omega[0]);
    }
    if (family == "constant_b")
        return make_constant_b(as_number(require_key(m, "B", path), path + ".B"));
    if (family == "trap") {
        auto k = as_number_array(require_key(m, "k", path), path + ".k");
        if (k.size() != 3) throw ConfigError("trap needs exactly three spring constants",
                                             path + ".k");
        return make_trap(k[0], k[1], k[2], as_number(require_key(m, "B", path), path + ".B"));
    }
    if (family == "riemannian" || family == "magnetic_riemannian" || family == "emd") {
        const int n = as_int(require_key(m, "n", path), path + ".n");
        auto metric = metric_from_expressions(
            as_string_matrix(require_key(m, "metric", path), path + ".metric"), n, params);
        if (family == "riemannian") return make_riemannian(n, metric);
        VectorFieldFn A;
        bool has_A = m.contains("vector_potential");
        if (has_A)
            A = vector_field_from_expressions(
                as_string_array(m["vector_potential"], path + ".vector_potential"), n, params);
        if (family == "magnetic_riemannian") {
            if (!has_A)
                throw ConfigError("magnetic_riemannian needs a vector_potential", path);
            return make_magnetic_riemannian(n, metric, A);
        }
        ScalarFieldFn phi;
        if (m.contains("scalar_field"))
            phi = scalar_field_from_expression(as_string(m["scalar_field"],
                                                         path + ".scalar_field"), n, params);
        return make_emd(n, metric, A, phi, has_A);
    }
    throw ConfigError("unknown model family '" + family + "'", path + ".family");
}

// --------------------------------------------------------- serialization ---

json to_json(const Mat<double>& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const std::vector<std::complex<double>>& ev) {
    json arr = json::array();
    for (const auto& l : ev) arr.push_back(json{{"re", l.real()}, {"im", l.imag()}});
    return arr;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// every CSV starts with a schema-version comment, mirroring the JSON field
constexpr const char* kCsvSchemaLine = "# schema: 1\n";

void csv_row(std::string& out, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    out += '\n';
}

// --------------------------------------------------------------- context ---

struct JobContext {
    json config;
    std::string format = "json";  // resolved output format
    std::string out_path;         // empty = stdout
    std::uint64_t seed = 0;
    std::optional<double> tolerance;  // top-level tolerance override
    std::string filter;               // verify filter (flag overrides config)
    int threads = 1;
};

PhasePoint phase_point_from(const json& cmd, const HamiltonianModel& model,
                            const std::string& path) {
    PhasePoint x;
    x.q = as_number_array(require_key(cmd, "q", path), path + ".q");
    x.p = cmd.contains("p") ? as_number_array(cmd["p"], path + ".p")
                            : std::vector<double>(model.dim(), 0.0);
    if (static_cast<int>(x.q.size()) != model.dim() ||
        static_cast<int>(x.p.size()) != model.dim())
        throw ConfigError("phase point dimension does not match the model", path);
    return x;
}

QuadratureSpec quadrature_from(const json& cmd, const JobContext& ctx, const std::string& path) {
    if (!cmd.contains("quadrature")) return QuadratureSpec::hermite(20);
    const json& q = cmd["quadrature"];
    const std::string method = as_string(require_key(q, "method", path), path + ".method");
    if (method == "analytic") return QuadratureSpec::analytic();
    if (method == "gauss_hermite") {
        int nodes = q.contains("nodes") ? as_int(q["nodes"], path + ".nodes") : 20;
        return QuadratureSpec::hermite(nodes);
    }
    if (method == "monte_carlo") {
        std::size_t samples = 1000000;
        if (q.contains("samples")) {
            int s = as_int(q["samples"], path + ".samples");
            if (s <= 0) throw ConfigError("samples must be positive", path + ".samples");
            samples = static_cast<std::size_t>(s);
        }
        return QuadratureSpec::mc(samples, ctx.seed);
    }
    throw ConfigError("unknown quadrature method '" + method + "'", path + ".method");
}

struct AxisSpec {
    double lo, hi;
    int count;
};

AxisSpec axis_from(const json& v, const std::string& path) {
    auto nums = as_number_array(v, path);
    if (nums.size() != 3 || nums[2] < 1 || nums[2] != std::floor(nums[2]))
        throw ConfigError("axis spec is [lo, hi, count]", path);
    return {nums[0], nums[1], static_cast<int>(nums[2])};
}

double axis_value(const AxisSpec& a, int i) {
    if (a.count == 1) return a.lo;
    return a.lo + (a.hi - a.lo) * i / (a.count - 1);
}

/// Odometer step over a lattice; returns false after the last point.
bool advance(std::vector<int>& idx, const std::vector<AxisSpec>& axes) {
    for (int d = static_cast<int>(idx.size()) - 1; d >= 0; --d) {
        if (++idx[d] < axes[d].count) return true;
        idx[d] = 0;
    }
    return false;
}

// --------------------------------------------------------------- commands --

json run_curvature(const JobContext& ctx, const json& cmd) {
    HamiltonianModel model = build_model(require_key(ctx.config, "model", "$"), "$.model");
    PhasePoint x = phase_point_from(cmd, model, "$.command");
    CurvatureResult c = curvature(model, x);
    json out{{"schema", 1}, {"command", "curvature"}};
    out["n"] = model.dim();
    out["q"] = x.q;
    out["p"] = x.p;
    out["G"] = to_json(c.G);
    out["gamma"] = to_json(c.gamma);
    out["R"] = to_json(c.R);
    out["ricci"] = c.ricci;
    out["antisymmetric_part"] = to_json(c.antisymmetric_part);
    return out;
}

json run_ricci_density(const JobContext& ctx, const json& cmd) {
    HamiltonianModel model = build_model(require_key(ctx.config, "model", "$"), "$.model");
    auto q = as_number_array(require_key(cmd, "q", "$.command"), "$.command.q");
    QuadratureSpec spec = quadrature_from(cmd, ctx, "$.command.quadrature");
    DensityResult r = ricci_density(model, q, spec);
    json out{{"schema", 1}, {"command", "ricci-density"}};
    out["q"] = q;
    out["value"] = r.value;
    out["estimated_error"] = r.estimated_error;
    out["method"] = to_string(r.method);
    return out;
}

json run_eikonal(const JobContext& ctx, const json& cmd) {
    HamiltonianModel model = build_model(require_key(ctx.config, "model", "$"), "$.model");
    auto start = as_number_array(require_key(cmd, "start", "$.command"), "$.command.start");
    auto end = as_number_array(require_key(cmd, "end", "$.command"), "$.command.end");
    const bool has_E = cmd.contains("energy"), has_T = cmd.contains("time");
    if (has_E == has_T)
        throw ConfigError("eikonal needs exactly one of 'energy' or 'time'", "$.command");
    json out{{"schema", 1}, {"command", "eikonal"}};
    out["start"] = start;
    out["end"] = end;
    if (has_E) {
        const double E = as_number(cmd["energy"], "$.command.energy");
        EikonalValue ev = eikonal_sigma(model, end, start, E);
        out["energy"] = E;
        out["sigma"] = ev.sigma;
        out["t_star"] = ev.t_star;
        out["action"] = ev.s_t;
        out["p0"] = ev.p0;
        out["bracket"] = json::array({ev.bracket_lo, ev.bracket_hi});
    } else {
        const double T = as_number(cmd["time"], "$.command.time");
        ShootingResult shot = shoot(model, start, end, T);
        out["time"] = T;
        out["action"] = action_integral(shot.trajectory);
        out["p0"] = shot.p0;
        out["miss"] = shot.miss;
        out["iterations"] = shot.iterations;
    }
    return out;
}

Trajectory integrate_from(const JobContext& ctx, const json& cmd, const HamiltonianModel& model) {
    PhasePoint x0;
    const json& init = require_key(cmd, "initial", "$.command");
    x0.q = as_number_array(require_key(init, "q", "$.command.initial"), "$.command.initial.q");
    x0.p = as_number_array(require_key(init, "p", "$.command.initial"), "$.command.initial.p");
    const double T = as_number(require_key(cmd, "time", "$.command"), "$.command.time");
    IntegrateOptions opt;
    if (ctx.tolerance) opt.tol = *ctx.tolerance;
    return integrate(model, x0, T, opt);
}

/// Sampled rows (t, q..., p..., H) on a uniform output grid.
std::vector<std::vector<double>> sample_rows(const Trajectory& traj, int samples) {
    std::vector<std::vector<double>> rows;
    for (int k = 0; k <= samples; ++k) {
        const double t =
            traj.start_time() + traj.duration() * static_cast<double>(k) / samples;
        PhasePoint x = traj.state_at(t);
        std::vector<double> row{t};
        row.insert(row.end(), x.q.begin(), x.q.end());
        row.insert(row.end(), x.p.begin(), x.p.end());
        row.push_back(traj.model()(x.q, x.p));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string trajectory_csv(const Trajectory& traj, int samples) {
    const int n = traj.dim();
    std::string out = kCsvSchemaLine;
    out += "t";
    for (int i = 1; i <= n; ++i) out += ",q" + std::to_string(i);
    for (int i = 1; i <= n; ++i) out += ",p" + std::to_string(i);
    out += ",H\n";
    for (const auto& row : sample_rows(traj, samples)) csv_row(out, row);
    return out;
}

json trajectory_json(const Trajectory& traj, int samples) {
    json out{{"schema", 1}, {"command", "trajectory"}};
    json rows = json::array();
    for (const auto& row : sample_rows(traj, samples)) rows.push_back(row);
    out["columns"] = [&] {
        json cols = json::array({"t"});
        for (int i = 1; i <= traj.dim(); ++i) cols.push_back("q" + std::to_string(i));
        for (int i = 1; i <= traj.dim(); ++i) cols.push_back("p" + std::to_string(i));
        cols.push_back("H");
        return cols;
    }();
    out["rows"] = std::move(rows);
    out["max_energy_drift"] = traj.max_energy_drift();
    return out;
}

json run_second_variation(const JobContext& ctx, const json& cmd) {
    HamiltonianModel model = build_model(require_key(ctx.config, "model", "$"), "$.model");
    Trajectory traj = integrate_from(ctx, cmd, model);
    const int n = model.dim();
    auto exprs = as_string_array(require_key(cmd, "variation", "$.command"),
                                 "$.command.variation");
    if (static_cast<int>(exprs.size()) != n)
        throw ConfigError("variation needs one expression per coordinate (in q1 as the time "
                          "variable)", "$.command.variation");
    auto vparams = as_params(cmd, "$.command");
    vparams.emplace("pi", 3.14159265358979323846);
    std::vector<ScalarFieldFn> comps;
    for (const auto& e : exprs) comps.push_back(scalar_field_from_expression(e, 1, vparams));
    auto eval = [comps, n](double t, bool rate) {
        std::vector<double> out(n);
        for (int i = 0; i < n; ++i) {
            Jet tj = Jet::variable(1, 1, 0, t);
            Jet v = comps[i](std::span<const Jet>(&tj, 1));
            out[i] = rate ? v.deriv(0).value() : v.value();
        }
        return out;
    };
    VariationField field;
    field.xi = [eval](double t) { return eval(t, false); };
    field.xi_dot = [eval](double t) { return eval(t, true); };

    const double raw = second_variation(traj, field, VariationForm::raw);
    const double cov = second_variation(traj, field, VariationForm::covariant);
    json out{{"schema", 1}, {"command", "second-variation"}};
    out["raw"] = raw;
    out["covariant"] = cov;
    out["difference"] = std::abs(raw - cov);
    double e0 = 0.0, e1 = 0.0;
    for (double v : field.xi(traj.start_time())) e0 = std::max(e0, std::abs(v));
    for (double v : field.xi(traj.end_time())) e1 = std::max(e1, std::abs(v));
    out["endpoint_norms"] = json::array({e0, e1});
    return out;
}

json stability_report_json(const StabilityReport& r) {
    json out{{"schema", 1}, {"command", "stability"}};
    out["k"] = json::array({r.k1, r.k2, r.k3});
    out["B"] = r.field_strength;
    out["eigenvalues"] = to_json(r.eigenvalues);
    out["spectrally_stable"] = r.spectrally_stable;
    out["semisimple"] = r.semisimple;
    out["marginal"] = r.marginal;
    out["curvature_eigs"] = json::array(
        {r.curvature_eigs[0], r.curvature_eigs[1], r.curvature_eigs[2]});
    out["curvature_positive"] = r.curvature_positive;
    out["gyroscopic_criterion_met"] = r.gyroscopic_criterion_met;
    out["harmonic"] = r.harmonic;
    return out;
}

std::string stability_grid_csv(const json& grid) {
    AxisSpec k1 = axis_from(require_key(grid, "k1", "$.command.grid"), "$.command.grid.k1");
    AxisSpec k2 = axis_from(require_key(grid, "k2", "$.command.grid"), "$.command.grid.k2");
    AxisSpec k3 = axis_from(require_key(grid, "k3", "$.command.grid"), "$.command.grid.k3");
    AxisSpec B = axis_from(require_key(grid, "B", "$.command.grid"), "$.command.grid.B");
    std::string out = kCsvSchemaLine;
    out +=
        "k1,k2,k3,B,spectrally_stable,semisimple,marginal,curvature_positive,"
        "gyroscopic_criterion_met,harmonic\n";
    for (int i = 0; i < k1.count; ++i)
        for (int j = 0; j < k2.count; ++j)
            for (int k = 0; k < k3.count; ++k)
                for (int l = 0; l < B.count; ++l) {
                    StabilityReport r = assess(axis_value(k1, i), axis_value(k2, j),
                                               axis_value(k3, k), axis_value(B, l));
                    csv_row(out, {r.k1, r.k2, r.k3, r.field_strength,
                                  static_cast<double>(r.spectrally_stable),
                                  static_cast<double>(r.semisimple),
                                  static_cast<double>(r.marginal),
                                  static_cast<double>(r.curvature_positive),
                                  static_cast<double>(r.gyroscopic_criterion_met),
                                  static_cast<double>(r.harmonic)});
                }
    return out;
}

json run_stability_json(const JobContext& ctx, const json& cmd) {
    if (cmd.contains("k")) {
        auto k = as_number_array(cmd["k"], "$.command.k");
        if (k.size() != 3)
            throw ConfigError("stability needs exactly three spring constants", "$.command.k");
        const double B = as_number(require_key(cmd, "B", "$.command"), "$.command.B");
        return stability_report_json(assess(k[0], k[1], k[2], B));
    }
    if (cmd.contains("equilibrium")) {
        HamiltonianModel model = build_model(require_key(ctx.config, "model", "$"), "$.model");
        const json& eq = cmd["equilibrium"];
        PhasePoint x;
        x.q = as_number_array(require_key(eq, "q", "$.command.equilibrium"),
                              "$.command.equilibrium.q");
        x.p = as_number_array(require_key(eq, "p", "$.command.equilibrium"),
                              "$.command.equilibrium.p");
        LinearizedFlow f = ctx.tolerance ? linearize(model, x, *ctx.tolerance)
                                         : linearize(model, x);
        json out{{"schema", 1}, {"command", "stability"}};
        out["matrix"] = to_json(f.matrix);
        out["eigenvalues"] = to_json(f.eigenvalues);
        out["spectrally_stable"] = f.spectrally_stable;
        out["semisimple"] = f.semisimple;
        out["marginal"] = f.marginal;
        return out;
    }
    throw ConfigError("stability needs 'k'+'B', 'equilibrium', or 'grid'", "$.command");
}

json run_verify(const JobContext& ctx, const json& cmd) {
    VerifyOptions opt;
    opt.seed = ctx.seed;
    opt.filter = ctx.filter;
    if (opt.filter.empty() && cmd.contains("filter"))
        opt.filter = as_string(cmd["filter"], "$.command.filter");
    if (ctx.tolerance)
        opt.tolerance_override = *ctx.tolerance;
    else if (cmd.contains("tolerance"))
        opt.tolerance_override = as_number(cmd["tolerance"], "$.command.tolerance");

    std::vector<VerifyOutcome> outcomes;
    if (ctx.threads > 1) {
        // cases are pure; run them concurrently, collect in registry order
        std::vector<const VerifyCase*> selected;
        for (const VerifyCase& c : verify_registry()) {
            if (!opt.filter.empty() && c.name.find(opt.filter) == std::string::npos &&
                c.tags.find(opt.filter) == std::string::npos)
                continue;
            selected.push_back(&c);
        }
        std::vector<std::future<double>> futures;
        futures.reserve(selected.size());
        for (const VerifyCase* c : selected)
            futures.push_back(std::async(std::launch::async,
                                         [c, seed = opt.seed] { return c->residual(seed); }));
        for (std::size_t i = 0; i < selected.size(); ++i) {
            VerifyOutcome o;
            o.name = selected[i]->name;
            o.tags = selected[i]->tags;
            o.tolerance = opt.tolerance_override.value_or(selected[i]->tolerance);
            o.residual = futures[i].get();
            o.passed = o.residual <= o.tolerance;
            outcomes.push_back(std::move(o));
        }
    } else {
        outcomes = run_verification(opt);
    }

    json cases = json::array();
    int failed = 0;
    for (const VerifyOutcome& o : outcomes) {
        cases.push_back(json{{"name", o.name},
                             {"tags", o.tags},
                             {"residual", o.residual},
                             {"tolerance", o.tolerance},
                             {"passed", o.passed}});
        failed += !o.passed;
    }
    json out{{"schema", 1}, {"command", "verify"}};
    out["seed"] = opt.seed;
    out["filter"] = opt.filter;
    out["cases"] = std::move(cases);
    out["total"] = outcomes.size();
    out["failed"] = failed;
    out["passed"] = failed == 0;
    return out;
}

json run_action_compare(const JobContext& ctx, const json& cmd) {
    const json& m = require_key(ctx.config, "model", "$");
    auto params = as_params(m, "$.model");
    const std::string family =
        as_string(require_key(m, "family", "$.model"), "$.model.family");
    if (family != "emd" && family != "riemannian")
        throw ConfigError("action-compare works on the emd (or riemannian) model family",
                          "$.model.family");
    const int n = as_int(require_key(m, "n", "$.model"), "$.model.n");
    MetricField metric{n, metric_from_expressions(
                              as_string_matrix(require_key(m, "metric", "$.model"),
                                               "$.model.metric"), n, params)};
    VectorFieldFn A;
    if (m.contains("vector_potential"))
        A = vector_field_from_expressions(
            as_string_array(m["vector_potential"], "$.model.vector_potential"), n, params);
    ScalarFieldFn phi;
    if (m.contains("scalar_field"))
        phi = scalar_field_from_expression(as_string(m["scalar_field"], "$.model.scalar_field"),
                                           n, params);

    TorusGridSpec grid;
    if (cmd.contains("grid")) {
        const json& g = cmd["grid"];
        if (g.contains("points_per_axis"))
            grid.points_per_axis = as_int(g["points_per_axis"],
                                          "$.command.grid.points_per_axis");
        if (g.contains("length")) grid.length = as_number(g["length"], "$.command.grid.length");
        if (g.contains("tolerance"))
            grid.tolerance = as_number(g["tolerance"], "$.command.grid.tolerance");
        grid.momentum = quadrature_from(g, ctx, "$.command.grid.quadrature");
    } else {
        grid.momentum = quadrature_from(cmd, ctx, "$.command.quadrature");
    }

    ActionCompareResult r = action_integral_compare(metric, A, phi, grid);
    json out{{"schema", 1}, {"command", "action-compare"}};
    out["points_per_axis"] = grid.points_per_axis;
    out["momentum_route"] = r.momentum_route;
    out["closed_form_route"] = r.closed_form_route;
    out["conformal_route"] = r.conformal_route;
    out["conformal_base"] = r.conformal_base;
    out["dilaton_kinetic"] = r.dilaton_kinetic;
    out["conformal_coefficient"] = r.conformal_coefficient;
    out["fitted_coefficient"] = r.fitted_coefficient;
    out["momentum_vs_closed"] = r.momentum_vs_closed;
    out["closed_vs_conformal"] = r.closed_vs_conformal;
    out["grid_refinement_delta"] = r.grid_refinement_delta;
    return out;
}

// ------------------------------------------------------------------ main ---

void write_output(const JobContext& ctx, const std::string& text) {
    if (ctx.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(ctx.out_path, std::ios::binary);
    if (!f) throw ConfigError("cannot open output path '" + ctx.out_path + "'", "$.output.path");
    f << text;
}

int run_job(JobContext& ctx) {
    const json& cfg = ctx.config;
    if (!cfg.is_object()) throw ConfigError("config root must be an object", "$");
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        const std::string& k = it.key();
        if (k != "schema" && k != "model" && k != "command" && k != "output" && k != "seed" &&
            k != "tolerance")
            throw ConfigError("unknown field '" + k + "'", "$." + k);
    }
    if (as_int(require_key(cfg, "schema", "$"), "$.schema") != 1)
        throw ConfigError("unsupported schema version", "$.schema");

    if (cfg.contains("seed") && ctx.seed == 0) {
        const json& s = cfg["seed"];
        if (!s.is_number_integer() || s.get<std::int64_t>() < 0)
            throw ConfigError("seed must be a nonnegative integer", "$.seed");
        ctx.seed = s.get<std::uint64_t>();
    }
    if (cfg.contains("tolerance") && !ctx.tolerance)
        ctx.tolerance = as_number(cfg["tolerance"], "$.tolerance");

    if (cfg.contains("output")) {
        const json& o = cfg["output"];
        if (ctx.format.empty() && o.contains("format"))
            ctx.format = as_string(o["format"], "$.output.format");
        if (ctx.out_path.empty() && o.contains("path"))
            ctx.out_path = as_string(o["path"], "$.output.path");
    }
    if (ctx.format.empty()) ctx.format = "json";
    if (ctx.format != "json" && ctx.format != "csv")
        throw ConfigError("format must be 'json' or 'csv'", "$.output.format");

    const json& cmd = require_key(cfg, "command", "$");
    const std::string name = as_string(require_key(cmd, "name", "$.command"), "$.command.name");

    // commands with native CSV output
    if (name == "trajectory") {
        HamiltonianModel model = build_model(require_key(cfg, "model", "$"), "$.model");
        Trajectory traj = integrate_from(ctx, cmd, model);
        int samples = cmd.contains("samples") ? as_int(cmd["samples"], "$.command.samples") : 100;
        if (samples < 1) throw ConfigError("samples must be >= 1", "$.command.samples");
        write_output(ctx, ctx.format == "csv" ? trajectory_csv(traj, samples)
                                              : trajectory_json(traj, samples).dump(2) + "\n");
        return 0;
    }
    if (name == "stability" && cmd.contains("grid")) {
        if (ctx.format != "csv")
            throw ConfigError("the stability grid sweep emits CSV; set format to 'csv'",
                              "$.output.format");
        write_output(ctx, stability_grid_csv(cmd["grid"]));
        return 0;
    }
    if (ctx.format == "csv")
        throw ConfigError("CSV output is only available for trajectory and stability grid "
                          "sweeps", "$.output.format");

    json out;
    int status = 0;
    if (name == "curvature")
        out = run_curvature(ctx, cmd);
    else if (name == "ricci-density")
        out = run_ricci_density(ctx, cmd);
    else if (name == "eikonal")
        out = run_eikonal(ctx, cmd);
    else if (name == "second-variation")
        out = run_second_variation(ctx, cmd);
    else if (name == "stability")
        out = run_stability_json(ctx, cmd);
    else if (name == "verify") {
        out = run_verify(ctx, cmd);
        status = out["passed"].get<bool>() ? 0 : 1;
    } else if (name == "action-compare")
        out = run_action_compare(ctx, cmd);
    else
        throw ConfigError("unknown command '" + name + "'", "$.command.name");

    write_output(ctx, out.dump(2) + "\n");
    return status;
}

int emit_error(const std::string& name, const std::string& detail, const std::string& location,
               int code) {
    json out{{"schema", 1}, {"error", name}, {"detail", detail}, {"location", location}};
    std::cout << out.dump(2) << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hamiltonian-geometry toolkit: curvature, densities, eikonal distances, "
                 "trajectories, stability, and closed-form verification"};
    std::string config_path, out_path, format, filter;
    std::uint64_t seed = 0;
    int threads = 1;
    app.add_option("--config", config_path, "JSON job config")->required();
    app.add_option("--output", out_path, "output file (default: stdout)");
    app.add_option("--format", format, "json or csv (overrides config)");
    app.add_option("--seed", seed, "seed for sampled inputs (overrides config)");
    app.add_option("--threads", threads, "worker threads for verify")->check(CLI::Range(1, 256));
    app.add_option("--filter", filter, "verify: run only cases matching this substring");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return emit_error("ConfigInvalid", e.what(), "argv", 2);
    }

    JobContext ctx;
    ctx.out_path = out_path;
    ctx.format = format;
    ctx.seed = seed;
    ctx.filter = filter;
    ctx.threads = threads;

    std::ifstream in(config_path);
    if (!in) return emit_error("ConfigInvalid", "cannot read config '" + config_path + "'",
                               "argv.config", 2);
    try {
        ctx.config = json::parse(in);
    } catch (const json::parse_error& e) {
        return emit_error("ConfigInvalid", e.what(), "$", 2);
    }

    try {
        return run_job(ctx);
    } catch (const ConfigError& e) {
        return emit_error(e.name(), e.detail(), e.location(), 2);
    } catch (const Error& e) {
        return emit_error(e.name(), e.detail(), "$.command", 1);
    } catch (const std::exception& e) {
        return emit_error("Internal", e.what(), "$.command", 1);
    }
}
