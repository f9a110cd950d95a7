#include "bsde/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bsde/csv.hpp"
#include "bsde/errors.hpp"
#include "bsde/generator.hpp"
#include "bsde/hgen.hpp"
#include "bsde/levy.hpp"
#include "bsde/malliavin.hpp"
#include "bsde/pdie.hpp"
#include "bsde/solver.hpp"
#include "bsde/verify.hpp"

namespace bsde::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

const json& require(const json& j, const std::string& key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw ConfigurationError("config: missing field " + where + "." + key);
    return *it;
}

double require_number(const json& j, const std::string& key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_number())
        throw ConfigurationError("config: field " + where + "." + key + " must be a number");
    return v.get<double>();
}

double number_or(const json& j, const std::string& key, double fallback) {
    auto it = j.find(key);
    if (it == j.end())
        return fallback;
    return it->get<double>();
}

LevyTriplet parse_model(const json& cfg) {
    const json& m = require(cfg, "model", "");
    const double gamma = require_number(m, "gamma", "model");
    const double sigma = require_number(m, "sigma", "model");
    if (sigma < 0.0)
        throw ConfigurationError("config: model.sigma must be nonnegative");

    std::vector<JumpAtom> atoms;
    if (m.contains("atoms")) {
        for (const auto& a : m.at("atoms")) {
            if (!a.is_array() || a.size() != 2)
                throw ConfigurationError("config: model.atoms entries must be [mark, intensity]");
            const double mark = a[0].get<double>();
            const double intensity = a[1].get<double>();
            if (!(intensity > 0.0))
                throw ConfigurationError("config: model.atoms intensity must be positive");
            if (mark == 0.0)
                throw ConfigurationError("config: model.atoms mark must be nonzero");
            atoms.push_back({mark, intensity});
        }
        std::sort(atoms.begin(), atoms.end(),
                  [](const JumpAtom& a, const JumpAtom& b) { return a.mark < b.mark; });
    } else if (m.contains("density")) {
        const json& d = m.at("density");
        const double coefficient = number_or(d, "coefficient", 1.0);
        const double exponent = require_number(d, "exponent", "model.density");
        const json& support = require(d, "support", "model.density");
        if (!support.is_array() || support.size() != 2)
            throw ConfigurationError("config: model.density.support must be [lo, hi]");
        const auto n_atoms =
            static_cast<std::size_t>(require_number(d, "n_atoms", "model.density"));
        const double cutoff = require_number(d, "cutoff", "model.density");
        const auto measure = discretize_density(
            [coefficient, exponent](double x) {
                return coefficient * std::pow(std::fabs(x), exponent);
            },
            support[0].get<double>(), support[1].get<double>(), n_atoms, cutoff);
        atoms = measure.atoms;
        std::cerr << "model.density: truncated x^2 mass " << measure.truncated_mass << "\n";
    }
    return LevyTriplet(gamma, sigma, std::move(atoms));
}

GeneratorSpec parse_generator(const json& cfg) {
    const json& g = require(cfg, "generator", "");
    const std::string family = require(g, "family", "generator").get<std::string>();
    const json params = g.value("params", json::object());
    if (family == "zero")
        return make_zero_generator();
    if (family == "linear")
        return make_linear_generator(
            number_or(params, "alpha", 0.0), number_or(params, "beta", 0.0),
            number_or(params, "gamma", 0.0), number_or(params, "delta", 0.0));
    if (family == "subquadratic_z")
        return make_subquadratic_z_generator(number_or(params, "c", 1.0));
    if (family == "envelope") {
        const double a = number_or(params, "a", 0.0);
        const double k_f = number_or(params, "k_f", 0.0);
        return make_envelope_generator([a](double) { return a; },
                                       [k_f](double) { return k_f; });
    }
    throw ConfigurationError("config: generator.family must be one of "
                             "zero|linear|subquadratic_z|envelope, got " +
                             family);
}

struct TerminalConfig {
    TerminalSpec spec;
    std::function<double(double)> point_fn; // xi as a function of the terminal state
};

TerminalConfig parse_terminal(const json& cfg, const LevyTriplet& model) {
    const json& t = require(cfg, "terminal", "");
    const std::string family = require(t, "family", "terminal").get<std::string>();
    const json params = t.value("params", json::object());

    TerminalConfig out;
    if (family == "constant") {
        const double c = number_or(params, "c", 0.0);
        out.spec = make_constant_terminal(c);
        out.point_fn = [c](double) { return c; };
    } else if (family == "terminal_value") {
        out.spec = make_terminal_value(model.sigma());
        out.point_fn = [](double v) { return v; };
    } else if (family == "tanh") {
        const double scale = number_or(params, "scale", 1.0);
        out.spec = make_tanh_terminal(scale, model.sigma());
        out.point_fn = [scale](double v) { return std::tanh(scale * v); };
    } else {
        throw ConfigurationError(
            "config: terminal.family must be one of constant|terminal_value|tanh, got " +
            family);
    }
    if (t.contains("A_xi"))
        out.spec.A_xi = t.at("A_xi").get<double>();
    if (t.contains("A_Dxi")) {
        const json& b = t.at("A_Dxi");
        if (b.contains("constant")) {
            const double c = b.at("constant").get<double>();
            out.spec.A_Dxi = [c](double) { return c; };
        } else {
            const double slope = require_number(b, "slope", "terminal.A_Dxi");
            const double cap = number_or(b, "cap", 2.0);
            const double at0 = number_or(b, "at_zero", slope * model.sigma());
            out.spec.A_Dxi = [slope, cap, at0](double mark) {
                return (mark == 0.0) ? at0 : std::min(slope * std::fabs(mark), cap);
            };
        }
    }
    return out;
}

BoundCertificate parse_bounds(const json& cfg, const GeneratorSpec& spec,
                              const TerminalSpec& terminal,
                              std::span<const JumpAtom> atoms, double T) {
    const json b = cfg.value("bounds", json{{"mode", "auto"}});
    const std::string mode = b.value("mode", std::string("auto"));
    if (mode == "auto")
        return compute_bounds(spec, terminal, atoms, T);
    if (mode == "explicit") {
        BoundCertificate cert;
        cert.R = require_number(b, "R", "bounds");
        cert.Q = require_number(b, "Q", "bounds");
        cert.P = require_number(b, "P", "bounds");
        const double y_cap = cert.R - 1.0, z_cap = cert.Q - 1.0, u_cap = 2.0 * cert.R - 2.0;
        cert.y_envelope = [y_cap](double) { return y_cap; };
        cert.z_envelope = [z_cap](double) { return z_cap; };
        cert.u_envelope = [u_cap](double, double) { return u_cap; };
        return cert;
    }
    throw ConfigurationError("config: bounds.mode must be auto or explicit");
}

struct SolverConfig {
    std::string method;
    TimeGrid grid;
    std::size_t paths = 10000;
    RegressionBasis basis;
    double tol = 1e-6;
    unsigned max_iter = 50;
    std::vector<double> lattice;
};

std::vector<double> uniform_lattice(double lo, double hi, std::size_t n) {
    if (!(lo < hi) || n < 3)
        throw ConfigurationError("config: lattice must have min < max and >= 3 nodes");
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k)
        v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    return v;
}

SolverConfig parse_solver(const json& cfg) {
    const json& s = require(cfg, "solver", "");
    SolverConfig out;
    out.method = require(s, "method", "solver").get<std::string>();
    if (out.method != "markov_dp" && out.method != "picard_regression")
        throw ConfigurationError(
            "config: solver.method must be markov_dp or picard_regression");
    const json& g = require(s, "grid", "solver");
    out.grid = TimeGrid::uniform(require_number(g, "T", "solver.grid"),
                                 static_cast<std::size_t>(
                                     require_number(g, "steps", "solver.grid")));
    out.paths = static_cast<std::size_t>(number_or(s, "paths", 10000));
    out.basis.degree = static_cast<unsigned>(number_or(s, "basis_degree", 3));
    out.tol = number_or(s, "tol", 1e-6);
    out.max_iter = static_cast<unsigned>(number_or(s, "max_iter", 50));
    if (s.contains("lattice")) {
        const json& l = s.at("lattice");
        out.lattice = uniform_lattice(
            require_number(l, "min", "solver.lattice"),
            require_number(l, "max", "solver.lattice"),
            static_cast<std::size_t>(require_number(l, "nodes", "solver.lattice")));
    }
    return out;
}

ForwardSpec parse_forward(const json& cfg, const LevyTriplet& model) {
    if (!cfg.contains("forward"))
        return forward_from_model(model);
    const json& f = cfg.at("forward");
    ForwardSpec fwd;
    const double b = number_or(f, "b", 0.0);
    const double sigma = number_or(f, "sigma", model.sigma());
    fwd.b_coef = [b](double) { return b; };
    fwd.sigma_coef = [sigma](double) { return sigma; };
    const std::string beta = f.value("beta", std::string("mark"));
    if (beta == "zero") {
        fwd.beta = [](double, double) { return 0.0; };
    } else if (beta == "mark") {
        fwd.beta = [](double, double x) { return x; };
    } else {
        throw ConfigurationError("config: forward.beta must be zero or mark");
    }
    return fwd;
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw ConfigurationError("cannot write " + path.string());
    os << contents;
}

struct TaskContext {
    json config;
    fs::path out;
    std::uint64_t seed;
    std::string config_hash;
    std::vector<std::string> artifacts;

    void write_artifact(const std::string& name, const std::string& contents) {
        write_file(out / name, contents);
        artifacts.push_back(name);
    }
    void finish_manifest(const std::string& task, const json& tolerances) {
        json manifest{{"task", task},
                      {"config_hash", config_hash},
                      {"seed", seed},
                      {"tolerances", tolerances},
                      {"artifacts", artifacts}};
        write_file(out / "manifest.json", manifest.dump(2) + "\n");
    }
};

DiscreteSolution run_solve(TaskContext& ctx, const LevyTriplet& model,
                           const GeneratorSpec& gen, const TerminalConfig& terminal,
                           const SolverConfig& solver) {
    if (solver.method == "markov_dp") {
        if (solver.lattice.empty())
            throw ConfigurationError("config: solver.lattice is required for markov_dp");
        const ForwardSpec fwd = parse_forward(ctx.config, model);
        return solve_markov_dp(fwd, gen, terminal.point_fn, model.atoms(), solver.lattice,
                               solver.grid);
    }
    auto bundle = std::make_shared<PathBundle>(
        sample_paths(model, solver.grid, solver.paths, ctx.seed));
    return solve_picard_regression(model, gen, terminal.spec, bundle, solver.basis,
                                   solver.tol, solver.max_iter);
}

int task_simulate(TaskContext& ctx) {
    const LevyTriplet model = parse_model(ctx.config);
    const SolverConfig solver = parse_solver(ctx.config);
    const PathBundle bundle = sample_paths(model, solver.grid, solver.paths, ctx.seed);
    std::ostringstream os;
    write_paths_csv(os, bundle);
    ctx.write_artifact("paths.csv", os.str());
    ctx.finish_manifest("simulate", json::object());
    return kExitOk;
}

int task_solve(TaskContext& ctx) {
    const LevyTriplet model = parse_model(ctx.config);
    const GeneratorSpec gen = parse_generator(ctx.config);
    const TerminalConfig terminal = parse_terminal(ctx.config, model);
    const SolverConfig solver = parse_solver(ctx.config);
    const DiscreteSolution sol = run_solve(ctx, model, gen, terminal, solver);
    std::ostringstream os;
    write_solution_csv(os, sol);
    ctx.write_artifact("solution.csv", os.str());
    ctx.finish_manifest("solve", json{{"solver_tol", solver.tol}});
    if (!sol.diagnostics.converged) {
        std::cerr << "solver did not converge within max_iter\n";
        return kExitNumerical;
    }
    return kExitOk;
}

int task_verify(TaskContext& ctx) {
    const LevyTriplet model = parse_model(ctx.config);
    const GeneratorSpec gen = parse_generator(ctx.config);
    const TerminalConfig terminal = parse_terminal(ctx.config, model);
    const SolverConfig solver = parse_solver(ctx.config);
    const json vcfg = ctx.config.value("verify", json::object());

    DiscreteSolution sol = [&] {
        if (vcfg.contains("input")) {
            std::ifstream is(vcfg.at("input").get<std::string>());
            if (!is)
                throw ConfigurationError("config: verify.input file not readable");
            return read_solution_csv(is);
        }
        return run_solve(ctx, model, gen, terminal, solver);
    }();

    if (sol.grid.horizon() > solver.grid.horizon() + 1e-12)
        throw ConfigurationError(
            "config: verify.input horizon exceeds solver.grid.T; envelopes undefined");
    const BoundCertificate cert = parse_bounds(ctx.config, gen, terminal.spec,
                                               model.atoms(), solver.grid.horizon());
    const double slack_factor = vcfg.value("slack_factor", 10.0);
    double spacing = 0.0;
    if (!sol.states.empty() && sol.kind == SolutionKind::Lattice && sol.states.size() > 1)
        spacing = sol.states[1] - sol.states[0];
    const double dt = sol.grid.dt(0);
    const double slack = slack_factor * (dt + spacing);

    const BoundsCheckReport report = check_bounds(sol, cert, slack);
    ctx.write_artifact("verify_report.json", bounds_report_json(report) + "\n");
    ctx.finish_manifest("verify", json{{"slack", slack}});
    if (!report.ok()) {
        std::cerr << "bounds check failed; see verify_report.json\n";
        return kExitVerification;
    }
    return kExitOk;
}

int task_malliavin(TaskContext& ctx) {
    const LevyTriplet model = parse_model(ctx.config);
    const GeneratorSpec gen = parse_generator(ctx.config);
    const TerminalConfig terminal = parse_terminal(ctx.config, model);
    const SolverConfig solver = parse_solver(ctx.config);
    if (solver.method != "picard_regression")
        throw ConfigurationError("config: malliavin task requires solver.method "
                                 "picard_regression");
    const json mcfg = ctx.config.value("malliavin", json::object());

    auto bundle = std::make_shared<PathBundle>(
        sample_paths(model, solver.grid, solver.paths, ctx.seed));
    const DiscreteSolution base = solve_picard_regression(
        model, gen, terminal.spec, bundle, solver.basis, solver.tol, solver.max_iter);

    json report = json::object();
    const json directions = mcfg.value("directions", json("diagonal"));
    if (directions.is_string() && directions.get<std::string>() == "diagonal") {
        std::vector<std::size_t> nodes;
        if (mcfg.contains("nodes")) {
            for (const auto& n : mcfg.at("nodes"))
                nodes.push_back(n.get<std::size_t>());
        } else {
            for (std::size_t i = 1; i + 1 < solver.grid.size(); ++i)
                nodes.push_back(i);
        }
        const auto ident =
            identify_ZU(gen, terminal.spec, base, bundle, model.atoms(), nodes,
                        solver.basis, solver.tol, solver.max_iter,
                        model.sigma() > 0.0);
        report["z_error"] = ident.z_error;
        report["u_errors"] = ident.u_errors;
        report["nodes"] = ident.nodes;
    } else {
        json rows = json::array();
        for (const auto& d : directions) {
            if (!d.is_array() || d.size() != 2)
                throw ConfigurationError(
                    "config: malliavin.directions entries must be [r, v]");
            const MalliavinDirection dir{d[0].get<double>(), d[1].get<double>()};
            const DiscreteSolution deriv =
                solve_derivative_bsde(gen, base, terminal.spec, dir, bundle,
                                      model.atoms(), solver.basis, solver.tol,
                                      solver.max_iter);
            std::ostringstream os;
            write_solution_csv(os, deriv);
            const std::string name = "derivative_r" + format_value(dir.r) + "_v" +
                                     format_value(dir.v) + ".csv";
            ctx.write_artifact(name, os.str());
            rows.push_back(json{{"r", dir.r}, {"v", dir.v}, {"file", name}});
        }
        report["directions"] = rows;
    }
    ctx.write_artifact("malliavin_report.json", report.dump(2) + "\n");
    ctx.finish_manifest("malliavin", json{{"solver_tol", solver.tol}});
    return kExitOk;
}

int task_hlimit(TaskContext& ctx) {
    const LevyTriplet model = parse_model(ctx.config);
    const GeneratorSpec base = parse_generator(ctx.config);
    const TerminalConfig terminal = parse_terminal(ctx.config, model);
    const SolverConfig solver = parse_solver(ctx.config);
    const json hcfg = require(ctx.config, "hlimit", "");

    HLimitSettings settings;
    settings.cauchy_tol = number_or(hcfg, "cauchy_tol", 1e-4);
    settings.basis = solver.basis;
    settings.solver_tol = solver.tol;
    settings.max_iter = solver.max_iter;
    if (hcfg.contains("schedule")) {
        settings.schedule.clear();
        for (const auto& n : hcfg.at("schedule"))
            settings.schedule.push_back(n.get<unsigned>());
    }
    const double alpha = number_or(hcfg, "alpha", 1.0);
    const HGeneratorSpec hspec = make_exponential_utility_hspec(base, alpha);

    auto bundle = std::make_shared<PathBundle>(
        sample_paths(model, solver.grid, solver.paths, ctx.seed));
    const HLimitResult result =
        solve_H_limit(hspec, terminal.spec, model, model.atoms(), bundle, settings);

    std::ostringstream table_os;
    write_hlimit_csv(table_os, result.table);
    ctx.write_artifact("hlimit_table.csv", table_os.str());
    std::ostringstream sol_os;
    write_solution_csv(sol_os, result.solution);
    ctx.write_artifact("solution.csv", sol_os.str());
    ctx.finish_manifest("hlimit", json{{"cauchy_tol", settings.cauchy_tol}});
    if (!result.converged) {
        std::cerr << "hlimit schedule exhausted before the Cauchy tolerance\n";
        return kExitNumerical;
    }
    return kExitOk;
}

int task_pdie(TaskContext& ctx) {
    const LevyTriplet model = parse_model(ctx.config);
    const GeneratorSpec gen = parse_generator(ctx.config);
    const TerminalConfig terminal = parse_terminal(ctx.config, model);
    const json pcfg = require(ctx.config, "pdie", "");
    const ForwardSpec fwd = parse_forward(ctx.config, model);

    const json& space = require(pcfg, "space", "pdie");
    const auto space_nodes = uniform_lattice(
        require_number(space, "min", "pdie.space"), require_number(space, "max", "pdie.space"),
        static_cast<std::size_t>(require_number(space, "nodes", "pdie.space")));
    const double T = require_number(pcfg, "T", "pdie");
    const auto steps = static_cast<std::size_t>(require_number(pcfg, "steps", "pdie"));
    const TimeGrid tgrid = TimeGrid::uniform(T, steps);

    const PdieGrid grid =
        solve_pdie(fwd, gen, terminal.point_fn, space_nodes, tgrid, model.atoms());
    std::ostringstream os;
    write_pdie_csv(os, grid);
    ctx.write_artifact("pdie.csv", os.str());

    json tolerances = json::object();
    if (pcfg.value("cross_validate", false)) {
        const auto dp_steps =
            static_cast<std::size_t>(number_or(pcfg, "dp_steps", steps / 10 + 1));
        const DiscreteSolution dp =
            solve_markov_dp(fwd, gen, terminal.point_fn, model.atoms(), space_nodes,
                            TimeGrid::uniform(T, dp_steps));
        const CrossValidationReport cv = cross_validate(grid, dp);
        json report{{"sup_error", cv.sup_error},
                    {"l2_error", cv.l2_error},
                    {"times", cv.times},
                    {"per_time_sup", cv.per_time_sup}};
        ctx.write_artifact("cross_validation.json", report.dump(2) + "\n");
    }
    ctx.finish_manifest("pdie", tolerances);
    return kExitOk;
}

} // namespace

int run_task(const std::string& config_path, const std::string& out_dir,
             std::optional<std::uint64_t> seed_override, const std::string& task) {
    try {
        std::ifstream is(config_path, std::ios::binary);
        if (!is)
            throw ConfigurationError("config file not readable: " + config_path);
        std::ostringstream buffer;
        buffer << is.rdbuf();
        const std::string bytes = buffer.str();

        TaskContext ctx;
        try {
            ctx.config = json::parse(bytes);
        } catch (const json::parse_error& e) {
            throw ConfigurationError(std::string("config is not valid JSON: ") + e.what());
        }
        ctx.out = fs::path(out_dir);
        fs::create_directories(ctx.out);
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(fnv1a(bytes)));
        ctx.config_hash = hash;
        ctx.seed = seed_override.value_or(ctx.config.value<std::uint64_t>("seed", 0));

        if (task == "simulate")
            return task_simulate(ctx);
        if (task == "solve")
            return task_solve(ctx);
        if (task == "verify")
            return task_verify(ctx);
        if (task == "malliavin")
            return task_malliavin(ctx);
        if (task == "hlimit")
            return task_hlimit(ctx);
        if (task == "pdie")
            return task_pdie(ctx);
        throw ConfigurationError("unknown task: " + task);
    } catch (const ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}

} // namespace bsde::cli
