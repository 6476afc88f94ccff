#include "commands.hpp"

#include "cpmdp/bench.hpp"
#include "cpmdp/errors.hpp"
#include "cpmdp/gridworld.hpp"
#include "cpmdp/solvers.hpp"
#include "cpmdp/transition.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace cpmdp::cli {

namespace {

struct ConfigFlags {
    double gamma = 0.9;
    double epsilon = 1e-4;
    std::uint64_t max_iter = 1000;
    std::optional<double> eval_epsilon;
    std::uint64_t eval_max_iter = 1000;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> dense_cap;
};

void add_config_flags(CLI::App& cmd, ConfigFlags& f) {
    cmd.add_option("--gamma", f.gamma, "Discount factor in [0, 1)")->capture_default_str();
    cmd.add_option("--epsilon", f.epsilon,
                   "Value accuracy; sweeps stop below epsilon*(1-gamma)/gamma")
        ->capture_default_str();
    cmd.add_option("--max-iter", f.max_iter, "Iteration cap (VI sweeps / PI rounds)")
        ->capture_default_str();
    cmd.add_option("--eval-epsilon", f.eval_epsilon,
                   "Policy-evaluation accuracy (defaults to --epsilon)");
    cmd.add_option("--eval-max-iter", f.eval_max_iter, "Policy-evaluation sweep cap")
        ->capture_default_str();
    cmd.add_option("--threads", f.threads,
                   fmt::format("Workers per sweep (env {}, default 1)", kThreadsEnv));
    cmd.add_option("--dense-cap", f.dense_cap,
                   fmt::format("Dense model ceiling in bytes (env {}, default {})",
                               kDenseCapEnv, kDefaultDenseCapBytes));
}

std::optional<std::uint64_t> env_u64(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto x = std::stoull(v, &used);
        if (used != std::string(v).size()) throw std::invalid_argument(name);
        return x;
    } catch (const std::exception&) {
        throw CLI::ValidationError(fmt::format("environment variable {}='{}' is not a count",
                                               name, v));
    }
}

RunOptions make_options(const ConfigFlags& f) {
    RunOptions o;
    o.solver.gamma = f.gamma;
    o.solver.epsilon = f.epsilon;
    o.solver.max_iter = f.max_iter;
    o.solver.eval_epsilon = f.eval_epsilon.value_or(f.epsilon);
    o.solver.eval_max_iter = f.eval_max_iter;
    if (f.threads)
        o.solver.threads = *f.threads;
    else if (auto t = env_u64(kThreadsEnv))
        o.solver.threads = static_cast<unsigned>(*t);
    if (o.solver.threads == 0) throw CLI::ValidationError("--threads must be at least 1");
    if (f.dense_cap)
        o.dense_cap_bytes = *f.dense_cap;
    else if (auto c = env_u64(kDenseCapEnv))
        o.dense_cap_bytes = *c;
    try {
        validate(o.solver);
    } catch (const SpecError& e) {
        throw CLI::ValidationError(e.what());
    }
    return o;
}

SolverKind solver_from_flag(const std::string& name) {
    if (auto k = parse_solver(name)) return *k;
    throw CLI::ValidationError(
        fmt::format("unknown solver '{}' (expected cp-vi, cp-pi, tab-vi or tab-pi)", name));
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot open {} for writing", path));
    return f;
}

void close_out(std::ofstream& f, const std::string& path) {
    f.flush();
    if (!f) throw IoError(fmt::format("failed writing {}", path));
}

std::string stats_line(const RunRecord& r) {
    return fmt::format(
        "solver={} D={} S={} A={} obstacles={} terminals={} seed={} noise={:.6g} iterations={} "
        "converged={} wall_time_s={:.6g} multiplies={} model_components={} model_bytes={} "
        "value_bytes={} infeasible={}",
        r.solver, r.D, r.S, r.A, r.obstacles, r.terminals, r.seed, r.noise, r.iterations,
        r.converged ? 1 : 0, r.wall_time_s, r.multiplies, r.model_components, r.model_bytes,
        r.value_bytes, r.infeasible ? 1 : 0);
}

// ---------------------------------------------------------------- gen-spec

struct GenSpecFlags {
    std::vector<std::uint64_t> dims;
    std::uint64_t obstacles = 0;
    std::uint64_t terminals = 1;
    std::uint64_t seed = 1;
    double noise = kDefaultNoise;
    double step_reward = kDefaultStepReward;
    double terminal_reward = kDefaultTerminalReward;
    std::string out;
};

int cmd_gen_spec(const GenSpecFlags& f, std::ostream& out, std::ostream& err) {
    if (!(f.noise >= 0.0 && f.noise <= 1.0))
        throw CLI::ValidationError(fmt::format("--noise {} outside [0, 1]", f.noise));
    GridShape shape;
    try {
        shape = GridShape(f.dims);
    } catch (const SizingError& e) {
        throw CLI::ValidationError(e.what());
    }
    const auto spec = generate_random_spec(shape, f.obstacles, f.terminals, f.seed, f.noise,
                                           f.step_reward, f.terminal_reward);
    auto& summary = f.out.empty() ? err : out;
    if (f.out.empty())
        out << spec_to_string(spec);
    else
        write_spec_file(spec, f.out);
    summary << fmt::format("S={} A={} D={} dims={} obstacles={} terminals={} plain={} seed={}\n",
                           shape.num_states(), action_count(spec), shape.rank(),
                           fmt::join(f.dims, "x"), spec.obstacles.size(), spec.terminals.size(),
                           plain_state_count(spec), spec.seed);
    return kOk;
}

// ---------------------------------------------------------------- solve

struct SolveFlags {
    std::string spec;
    std::string solver = "cp-vi";
    std::string out_prefix;
    std::string dump_components;
    bool solve_only = false;
    ConfigFlags config;
};

void write_values(const ValueFunction& v, const std::string& path) {
    auto f = open_out(path);
    for (std::size_t s = 0; s < v.size(); ++s) f << fmt::format("{} {:.12f}\n", s, v[s]);
    close_out(f, path);
}

void write_policy(const Policy& pi, const std::string& path) {
    auto f = open_out(path);
    for (std::size_t s = 0; s < pi.size(); ++s)
        if (pi[s] != kNoAction) f << fmt::format("{} {}\n", s, pi[s]);
    close_out(f, path);
}

int cmd_solve(const SolveFlags& f, std::ostream& out, std::ostream& err) {
    const auto kind = solver_from_flag(f.solver);
    auto options = make_options(f.config);
    options.solve_only_timing = f.solve_only;
    const auto spec = read_spec_file(f.spec);
    const auto run = execute_run(spec, kind, options);
    out << stats_line(run.record) << '\n';
    if (run.record.infeasible) {
        err << fmt::format("{} needs {} bytes of dense storage, above the cap of {}\n",
                           f.solver, run.record.model_bytes, options.dense_cap_bytes);
        return kInfeasible;
    }
    if (!f.out_prefix.empty()) {
        write_values(run.result->value, f.out_prefix + ".values");
        write_policy(run.result->policy, f.out_prefix + ".policy");
    }
    if (!f.dump_components.empty()) {
        auto d = open_out(f.dump_components);
        dump_components(build_component_model(spec), d);
        close_out(d, f.dump_components);
    }
    return kOk;
}

// ---------------------------------------------------------------- compare

struct CompareFlags {
    std::string spec;
    std::string a = "cp-vi";
    std::string b = "tab-vi";
    double tolerance = 1e-6;
    ConfigFlags config;
};

int cmd_compare(const CompareFlags& f, std::ostream& out, std::ostream& err) {
    const auto ka = solver_from_flag(f.a);
    const auto kb = solver_from_flag(f.b);
    const auto options = make_options(f.config);
    const auto spec = read_spec_file(f.spec);

    const auto ra = execute_run(spec, ka, options);
    const auto rb = execute_run(spec, kb, options);
    for (const auto* r : {&ra, &rb})
        if (r->record.infeasible) {
            err << fmt::format("{} is infeasible: dense model needs {} bytes, cap {}\n",
                               r->record.solver, r->record.model_bytes, options.dense_cap_bytes);
            return kInfeasible;
        }

    const auto models = build_models(spec);
    const auto& va = ra.result->value;
    const auto& vb = rb.result->value;
    const auto gaps = q_gaps(models.components, models.rewards, va, options.solver);

    double value_gap = 0.0;
    for (std::size_t s = 0; s < va.size(); ++s)
        value_gap = std::max(value_gap, std::abs(va[s] - vb[s]));
    std::uint64_t disagreements = 0, true_disagreements = 0;
    for (auto s : models.rewards.plain) {
        if (ra.result->policy[s] == rb.result->policy[s]) continue;
        ++disagreements;
        if (gaps[s] > f.tolerance) ++true_disagreements;
    }
    out << fmt::format("{}: {}\n{}: {}\n", f.a, stats_line(ra.record), f.b, stats_line(rb.record));
    out << fmt::format(
        "value_sup_norm_diff={:.6g} policy_disagreements={} true_disagreements={} "
        "tolerance={:.6g}\n",
        value_gap, disagreements, true_disagreements, f.tolerance);
    const bool ok = true_disagreements == 0 && value_gap <= f.tolerance;
    out << (ok ? "result=match\n" : "result=mismatch\n");
    return ok ? kOk : kMismatch;
}

// ---------------------------------------------------------------- bench

struct BenchFlags {
    double scale = 0.01;
    std::vector<std::string> solvers{"cp-vi"};
    std::uint32_t repeats = 6;
    std::vector<std::uint32_t> dimensions;
    std::vector<std::uint32_t> rows;
    std::string out = "bench.csv";
    std::string summary;
    unsigned jobs = 1;
    bool solve_only = false;
    ConfigFlags config;
};

int cmd_bench(const BenchFlags& f, std::ostream& out, std::ostream&) {
    std::vector<SolverKind> solvers;
    for (const auto& s : f.solvers) solvers.push_back(solver_from_flag(s));
    auto options = make_options(f.config);
    options.solve_only_timing = f.solve_only;
    if (!(f.scale > 0.0 && f.scale <= 1.0))
        throw CLI::ValidationError(fmt::format("--scale {} outside (0, 1]", f.scale));
    if (f.repeats == 0) throw CLI::ValidationError("--repeats must be at least 1");
    if (f.jobs == 0) throw CLI::ValidationError("--jobs must be at least 1");

    const auto suite = grid_table_suite(f.scale, solvers, f.repeats, {f.dimensions, f.rows});
    const auto records = run_suite(suite, options, f.jobs);
    emit_csv(records, f.out);

    const auto cells = aggregate(records);
    if (!f.summary.empty()) {
        auto s = open_out(f.summary);
        write_summary_csv(cells, s);
        close_out(s, f.summary);
    }
    std::uint64_t infeasible = 0;
    for (const auto& r : records) infeasible += r.infeasible ? 1 : 0;
    out << fmt::format("cells={} runs={} infeasible={} csv={}{}\n", suite.cells.size(),
                       records.size(), infeasible, f.out,
                       f.jobs > 1 ? " timing=contended" : "");
    for (const auto& c : cells)
        out << fmt::format("  {:<6} dims={:<14} S={:<8} runs={} feasible={} wall={:.4g}s (sd {:.2g}) "
                           "multiplies={:.4g}\n",
                           c.solver, fmt::format("{}", fmt::join(c.dims, "x")), c.S, c.runs,
                           c.feasible_runs, c.mean_wall_time_s, c.sd_wall_time_s,
                           c.mean_multiplies);
    return kOk;
}

// ---------------------------------------------------------------- show-policy

struct ShowFlags {
    std::string spec;
    std::string policy;
    std::string solver = "cp-vi";
    ConfigFlags config;
};

Policy read_policy(const std::string& path, std::uint64_t num_states) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open {} for reading", path));
    Policy pi(num_states, kNoAction);
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::uint64_t s = 0;
        std::uint64_t a = 0;
        if (!(ls >> s >> a) || s >= num_states)
            throw SpecError(fmt::format("{}:{}: expected 'state action'", path, lineno));
        pi[s] = static_cast<ActionId>(a);
    }
    return pi;
}

char action_glyph(ActionId a, std::size_t rank) {
    if (rank == 1) return a == 0 ? '<' : '>';
    static constexpr char kGlyphs[] = {'^', 'v', '<', '>'};
    return a < 4 ? kGlyphs[a] : '?';
}

std::string action_name(ActionId a) {
    return fmt::format("{}{}", action_direction(a) < 0 ? '-' : '+', action_axis(a));
}

int cmd_show_policy(const ShowFlags& f, std::ostream& out) {
    const auto spec = read_spec_file(f.spec);
    const auto S = spec.shape.num_states();
    Policy pi;
    if (!f.policy.empty()) {
        pi = read_policy(f.policy, S);
    } else {
        const auto run = execute_run(spec, solver_from_flag(f.solver), make_options(f.config));
        if (run.record.infeasible) return kInfeasible;
        pi = run.result->policy;
    }

    auto cell = [&](StateId s) -> char {
        if (spec.is_obstacle(s)) return '#';
        if (auto it = spec.terminals.find(s); it != spec.terminals.end())
            return it->second >= 0 ? '+' : '-';
        return pi[s] == kNoAction ? '.' : action_glyph(pi[s], spec.shape.rank());
    };

    if (spec.shape.rank() <= 2) {
        const auto rows = spec.shape.rank() == 1 ? 1 : spec.shape.extent(0);
        const auto cols = spec.shape.rank() == 1 ? spec.shape.extent(0) : spec.shape.extent(1);
        for (std::uint64_t r = 0; r < rows; ++r) {
            std::string line;
            for (std::uint64_t c = 0; c < cols; ++c) line += cell(r * cols + c);
            out << line << '\n';
        }
        return kOk;
    }
    for (StateId s = 0; s < S; ++s) {
        const auto m = multi_index(s, spec.shape);
        std::string what;
        if (spec.is_obstacle(s))
            what = "obstacle";
        else if (spec.is_terminal(s))
            what = fmt::format("terminal {:.6g}", spec.terminals.at(s));
        else
            what = pi[s] == kNoAction ? "none" : action_name(pi[s]);
        out << fmt::format("{} ({}) {}\n", s, fmt::join(m, ","), what);
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Compressed-transition MDP solver for n-dimensional gridworlds", "cpmdp"};
    app.require_subcommand(1);

    GenSpecFlags gen;
    auto* gen_cmd = app.add_subcommand("gen-spec", "Generate a random gridworld spec file");
    gen_cmd->add_option("--dims", gen.dims, "Extents per axis, e.g. 70,70")
        ->required()
        ->delimiter(',');
    gen_cmd->add_option("--obstacles", gen.obstacles, "Number of obstacles")->capture_default_str();
    gen_cmd->add_option("--terminals", gen.terminals, "Number of terminals")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Placement seed")->capture_default_str();
    gen_cmd->add_option("--noise", gen.noise,
                        "Probability of the intended move (a convention, not a measured value)")
        ->capture_default_str();
    gen_cmd->add_option("--step-reward", gen.step_reward, "Reward of plain cells")
        ->capture_default_str();
    gen_cmd->add_option("--terminal-reward", gen.terminal_reward,
                        "Magnitude of terminal rewards (alternating +/-)")
        ->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output path (stdout when omitted)");

    SolveFlags solve;
    auto* solve_cmd = app.add_subcommand("solve", "Solve a spec and write values/policy files");
    solve_cmd->add_option("--spec", solve.spec, "Spec file")->required();
    solve_cmd->add_option("--solver", solve.solver, "cp-vi | cp-pi | tab-vi | tab-pi")
        ->capture_default_str();
    solve_cmd->add_option("--out-prefix", solve.out_prefix,
                          "Write <prefix>.values and <prefix>.policy");
    solve_cmd->add_option("--dump-components", solve.dump_components,
                          "Write the component model as 's s_next p' lines");
    solve_cmd->add_flag("--solve-only-timing", solve.solve_only,
                        "Exclude model construction from wall_time_s");
    add_config_flags(*solve_cmd, solve.config);

    CompareFlags cmp;
    auto* cmp_cmd = app.add_subcommand("compare", "Solve with two solvers and compare results");
    cmp_cmd->add_option("--spec", cmp.spec, "Spec file")->required();
    cmp_cmd->add_option("--a", cmp.a, "First solver")->capture_default_str();
    cmp_cmd->add_option("--b", cmp.b, "Second solver")->capture_default_str();
    cmp_cmd->add_option("--tolerance", cmp.tolerance,
                        "Max value gap; also the Q-gap above which a policy difference counts")
        ->capture_default_str();
    cmp.config.epsilon = 1e-10;
    add_config_flags(*cmp_cmd, cmp.config);

    BenchFlags bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run the scaled grid-configuration suite");
    bench_cmd->add_option("--scale", bench.scale, "State-count scale in (0, 1]")
        ->capture_default_str();
    bench_cmd->add_option("--solvers", bench.solvers, "Comma-separated solvers")
        ->delimiter(',')
        ->capture_default_str();
    bench_cmd->add_option("--repeats", bench.repeats, "Seeded executions per cell")
        ->capture_default_str();
    bench_cmd->add_option("--dims", bench.dimensions, "Only these dimensionalities (2,3,5,7,9)")
        ->delimiter(',');
    bench_cmd->add_option("--rows", bench.rows, "Only these table rows (1-9)")->delimiter(',');
    bench_cmd->add_option("--out", bench.out, "CSV output path")->capture_default_str();
    bench_cmd->add_option("--summary", bench.summary, "Per-cell mean/sd CSV output path");
    bench_cmd->add_option("--jobs", bench.jobs, "Cells run concurrently (timings contended)")
        ->capture_default_str();
    bench_cmd->add_flag("--solve-only-timing", bench.solve_only,
                        "Exclude model construction from wall_time_s");
    add_config_flags(*bench_cmd, bench.config);

    ShowFlags show;
    auto* show_cmd = app.add_subcommand("show-policy", "Render a policy over the grid");
    show_cmd->add_option("--spec", show.spec, "Spec file")->required();
    show_cmd->add_option("--policy", show.policy, "Policy file (solves with --solver if omitted)");
    show_cmd->add_option("--solver", show.solver, "Solver used when no policy file is given")
        ->capture_default_str();
    add_config_flags(*show_cmd, show.config);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        if (*gen_cmd) return cmd_gen_spec(gen, out, err);
        if (*solve_cmd) return cmd_solve(solve, out, err);
        if (*cmp_cmd) return cmd_compare(cmp, out, err);
        if (*bench_cmd) return cmd_bench(bench, out, err);
        if (*show_cmd) return cmd_show_policy(show, out);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const CapacityError& e) {
        err << "error: " << e.what() << '\n';
        return kInfeasible;
    } catch (const SizingError& e) {
        err << "error: " << e.what() << '\n';
        return kInfeasible;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

}  // namespace cpmdp::cli
