#include "cpmdp/bench.hpp"

#include "cpmdp/errors.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

namespace cpmdp {

std::string_view solver_name(SolverKind kind) {
    switch (kind) {
        case SolverKind::CpVi: return "cp-vi";
        case SolverKind::CpPi: return "cp-pi";
        case SolverKind::TabVi: return "tab-vi";
        case SolverKind::TabPi: return "tab-pi";
    }
    return "?";
}

std::optional<SolverKind> parse_solver(std::string_view name) {
    for (auto k : kAllSolvers)
        if (solver_name(k) == name) return k;
    return std::nullopt;
}

bool is_tabular(SolverKind kind) {
    return kind == SolverKind::TabVi || kind == SolverKind::TabPi;
}

std::uint64_t value_buffer_bytes(SolverKind kind, std::uint64_t num_states) {
    constexpr std::uint64_t value = sizeof(double);
    constexpr std::uint64_t action = sizeof(ActionId);
    switch (kind) {
        case SolverKind::CpVi:
        case SolverKind::TabVi:
            // current + next values, policy
            return num_states * (2 * value + action);
        case SolverKind::CpPi:
        case SolverKind::TabPi:
            // evaluation double buffer + backed-up values, current + next policy
            return num_states * (3 * value + 2 * action);
    }
    return 0;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    const std::chrono::duration<double> d = Clock::now() - t0;
    return std::max(d.count(), 1e-9);
}

SolveResult run_solver(SolverKind kind, const Models& models, const TabularModel* tm,
                       const SolverConfig& cfg) {
    switch (kind) {
        case SolverKind::CpVi: return value_iteration(models.components, models.rewards, cfg);
        case SolverKind::CpPi: return policy_iteration(models.components, models.rewards, cfg);
        case SolverKind::TabVi: return tabular_value_iteration(*tm, models.rewards, cfg);
        case SolverKind::TabPi: return tabular_policy_iteration(*tm, models.rewards, cfg);
    }
    throw Error("unknown solver");
}

}  // namespace

RunOutcome execute_run(const GridSpec& spec, SolverKind solver, const RunOptions& options) {
    RunOutcome out;
    auto& rec = out.record;
    rec.solver = std::string(solver_name(solver));
    rec.D = static_cast<std::uint32_t>(spec.shape.rank());
    rec.dims.assign(spec.shape.dims().begin(), spec.shape.dims().end());
    rec.S = spec.shape.num_states();
    rec.A = action_count(spec);
    rec.obstacles = spec.obstacles.size();
    rec.terminals = spec.terminals.size();
    rec.seed = spec.seed;
    rec.noise = spec.noise;
    rec.value_bytes = value_buffer_bytes(solver, rec.S);

    if (is_tabular(solver)) {
        rec.model_components = rec.S * rec.S * rec.A;
        rec.model_bytes = dense_model_bytes(rec.S, rec.A);
        if (rec.model_bytes > options.dense_cap_bytes) {
            rec.infeasible = true;
            return out;
        }
    }

    const auto t0 = Clock::now();
    const auto models = build_models(spec);
    std::optional<TabularModel> tm;
    if (is_tabular(solver)) tm.emplace(to_tabular(models.components, options.dense_cap_bytes));
    const auto t_solve = Clock::now();
    auto result = run_solver(solver, models, tm ? &*tm : nullptr, options.solver);
    rec.wall_time_s = seconds_since(options.solve_only_timing ? t_solve : t0);

    if (!is_tabular(solver)) {
        const auto storage = storage_entries(models.components);
        rec.model_components = storage.components;
        rec.model_bytes = storage.bytes_estimate;
    }
    rec.iterations = result.iterations;
    rec.converged = result.converged;
    rec.multiplies = result.multiplies;
    out.result = std::move(result);
    return out;
}

RunRecord measure_run(const GridSpec& spec, SolverKind solver, const RunOptions& options) {
    return execute_run(spec, solver, options).record;
}

std::vector<std::uint64_t> balanced_dims(std::uint64_t target, std::uint32_t rank) {
    if (rank == 0) throw SizingError("rank must be positive");
    target = std::max<std::uint64_t>(target, 1);
    if (rank == 1) return {std::max<std::uint64_t>(target, 2)};

    const double root = std::pow(static_cast<double>(target), 1.0 / rank);
    const auto lo = std::max<std::uint64_t>(2, static_cast<std::uint64_t>(std::floor(root / 3)));
    const auto hi = std::max<std::uint64_t>(lo, static_cast<std::uint64_t>(std::ceil(root * 3)));
    const double limit = 2.0 * static_cast<double>(target) + 1.0;

    struct Candidate {
        std::vector<std::uint64_t> dims;
        double ratio = 0.0;
        double diff = 0.0;
    };
    std::optional<Candidate> exact, near, closest;
    auto better = [](const std::optional<Candidate>& cur, double ratio, double diff,
                     bool ratio_first) {
        if (!cur) return true;
        if (ratio_first)
            return ratio < cur->ratio || (ratio == cur->ratio && diff < cur->diff);
        return diff < cur->diff || (diff == cur->diff && ratio < cur->ratio);
    };

    std::vector<std::uint64_t> dims(rank);
    auto visit = [&](auto&& self, std::uint32_t k, std::uint64_t from, double prod) -> void {
        if (k == rank) {
            const double diff = std::abs(prod - static_cast<double>(target));
            const double ratio = static_cast<double>(dims.back()) / static_cast<double>(dims.front());
            if (diff == 0.0 && ratio <= 3.0 && better(exact, ratio, diff, true))
                exact = Candidate{dims, ratio, diff};
            if (diff <= 0.02 * static_cast<double>(target) && better(near, ratio, diff, true))
                near = Candidate{dims, ratio, diff};
            if (better(closest, ratio, diff, false)) closest = Candidate{dims, ratio, diff};
            return;
        }
        for (auto side = from; side <= hi; ++side) {
            // remaining extents are >= side
            if (prod * std::pow(static_cast<double>(side), rank - k) > limit) break;
            dims[k] = side;
            self(self, k + 1, side, prod * static_cast<double>(side));
        }
    };
    visit(visit, 0, lo, 1.0);

    if (exact) return exact->dims;
    if (near) return near->dims;
    if (closest) return closest->dims;
    return std::vector<std::uint64_t>(rank, lo);
}

SuiteSpec grid_table_suite(double scale, std::vector<SolverKind> solvers, std::uint32_t repeats,
                       const TableSelection& selection) {
    if (!(scale > 0.0 && scale <= 1.0))
        throw SpecError(fmt::format("scale {} outside (0, 1]", scale));
    if (repeats == 0) throw SpecError("repeat count must be at least 1");
    auto selected = [](const std::vector<std::uint32_t>& set, std::uint32_t v) {
        return set.empty() || std::find(set.begin(), set.end(), v) != set.end();
    };

    SuiteSpec suite;
    suite.repeats = repeats;
    for (std::uint32_t row = 1; row <= kGridTable.size(); ++row) {
        if (!selected(selection.rows, row)) continue;
        const auto& tr = kGridTable[row - 1];
        for (std::size_t col = 0; col < kTableDimensions.size(); ++col) {
            const auto D = kTableDimensions[col];
            if (!selected(selection.dimensions, D)) continue;
            const auto target =
                static_cast<std::uint64_t>(std::llround(static_cast<double>(tr.states[col]) * scale));
            SuiteCell cell;
            cell.row = row;
            cell.shape = GridShape(balanced_dims(target, D));
            const auto S = cell.shape.num_states();
            cell.terminals = std::max<std::uint64_t>(
                1, static_cast<std::uint64_t>(std::llround(static_cast<double>(tr.terminals) * scale)));
            cell.obstacles =
                static_cast<std::uint64_t>(std::llround(static_cast<double>(tr.obstacles) * scale));
            // keep at least one plain state; S >= 4 since every extent is >= 2
            cell.terminals = std::min(cell.terminals, S - 1);
            if (cell.obstacles + cell.terminals >= S) cell.obstacles = S - cell.terminals - 1;
            for (std::uint64_t seed = 1; seed <= repeats; ++seed) cell.seeds.push_back(seed);
            cell.solvers = solvers;
            suite.cells.push_back(std::move(cell));
        }
    }
    return suite;
}

namespace {

std::vector<RunRecord> run_cell(const SuiteCell& cell, const RunOptions& options) {
    std::vector<RunRecord> out;
    for (auto seed : cell.seeds) {
        const auto spec = generate_random_spec(cell.shape, cell.obstacles, cell.terminals, seed);
        for (auto solver : cell.solvers) out.push_back(measure_run(spec, solver, options));
    }
    return out;
}

}  // namespace

std::vector<RunRecord> run_suite(const SuiteSpec& suite, const RunOptions& options,
                                 unsigned jobs) {
    std::vector<std::vector<RunRecord>> per_cell(suite.cells.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < suite.cells.size(); ++i)
            per_cell[i] = run_cell(suite.cells[i], options);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(jobs);
        {
            std::vector<std::jthread> workers;
            for (unsigned w = 0; w < jobs; ++w)
                workers.emplace_back([&, w] {
                    try {
                        for (auto i = next.fetch_add(1); i < suite.cells.size();
                             i = next.fetch_add(1))
                            per_cell[i] = run_cell(suite.cells[i], options);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    std::vector<RunRecord> records;
    for (auto& cell : per_cell)
        for (auto& r : cell) {
            r.contended = jobs > 1;
            records.push_back(std::move(r));
        }
    return records;
}

std::string csv_row(const RunRecord& r) {
    return fmt::format("{},{},{},{},{},{},{},{:.6g},{},{},{:.6g},{},{},{},{},{}", r.solver, r.D,
                       r.S, r.A, r.obstacles, r.terminals, r.seed, r.noise, r.iterations,
                       r.converged ? 1 : 0, r.wall_time_s, r.multiplies, r.model_components,
                       r.model_bytes, r.value_bytes, r.infeasible ? 1 : 0);
}

void write_csv(const std::vector<RunRecord>& records, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const auto& r : records) out << csv_row(r) << '\n';
}

void emit_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
    write_csv(records, out);
    out.flush();
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

std::vector<CellSummary> aggregate(const std::vector<RunRecord>& records) {
    using Key = std::tuple<std::string, std::vector<std::uint64_t>, std::uint64_t, std::uint64_t>;
    std::map<Key, std::size_t> index;
    std::vector<CellSummary> cells;
    std::vector<std::vector<const RunRecord*>> members;
    for (const auto& r : records) {
        Key key{r.solver, r.dims, r.obstacles, r.terminals};
        auto [it, inserted] = index.emplace(key, cells.size());
        if (inserted) {
            CellSummary c;
            c.solver = r.solver;
            c.dims = r.dims;
            c.S = r.S;
            c.obstacles = r.obstacles;
            c.terminals = r.terminals;
            cells.push_back(std::move(c));
            members.emplace_back();
        }
        members[it->second].push_back(&r);
    }

    auto mean_sd = [](const std::vector<double>& xs) -> std::pair<double, double> {
        if (xs.empty()) return {0.0, 0.0};
        double mean = 0.0;
        for (auto x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        if (xs.size() < 2) return {mean, 0.0};
        double ss = 0.0;
        for (auto x : xs) ss += (x - mean) * (x - mean);
        return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
    };

    for (std::size_t i = 0; i < cells.size(); ++i) {
        auto& c = cells[i];
        std::vector<double> wall, mults, iters, bytes;
        for (const auto* r : members[i]) {
            ++c.runs;
            bytes.push_back(static_cast<double>(r->model_bytes));
            if (r->infeasible) continue;
            ++c.feasible_runs;
            wall.push_back(r->wall_time_s);
            mults.push_back(static_cast<double>(r->multiplies));
            iters.push_back(static_cast<double>(r->iterations));
        }
        std::tie(c.mean_wall_time_s, c.sd_wall_time_s) = mean_sd(wall);
        std::tie(c.mean_multiplies, c.sd_multiplies) = mean_sd(mults);
        c.mean_iterations = mean_sd(iters).first;
        c.mean_model_bytes = mean_sd(bytes).first;
    }
    return cells;
}

void write_summary_csv(const std::vector<CellSummary>& cells, std::ostream& out) {
    out << "solver,dims,S,obstacles,terminals,runs,feasible_runs,mean_wall_time_s,"
           "sd_wall_time_s,mean_multiplies,sd_multiplies,mean_iterations,mean_model_bytes\n";
    for (const auto& c : cells)
        out << fmt::format("{},{},{},{},{},{},{},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g}\n",
                           c.solver, fmt::join(c.dims, "x"), c.S, c.obstacles, c.terminals,
                           c.runs, c.feasible_runs, c.mean_wall_time_s, c.sd_wall_time_s,
                           c.mean_multiplies, c.sd_multiplies, c.mean_iterations,
                           c.mean_model_bytes);
}

}  // namespace cpmdp
