#pragma once

#include "cpmdp/gridworld.hpp"
#include "cpmdp/solvers.hpp"
#include "cpmdp/transition.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cpmdp {

enum class SolverKind { CpVi, CpPi, TabVi, TabPi };

inline constexpr std::array kAllSolvers{SolverKind::CpVi, SolverKind::CpPi, SolverKind::TabVi,
                                        SolverKind::TabPi};

std::string_view solver_name(SolverKind kind);
/// "cp-vi", "cp-pi", "tab-vi", "tab-pi".
std::optional<SolverKind> parse_solver(std::string_view name);
bool is_tabular(SolverKind kind);

struct RunOptions {
    SolverConfig solver;
    std::uint64_t dense_cap_bytes = kDefaultDenseCapBytes;
    /// Exclude model construction from wall_time_s.
    bool solve_only_timing = false;
};

struct RunRecord {
    std::string solver;
    std::uint32_t D = 0;
    std::vector<std::uint64_t> dims;
    std::uint64_t S = 0;
    std::uint32_t A = 0;
    std::uint64_t obstacles = 0;
    std::uint64_t terminals = 0;
    std::uint64_t seed = 0;
    double noise = 0.0;
    std::uint64_t iterations = 0;
    bool converged = false;
    double wall_time_s = 0.0;
    std::uint64_t multiplies = 0;
    std::uint64_t model_components = 0;
    std::uint64_t model_bytes = 0;
    std::uint64_t value_bytes = 0;
    bool infeasible = false;
    /// Timed while other cells ran concurrently.
    bool contended = false;
};

/// Bytes of value/policy buffers a solver keeps alive at its peak.
std::uint64_t value_buffer_bytes(SolverKind kind, std::uint64_t num_states);

struct RunOutcome {
    RunRecord record;
    /// Empty for infeasible runs.
    std::optional<SolveResult> result;
};

/**
 * Builds the model and solves one spec, timing the whole run. A tabular
 * solver whose dense model exceeds the cap yields a record flagged
 * infeasible instead of throwing.
 */
RunOutcome execute_run(const GridSpec& spec, SolverKind solver, const RunOptions& options);

RunRecord measure_run(const GridSpec& spec, SolverKind solver, const RunOptions& options);

/// One row of the reference grid-configuration table.
struct TableRow {
    std::uint64_t terminals;
    std::uint64_t obstacles;
    std::array<std::uint64_t, 5> states;  // for D = 2, 3, 5, 7, 9
};

inline constexpr std::array<std::uint32_t, 5> kTableDimensions{2, 3, 5, 7, 9};

inline constexpr std::array<TableRow, 9> kGridTable{{
    {6, 50, {4'900, 4'000, 3'125, 2'048, 3'888}},
    {8, 100, {10'000, 8'000, 7'000, 5'184, 5'832}},
    {10, 200, {14'400, 12'500, 10'000, 9'216, 8'748}},
    {12, 300, {19'600, 18'750, 12'500, 10'368, 9'216}},
    {14, 400, {22'500, 24'000, 19'200, 18'432, 17'496}},
    {16, 500, {90'000, 60'000, 100'000, 78'125, 82'944}},
    {18, 600, {250'000, 125'000, 200'000, 233'280, 196'008}},
    {20, 700, {640'000, 512'000, 600'000, 605'052, 491'520}},
    {22, 800, {1'000'000, 1'000'000, 1'200'000, 823'543, 1'000'000}},
}};

/**
 * Near-equal extents for `rank` axes whose product approximates `target`.
 * Prefers an exact factorization with max/min extent ratio <= 3, then the most
 * balanced shape within 2% of the target, then the closest product. Every
 * extent is at least 2.
 */
std::vector<std::uint64_t> balanced_dims(std::uint64_t target, std::uint32_t rank);

struct SuiteCell {
    std::uint32_t row = 0;  // 1-based table row
    GridShape shape;
    std::uint64_t obstacles = 0;
    std::uint64_t terminals = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<SolverKind> solvers;
};

struct SuiteSpec {
    std::vector<SuiteCell> cells;
    /// Seeded executions per cell.
    std::uint32_t repeats = 6;
};

/// Restricts grid_table_suite to some dimensionalities and/or rows (empty = all).
struct TableSelection {
    std::vector<std::uint32_t> dimensions;
    std::vector<std::uint32_t> rows;
};

/**
 * The reference grid families with state counts scaled by `scale` in (0, 1]
 * and obstacle/terminal counts scaled proportionally (at least one terminal,
 * always leaving plain states). Seeds are 1..repeats.
 */
SuiteSpec grid_table_suite(double scale, std::vector<SolverKind> solvers = {SolverKind::CpVi},
                       std::uint32_t repeats = 6, const TableSelection& selection = {});

/// Runs every (cell, seed, solver) in order. With jobs > 1 cells run on
/// separate workers and their records are marked contended.
std::vector<RunRecord> run_suite(const SuiteSpec& suite, const RunOptions& options,
                                 unsigned jobs = 1);

inline constexpr std::string_view kCsvHeader =
    "solver,D,S,A,obstacles,terminals,seed,noise,iterations,converged,wall_time_s,"
    "multiplies,model_components,model_bytes,value_bytes,infeasible";

std::string csv_row(const RunRecord& r);
void write_csv(const std::vector<RunRecord>& records, std::ostream& out);
/// Throws IoError with the path on failure.
void emit_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path);

struct CellSummary {
    std::string solver;
    std::vector<std::uint64_t> dims;
    std::uint64_t S = 0;
    std::uint64_t obstacles = 0;
    std::uint64_t terminals = 0;
    std::uint64_t runs = 0;
    std::uint64_t feasible_runs = 0;
    double mean_wall_time_s = 0.0;
    double sd_wall_time_s = 0.0;
    double mean_multiplies = 0.0;
    double sd_multiplies = 0.0;
    double mean_iterations = 0.0;
    double mean_model_bytes = 0.0;
};

/// Mean and sample standard deviation per (solver, shape, counts) over seeds,
/// in first-appearance order. Infeasible runs only count toward `runs`.
std::vector<CellSummary> aggregate(const std::vector<RunRecord>& records);

void write_summary_csv(const std::vector<CellSummary>& cells, std::ostream& out);

}  // namespace cpmdp
