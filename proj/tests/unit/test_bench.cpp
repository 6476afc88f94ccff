#include "cpmdp/bench.hpp"
#include "cpmdp/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace cpmdp;

namespace {

GridSpec chain() {
    GridSpec spec;
    spec.shape = GridShape({2});
    spec.noise = 1.0;
    spec.terminals[1] = 100.0;
    return spec;
}

std::string without_wall_time(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::stringstream ls(line);
        for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
        fields.erase(fields.begin() + 10);
        for (const auto& f : fields) out += f + ",";
        out += "\n";
    }
    return out;
}

}  // namespace

TEST(SolverNames, RoundTrip) {
    for (auto k : kAllSolvers) EXPECT_EQ(parse_solver(solver_name(k)), k);
    EXPECT_FALSE(parse_solver("vi").has_value());
    EXPECT_TRUE(is_tabular(SolverKind::TabPi));
    EXPECT_FALSE(is_tabular(SolverKind::CpVi));
}

TEST(BalancedDims, TableShapes) {
    EXPECT_EQ(balanced_dims(4'900, 2), (std::vector<std::uint64_t>{70, 70}));
    EXPECT_EQ(balanced_dims(8'000, 3), (std::vector<std::uint64_t>{20, 20, 20}));
    EXPECT_EQ(balanced_dims(3'125, 5), (std::vector<std::uint64_t>(5, 5)));
    EXPECT_EQ(balanced_dims(823'543, 7), (std::vector<std::uint64_t>(7, 7)));
    EXPECT_EQ(balanced_dims(17, 1), (std::vector<std::uint64_t>{17}));
    for (std::uint32_t rank : {2u, 3u, 5u, 7u, 9u}) {
        for (std::uint64_t target : {600ull, 2'048ull, 9'216ull, 12'500ull}) {
            const auto dims = balanced_dims(target, rank);
            ASSERT_EQ(dims.size(), rank);
            std::uint64_t prod = 1;
            for (auto d : dims) {
                EXPECT_GE(d, 2u);
                prod *= d;
            }
            EXPECT_LE(std::abs(static_cast<double>(prod) - static_cast<double>(target)),
                      0.25 * static_cast<double>(target))
                << rank << " " << target;
        }
    }
}

TEST(GridTableSuite, FullScaleCells) {
    const auto suite = grid_table_suite(1.0, {SolverKind::CpVi}, 6, {{2, 3}, {1, 2}});
    ASSERT_EQ(suite.cells.size(), 4u);
    const auto& c = suite.cells[0];
    EXPECT_EQ(c.row, 1u);
    EXPECT_EQ(c.shape, GridShape({70, 70}));
    EXPECT_EQ(c.terminals, 6u);
    EXPECT_EQ(c.obstacles, 50u);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6}));
    const auto& d3 = suite.cells[3];
    EXPECT_EQ(d3.row, 2u);
    EXPECT_EQ(d3.shape.num_states(), 8'000u);
    EXPECT_EQ(d3.terminals, 8u);
    EXPECT_EQ(d3.obstacles, 100u);
}

TEST(GridTableSuite, TinyScaleStaysFeasible) {
    const auto suite = grid_table_suite(0.001);
    EXPECT_EQ(suite.cells.size(), 45u);
    for (const auto& c : suite.cells) {
        EXPECT_GE(c.terminals, 1u);
        EXPECT_LT(c.obstacles + c.terminals, c.shape.num_states());
        EXPECT_NO_THROW(generate_random_spec(c.shape, c.obstacles, c.terminals, 1));
    }
    EXPECT_THROW(grid_table_suite(0.0), SpecError);
    EXPECT_THROW(grid_table_suite(1.5), SpecError);
    EXPECT_THROW(grid_table_suite(0.5, {SolverKind::CpVi}, 0), SpecError);
}

TEST(MeasureRun, Chain) {
    const auto rec = measure_run(chain(), SolverKind::CpVi, {});
    EXPECT_EQ(rec.solver, "cp-vi");
    EXPECT_EQ(rec.S, 2u);
    EXPECT_EQ(rec.A, 2u);
    EXPECT_TRUE(rec.converged);
    EXPECT_FALSE(rec.infeasible);
    EXPECT_GT(rec.multiplies, 0u);
    EXPECT_GT(rec.wall_time_s, 0.0);
    EXPECT_EQ(rec.model_components, 4u);
    EXPECT_EQ(rec.value_bytes, 2u * 20u);
}

TEST(MeasureRun, DeterministicExceptTime) {
    const auto spec = generate_random_spec(GridShape({9, 9}), 5, 2, 4);
    for (auto k : kAllSolvers) {
        auto a = measure_run(spec, k, {});
        auto b = measure_run(spec, k, {});
        a.wall_time_s = b.wall_time_s = 0.0;
        EXPECT_EQ(csv_row(a), csv_row(b));
    }
}

TEST(MeasureRun, InfeasibleDenseModel) {
    GridSpec spec;
    spec.shape = GridShape({100, 100});
    spec.terminals[0] = 100.0;
    RunOptions opts;
    opts.dense_cap_bytes = 1 << 20;
    const auto out = execute_run(spec, SolverKind::TabVi, opts);
    EXPECT_TRUE(out.record.infeasible);
    EXPECT_FALSE(out.result.has_value());
    EXPECT_EQ(out.record.model_bytes, 10'000ull * 10'000ull * 4ull * 8ull);
    EXPECT_EQ(out.record.multiplies, 0u);
    EXPECT_FALSE(measure_run(spec, SolverKind::CpVi, opts).infeasible);
}

TEST(Csv, HeaderAndRows) {
    std::ostringstream empty;
    write_csv({}, empty);
    EXPECT_EQ(empty.str(), std::string(kCsvHeader) + "\n");

    const auto spec = generate_random_spec(GridShape({5, 5}), 2, 1, 3);
    std::vector<RunRecord> recs{measure_run(spec, SolverKind::CpVi, {}),
                                measure_run(spec, SolverKind::TabPi, {})};
    std::ostringstream out;
    write_csv(recs, out);
    const auto text = out.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) EXPECT_EQ(std::count(line.begin(), line.end(), ','), 15);

    std::ostringstream again;
    write_csv(recs, again);
    EXPECT_EQ(again.str(), text);
}

TEST(Csv, EmitFailsOnBadPath) {
    EXPECT_THROW(emit_csv({}, "/nonexistent/dir/out.csv"), IoError);
}

TEST(Aggregate, MeanAndSampleDeviation) {
    std::vector<RunRecord> recs(3);
    const double times[] = {1.0, 2.0, 4.0};
    for (int i = 0; i < 3; ++i) {
        recs[i].solver = "cp-vi";
        recs[i].dims = {4, 4};
        recs[i].S = 16;
        recs[i].wall_time_s = times[i];
        recs[i].multiplies = 10 * (i + 1);
        recs[i].iterations = 5;
    }
    RunRecord other = recs[0];
    other.solver = "tab-vi";
    other.infeasible = true;
    recs.push_back(other);

    const auto cells = aggregate(recs);
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_EQ(cells[0].runs, 3u);
    EXPECT_DOUBLE_EQ(cells[0].mean_wall_time_s, 7.0 / 3.0);
    EXPECT_NEAR(cells[0].sd_wall_time_s, std::sqrt(7.0 / 3.0), 1e-12);
    EXPECT_DOUBLE_EQ(cells[0].mean_multiplies, 20.0);
    EXPECT_DOUBLE_EQ(cells[0].sd_multiplies, 10.0);
    EXPECT_EQ(cells[1].runs, 1u);
    EXPECT_EQ(cells[1].feasible_runs, 0u);

    std::ostringstream out;
    write_summary_csv(cells, out);
    EXPECT_NE(out.str().find("cp-vi,4x4,16,"), std::string::npos);
}

TEST(RunSuite, RepeatableAndOrdered) {
    const auto suite = grid_table_suite(0.002, {SolverKind::CpVi, SolverKind::CpPi}, 2, {{2, 3}, {1}});
    const auto a = run_suite(suite, {});
    const auto b = run_suite(suite, {}, 2);
    ASSERT_EQ(a.size(), 2u * 2u * 2u);
    std::ostringstream ca, cb;
    write_csv(a, ca);
    write_csv(b, cb);
    EXPECT_EQ(without_wall_time(ca.str()), without_wall_time(cb.str()));
    for (const auto& r : b) EXPECT_TRUE(r.contended);
    for (const auto& r : a) EXPECT_FALSE(r.contended);
}

// Least-squares slope of log(multiplies) against log(S) over open 2-D grids.
TEST(Scaling, ComponentWorkLinearDenseQuadratic) {
    std::vector<double> xs, cp, dense;
    for (std::uint64_t side : {10, 20, 40, 80}) {
        GridSpec spec;
        spec.shape = GridShape({side, side});
        spec.terminals[0] = 100.0;
        const auto m = build_models(spec);
        SolverConfig cfg;
        cfg.max_iter = 1;
        const auto r = value_iteration(m.components, m.rewards, cfg);
        const double S = static_cast<double>(side * side);
        xs.push_back(std::log(S));
        cp.push_back(std::log(static_cast<double>(r.multiplies)));
        // dense work is S per (plain state, action) and needs no matrix to count
        dense.push_back(std::log(2.0 * (S - 1) * 4.0 * S));
    }
    auto slope = [&](const std::vector<double>& ys) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
        mx /= xs.size();
        my /= ys.size();
        double num = 0, den = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            num += (xs[i] - mx) * (ys[i] - my);
            den += (xs[i] - mx) * (xs[i] - mx);
        }
        return num / den;
    };
    EXPECT_NEAR(slope(cp), 1.0, 0.05);
    EXPECT_NEAR(slope(dense), 2.0, 0.05);
}
