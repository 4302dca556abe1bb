// test_optimize.cpp — Gradient/BFGS/basin-hopping/restart/sweep behavior on
// analytic cost functions with known minima, plus record persistence.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qdb/errors.hpp"
#include "qdb/optimize.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

// Convex quadratic with minimum at `a`.
qdb::CostFunction quadratic(std::vector<double> a) {
    return [a](const std::vector<double>& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - a[i]) * (x[i] - a[i]);
        return s;
    };
}

// Two-basin function in x with a quadratic bowl in y:
// f = (x² − 1)² + 0.2x + y². Global minimum near x ≈ −1.025, local near +0.975.
double double_well(const std::vector<double>& v) {
    const double x = v[0], y = v[1];
    return (x * x - 1.0) * (x * x - 1.0) + 0.2 * x + y * y;
}

double double_well_xmin() {
    // Stationary points: 4x³ − 4x + 0.2 = 0; global minimum is the negative root.
    double x = -1.0;
    for (int i = 0; i < 100; ++i) {
        const double g = 4.0 * x * x * x - 4.0 * x + 0.2;
        const double h = 12.0 * x * x - 4.0;
        x -= g / h;
    }
    return x;
}

double rosenbrock(const std::vector<double>& v) {
    const double x = v[0], y = v[1];
    return 100.0 * (y - x * x) * (y - x * x) + (1.0 - x) * (1.0 - x);
}

} // namespace

// ---- Gradients and BFGS ----

TEST_CASE("forward-difference gradient of a quadratic") {
    const auto f = quadratic({1.0, -2.0, 0.5});
    const std::vector<double> x{0.3, 0.4, 0.5};
    const auto g = qdb::fd_gradient(f, x);
    REQUIRE(g.size() == 3);
    CHECK(std::abs(g[0] - 2.0 * (0.3 - 1.0)) < 1e-4);
    CHECK(std::abs(g[1] - 2.0 * (0.4 + 2.0)) < 1e-4);
    CHECK(std::abs(g[2] - 2.0 * (0.5 - 0.5)) < 1e-4);

    const auto nan_f = [](const std::vector<double>&) {
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS((void)qdb::fd_gradient(nan_f, x), qdb::invariant_error);
}

TEST_CASE("bfgs reaches the quadratic minimum") {
    const auto f = quadratic({1.0, -2.0});
    const auto r = qdb::bfgs_minimize(f, {5.0, 5.0});
    CHECK(r.converged);
    CHECK(std::abs(r.theta[0] - 1.0) < 1e-5);
    CHECK(std::abs(r.theta[1] + 2.0) < 1e-5);
    CHECK(r.value < 1e-10);
    CHECK(r.evaluations > 0);
}

TEST_CASE("bfgs solves the rosenbrock valley") {
    // Forward-difference gradients floor out around 1e-3 on this curved
    // valley, which caps the reachable positional accuracy near 1e-3.
    qdb::BfgsOptions opts;
    opts.max_iter = 2000;
    opts.tol = 1e-9;
    const auto r = qdb::bfgs_minimize(rosenbrock, {-1.2, 1.0}, opts);
    CHECK(std::abs(r.theta[0] - 1.0) < 5e-3);
    CHECK(std::abs(r.theta[1] - 1.0) < 1e-2);
    CHECK(r.value < 1e-5);
}

TEST_CASE("bfgs never returns a value above its starting point") {
    // A rough landscape; whatever happens, f(result) ≤ f(start).
    const auto bumpy = [](const std::vector<double>& v) {
        return std::sin(13.0 * v[0]) + 0.01 * v[0] * v[0] + std::cos(7.0 * v[0] + 1.0);
    };
    for (double x0 : {-3.0, -0.7, 0.2, 2.9}) {
        const auto r = qdb::bfgs_minimize(bumpy, {x0});
        CHECK(r.value <= bumpy({x0}) + 1e-15);
    }
}

// ---- Basin hopping ----

TEST_CASE("basin hopping escapes the wrong well") {
    // Start in the shallow (positive-x) basin; hops must find the global one.
    qdb::BasinHoppingOptions opts;
    opts.n_hops = 25;
    opts.step_scale = 1.0;
    opts.rng_seed = 3;
    const auto record = qdb::basin_hopping(double_well, {1.0, 0.5}, opts);
    const double xg = double_well_xmin();
    CHECK(std::abs(record.theta_opt[0] - xg) < 1e-4);
    CHECK(std::abs(record.theta_opt[1]) < 1e-4);
    CHECK(record.cost < double_well({1.0, 0.0}) - 0.1);

    // Trajectory is non-increasing in cost and increasing in evaluations.
    REQUIRE(!record.cost_trajectory.empty());
    for (std::size_t i = 1; i < record.cost_trajectory.size(); ++i) {
        CHECK(record.cost_trajectory[i].second <= record.cost_trajectory[i - 1].second);
        CHECK(record.cost_trajectory[i].first > record.cost_trajectory[i - 1].first);
    }
    CHECK(record.cost == record.cost_trajectory.back().second);
}

TEST_CASE("basin hopping is deterministic under its seed") {
    qdb::BasinHoppingOptions opts;
    opts.n_hops = 8;
    opts.rng_seed = 11;
    const auto a = qdb::basin_hopping(double_well, {0.2, 0.2}, opts);
    const auto b = qdb::basin_hopping(double_well, {0.2, 0.2}, opts);
    CHECK(a.theta_opt == b.theta_opt);
    CHECK(a.cost == b.cost);
    CHECK(a.cost_trajectory == b.cost_trajectory);
    opts.rng_seed = 12;
    const auto c = qdb::basin_hopping(double_well, {0.2, 0.2}, opts);
    CHECK(a.theta_init == c.theta_init); // the start is the caller's
}

TEST_CASE("basin hopping stops at the target cost") {
    qdb::BasinHoppingOptions opts;
    opts.n_hops = 1000;
    opts.rng_seed = 5;
    opts.target_cost = 1.0; // trivially reached by the first local minimum
    const auto record = qdb::basin_hopping(quadratic({0.0, 0.0}), {3.0, 3.0}, opts);
    CHECK(record.cost <= 1.0);
    // Far fewer evaluations than 1000 hops would need.
    CHECK(record.cost_trajectory.back().first < 2000);
}

TEST_CASE("random initial parameters stay in the small-angle window") {
    const auto theta = qdb::random_initial_theta(64, 9);
    REQUIRE(theta.size() == 64);
    for (double x : theta) {
        CHECK(x >= 0.001);
        CHECK(x <= 0.1);
    }
    CHECK(qdb::random_initial_theta(64, 9) == theta);
    CHECK(qdb::random_initial_theta(64, 10) != theta);
}

// ---- Restarts ----

TEST_CASE("restarts return the best run with a merged trajectory") {
    qdb::RestartOptions opts;
    opts.n_restarts = 4;
    opts.hopping.n_hops = 6;
    opts.hopping.rng_seed = 100;
    const auto record = qdb::optimize_with_restarts(double_well, 2, opts);
    const double xg = double_well_xmin();
    CHECK(std::abs(record.theta_opt[0] - xg) < 1e-4);
    CHECK(record.n_params == 2);
    for (std::size_t i = 1; i < record.cost_trajectory.size(); ++i) {
        CHECK(record.cost_trajectory[i].second <= record.cost_trajectory[i - 1].second);
        CHECK(record.cost_trajectory[i].first > record.cost_trajectory[i - 1].first);
    }
    CHECK(record.cost == record.cost_trajectory.back().second);

    // Deterministic against itself.
    const auto again = qdb::optimize_with_restarts(double_well, 2, opts);
    CHECK(again.cost == record.cost);
    CHECK(again.theta_opt == record.theta_opt);
}

// ---- Warm-start sweep ----

TEST_CASE("parameter transfer pads with zeros and truncates") {
    const std::vector<double> theta{1.0, 2.0, 3.0};
    CHECK(qdb::transfer_parameters(theta, 5) == std::vector<double>{1.0, 2.0, 3.0, 0.0, 0.0});
    CHECK(qdb::transfer_parameters(theta, 2) == std::vector<double>{1.0, 2.0});
    CHECK(qdb::transfer_parameters(theta, 3) == theta);
}

TEST_CASE("warm-start sweep ferries solutions across a coupled grid") {
    // Point i minimizes Σ_{k≤i}(θ_k − a_k)² + b_i over i+1 parameters: each
    // point's optimum is a prefix of its neighbor's, so transfers help and the
    // final costs must hit the known floors b_i.
    const std::vector<double> a{0.7, -0.4, 0.9, 0.2};
    const std::vector<double> b{0.5, 0.4, 0.3, 0.2};
    std::vector<qdb::SweepPoint> grid;
    for (int i = 0; i < 4; ++i) {
        qdb::SweepPoint p;
        p.id = "point-" + std::to_string(i);
        p.n_params = i + 1;
        p.cost = [a, b, i](const std::vector<double>& x) {
            double s = b[static_cast<std::size_t>(i)];
            for (int k = 0; k <= i; ++k)
                s += (x[static_cast<std::size_t>(k)] - a[static_cast<std::size_t>(k)]) *
                     (x[static_cast<std::size_t>(k)] - a[static_cast<std::size_t>(k)]);
            return s;
        };
        grid.push_back(std::move(p));
    }
    qdb::SweepOptions opts;
    opts.n_restarts = 2;
    opts.hopping.n_hops = 4;
    opts.hopping.rng_seed = 7;
    const auto records = qdb::warm_start_sweep(grid, opts);
    REQUIRE(records.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CAPTURE(i);
        CHECK(records[static_cast<std::size_t>(i)].config_id == grid[static_cast<std::size_t>(i)].id);
        CHECK(records[static_cast<std::size_t>(i)].n_params == i + 1);
        CHECK(std::abs(records[static_cast<std::size_t>(i)].cost -
                       b[static_cast<std::size_t>(i)]) < 1e-6);
        for (int k = 0; k <= i; ++k)
            CHECK(std::abs(records[static_cast<std::size_t>(i)].theta_opt[static_cast<std::size_t>(k)] -
                           a[static_cast<std::size_t>(k)]) < 1e-4);
    }
}

TEST_CASE("warm-start sweep never worsens the independent result") {
    // A sweep on unrelated points reduces to independent optimization.
    std::vector<qdb::SweepPoint> grid;
    for (int i = 0; i < 3; ++i) {
        qdb::SweepPoint p;
        p.id = std::to_string(i);
        p.n_params = 2;
        const double shift = 0.5 * i;
        p.cost = [shift](const std::vector<double>& x) {
            return (x[0] - shift) * (x[0] - shift) + x[1] * x[1] + shift;
        };
        grid.push_back(std::move(p));
    }
    qdb::SweepOptions opts;
    opts.n_restarts = 2;
    opts.hopping.n_hops = 3;
    opts.hopping.rng_seed = 19;

    qdb::RestartOptions ind;
    ind.n_restarts = opts.n_restarts;
    ind.hopping = opts.hopping;

    const auto records = qdb::warm_start_sweep(grid, opts);
    for (int i = 0; i < 3; ++i) {
        const double shift = 0.5 * i;
        CHECK(records[static_cast<std::size_t>(i)].cost <= shift + 1e-9);
    }
}

// ---- Persistence ----

TEST_CASE("records round trip through json without wall time") {
    qdb::OptimizationRecord r;
    r.config_id = "demo";
    r.ansatz = "qdb-mps";
    r.n_qubits = 6;
    r.n_params = 3;
    r.n0 = 0.05;
    r.seed = 42;
    r.theta_init = {0.01, 0.02, 0.03};
    r.theta_opt = {1.5, -0.25, 0.0};
    r.cost = -7.25;
    r.cost_trajectory = {{3, -1.0}, {10, -7.25}};
    r.metrics = {{"fidelity", 0.99}};
    r.wall_seconds = 123.0;

    const auto j = qdb::record_to_json(r);
    CHECK_FALSE(j.contains("wall_seconds"));
    const auto back = qdb::record_from_json(j);
    CHECK(back.config_id == r.config_id);
    CHECK(back.ansatz == r.ansatz);
    CHECK(back.n_qubits == r.n_qubits);
    CHECK(back.n_params == r.n_params);
    CHECK(back.n0 == r.n0);
    CHECK(back.seed == r.seed);
    CHECK(back.theta_init == r.theta_init);
    CHECK(back.theta_opt == r.theta_opt);
    CHECK(back.cost == r.cost);
    CHECK(back.cost_trajectory == r.cost_trajectory);
    CHECK(back.metrics == r.metrics);
    CHECK(back.wall_seconds == 0.0);
    CHECK(qdb::record_to_json(back) == j);
}

TEST_CASE("jsonl persistence appends and loads in order") {
    char tmpl[] = "/tmp/qdblab-records-XXXXXX";
    REQUIRE(mkdtemp(tmpl) != nullptr);
    const std::string path = std::string(tmpl) + "/records.jsonl";

    qdb::OptimizationRecord r1;
    r1.config_id = "first";
    r1.n_params = 1;
    r1.theta_init = {0.0};
    r1.theta_opt = {1.0};
    r1.cost = 2.0;
    qdb::OptimizationRecord r2 = r1;
    r2.config_id = "second";
    r2.cost = 1.0;

    qdb::append_record(path, r1);
    qdb::append_record(path, r2);
    const auto loaded = qdb::load_records(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].config_id == "first");
    CHECK(loaded[1].config_id == "second");
    CHECK(loaded[1].cost == 1.0);

    CHECK_THROWS_AS((void)qdb::load_records(std::string(tmpl) + "/missing.jsonl"),
                    std::runtime_error);
}
