// optimize.hpp — Cost-minimization stack: forward-difference gradients, BFGS
// local minimization, basin-hopping global stepping with Metropolis accepts,
// uniform-random restarts, and a warm-start sweep that ferries optimized
// parameters between neighboring grid points until no point improves.

#pragma once

#include <json.hpp>

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace qdb {

using CostFunction = std::function<double(const std::vector<double>&)>;

// Forward-difference gradient: one extra evaluation per coordinate. Throws on
// non-finite cost values.
std::vector<double> fd_gradient(const CostFunction& f, const std::vector<double>& theta,
                                double delta = 1e-6);

// ---------------------------------- BFGS -------------------------------------

struct BfgsOptions {
    double tol = 1e-8;      // ∞-norm of the FD gradient at which to stop
    int max_iter = 500;
    double fd_delta = 1e-6;
};

struct BfgsResult {
    std::vector<double> theta;
    double value = 0.0;
    int iterations = 0;
    long long evaluations = 0;
    bool converged = false;      // gradient criterion met
    bool line_search_ok = true;  // false: backtracking failed, best iterate returned
};

// Quasi-Newton descent with inverse-Hessian updates and Armijo backtracking.
// Guarantees value ≤ f(theta0).
BfgsResult bfgs_minimize(const CostFunction& f, const std::vector<double>& theta0,
                         const BfgsOptions& options = {});

// ------------------------------ Basin hopping --------------------------------

struct BasinHoppingOptions {
    int n_hops = 30;          // total local minimizations (1 = plain BFGS)
    double step_scale = 0.3;  // uniform perturbation half-width per coordinate
    // Metropolis temperature; ≤ 0 selects the adaptive 0.1·|best| (floor 1e−3).
    double accept_temperature = 0.0;
    unsigned long long rng_seed = 1;
    // Stop hopping early once the best cost reaches this value.
    double target_cost = -std::numeric_limits<double>::infinity();
    BfgsOptions bfgs{};
};

struct OptimizationRecord {
    std::string config_id;
    std::string ansatz;
    int n_qubits = 0;
    int n_params = 0;
    double n0 = 0.0;
    unsigned long long seed = 0;
    std::vector<double> theta_init;
    std::vector<double> theta_opt;
    double cost = 0.0;
    // (cumulative evaluation count, best-so-far cost) — non-increasing costs.
    std::vector<std::pair<long long, double>> cost_trajectory;
    nlohmann::json metrics = nlohmann::json::object(); // filled by the caller
    double wall_seconds = 0.0; // reporting only — never serialized
};

// Perturb → BFGS → Metropolis accept, n_hops times; deterministic under the
// seed; returns the best-ever iterate.
OptimizationRecord basin_hopping(const CostFunction& f, const std::vector<double>& theta0,
                                 const BasinHoppingOptions& options = {});

// Initial parameters drawn uniformly from [0.001, 0.1].
std::vector<double> random_initial_theta(int n_params, unsigned long long seed);

struct RestartOptions {
    int n_restarts = 5;
    BasinHoppingOptions hopping{};
};

// Independent basin-hopping runs from fresh random initial points (seeds
// seed, seed+1, …); returns the best record with a merged trajectory.
OptimizationRecord optimize_with_restarts(const CostFunction& f, int n_params,
                                          const RestartOptions& options = {});

// ----------------------------- Warm-start sweep ------------------------------

// Zero-fill when growing, prefix-truncate when shrinking (matches the
// append-only parameter-slot numbering of the chain ansätze).
std::vector<double> transfer_parameters(const std::vector<double>& theta, int target_n);

struct SweepPoint {
    std::string id;
    int n_params = 0;
    CostFunction cost;
};

struct SweepOptions {
    double improvement_tol = 1e-9; // stop when a full round improves no point more
    int max_rounds = 20;
    int n_restarts = 5;
    BasinHoppingOptions hopping{};
};

// Independent per-point optimization, then forward+backward passes that seed
// each point with its neighbor's optimum (via transfer_parameters) and keep
// any strict improvement. Each point's final cost never exceeds its
// independent-restart result.
std::vector<OptimizationRecord> warm_start_sweep(const std::vector<SweepPoint>& grid,
                                                 const SweepOptions& options = {});

// ------------------------------- Persistence ---------------------------------

// JSON round-trip; wall_seconds is deliberately excluded so identical
// configurations persist byte-identical records.
nlohmann::json record_to_json(const OptimizationRecord& record);
OptimizationRecord record_from_json(const nlohmann::json& j);

// JSON-lines persistence, append-only (resumable sweeps).
void append_record(const std::string& path, const OptimizationRecord& record);
std::vector<OptimizationRecord> load_records(const std::string& path);

} // namespace qdb
