// optimize.cpp — Hand-rolled BFGS (inverse-Hessian form, Armijo backtracking)
// under a basin-hopping outer loop, plus the grid sweep. Everything is
// deterministic under fixed seeds: perturbations and Metropolis draws are the
// only randomness, both from one per-run mt19937_64.

#include "qdb/optimize.hpp"

#include "qdb/errors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

namespace qdb {

namespace {

double checked_eval(const CostFunction& f, const std::vector<double>& theta,
                    const char* who) {
    const double value = f(theta);
    if (!std::isfinite(value))
        throw invariant_error(std::string(who) + ": cost returned a non-finite value");
    return value;
}

std::vector<double> to_std(const Eigen::VectorXd& x) {
    return std::vector<double>(x.data(), x.data() + x.size());
}

} // namespace

std::vector<double> fd_gradient(const CostFunction& f, const std::vector<double>& theta,
                                double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("fd_gradient: delta must be positive");
    const double f0 = checked_eval(f, theta, "fd_gradient");
    std::vector<double> gradient(theta.size());
    std::vector<double> probe = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + delta;
        gradient[i] = (checked_eval(f, probe, "fd_gradient") - f0) / delta;
        probe[i] = theta[i];
    }
    return gradient;
}

// ---------------------------------- BFGS -------------------------------------

BfgsResult bfgs_minimize(const CostFunction& f, const std::vector<double>& theta0,
                         const BfgsOptions& options) {
    const int n = static_cast<int>(theta0.size());
    if (n == 0) throw std::invalid_argument("bfgs_minimize: empty parameter vector");
    if (!(options.fd_delta > 0.0))
        throw std::invalid_argument("bfgs_minimize: fd_delta must be positive");

    long long evals = 0;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++evals;
        return checked_eval(f, to_std(x), "bfgs_minimize");
    };
    auto grad = [&](const Eigen::VectorXd& x, double fx) {
        Eigen::VectorXd g(n);
        Eigen::VectorXd probe = x;
        for (int i = 0; i < n; ++i) {
            probe(i) = x(i) + options.fd_delta;
            g(i) = (eval(probe) - fx) / options.fd_delta;
            probe(i) = x(i);
        }
        return g;
    };

    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(theta0.data(), n);
    double fx = eval(x);
    Eigen::VectorXd g = grad(x, fx);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);

    BfgsResult result;
    result.theta = theta0;
    result.value = fx;

    int it = 0;
    for (; it < options.max_iter; ++it) {
        if (g.lpNorm<Eigen::Infinity>() <= options.tol) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd p = -(H * g);
        double gp = g.dot(p);
        if (!(gp < 0.0)) { // lost positive-definiteness: restart on steepest descent
            H.setIdentity();
            p = -g;
            gp = g.dot(p);
            if (!(gp < 0.0)) break; // zero gradient direction
        }
        double alpha = 1.0;
        double fnew = 0.0;
        bool found = false;
        for (int bt = 0; bt < 40; ++bt) {
            fnew = eval(x + alpha * p);
            if (fnew <= fx + 1e-4 * alpha * gp) {
                found = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!found) {
            result.line_search_ok = false;
            break;
        }
        const Eigen::VectorXd xnew = x + alpha * p;
        const Eigen::VectorXd gnew = grad(xnew, fnew);
        const Eigen::VectorXd s = xnew - x;
        const Eigen::VectorXd y = gnew - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd A =
                Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
            H = A * H * A.transpose() + rho * s * s.transpose();
        } else {
            H.setIdentity(); // curvature breakdown (FD noise floor)
        }
        x = xnew;
        fx = fnew;
        g = gnew;
        if (fx < result.value) {
            result.value = fx;
            result.theta = to_std(x);
        }
    }
    result.iterations = it;
    result.evaluations = evals;
    return result;
}

// ------------------------------ Basin hopping --------------------------------

OptimizationRecord basin_hopping(const CostFunction& f, const std::vector<double>& theta0,
                                 const BasinHoppingOptions& options) {
    if (options.n_hops < 1)
        throw std::invalid_argument("basin_hopping: n_hops must be >= 1");
    if (theta0.empty())
        throw std::invalid_argument("basin_hopping: empty parameter vector");

    long long evals = 0;
    auto counted = [&](const std::vector<double>& v) {
        ++evals;
        return f(v);
    };

    OptimizationRecord record;
    record.n_params = static_cast<int>(theta0.size());
    record.seed = options.rng_seed;
    record.theta_init = theta0;

    BfgsResult current = bfgs_minimize(counted, theta0, options.bfgs);
    record.theta_opt = current.theta;
    record.cost = current.value;
    record.cost_trajectory.emplace_back(evals, record.cost);

    std::mt19937_64 rng(options.rng_seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    for (int hop = 1; hop < options.n_hops; ++hop) {
        if (record.cost <= options.target_cost) break;
        std::vector<double> start = current.theta;
        for (double& v : start) v += options.step_scale * unit(rng);
        const BfgsResult trial = bfgs_minimize(counted, start, options.bfgs);
        const double temperature = options.accept_temperature > 0.0
                                       ? options.accept_temperature
                                       : std::max(0.1 * std::abs(record.cost), 1e-3);
        const bool accept =
            trial.value < current.value ||
            coin(rng) < std::exp(-(trial.value - current.value) / temperature);
        if (accept) current = trial;
        if (trial.value < record.cost) {
            record.cost = trial.value;
            record.theta_opt = trial.theta;
        }
        record.cost_trajectory.emplace_back(evals, record.cost);
    }
    return record;
}

std::vector<double> random_initial_theta(int n_params, unsigned long long seed) {
    if (n_params < 1)
        throw std::invalid_argument("random_initial_theta: n_params must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> draw(0.001, 0.1);
    std::vector<double> theta(static_cast<std::size_t>(n_params));
    for (double& v : theta) v = draw(rng);
    return theta;
}

OptimizationRecord optimize_with_restarts(const CostFunction& f, int n_params,
                                          const RestartOptions& options) {
    if (options.n_restarts < 1)
        throw std::invalid_argument("optimize_with_restarts: n_restarts must be >= 1");
    OptimizationRecord best;
    bool have_best = false;
    long long total_evals = 0;
    std::vector<std::pair<long long, double>> merged;
    for (int r = 0; r < options.n_restarts; ++r) {
        const unsigned long long seed_r = options.hopping.rng_seed + static_cast<unsigned>(r);
        BasinHoppingOptions hop = options.hopping;
        hop.rng_seed = seed_r;
        const std::vector<double> theta0 = random_initial_theta(n_params, seed_r);
        OptimizationRecord rec = basin_hopping(f, theta0, hop);
        for (const auto& [e, c] : rec.cost_trajectory) {
            const double best_so_far =
                merged.empty() ? c : std::min(c, merged.back().second);
            merged.emplace_back(total_evals + e, best_so_far);
        }
        if (!rec.cost_trajectory.empty()) total_evals += rec.cost_trajectory.back().first;
        if (!have_best || rec.cost < best.cost) {
            best = std::move(rec);
            have_best = true;
        }
        if (best.cost <= options.hopping.target_cost) break;
    }
    best.cost_trajectory = std::move(merged);
    best.seed = options.hopping.rng_seed;
    return best;
}

// ----------------------------- Warm-start sweep ------------------------------

std::vector<double> transfer_parameters(const std::vector<double>& theta, int target_n) {
    if (target_n < 1)
        throw std::invalid_argument("transfer_parameters: target size must be >= 1");
    std::vector<double> out = theta;
    out.resize(static_cast<std::size_t>(target_n), 0.0);
    return out;
}

std::vector<OptimizationRecord> warm_start_sweep(const std::vector<SweepPoint>& grid,
                                                 const SweepOptions& options) {
    const int n = static_cast<int>(grid.size());
    for (const SweepPoint& point : grid) {
        if (!point.cost)
            throw std::invalid_argument("warm_start_sweep: every point needs a cost");
        if (point.n_params < 1)
            throw std::invalid_argument("warm_start_sweep: every point needs parameters");
    }
    std::vector<OptimizationRecord> records(static_cast<std::size_t>(n));
    std::vector<long long> evals(static_cast<std::size_t>(n), 0);

    for (int i = 0; i < n; ++i) {
        RestartOptions ro;
        ro.n_restarts = options.n_restarts;
        ro.hopping = options.hopping;
        ro.hopping.rng_seed =
            options.hopping.rng_seed + 7919ULL * static_cast<unsigned long long>(i);
        records[static_cast<std::size_t>(i)] =
            optimize_with_restarts(grid[static_cast<std::size_t>(i)].cost,
                                   grid[static_cast<std::size_t>(i)].n_params, ro);
        records[static_cast<std::size_t>(i)].config_id = grid[static_cast<std::size_t>(i)].id;
        if (!records[static_cast<std::size_t>(i)].cost_trajectory.empty())
            evals[static_cast<std::size_t>(i)] =
                records[static_cast<std::size_t>(i)].cost_trajectory.back().first;
    }

    // Ferry neighbors' optima until a full forward+backward round stalls.
    auto try_transfer = [&](int from, int to) -> double {
        auto& rec = records[static_cast<std::size_t>(to)];
        const std::vector<double> theta0 =
            transfer_parameters(records[static_cast<std::size_t>(from)].theta_opt,
                                grid[static_cast<std::size_t>(to)].n_params);
        auto counted = [&](const std::vector<double>& v) {
            ++evals[static_cast<std::size_t>(to)];
            return grid[static_cast<std::size_t>(to)].cost(v);
        };
        const BfgsResult r = bfgs_minimize(counted, theta0, options.hopping.bfgs);
        if (r.value < rec.cost) {
            const double improvement = rec.cost - r.value;
            rec.cost = r.value;
            rec.theta_opt = r.theta;
            rec.cost_trajectory.emplace_back(evals[static_cast<std::size_t>(to)], r.value);
            return improvement;
        }
        return 0.0;
    };

    for (int round = 0; round < options.max_rounds && n > 1; ++round) {
        double max_improvement = 0.0;
        for (int i = 1; i < n; ++i)
            max_improvement = std::max(max_improvement, try_transfer(i - 1, i));
        for (int i = n - 2; i >= 0; --i)
            max_improvement = std::max(max_improvement, try_transfer(i + 1, i));
        if (max_improvement <= options.improvement_tol) break;
    }
    return records;
}

// ------------------------------- Persistence ---------------------------------

nlohmann::json record_to_json(const OptimizationRecord& record) {
    nlohmann::json j;
    j["config_id"] = record.config_id;
    j["ansatz"] = record.ansatz;
    j["n_qubits"] = record.n_qubits;
    j["n_params"] = record.n_params;
    j["n0"] = record.n0;
    j["seed"] = record.seed;
    j["theta_init"] = record.theta_init;
    j["theta_opt"] = record.theta_opt;
    j["cost"] = record.cost;
    nlohmann::json trajectory = nlohmann::json::array();
    for (const auto& [e, c] : record.cost_trajectory)
        trajectory.push_back(nlohmann::json::array({e, c}));
    j["cost_trajectory"] = trajectory;
    j["metrics"] = record.metrics;
    return j;
}

OptimizationRecord record_from_json(const nlohmann::json& j) {
    OptimizationRecord record;
    record.config_id = j.value("config_id", std::string{});
    record.ansatz = j.value("ansatz", std::string{});
    record.n_qubits = j.value("n_qubits", 0);
    record.n_params = j.value("n_params", 0);
    record.n0 = j.value("n0", 0.0);
    record.seed = j.value("seed", 0ULL);
    record.theta_init = j.value("theta_init", std::vector<double>{});
    record.theta_opt = j.value("theta_opt", std::vector<double>{});
    record.cost = j.value("cost", 0.0);
    if (j.contains("cost_trajectory"))
        for (const auto& entry : j.at("cost_trajectory"))
            record.cost_trajectory.emplace_back(entry.at(0).get<long long>(),
                                                entry.at(1).get<double>());
    record.metrics = j.value("metrics", nlohmann::json::object());
    return record;
}

void append_record(const std::string& path, const OptimizationRecord& record) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("append_record: cannot open " + path);
    out << record_to_json(record).dump() << "\n";
}

std::vector<OptimizationRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_records: cannot open " + path);
    std::vector<OptimizationRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(nlohmann::json::parse(line)));
    }
    return records;
}

} // namespace qdb
