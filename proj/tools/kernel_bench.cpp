// kernel_bench.cpp — Times the serial reference kernels against the OpenMP
// variants on representative state sizes and verifies that both produce the
// same output. Table goes to stdout; exit is nonzero if any pair disagrees
// beyond 1e-12.

#include "qdb/kernels.hpp"

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <complex>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

namespace {

using qdb::kernels::Cx;

std::vector<Cx> random_state(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Cx> psi(n);
    double norm2 = 0.0;
    for (Cx& a : psi) {
        a = Cx(g(rng), g(rng));
        norm2 += std::norm(a);
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (Cx& a : psi) a *= inv;
    return psi;
}

Eigen::MatrixXcd random_unitary(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXcd A(m, m);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) A(r, c) = Cx(g(rng), g(rng));
    const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(A);
    return qr.householderQ() * Eigen::MatrixXcd::Identity(m, m);
}

double max_abs_diff(const std::vector<Cx>& a, const std::vector<Cx>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

template <typename F>
double time_reps(int reps, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) body();
    const std::chrono::duration<double, std::milli> dt =
        std::chrono::steady_clock::now() - t0;
    return dt.count() / reps;
}

struct Row {
    std::string label;
    std::size_t dim;
    int reps;
    double serial_ms;
    double parallel_ms;
    double diff;
};

} // namespace

int main(int argc, char** argv) {
    int min_qubits = 10;
    int max_qubits = 18;
    int boson_dim = 5;
    int reps = 20;
    unsigned long long seed = 1;

    CLI::App app{"Serial vs OpenMP local-operator kernel benchmark"};
    app.add_option("--min-qubits", min_qubits, "smallest register size");
    app.add_option("--max-qubits", max_qubits, "largest register size");
    app.add_option("--boson-dim", boson_dim, "attached oscillator dimension");
    app.add_option("--reps", reps, "repetitions per measurement");
    app.add_option("--seed", seed, "RNG seed");
    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads: %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled at build time (parallel variants run serially)\n");
#endif

    std::mt19937_64 rng(seed);
    std::vector<Row> rows;
    double worst_diff = 0.0;

    for (int n = min_qubits; n <= max_qubits; n += 2) {
        std::vector<int> dims(static_cast<std::size_t>(n), 2);
        dims.push_back(boson_dim);
        const std::size_t dim = qdb::kernels::total_dim(dims);
        const std::vector<Cx> psi0 = random_state(dim, rng);

        // Two-qubit operator in the middle of the register.
        {
            const Eigen::MatrixXcd op = random_unitary(4, rng);
            const std::vector<int> targets = {n / 2 - 1, n / 2};
            std::vector<Cx> a = psi0, b = psi0;
            const double ts = time_reps(reps, [&] {
                qdb::kernels::apply_local_serial(a.data(), dims, op, targets);
            });
            const double tp = time_reps(reps, [&] {
                qdb::kernels::apply_local_parallel(b.data(), dims, op, targets);
            });
            const double diff = max_abs_diff(a, b);
            worst_diff = std::max(worst_diff, diff);
            rows.push_back({"apply 4x4 mid", dim, reps, ts, tp, diff});
        }

        // Qubit–oscillator operator (the sideband shape: slow qubit, fast boson).
        {
            const Eigen::MatrixXcd op = random_unitary(2 * boson_dim, rng);
            const std::vector<int> targets = {0, n};
            std::vector<Cx> a = psi0, b = psi0;
            const double ts = time_reps(reps, [&] {
                qdb::kernels::apply_local_serial(a.data(), dims, op, targets);
            });
            const double tp = time_reps(reps, [&] {
                qdb::kernels::apply_local_parallel(b.data(), dims, op, targets);
            });
            const double diff = max_abs_diff(a, b);
            worst_diff = std::max(worst_diff, diff);
            rows.push_back({"apply 2dx2d edge", dim, reps, ts, tp, diff});
        }

        // Diagonal phase application on the same pair.
        {
            Eigen::VectorXcd phases(2 * boson_dim);
            std::uniform_real_distribution<double> u(-3.14, 3.14);
            for (int i = 0; i < phases.size(); ++i)
                phases(i) = std::polar(1.0, u(rng));
            const std::vector<int> targets = {0, n};
            std::vector<Cx> a = psi0, b = psi0;
            const double ts = time_reps(reps, [&] {
                qdb::kernels::scale_local_serial(a.data(), dims, phases, targets);
            });
            const double tp = time_reps(reps, [&] {
                qdb::kernels::scale_local_parallel(b.data(), dims, phases, targets);
            });
            const double diff = max_abs_diff(a, b);
            worst_diff = std::max(worst_diff, diff);
            rows.push_back({"scale 2d edge", dim, reps, ts, tp, diff});
        }
    }

    // Density-matrix conjugation at a fixed modest size.
    {
        const int n = std::min(max_qubits, 10);
        std::vector<int> dims(static_cast<std::size_t>(n), 2);
        const std::size_t dim = qdb::kernels::total_dim(dims);
        const std::vector<Cx> v = random_state(dim * dim, rng);
        Eigen::MatrixXcd rho(dim, dim);
        for (std::size_t c = 0; c < dim; ++c)
            for (std::size_t r = 0; r < dim; ++r)
                rho(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    v[c * dim + r];
        const Eigen::MatrixXcd op = random_unitary(4, rng);
        const std::vector<int> targets = {n / 2 - 1, n / 2};
        Eigen::MatrixXcd a = rho, b = rho;
        const int conj_reps = std::max(1, reps / 4);
        const double ts = time_reps(conj_reps, [&] {
            qdb::kernels::conjugate_local_serial(a, dims, op, targets);
        });
        const double tp = time_reps(conj_reps, [&] {
            qdb::kernels::conjugate_local_parallel(b, dims, op, targets);
        });
        const double diff = (a - b).cwiseAbs().maxCoeff();
        worst_diff = std::max(worst_diff, diff);
        rows.push_back({"conjugate 4x4", dim * dim, conj_reps, ts, tp, diff});
    }

    std::printf("%-18s %12s %6s %12s %12s %9s %10s\n", "kernel", "elements", "reps",
                "serial ms", "parallel ms", "speedup", "max diff");
    for (const Row& r : rows)
        std::printf("%-18s %12zu %6d %12.4f %12.4f %9.2f %10.2e\n", r.label.c_str(), r.dim,
                    r.reps, r.serial_ms, r.parallel_ms,
                    r.parallel_ms > 0.0 ? r.serial_ms / r.parallel_ms : 0.0, r.diff);

    if (worst_diff > 1e-12) {
        std::printf("DISAGREEMENT: max serial/parallel deviation %.3e exceeds 1e-12\n",
                    worst_diff);
        return 1;
    }
    std::printf("serial and parallel kernels agree (max deviation %.3e)\n", worst_diff);
    return 0;
}
