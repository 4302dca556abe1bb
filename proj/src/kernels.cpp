// kernels.cpp — Stride-arithmetic local-operator application (serial + OpenMP).

#include "qdb/kernels.hpp"

#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qdb::kernels {

namespace {

// Precomputed geometry of one (dims, targets) application.
struct Plan {
    std::size_t m = 1;                           // local dimension
    std::size_t n_outer = 1;                     // number of untouched slices
    std::vector<std::ptrdiff_t> local_offsets;   // m offsets into ψ
    std::vector<int> outer_radix;                // dims of untouched factors
    std::vector<std::ptrdiff_t> outer_strides;   // matching strides
};

Plan make_plan(const std::vector<int>& dims, const std::vector<int>& targets) {
    const auto strides = factor_strides(dims);
    std::vector<bool> is_target(dims.size(), false);
    for (int t : targets) {
        if (t < 0 || t >= static_cast<int>(dims.size()))
            throw std::invalid_argument("kernels: target factor index out of range");
        if (is_target[t]) throw std::invalid_argument("kernels: duplicate target factor");
        is_target[t] = true;
    }

    Plan p;
    for (int t : targets) p.m *= static_cast<std::size_t>(dims[t]);

    // Local offsets: decompose k with targets[0] as the slowest local digit.
    p.local_offsets.resize(p.m);
    for (std::size_t k = 0; k < p.m; ++k) {
        std::size_t rest = k;
        std::ptrdiff_t off = 0;
        for (std::size_t ti = targets.size(); ti-- > 0;) {
            const int t = targets[ti];
            off += static_cast<std::ptrdiff_t>(rest % dims[t]) * strides[t];
            rest /= static_cast<std::size_t>(dims[t]);
        }
        p.local_offsets[k] = off;
    }

    for (std::size_t f = 0; f < dims.size(); ++f) {
        if (!is_target[f]) {
            p.outer_radix.push_back(dims[f]);
            p.outer_strides.push_back(strides[f]);
            p.n_outer *= static_cast<std::size_t>(dims[f]);
        }
    }
    return p;
}

inline std::ptrdiff_t outer_base(const Plan& p, std::size_t c) {
    std::ptrdiff_t base = 0;
    for (std::size_t i = p.outer_radix.size(); i-- > 0;) {
        base += static_cast<std::ptrdiff_t>(c % p.outer_radix[i]) * p.outer_strides[i];
        c /= static_cast<std::size_t>(p.outer_radix[i]);
    }
    return base;
}

// One gathered slice: y = op·x, scattered back.
inline void apply_slice(Cx* psi, std::ptrdiff_t base, const Plan& p,
                        const Cx* op, Cx* x, Cx* y) {
    const std::size_t m = p.m;
    for (std::size_t k = 0; k < m; ++k) x[k] = psi[base + p.local_offsets[k]];
    for (std::size_t i = 0; i < m; ++i) y[i] = Cx(0.0, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const Cx xj = x[j];
        if (xj == Cx(0.0, 0.0)) continue;
        const Cx* col = op + j * m;   // column-major
        for (std::size_t i = 0; i < m; ++i) y[i] += col[i] * xj;
    }
    for (std::size_t k = 0; k < m; ++k) psi[base + p.local_offsets[k]] = y[k];
}

void check_op(const Eigen::MatrixXcd& op, std::size_t m) {
    if (op.rows() != static_cast<Eigen::Index>(m) || op.cols() != static_cast<Eigen::Index>(m))
        throw std::invalid_argument("kernels: operator dimension does not match target factors");
}

} // namespace

std::vector<std::ptrdiff_t> factor_strides(const std::vector<int>& dims) {
    std::vector<std::ptrdiff_t> strides(dims.size(), 1);
    for (std::size_t f = dims.size() - 1; f-- > 0;)
        strides[f] = strides[f + 1] * dims[f + 1];
    return strides;
}

std::size_t total_dim(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return n;
}

void apply_local_serial(Cx* psi, const std::vector<int>& dims,
                        const Eigen::MatrixXcd& op, const std::vector<int>& targets) {
    const Plan p = make_plan(dims, targets);
    check_op(op, p.m);
    std::vector<Cx> x(p.m), y(p.m);
    const Cx* opd = op.data();

    // Odometer over the untouched factors: cheaper than division per slice.
    std::vector<int> digits(p.outer_radix.size(), 0);
    std::ptrdiff_t base = 0;
    for (std::size_t c = 0; c < p.n_outer; ++c) {
        apply_slice(psi, base, p, opd, x.data(), y.data());
        for (std::size_t i = digits.size(); i-- > 0;) {
            base += p.outer_strides[i];
            if (++digits[i] < p.outer_radix[i]) break;
            base -= p.outer_radix[i] * p.outer_strides[i];
            digits[i] = 0;
        }
    }
}

void apply_local_parallel(Cx* psi, const std::vector<int>& dims,
                          const Eigen::MatrixXcd& op, const std::vector<int>& targets) {
    const Plan p = make_plan(dims, targets);
    check_op(op, p.m);
    const Cx* opd = op.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(p.n_outer);
#ifdef _OPENMP
#pragma omp parallel
    {
        std::vector<Cx> x(p.m), y(p.m);
#pragma omp for schedule(static)
        for (std::ptrdiff_t c = 0; c < n; ++c)
            apply_slice(psi, outer_base(p, static_cast<std::size_t>(c)), p, opd, x.data(), y.data());
    }
#else
    std::vector<Cx> x(p.m), y(p.m);
    for (std::ptrdiff_t c = 0; c < n; ++c)
        apply_slice(psi, outer_base(p, static_cast<std::size_t>(c)), p, opd, x.data(), y.data());
#endif
}

void apply_local(Cx* psi, const std::vector<int>& dims,
                 const Eigen::MatrixXcd& op, const std::vector<int>& targets) {
#ifdef _OPENMP
    // Thread startup only pays off on big slice counts.
    std::size_t n = total_dim(dims);
    if (n >= (1u << 14) && omp_get_max_threads() > 1) {
        apply_local_parallel(psi, dims, op, targets);
        return;
    }
#endif
    apply_local_serial(psi, dims, op, targets);
}

void scale_local_serial(Cx* psi, const std::vector<int>& dims,
                        const Eigen::VectorXcd& phases, const std::vector<int>& targets) {
    const Plan p = make_plan(dims, targets);
    if (phases.size() != static_cast<Eigen::Index>(p.m))
        throw std::invalid_argument("kernels: phase vector dimension mismatch");
    std::vector<int> digits(p.outer_radix.size(), 0);
    std::ptrdiff_t base = 0;
    for (std::size_t c = 0; c < p.n_outer; ++c) {
        for (std::size_t k = 0; k < p.m; ++k) psi[base + p.local_offsets[k]] *= phases[k];
        for (std::size_t i = digits.size(); i-- > 0;) {
            base += p.outer_strides[i];
            if (++digits[i] < p.outer_radix[i]) break;
            base -= p.outer_radix[i] * p.outer_strides[i];
            digits[i] = 0;
        }
    }
}

void scale_local_parallel(Cx* psi, const std::vector<int>& dims,
                          const Eigen::VectorXcd& phases, const std::vector<int>& targets) {
    const Plan p = make_plan(dims, targets);
    if (phases.size() != static_cast<Eigen::Index>(p.m))
        throw std::invalid_argument("kernels: phase vector dimension mismatch");
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(p.n_outer);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t c = 0; c < n; ++c) {
        const std::ptrdiff_t base = outer_base(p, static_cast<std::size_t>(c));
        for (std::size_t k = 0; k < p.m; ++k) psi[base + p.local_offsets[k]] *= phases[k];
    }
}

void scale_local(Cx* psi, const std::vector<int>& dims,
                 const Eigen::VectorXcd& phases, const std::vector<int>& targets) {
#ifdef _OPENMP
    if (total_dim(dims) >= (1u << 14) && omp_get_max_threads() > 1) {
        scale_local_parallel(psi, dims, phases, targets);
        return;
    }
#endif
    scale_local_serial(psi, dims, phases, targets);
}

namespace {

// ρ ← U ρ U† as two multi-column passes: ρ ← Uρ, then ρ ← (Uρ†)† via in-place
// adjoints. Columns of a column-major matrix are contiguous, so each column is
// a valid ψ for the vector kernels.
template <typename ColumnApply>
void conjugate_impl(Eigen::MatrixXcd& rho, ColumnApply&& pass) {
    pass(rho);
    rho.adjointInPlace();
    pass(rho);
    rho.adjointInPlace();
}

} // namespace

void conjugate_local_serial(Eigen::MatrixXcd& rho, const std::vector<int>& dims,
                            const Eigen::MatrixXcd& U, const std::vector<int>& targets) {
    const std::size_t n = total_dim(dims);
    if (rho.rows() != static_cast<Eigen::Index>(n) || rho.cols() != static_cast<Eigen::Index>(n))
        throw std::invalid_argument("kernels: density matrix dimension mismatch");
    conjugate_impl(rho, [&](Eigen::MatrixXcd& r) {
        for (Eigen::Index j = 0; j < r.cols(); ++j)
            apply_local_serial(r.col(j).data(), dims, U, targets);
    });
}

void conjugate_local_parallel(Eigen::MatrixXcd& rho, const std::vector<int>& dims,
                              const Eigen::MatrixXcd& U, const std::vector<int>& targets) {
    const std::size_t n = total_dim(dims);
    if (rho.rows() != static_cast<Eigen::Index>(n) || rho.cols() != static_cast<Eigen::Index>(n))
        throw std::invalid_argument("kernels: density matrix dimension mismatch");
    conjugate_impl(rho, [&](Eigen::MatrixXcd& r) {
        const Eigen::Index cols = r.cols();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (Eigen::Index j = 0; j < cols; ++j)
            apply_local_serial(r.col(j).data(), dims, U, targets);
    });
}

void conjugate_local(Eigen::MatrixXcd& rho, const std::vector<int>& dims,
                     const Eigen::MatrixXcd& U, const std::vector<int>& targets) {
#ifdef _OPENMP
    if (total_dim(dims) >= (1u << 8) && omp_get_max_threads() > 1) {
        conjugate_local_parallel(rho, dims, U, targets);
        return;
    }
#endif
    conjugate_local_serial(rho, dims, U, targets);
}

Cx expectation_local(const Cx* psi, const std::vector<int>& dims,
                     const Eigen::MatrixXcd& op, const std::vector<int>& targets) {
    const Plan p = make_plan(dims, targets);
    check_op(op, p.m);
    const Cx* opd = op.data();
    std::vector<Cx> x(p.m), y(p.m);
    Cx acc(0.0, 0.0);

    std::vector<int> digits(p.outer_radix.size(), 0);
    std::ptrdiff_t base = 0;
    for (std::size_t c = 0; c < p.n_outer; ++c) {
        for (std::size_t k = 0; k < p.m; ++k) x[k] = psi[base + p.local_offsets[k]];
        for (std::size_t i = 0; i < p.m; ++i) y[i] = Cx(0.0, 0.0);
        for (std::size_t j = 0; j < p.m; ++j) {
            const Cx xj = x[j];
            if (xj == Cx(0.0, 0.0)) continue;
            const Cx* col = opd + j * p.m;
            for (std::size_t i = 0; i < p.m; ++i) y[i] += col[i] * xj;
        }
        for (std::size_t k = 0; k < p.m; ++k) acc += std::conj(x[k]) * y[k];
        for (std::size_t i = digits.size(); i-- > 0;) {
            base += p.outer_strides[i];
            if (++digits[i] < p.outer_radix[i]) break;
            base -= p.outer_radix[i] * p.outer_strides[i];
            digits[i] = 0;
        }
    }
    return acc;
}

} // namespace qdb::kernels
