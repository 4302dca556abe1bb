// kernels.hpp — Dense local-operator application on tensor-product state data.
//
// The hot path of every simulation here is "apply an m×m operator to a chosen
// subset of tensor factors of a big vector (or density matrix)". These kernels
// do that with stride arithmetic instead of building the 2^N·d-dimensional
// embedded matrix. A serial reference implementation is kept alongside the
// OpenMP variant; the two are equality-tested and compared by kernel_bench.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <vector>

namespace qdb::kernels {

using Cx = std::complex<double>;

// Strides for a mixed-radix index, dims given slowest-varying first
// (so stride[last] = 1, matching "qubit 1 slowest, boson fastest").
std::vector<std::ptrdiff_t> factor_strides(const std::vector<int>& dims);

// Total dimension of the factor list.
std::size_t total_dim(const std::vector<int>& dims);

// In-place ψ ← (op on targets) ψ.
//   dims:    per-factor dimensions, slowest first.
//   targets: factor indices op acts on; targets[0] is the slowest local digit
//            of op's own index space. Target order defines op's basis order.
// op must be m×m with m = Π dims[targets].
void apply_local_serial(Cx* psi, const std::vector<int>& dims,
                        const Eigen::MatrixXcd& op, const std::vector<int>& targets);
void apply_local_parallel(Cx* psi, const std::vector<int>& dims,
                          const Eigen::MatrixXcd& op, const std::vector<int>& targets);
// Dispatch: parallel when OpenMP is available and the slice count is large
// enough to amortize thread startup; serial otherwise.
void apply_local(Cx* psi, const std::vector<int>& dims,
                 const Eigen::MatrixXcd& op, const std::vector<int>& targets);

// In-place ψ ← diag(phases, on targets) ψ — the middle step of eigenbasis
// application U = V diag(e^{-iθλ}) V† when forming U densely would be wasteful.
void scale_local_serial(Cx* psi, const std::vector<int>& dims,
                        const Eigen::VectorXcd& phases, const std::vector<int>& targets);
void scale_local_parallel(Cx* psi, const std::vector<int>& dims,
                          const Eigen::VectorXcd& phases, const std::vector<int>& targets);
void scale_local(Cx* psi, const std::vector<int>& dims,
                 const Eigen::VectorXcd& phases, const std::vector<int>& targets);

// ρ ← (U on targets) ρ (U on targets)†, ρ a dense dim×dim matrix over the same
// factor list. Implemented as two multi-column passes via the vector kernels.
void conjugate_local_serial(Eigen::MatrixXcd& rho, const std::vector<int>& dims,
                            const Eigen::MatrixXcd& U, const std::vector<int>& targets);
void conjugate_local_parallel(Eigen::MatrixXcd& rho, const std::vector<int>& dims,
                              const Eigen::MatrixXcd& U, const std::vector<int>& targets);
void conjugate_local(Eigen::MatrixXcd& rho, const std::vector<int>& dims,
                     const Eigen::MatrixXcd& U, const std::vector<int>& targets);

// ⟨ψ| (op on targets) |ψ⟩ without materializing op ψ as a persistent copy.
// Serial accumulation (deterministic summation order).
Cx expectation_local(const Cx* psi, const std::vector<int>& dims,
                     const Eigen::MatrixXcd& op, const std::vector<int>& targets);

} // namespace qdb::kernels
