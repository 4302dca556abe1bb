// hilbert.hpp — Composite spin-boson Hilbert spaces, operators, states, and
// the tensor plumbing (products, embedding, partial trace, initial states).
//
// Canonical ordering, used everywhere: qubit 1 is the slowest index, the boson
// is the fastest. Sites are addressed as 1..N for qubits and kBosonSite (= 0)
// for the bus mode.

#pragma once

#include "qdb/errors.hpp"

#include <Eigen/Dense>

#include <complex>
#include <utility>
#include <vector>

namespace qdb {

using Cx = std::complex<double>;

inline constexpr int kBosonSite = 0;

// ---------------------------------- Spaces ----------------------------------

struct SpinBosonSpace {
    int n_qubits = 0;     // N ≥ 0 (0 = boson-only space)
    int fock_cutoff = 0;  // d ≥ 0; boson levels 0..d−1; 0 = qubit-only space

    bool has_boson() const { return fock_cutoff > 0; }
    int n_factors() const { return n_qubits + (has_boson() ? 1 : 0); }
    long long dim() const;
    // Factor dimensions, slowest first: [2, 2, ..., 2, d].
    std::vector<int> factor_dims() const;
    // Factor index of a site (qubit j → j−1; boson → n_qubits).
    int factor_of_site(int site) const;

    friend bool operator==(const SpinBosonSpace&, const SpinBosonSpace&) = default;
};

SpinBosonSpace validated(const SpinBosonSpace& space);

// Fock cutoff rule: d = q_tail + ⌊N/2⌋ + 1, where q_tail is the smallest q
// with thermal tail mass r^q < 1e−10, r = n0/(1+n0). The ⌊N/2⌋ headroom makes
// bus truncation exact for the sideband circuits (N ion interactions can raise
// the occupation by at most ⌊N/2⌋ above the initial level).
int default_fock_cutoff(int n_qubits, double n0);

// --------------------------------- Operators --------------------------------

struct LinearOperator {
    SpinBosonSpace space;
    Eigen::MatrixXcd matrix;
    bool hermitian = false;
    bool real_in_canonical_basis = false;

    // Verifies the claimed flags (‖A−A†‖_max ≤ 1e−12, max|Im A| ≤ 1e−12).
    static LinearOperator make(SpinBosonSpace space, Eigen::MatrixXcd matrix,
                               bool hermitian, bool real_in_canonical_basis);
};

// ---------------------------------- States ----------------------------------

struct PureState {
    SpinBosonSpace space;
    Eigen::VectorXcd vector;

    // Verifies |‖ψ‖ − 1| ≤ 1e−12.
    static PureState make(SpinBosonSpace space, Eigen::VectorXcd vector);
};

struct DensityMatrix {
    SpinBosonSpace space;
    Eigen::MatrixXcd matrix;

    // Verifies Hermiticity (1e−12), unit trace (1e−10), min eigenvalue ≥ −1e−10.
    static DensityMatrix make(SpinBosonSpace space, Eigen::MatrixXcd matrix);
    // For values whose invariants are guaranteed by construction upstream
    // (hot paths); still shape-checked.
    static DensityMatrix make_unchecked(SpinBosonSpace space, Eigen::MatrixXcd matrix);
};

// ------------------------------ Tensor products ------------------------------

// Kronecker products under the canonical ordering. To keep "boson fastest"
// global, only the right operand may carry a boson factor.
LinearOperator tensor_product(const LinearOperator& A, const LinearOperator& B);
PureState tensor_product(const PureState& a, const PureState& b);
DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b);

// local_op ⊗ identity elsewhere, permuted into the global ordering. `sites`
// lists the factors local_op acts on (1..N qubits, kBosonSite for the boson),
// slowest local digit first; its order defines local_op's own basis order.
LinearOperator embed(const Eigen::MatrixXcd& local_op, const std::vector<int>& sites,
                     const SpinBosonSpace& space, bool hermitian = false,
                     bool real_in_canonical_basis = false);

// Reduced density matrix after discarding the listed sites. Kept qubits are
// renumbered consecutively in their original order.
DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& discard);

// ------------------------------ Initial states ------------------------------

struct ThermalState {
    DensityMatrix rho;        // boson-only space, renormalized after truncation
    double truncation_weight; // discarded tail mass r^d
};

// p_q ∝ (n0/(1+n0))^q on levels 0..d−1, renormalized; n0 = 0 gives |0⟩⟨0|.
ThermalState thermal_state(double n0, int d);

// Néel product state |↓↑↓↑…⟩ on a qubit-only space.
PureState neel_state(int n_qubits);

// Truncated lowering operator, ⟨q−1|a|q⟩ = √q (boson-only space).
LinearOperator destruction_operator(int d);

// ------------------------- Small building-block matrices --------------------
// Qubit basis order is {|↑⟩, |↓⟩}, so σ^z = diag(1, −1).

Eigen::MatrixXcd pauli_x();
Eigen::MatrixXcd pauli_y();
Eigen::MatrixXcd pauli_z();
Eigen::MatrixXcd pauli(char axis);       // 'x' | 'y' | 'z'
Eigen::MatrixXcd sigma_plus();           // |↑⟩⟨↓|
Eigen::MatrixXcd sigma_minus();          // |↓⟩⟨↑|
Eigen::MatrixXcd identity_matrix(int n);
Eigen::MatrixXcd fock_lowering(int d);   // bare matrix behind destruction_operator

} // namespace qdb
