// hamiltonians.hpp — Resource and target generators in pulse-area units
// (ηΩ = 1 for the sideband, (ηΩ)²/δ = 1 for MS, J0 = 1 for XY unless overridden).

#pragma once

#include "qdb/hilbert.hpp"

#include <vector>

namespace qdb {

// ------------------------------- GeneratorSpec -------------------------------

// Symbolic description of one variational generator; the engine compiles these
// into cached eigendecompositions. BusReset is the modular hand-off pseudo-op:
// trace the bus, adjoin a fresh thermal bus (it carries no parameter).
struct GeneratorSpec {
    enum class Kind { BlueSideband, MSGate, XY, ZRotation, BusReset };

    Kind kind = Kind::BlueSideband;
    int site = 0;                // BlueSideband / ZRotation
    std::vector<int> sites;      // MSGate site set (≥ 2 sites)
    double alpha = 1.34;         // XY power-law exponent
    double J0 = 1.0;             // XY coupling scale
    double B = 20.0;             // XY uniform field
    double rate_unit = 1.0;      // ηΩ or the respective prefactor

    friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

// Minimal-support form of a generator: the dense matrix on just the factors it
// touches, plus the site list (kernel-ready).
struct LocalGenerator {
    Eigen::MatrixXcd matrix;
    std::vector<int> sites;  // 1..N qubits, kBosonSite for the bus
};

// ------------------------------- Constructors -------------------------------

// Anti-Jaynes-Cummings blue sideband H_j = i(aσ_j^− − a†σ_j^+):
// Hermitian, purely imaginary, ⟨↑_j,l+1|H_j|↓_j,l⟩ = −i√(l+1).
LinearOperator blue_sideband(int j, const SpinBosonSpace& space);

// Mølmer–Sørensen H_MS = Σ_{i<j∈S} σ_i^x σ_j^x (real symmetric).
LinearOperator ms_coupling(const std::vector<int>& S, const SpinBosonSpace& space);

// H_XY = Σ_{i<j} (J_ij/2)(σ^xσ^x + σ^yσ^y) + B Σ σ^z, J_ij = J0·|i−j|^{−α}.
LinearOperator xy_hamiltonian(int N, double alpha, double J0, double B,
                              const SpinBosonSpace& space);

// H_SSH = Σ_j (1−(−1)^j t)(σ_j^xσ_{j+1}^x + σ_j^yσ_{j+1}^y) + B̃(σ_1^z − σ_N^z),
// open boundary, j = 1..N−1 (odd bonds strong for t > 0).
LinearOperator ssh_hamiltonian(int N, double t, double B_tilde, const SpinBosonSpace& space);

// σ_j^z (generator of exp(−iθσ_j^z)).
LinearOperator z_rotation_generator(int j, const SpinBosonSpace& space);

// Extended magnetization Z = ½Σ_j σ_j^z − a†a; commutes with every sideband.
LinearOperator extended_magnetization(const SpinBosonSpace& space);

// Magnetization M = ½Σ_j σ_j^z.
LinearOperator magnetization(const SpinBosonSpace& space);

// ------------------------------ Engine interface -----------------------------

// Minimal-support matrix for a spec (BusReset has none and is rejected here).
LocalGenerator local_generator(const GeneratorSpec& spec, const SpinBosonSpace& space);

// Full-space embedding of local_generator (audit/test convenience).
LinearOperator build_generator(const GeneratorSpec& spec, const SpinBosonSpace& space);

// H_SSH split into its local terms (bond terms and boundary fields), for
// expectation evaluation that never builds the 2^N-dimensional matrix.
std::vector<LocalGenerator> ssh_terms(int N, double t, double B_tilde);

} // namespace qdb
