// analysis.hpp — Figures of merit and theoretical audits: correlation error,
// relative excitation energy, fidelity and its spectral lower bound, purity
// bound, Schmidt/bond-dimension profiles, conserved-charge and realness
// audits, Lie-algebra closure dimensions, thermal-error decomposition, and
// the boson–qubit mutual-information disentanglement witness.

#pragma once

#include "qdb/engine.hpp"
#include "qdb/reference.hpp"

#include <json.hpp>

#include <vector>

namespace qdb {

// ------------------------------ Scalar metrics -------------------------------

// Σ_{i<j}|C_ref − C| / Σ_{i<j}|C_ref|. Throws when the reference vanishes.
double f_err(const Eigen::MatrixXd& C, const Eigen::MatrixXd& C_ref);

// ε = (⟨H⟩ − E0)/Δ. Throws on a degenerate gap; enforces ε ≥ −1e−10.
double relative_excitation_energy(double energy, const GroundTruth& gt);

// F = ⟨ψ_targ|ρ|ψ_targ⟩ ∈ [0, 1+1e−10].
double fidelity(const DensityMatrix& rho, const PureState& psi_targ);

// F ≥ (E1 − ⟨H⟩)/(E1 − E0); may be ≤ 0 (vacuous). Throws on degenerate gap.
double fidelity_lower_bound(double energy, double E0, double E1);

// Tr[ρ²] ≥ F² chain: the squared (clamped) fidelity bound.
double purity_lower_bound(double fidelity_bound);

// ------------------------------ Schmidt profile ------------------------------

// Renormalized qubit state after projecting the boson onto a Fock level;
// throws on a zero-probability outcome. `probability` receives the outcome
// weight when non-null.
PureState project_boson(const PureState& composite, int level,
                        double* probability = nullptr);

struct SchmidtProfile {
    std::vector<int> ranks;             // D_n at cuts n = 1..N−1 (threshold 1e−10)
    int max_rank = 1;                   // D_M
    std::vector<int> structured_bounds; // circuit-geometry bound per cut (incl. ×2 slack)
    std::vector<int> generic_bounds;    // 2^min(n, N−n)
    bool within_structured = true;
    bool within_generic = true;
};

// Schmidt rank of every left/right bipartition of a pure qubit state, checked
// against the box-width-l circuit bound min(2·min(L_n, R_n), 2^min(n, N−n))
// with L_n = (⌊n/2⌋+1)·2^{l−1} (and R_n its mirror).
SchmidtProfile schmidt_profile(const PureState& psi, int l);

// ------------------------------ Symmetry audit -------------------------------

struct SymmetryAudit {
    AnsatzFamily family{};
    int n_draws = 0;
    // Conserved charge: extended magnetization Z (bus families), spin parity
    // Πσ^z (dispersive family), magnetization M (collective family).
    double max_charge_commutator = 0.0;
    bool charge_conserved = false; // ≤ 1e−10
    // Purely-imaginary generators make every U(θ) real special orthogonal.
    bool realness_applicable = false;
    double max_imag_unitary = 0.0;
    double max_orthogonality_defect = 0.0; // ‖U·Uᵀ − I‖_max
    double max_det_deviation = 0.0;        // |det U − 1|
    bool real_orthogonal_special = false;
    bool pass = false;
};

// Exercises the family's generator set on `space` with random angle draws:
// charge commutators at the generator level, realness/orthogonality/
// determinant on the product unitary. Works for N as small as 2.
SymmetryAudit symmetry_audit(AnsatzFamily family, const SpinBosonSpace& space,
                             int n_draws = 20, unsigned long long seed = 1);

// ------------------------------- Lie closure ---------------------------------

// Effective sector hop σ_j^− σ_k^+ − σ_j^+ σ_k^− (real antisymmetric).
LinearOperator effective_hop(int j, int k, const SpinBosonSpace& space);

// Dimension of the real Lie algebra generated by the anti-Hermitian
// generators restricted to the charge-m sector (extended magnetization when
// the space has a boson, magnetization otherwise). Throws if a generator
// leaks out of the sector or closure does not converge.
int lie_closure_dimension(const std::vector<LinearOperator>& generators, double m,
                          const SpinBosonSpace& space, double rank_tol = 1e-8,
                          int max_rounds = 12);

// -------------------------- Thermal-error decomposition ----------------------

struct ThermalErrorDecomposition {
    std::vector<double> epsilon_q; // ε with the bus prepared in pure |q⟩, q = 0, 1
    std::vector<double> p_q;       // thermal weights (1−r)r^q of those levels
    double epsilon_thermal = 0.0;  // ε with the thermal bus at n0
    double residual = 0.0;         // |ε_thermal − Σ_q ε_q p_q|
    double fitted_constant = 0.0;  // residual / n0² (0 at n0 = 0)
};

// Runs the circuit from the Néel input with the bus in |0⟩, in |1⟩, and in
// the thermal state, decomposing ε = ε0·p0 + ε1·p1 + O(n0²).
ThermalErrorDecomposition thermal_error_decomposition(const ParametrizedCircuit& circuit,
                                                      const std::vector<double>& theta,
                                                      const GroundTruth& gt, double n0);

// --------------------------- Disentanglement witness -------------------------

// −Tr[ρ ln ρ] (natural log).
double von_neumann_entropy(const DensityMatrix& rho);

// I(Q:B) = S(ρ_Q) + S(ρ_B) − S(ρ_QB) ≥ −1e−10; ≈ 0 certifies the bus is
// disentangled. Returns NaN when the composite dimension exceeds 4096.
double boson_qubit_mutual_information(const DensityMatrix& composite);

// ------------------------------- Metrics bundle ------------------------------

struct MetricsBundle {
    double energy = 0.0;
    double epsilon = 0.0; // NaN when the gap is degenerate
    double fidelity = 0.0;
    double purity = 0.0;
    double f_err = 0.0;
    double fidelity_lower_bound = 0.0; // NaN when the gap is degenerate
    double purity_lower_bound = 0.0;   // NaN when the gap is degenerate
    double boson_qubit_mutual_information = 0.0; // NaN when unavailable
    bool degenerate_gap = false;
};

// Every metric of an evolved ensemble against the exact ground truth.
MetricsBundle compute_metrics(const TrajectoryEnsemble& ensemble, const GroundTruth& gt);

nlohmann::json metrics_to_json(const MetricsBundle& metrics);

} // namespace qdb
