// engine.hpp — State evolution and expectation evaluation. Two equivalent
// paths: a full-space one that evolves a weighted ensemble of pure composite
// vectors (exact for thermal bus input, cheap because every gate is local),
// and a streaming one that holds only the bus plus the ≤ l currently active
// qubits, tagging retired sites whose correlators are still pending.

#pragma once

#include "qdb/circuits.hpp"

#include <map>
#include <utility>
#include <vector>

namespace qdb {

// -------------------------------- Observables --------------------------------

// Product of one or two single-site Pauli factors, e.g. {(i,'x'),(j,'x')}.
struct Observable {
    std::vector<std::pair<int, char>> factors;
};

// ⟨σ_j^x⟩ for j = 1..N followed by ⟨σ_i^xσ_j^x⟩ for i<j (row-major pairs).
std::vector<Observable> correlation_observables(int N);

// Bond terms and boundary fields of the dimerized-chain energy, as
// observables: (xx, yy) per bond, then (z at 1, z at N).
std::vector<Observable> ssh_observables(int N);

// ⟨H⟩ from the values returned for ssh_observables(N).
double ssh_energy_from_observables(const std::vector<double>& values, int N, double t,
                                   double B_tilde);

// C_ij = ⟨σ_i^xσ_j^x⟩ − ⟨σ_i^x⟩⟨σ_j^x⟩ from values aligned with
// correlation_observables(N); symmetric, zero diagonal.
Eigen::MatrixXd correlation_matrix(const std::vector<double>& values, int N);

// ------------------------- Single-generator evolution ------------------------

// Cached Hermitian eigendecomposition of one full-space generator; the
// exponential is re-evaluated per θ by phase-scaling the eigenvalues.
class GeneratorAction {
public:
    explicit GeneratorAction(const LinearOperator& H);

    PureState apply(const PureState& state, double theta) const;
    DensityMatrix apply(const DensityMatrix& state, double theta) const;
    Eigen::MatrixXcd unitary(double theta) const;

private:
    SpinBosonSpace space_;
    Eigen::MatrixXcd vectors_;
    Eigen::VectorXd values_;
};

// ρ → e^{−iθH} ρ e^{+iθH} (vector map for pure states). One-shot convenience
// around GeneratorAction.
PureState apply_generator(const PureState& state, const LinearOperator& H, double theta);
DensityMatrix apply_generator(const DensityMatrix& state, const LinearOperator& H,
                              double theta);

// Re Tr[ρ·op] / Re ⟨ψ|op|ψ⟩; asserts the imaginary residue is < 1e−10.
double expectation(const PureState& state, const LinearOperator& op);
double expectation(const DensityMatrix& state, const LinearOperator& op);

// ------------------------------ Compiled circuit -----------------------------

// Per-gate cached eigensystems on the gate's minimal support, shared by every
// evaluation of the circuit. Read-only after construction (safe to share
// across concurrent evaluations).
class CompiledCircuit {
public:
    explicit CompiledCircuit(ParametrizedCircuit circuit);

    const ParametrizedCircuit& circuit() const { return circuit_; }
    int n_gates() const { return static_cast<int>(circuit_.gates.size()); }
    bool is_reset(int g) const;
    bool touches_bus() const { return touches_bus_; }

    // Sites of gate g in the order matching its local matrix (kBosonSite for
    // the bus factor), and the corresponding factor indices.
    const std::vector<int>& gate_sites(int g) const;
    const std::vector<int>& gate_targets(int g) const;

    // Local unitary of gate g at its effective angle sign·θ[slot] (m×m).
    Eigen::MatrixXcd local_unitary(int g, const std::vector<double>& theta) const;

    // Apply gate g to a composite pure vector in the canonical layout.
    void apply_to_vector(int g, const std::vector<double>& theta, Cx* psi) const;

private:
    struct CompiledGate {
        bool reset = false;
        std::vector<int> sites;    // local-matrix order
        std::vector<int> targets;  // factor indices in the composite space
        int m = 0;                 // local dimension
        Eigen::MatrixXcd vectors;
        Eigen::VectorXd values;
        int slot = kNoSlot;
        int sign = +1;
    };

    ParametrizedCircuit circuit_;
    std::vector<int> dims_;
    std::vector<CompiledGate> gates_;
    bool touches_bus_ = false;
};

// ------------------------------ Ensemble path --------------------------------

struct Trajectory {
    double weight = 0.0;
    Eigen::VectorXcd state; // normalized composite vector, canonical layout
};

// Weighted pure decomposition of the composite state: ρ = Σ w_k |ψ_k⟩⟨ψ_k|.
struct TrajectoryEnsemble {
    SpinBosonSpace space;
    std::vector<Trajectory> trajectories;
};

struct EngineOptions {
    bool debug_checks = false;    // per-gate norm/positivity verification
    double weight_floor = 1e-12;  // drop trajectories below this weight
};

// Initial ensemble |ψ_in⟩ ⊗ (eigenvectors of ρ_bus). ψ_in lives on the qubit
// part of `space`; rho_bus on the boson-only space (ignored when `space` has
// no boson).
TrajectoryEnsemble initial_ensemble(const SpinBosonSpace& space, const PureState& psi_in,
                                    const DensityMatrix& rho_bus,
                                    const EngineOptions& options = {});

// Evolve through all gates. Bus hand-offs trace the bus (eigendecomposing the
// reduced qubit state into fresh trajectories) and adjoin rho_bus anew.
TrajectoryEnsemble evolve_ensemble(const CompiledCircuit& compiled,
                                   const std::vector<double>& theta, const PureState& psi_in,
                                   const DensityMatrix& rho_bus,
                                   const EngineOptions& options = {});

// Σ_k w_k ⟨ψ_k|·|ψ_k⟩ of a qubit-local operator / observable product.
double ensemble_expectation(const TrajectoryEnsemble& ensemble, const LocalGenerator& op);
double ensemble_observable(const TrajectoryEnsemble& ensemble, const Observable& observable);
std::vector<double> ensemble_observables(const TrajectoryEnsemble& ensemble,
                                         const std::vector<Observable>& observables);

// ⟨H⟩ for a term list (see ssh_terms) without materializing any matrix.
double ensemble_energy(const TrajectoryEnsemble& ensemble,
                       const std::vector<LocalGenerator>& terms);

// Qubit-register reduction ρ_out = Σ_k w_k Tr_bus |ψ_k⟩⟨ψ_k| (2^N × 2^N).
DensityMatrix reduce_to_qubits(const TrajectoryEnsemble& ensemble);

// Composite density matrix Σ_k w_k |ψ_k⟩⟨ψ_k| (small spaces only).
DensityMatrix composite_density(const TrajectoryEnsemble& ensemble);

// F = ⟨ψ_targ|ρ_out|ψ_targ⟩ and Tr[ρ_out²], computed from the ensemble
// without forming ρ_out.
double ensemble_fidelity(const TrajectoryEnsemble& ensemble, const PureState& psi_targ);
double ensemble_purity(const TrajectoryEnsemble& ensemble);

// ρ_out(θ) = Tr_bus[U(θ)(|ψ_in⟩⟨ψ_in| ⊗ ρ_bus)U†(θ)] on the qubit register.
DensityMatrix run_full(const ParametrizedCircuit& circuit, const std::vector<double>& theta,
                       const PureState& psi_in, const DensityMatrix& rho_bus,
                       const EngineOptions& options = {});

// Dense-conjugation reference for the same evolution, starting from an
// arbitrary composite density matrix (validation path; returns the composite
// state before any bus reduction).
DensityMatrix run_full_dense(const ParametrizedCircuit& circuit,
                             const std::vector<double>& theta, const DensityMatrix& rho_in,
                             const DensityMatrix& rho_bus);

// Pure-state evolution with ideal bus hand-offs: the bus starts in |level⟩
// and every reset postselects it on the |level⟩ outcome (renormalizing)
// before re-tensoring |level⟩. psi_in is the bare qubit register state.
// `probability` (when non-null) receives the product of outcome weights.
// This is the protocol whose outputs obey the per-cut bond bounds.
PureState postselected_output(const CompiledCircuit& compiled,
                              const std::vector<double>& theta, const PureState& psi_in,
                              int level = 0, double* probability = nullptr);

// ------------------------------ Streaming path -------------------------------

// Evaluate the requested expectations holding only the bus plus the active
// window (≤ l qubits): gates run left to right, sites join the window in the
// input product state when first touched and are measured/tagged and traced
// out right after their last gate. psi_in must be a computational-basis
// product state. Returns values aligned with `observables`; agrees with the
// full path to 1e−10.
std::vector<double> run_streaming(const ParametrizedCircuit& circuit,
                                  const std::vector<double>& theta, const PureState& psi_in,
                                  const DensityMatrix& rho_bus,
                                  const std::vector<Observable>& observables,
                                  const EngineOptions& options = {});

} // namespace qdb
