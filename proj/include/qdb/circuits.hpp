// circuits.hpp — Parametrized ansatz construction: sideband-chain (bus-mediated),
// MS+rotation chain, and full-chain alternating ansatz, plus the multi-trap
// variant with variational interfaces. Ordering, parameter sharing and the
// deterministic slot-insertion schedule live here.

#pragma once

#include "qdb/hamiltonians.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace qdb {

// ---------------------------------- Types ------------------------------------

enum class AnsatzFamily { QdbMps, CsdMps, Csa, Modular };

std::string to_string(AnsatzFamily family);
AnsatzFamily ansatz_family_from_string(const std::string& name);

enum class BoxKind { LeftEdge, BulkOdd, BulkEven, RightEdge, Interface };

std::string to_string(BoxKind kind);

// Options for the full-chain alternating ansatz. With charge-parity (cp) on,
// rotation angles obey θ_j = −θ_{N+1−j}; with bulk translation invariance
// (bulk_ti) on, interior rotations repeat with period 2 (the cp pairing then
// forces θ_even = −θ_odd, one interior slot). edge_width is the number of
// sites per edge that keep their own slot under bulk_ti.
struct CsaOptions {
    bool cp = true;
    bool bulk_ti = true;
    int edge_width = 1;

    friend bool operator==(const CsaOptions&, const CsaOptions&) = default;
};

// Multi-trap layout: each trap owns ions_per_trap qubits; after a trap's boxes
// finish, carried_qubits = l−1 qubits move to the next trap through a
// variational interface of interface_ops sideband operations.
struct ModularLayout {
    int n_traps = 1;
    int ions_per_trap = 0;
    int carried_qubits = 1;
    int interface_ops = 2;

    friend bool operator==(const ModularLayout&, const ModularLayout&) = default;
};

// One circuit element: exp(−i·sign·θ[slot]·H(generator)). slot = kNoSlot marks
// the parameter-free bus hand-off (BusReset).
struct CircuitGate {
    GeneratorSpec generator;
    int param_slot = 0;
    int sign = +1;

    friend bool operator==(const CircuitGate&, const CircuitGate&) = default;
};

inline constexpr int kNoSlot = -1;

// Contiguous gate range [first_gate, end_gate) forming one box.
struct CircuitBox {
    BoxKind kind = BoxKind::BulkOdd;
    int first_gate = 0;
    int end_gate = 0;

    friend bool operator==(const CircuitBox&, const CircuitBox&) = default;
};

// How a circuit was built; kept so a circuit can be re-derived with more slots.
struct AnsatzTag {
    AnsatzFamily family = AnsatzFamily::QdbMps;
    int n_qubits = 0;
    int box_size = 2;           // l
    CsaOptions csa;             // Csa only
    ModularLayout layout;       // Modular only

    friend bool operator==(const AnsatzTag&, const AnsatzTag&) = default;
};

struct ParametrizedCircuit {
    SpinBosonSpace space;
    AnsatzTag tag;
    std::vector<CircuitGate> gates;
    int n_params = 0;
    std::vector<CircuitBox> box_layout;
    // retirement_schedule[j−1] = index of the last gate touching qubit j
    // (−1 if untouched); the qubit may be measured out after that gate.
    std::vector<int> retirement_schedule;
};

// --------------------------------- Builders ----------------------------------

// Sideband-chain ansatz. Left edge: 2 sideband ops on qubits 1, 2. Bulk boxes
// at p = 2..N−l span qubits p..p+l−1 with 2l+1 base ops cycling over sites
// [p+l−1, …, p] (newest first); boxes alternate two kinds that each share one
// slot vector. Right edge: 2 ops on qubits N, N−1. Extra slots beyond the
// minimum are appended one at a time, alternating between the kinds, each
// adding one op to every box of that kind.
ParametrizedCircuit build_qdb_mps_ansatz(int N, int l, int Np, const SpinBosonSpace& space);

// MS+rotation chain. Boxes sit at the same positions; every box is a stack of
// layers [MS(span), σ^z(newest), …, σ^z(oldest)]. Edge boxes span 2 qubits
// (3 ops); bulk boxes span l (l+1 ops per layer, 1 base layer). Insertions add
// a whole layer to every box of the alternating kind, so Np − Np_min must be a
// multiple of l+1.
ParametrizedCircuit build_csd_mps_ansatz(int N, int l, int Np, const SpinBosonSpace& space);

// Full-chain alternating ansatz: n_layers × [XY entangler (1 slot), rotation
// layer]. Works on at most 12 qubits (full-state cost), boson optional and
// untouched. Np = n_layers · (1 + rotation slots per layer).
ParametrizedCircuit build_csa_ansatz(int N, int n_layers, const SpinBosonSpace& space,
                                     const CsaOptions& options = {});

// Multi-trap sideband chain: the single-trap circuit's boxes are run trap by
// trap; after each trap, interface_ops sideband ops U_I on the carried qubits
// (fresh slots, one vector shared by all interfaces), a bus hand-off
// (trace the bus, adjoin a fresh thermal one), then U_I† (same slots,
// reversed order, sign −1) on the next trap's bus. n_params = Np +
// interface_ops when n_traps > 1; layout.n_traps = 1 reduces exactly to
// build_qdb_mps_ansatz.
ParametrizedCircuit build_modular_ansatz(const ModularLayout& layout, int l, int Np,
                                         const SpinBosonSpace& space);

// Name-driven dispatch (CLI): for Csa, Np must divide into whole layers.
ParametrizedCircuit build_ansatz(AnsatzFamily family, int N, int l, int Np,
                                 const SpinBosonSpace& space, const CsaOptions& csa = {},
                                 const ModularLayout& layout = {});

// Rebuild with more slots. The schedule is deterministic and append-only, so
// evaluating the extended circuit with the old θ zero-padded reproduces the
// old circuit's output exactly. Shrinking and extending a multi-trap circuit
// (its interface slots sit at the end and would move) are rejected.
ParametrizedCircuit extend_parameters(const ParametrizedCircuit& circuit, int new_Np);

// ----------------------------- Introspection ---------------------------------

// Smallest Np the family admits at this geometry (Csa: one layer).
int min_parameters(AnsatzFamily family, int N, int l, const CsaOptions& options = {});

// Slots consumed by one Csa layer (XY slot + rotation slots).
int csa_layer_width(int N, const CsaOptions& options);

// Qubits a gate acts on, ascending (empty for the bus hand-off).
std::vector<int> gate_qubits(const GeneratorSpec& spec, int n_qubits);

// Structural checks: slot bounds and coverage, box partition of the gate list,
// identical slot vectors across same-kind bulk boxes with disjoint slots
// across kinds (chain families), the box-boundary rule (consecutive boxes
// never hand over on the same qubit), retirement consistency, and interface
// shape [m ops, hand-off, m mirrored ops]. Throws invariant_error.
void validate_circuit(const ParametrizedCircuit& circuit);

// Π_k exp(−i·sign_k·θ[slot_k]·H_k) as a dense matrix (tests, small spaces);
// rejects circuits containing a bus hand-off.
Eigen::MatrixXcd dense_unitary(const ParametrizedCircuit& circuit,
                               const std::vector<double>& theta);

// ---------------------------- Serialization ----------------------------------

nlohmann::json circuit_to_json(const ParametrizedCircuit& circuit);
ParametrizedCircuit circuit_from_json(const nlohmann::json& j);

} // namespace qdb
